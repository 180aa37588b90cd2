#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisonlab/attacker.hpp"
#include "poisonlab/harness.hpp"
#include "poisonlab/mdp.hpp"
#include "poisonlab/oracle.hpp"

namespace poisonlab {

// Fixed formatting keeps CSV output byte-reproducible.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

inline void write_metrics_csv(const std::string& path, const MetricsSchema& schema,
                              const std::vector<TrialResult>& trials) {
    std::ofstream out = open_output(path);
    out << "iteration,trial";
    for (const std::string& f : schema.fields) out << ',' << f;
    out << '\n';
    for (const TrialResult& trial : trials) {
        for (const MetricsRow& row : trial.metrics) {
            out << row.iteration << ',' << trial.trial_index;
            for (double v : row.values) out << ',' << fmt_double(v);
            out << '\n';
        }
    }
}

inline void write_aggregate_csv(const std::string& path, const MetricsSchema& schema,
                                const std::vector<AggregateRow>& aggregate) {
    std::ofstream out = open_output(path);
    out << "iteration,field,mean,min,max\n";
    for (const AggregateRow& row : aggregate) {
        for (std::size_t c = 0; c < schema.fields.size(); ++c) {
            out << row.iteration << ',' << schema.fields[c] << ',' << fmt_double(row.mean[c]) << ','
                << fmt_double(row.min[c]) << ',' << fmt_double(row.max[c]) << '\n';
        }
    }
}

inline void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream out = open_output(path);
    out << "rho_delta,final_delta_mean,final_delta_min,final_delta_max,"
           "final_rdev_mean,final_rdev_min,final_rdev_max\n";
    for (const AblationRow& row : rows) {
        out << fmt_double(row.rho_delta) << ',' << fmt_double(row.delta_mean) << ','
            << fmt_double(row.delta_min) << ',' << fmt_double(row.delta_max) << ','
            << fmt_double(row.rdev_mean) << ',' << fmt_double(row.rdev_min) << ','
            << fmt_double(row.rdev_max) << '\n';
    }
}

inline void write_reward_csv(const std::string& path, const TabularMdp& mdp) {
    std::ofstream out = open_output(path);
    out << "s,a,r\n";
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            out << s << ',' << a << ',' << fmt_double(mdp.reward(s, a)) << '\n';
        }
    }
}

inline void write_transition_csv(const std::string& path, const TabularMdp& mdp) {
    std::ofstream out = open_output(path);
    out << "s,a,s_next,p\n";
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            for (int t = 0; t < mdp.n_states(); ++t) {
                out << s << ',' << a << ',' << t << ',' << fmt_double(mdp.transition(s, a, t))
                    << '\n';
            }
        }
    }
}

inline void write_qtable_csv(const std::string& path, const QTable& q) {
    std::ofstream out = open_output(path);
    out << "s,a,q\n";
    for (int s = 0; s < q.n_states(); ++s) {
        for (int a = 0; a < q.n_actions(); ++a) {
            out << s << ',' << a << ',' << fmt_double(q(s, a)) << '\n';
        }
    }
}

inline void write_attacker_csv(const std::string& path, const AttackerState& state) {
    std::ofstream out = open_output(path);
    out << "s,a,r_bar,q_bar,delta\n";
    for (int s = 0; s < state.r_bar.n_states(); ++s) {
        for (int a = 0; a < state.r_bar.n_actions(); ++a) {
            out << s << ',' << a << ',' << fmt_double(state.r_bar(s, a)) << ','
                << fmt_double(state.q_bar(s, a)) << ',' << fmt_double(state.delta(s, a)) << '\n';
        }
    }
}

inline void write_residuals_csv(const std::string& path, const ConstraintResiduals& res) {
    std::ofstream out = open_output(path);
    out << "s,a,bellman_residual,gap_margin\n";
    for (int s = 0; s < res.bellman_residual.n_states(); ++s) {
        for (int a = 0; a < res.bellman_residual.n_actions(); ++a) {
            out << s << ',' << a << ',' << fmt_double(res.bellman_residual(s, a)) << ',';
            double margin = res.gap_margin(s, a);
            if (!std::isnan(margin)) out << fmt_double(margin);  // empty at target actions
            out << '\n';
        }
    }
}

// Minimal CSV reader for the plotting pipeline. No quoting: none of the
// writers above emit quoted fields.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        throw std::runtime_error("missing CSV column: " + name);
    }

    bool has_column(const std::string& name) const {
        for (const std::string& h : header) {
            if (h == name) return true;
        }
        return false;
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open CSV: " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.push_back("");
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    if (table.header.empty()) throw std::runtime_error("empty CSV: " + path);
    return table;
}

}  // namespace poisonlab
