#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "poisonlab/csv.hpp"

namespace poisonlab {
namespace svg {

inline std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> colors = {"#1f77b4", "#d62728", "#2ca02c",
                                                    "#ff7f0e", "#9467bd", "#8c564b"};
    return colors;
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;

    void widen(double v) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    static Range of(std::initializer_list<const std::vector<double>*> columns) {
        Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (const auto* col : columns) {
            for (double v : *col) r.widen(v);
        }
        if (!(r.lo < r.hi)) {
            r.lo -= 1.0;
            r.hi += 1.0;
        }
        return r;
    }
    double span() const { return hi - lo; }
};

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;      // mean line
    std::vector<double> y_min;  // optional envelope
    std::vector<double> y_max;
};

// Single-panel line chart with optional min-max bands, fixed 720x480 canvas.
inline std::string render_line_chart(const std::string& title, const std::string& x_label,
                                     const std::string& y_label,
                                     const std::vector<Series>& series) {
    const double width = 720, height = 480;
    const double left = 72, right = 24, top = 48, bottom = 56;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    Range xr{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    Range yr = xr;
    for (const Series& s : series) {
        for (double v : s.x) xr.widen(v);
        for (double v : s.y) yr.widen(v);
        for (double v : s.y_min) yr.widen(v);
        for (double v : s.y_max) yr.widen(v);
    }
    if (!(xr.lo < xr.hi)) { xr.lo -= 1; xr.hi += 1; }
    if (!(yr.lo < yr.hi)) { yr.lo -= 1; yr.hi += 1; }
    double pad = 0.05 * yr.span();
    yr.lo -= pad;
    yr.hi += pad;

    auto sx = [&](double v) { return left + (v - xr.lo) / xr.span() * plot_w; };
    auto sy = [&](double v) { return top + plot_h - (v - yr.lo) / yr.span() * plot_h; };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
           num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + num(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" + title + "</text>\n";

    // axes + ticks
    out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot_w) +
           "\" height=\"" + num(plot_h) + "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        double fx = xr.lo + xr.span() * i / 5.0;
        double fy = yr.lo + yr.span() * i / 5.0;
        out += "<line x1=\"" + num(sx(fx)) + "\" y1=\"" + num(top + plot_h) + "\" x2=\"" + num(sx(fx)) +
               "\" y2=\"" + num(top + plot_h + 5) + "\" stroke=\"#333\"/>\n";
        out += "<text x=\"" + num(sx(fx)) + "\" y=\"" + num(top + plot_h + 20) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + num(fx) + "</text>\n";
        out += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(sy(fy)) + "\" x2=\"" + num(left) +
               "\" y2=\"" + num(sy(fy)) + "\" stroke=\"#333\"/>\n";
        out += "<text x=\"" + num(left - 8) + "\" y=\"" + num(sy(fy) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(fy) + "</text>\n";
    }
    out += "<text x=\"" + num(left + plot_w / 2) + "\" y=\"" + num(height - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + x_label + "</text>\n";
    out += "<text x=\"18\" y=\"" + num(top + plot_h / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 " +
           num(top + plot_h / 2) + ")\">" + y_label + "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const Series& s = series[i];
        const std::string& color = palette()[i % palette().size()];
        if (!s.y_min.empty() && s.y_min.size() == s.x.size() && s.y_max.size() == s.x.size()) {
            std::string path = "M";
            for (std::size_t j = 0; j < s.x.size(); ++j)
                path += " " + num(sx(s.x[j])) + " " + num(sy(s.y_max[j]));
            for (std::size_t j = s.x.size(); j-- > 0;)
                path += " L " + num(sx(s.x[j])) + " " + num(sy(s.y_min[j]));
            path += " Z";
            out += "<path d=\"" + path + "\" fill=\"" + color + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        }
        std::string pts;
        for (std::size_t j = 0; j < s.x.size(); ++j) {
            pts += num(sx(s.x[j])) + "," + num(sy(s.y[j])) + " ";
        }
        out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
        // legend entry
        double ly = top + 16 + 18 * static_cast<double>(i);
        out += "<line x1=\"" + num(left + plot_w - 150) + "\" y1=\"" + num(ly) + "\" x2=\"" +
               num(left + plot_w - 126) + "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + num(left + plot_w - 120) + "\" y=\"" + num(ly + 4) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + s.label + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

// Table heat grid: one colored cell per (row, col) with the numeric value.
inline std::string render_heat_grid(const std::string& title,
                                    const std::vector<std::string>& row_labels,
                                    const std::vector<std::string>& col_labels,
                                    const std::vector<std::vector<double>>& values) {
    const double cell_w = 86, cell_h = 24, left = 72, top = 64;
    const double width = left + cell_w * static_cast<double>(col_labels.size()) + 24;
    const double height = top + cell_h * static_cast<double>(row_labels.size()) + 24;

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : values) {
        for (double v : row) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(lo < hi)) hi = lo + 1.0;

    auto color_of = [&](double v) {
        double t = (v - lo) / (hi - lo);
        // blue (low) -> white -> red (high)
        int r = static_cast<int>(std::lround(255 * std::min(1.0, 2.0 * t)));
        int b = static_cast<int>(std::lround(255 * std::min(1.0, 2.0 * (1.0 - t))));
        int g = static_cast<int>(std::lround(255 * (1.0 - 2.0 * std::abs(t - 0.5))));
        char buf[16];
        std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
        return std::string(buf);
    };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
           num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + num(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" + title + "</text>\n";
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
        out += "<text x=\"" + num(left + cell_w * (static_cast<double>(c) + 0.5)) + "\" y=\"" + num(top - 8) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + col_labels[c] + "</text>\n";
    }
    for (std::size_t r = 0; r < row_labels.size(); ++r) {
        out += "<text x=\"" + num(left - 8) + "\" y=\"" + num(top + cell_h * (static_cast<double>(r) + 0.65)) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" + row_labels[r] + "</text>\n";
        for (std::size_t c = 0; c < col_labels.size(); ++c) {
            double v = values[r][c];
            out += "<rect x=\"" + num(left + cell_w * static_cast<double>(c)) + "\" y=\"" +
                   num(top + cell_h * static_cast<double>(r)) + "\" width=\"" + num(cell_w) +
                   "\" height=\"" + num(cell_h) + "\" fill=\"" + color_of(v) +
                   "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
            out += "<text x=\"" + num(left + cell_w * (static_cast<double>(c) + 0.5)) + "\" y=\"" +
                   num(top + cell_h * (static_cast<double>(r) + 0.65)) +
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + num(v) + "</text>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

}  // namespace svg

// ---------------------------------------------------------------------------
// CSV -> charts. Pure functions of their input files: identical CSVs yield
// byte-identical SVG output.
// ---------------------------------------------------------------------------

namespace plot_detail {

struct FieldName {
    std::string family;
    std::string state;
    std::string action;  // empty for per-state and scalar fields
};

inline std::optional<FieldName> parse_field(const std::string& field) {
    for (const char* family : {"rbar", "qbar", "delta", "agentq"}) {
        std::string prefix = std::string(family) + "_";
        if (field.rfind(prefix, 0) == 0) {
            std::string rest = field.substr(prefix.size());
            std::size_t cut = rest.find_last_of('_');
            if (cut == std::string::npos) return std::nullopt;
            return FieldName{family, rest.substr(0, cut), rest.substr(cut + 1)};
        }
    }
    if (field.rfind("gap_", 0) == 0) return FieldName{"gap", field.substr(4), ""};
    return std::nullopt;
}

}  // namespace plot_detail

// Trajectory charts from an aggregate CSV (iteration, field, mean, min, max):
// one chart per (family, state) with a line+band per action, one chart for the
// value gaps, and one per scalar field. Returns the written file names.
inline std::vector<std::string> plot_trajectories(const std::string& aggregate_csv,
                                                  const std::string& out_dir) {
    CsvTable table = read_csv(aggregate_csv);
    int c_iter = table.column("iteration");
    int c_field = table.column("field");
    int c_mean = table.column("mean");
    int c_min = table.column("min");
    int c_max = table.column("max");

    struct Track {
        std::vector<double> x, mean, lo, hi;
    };
    std::map<std::string, Track> tracks;  // keyed by raw field name
    std::vector<std::string> field_order;
    for (const auto& row : table.rows) {
        const std::string& field = row[c_field];
        auto [it, inserted] = tracks.try_emplace(field);
        if (inserted) field_order.push_back(field);
        it->second.x.push_back(std::stod(row[c_iter]));
        it->second.mean.push_back(std::stod(row[c_mean]));
        it->second.lo.push_back(std::stod(row[c_min]));
        it->second.hi.push_back(std::stod(row[c_max]));
    }

    // Group state-action fields per (family, state).
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> charts;
    std::vector<std::string> chart_order;
    std::vector<std::string> gap_fields;
    std::vector<std::string> scalar_fields;
    for (const std::string& field : field_order) {
        auto parsed = plot_detail::parse_field(field);
        if (!parsed) {
            scalar_fields.push_back(field);
        } else if (parsed->family == "gap") {
            gap_fields.push_back(field);
        } else {
            std::string key = parsed->family + "_" + parsed->state;
            auto [it, inserted] = charts.try_emplace(key);
            if (inserted) chart_order.push_back(key);
            it->second.emplace_back(parsed->action, field);
        }
    }

    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& title, const std::string& ylabel,
                    const std::vector<std::pair<std::string, std::string>>& members) {
        std::vector<svg::Series> series;
        for (const auto& [label, field] : members) {
            const auto& track = tracks.at(field);
            series.push_back(svg::Series{label, track.x, track.mean, track.lo, track.hi});
        }
        std::string path = out_dir + "/" + name + ".svg";
        std::ofstream out = open_output(path);
        out << svg::render_line_chart(title, "iteration", ylabel, series);
        written.push_back(path);
    };

    for (const std::string& key : chart_order) {
        emit("traj_" + key, key + " (mean, min-max over trials)", key.substr(0, key.find('_')),
             charts.at(key));
    }
    if (!gap_fields.empty()) {
        std::vector<std::pair<std::string, std::string>> members;
        for (const std::string& f : gap_fields) members.emplace_back(f.substr(4), f);
        emit("traj_value_gap", "q_bar value gap at monitored states", "gap", members);
    }
    for (const std::string& f : scalar_fields) {
        emit("traj_" + f, f, f, {{f, f}});
    }
    return written;
}

// Heat grids of the final attacker tables (s,a,r_bar,q_bar,delta CSV).
inline std::vector<std::string> plot_attacker_heat(const std::string& attacker_csv,
                                                   const std::string& out_dir) {
    CsvTable table = read_csv(attacker_csv);
    int c_s = table.column("s");
    int c_a = table.column("a");
    int c_r = table.column("r_bar");
    int c_q = table.column("q_bar");

    int n_states = 0, n_actions = 0;
    for (const auto& row : table.rows) {
        n_states = std::max(n_states, std::stoi(row[c_s]) + 1);
        n_actions = std::max(n_actions, std::stoi(row[c_a]) + 1);
    }
    std::vector<std::vector<double>> q(n_states, std::vector<double>(n_actions, 0.0));
    std::vector<std::vector<double>> r = q;
    for (const auto& row : table.rows) {
        int s = std::stoi(row[c_s]);
        int a = std::stoi(row[c_a]);
        q[s][a] = std::stod(row[c_q]);
        r[s][a] = std::stod(row[c_r]);
    }
    std::vector<std::string> row_labels, col_labels;
    for (int s = 0; s < n_states; ++s) row_labels.push_back("s" + std::to_string(s));
    for (int a = 0; a < n_actions; ++a) col_labels.push_back("a" + std::to_string(a));

    std::vector<std::string> written;
    {
        std::string path = out_dir + "/heat_qbar.svg";
        std::ofstream out = open_output(path);
        out << svg::render_heat_grid("final q_bar", row_labels, col_labels, q);
        written.push_back(path);
    }
    {
        std::string path = out_dir + "/heat_rbar.svg";
        std::ofstream out = open_output(path);
        out << svg::render_heat_grid("final r_bar", row_labels, col_labels, r);
        written.push_back(path);
    }
    return written;
}

// rho_delta trade-off curves from an ablation CSV.
inline std::vector<std::string> plot_ablation(const std::string& ablation_csv,
                                              const std::string& out_dir) {
    CsvTable table = read_csv(ablation_csv);
    int c_rho = table.column("rho_delta");
    svg::Series delta_series{"delta", {}, {}, {}, {}};
    svg::Series rdev_series{"|r_bar - r|", {}, {}, {}, {}};
    int c_dm = table.column("final_delta_mean");
    int c_dlo = table.column("final_delta_min");
    int c_dhi = table.column("final_delta_max");
    int c_rm = table.column("final_rdev_mean");
    int c_rlo = table.column("final_rdev_min");
    int c_rhi = table.column("final_rdev_max");
    for (const auto& row : table.rows) {
        double rho = std::stod(row[c_rho]);
        delta_series.x.push_back(rho);
        delta_series.y.push_back(std::stod(row[c_dm]));
        delta_series.y_min.push_back(std::stod(row[c_dlo]));
        delta_series.y_max.push_back(std::stod(row[c_dhi]));
        rdev_series.x.push_back(rho);
        rdev_series.y.push_back(std::stod(row[c_rm]));
        rdev_series.y_min.push_back(std::stod(row[c_rlo]));
        rdev_series.y_max.push_back(std::stod(row[c_rhi]));
    }
    std::vector<std::string> written;
    {
        std::string path = out_dir + "/ablation_delta.svg";
        std::ofstream out = open_output(path);
        out << svg::render_line_chart("transition poisoning intensity vs rho_delta", "rho_delta",
                                      "final delta", {delta_series});
        written.push_back(path);
    }
    {
        std::string path = out_dir + "/ablation_rdev.svg";
        std::ofstream out = open_output(path);
        out << svg::render_line_chart("reward deviation vs rho_delta", "rho_delta",
                                      "final |r_bar - r|", {rdev_series});
        written.push_back(path);
    }
    return written;
}

}  // namespace poisonlab
