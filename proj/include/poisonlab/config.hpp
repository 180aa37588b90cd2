#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "poisonlab/harness.hpp"
#include "poisonlab/maze.hpp"

namespace poisonlab {

class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string& message, int line = 0)
        : std::runtime_error(line > 0 ? "config line " + std::to_string(line) + ": " + message
                                      : "config: " + message) {}
};

namespace cfg {

struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

struct Section {
    std::map<std::string, Entry> entries;
    int line = 0;
};

struct RawConfig {
    std::map<std::string, Section> sections;
    std::string directory;  // for resolving relative paths like map_file

    const Entry* find(const std::string& section, const std::string& key) const {
        auto sit = sections.find(section);
        if (sit == sections.end()) return nullptr;
        auto eit = sit->second.entries.find(key);
        if (eit == sit->second.entries.end()) return nullptr;
        eit->second.used = true;
        return &eit->second;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        const Entry* e = find(section, key);
        return e ? e->value : fallback;
    }

    std::string require_string(const std::string& section, const std::string& key) const {
        const Entry* e = find(section, key);
        if (!e) throw ConfigError("missing required key '" + key + "' in section [" + section + "]");
        return e->value;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        const Entry* e = find(section, key);
        if (!e) return fallback;
        try {
            std::size_t pos = 0;
            double v = std::stod(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError("key '" + key + "' expects a number, got '" + e->value + "'", e->line);
        }
    }

    long long get_int(const std::string& section, const std::string& key, long long fallback) const {
        const Entry* e = find(section, key);
        if (!e) return fallback;
        try {
            std::size_t pos = 0;
            long long v = std::stoll(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError("key '" + key + "' expects an integer, got '" + e->value + "'", e->line);
        }
    }

    void check_all_used() const {
        for (const auto& [name, section] : sections) {
            for (const auto& [key, entry] : section.entries) {
                if (!entry.used)
                    throw ConfigError("unknown key '" + key + "' in section [" + name + "]", entry.line);
            }
        }
    }
};

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::vector<double> parse_numbers(const std::string& value, std::size_t expected,
                                         const std::string& key, int line) {
    std::vector<std::string> tokens = split_ws(value);
    if (tokens.size() != expected)
        throw ConfigError("key '" + key + "' expects " + std::to_string(expected) + " numbers", line);
    std::vector<double> out;
    for (const std::string& t : tokens) {
        try {
            out.push_back(std::stod(t));
        } catch (...) {
            throw ConfigError("key '" + key + "' has a non-numeric token '" + t + "'", line);
        }
    }
    return out;
}

inline RawConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    RawConfig raw;
    std::size_t slash = path.find_last_of('/');
    raw.directory = slash == std::string::npos ? "." : path.substr(0, slash);

    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("malformed section header", lineno);
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError("empty section name", lineno);
            raw.sections[section].line = lineno;
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", lineno);
        if (section.empty()) throw ConfigError("key outside any [section]", lineno);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", lineno);
        auto [it, inserted] = raw.sections[section].entries.emplace(key, Entry{value, lineno, false});
        if (!inserted) throw ConfigError("duplicate key '" + key + "'", lineno);
    }
    return raw;
}

// "(r,c)" with 1-based row and column.
inline Cell parse_cell(const std::string& token, int line) {
    std::string t = token;
    if (t.size() < 5 || t.front() != '(' || t.back() != ')')
        throw ConfigError("expected cell token '(row,col)', got '" + token + "'", line);
    t = t.substr(1, t.size() - 2);
    std::size_t comma = t.find(',');
    if (comma == std::string::npos)
        throw ConfigError("expected cell token '(row,col)', got '" + token + "'", line);
    try {
        int r = std::stoi(t.substr(0, comma));
        int c = std::stoi(t.substr(comma + 1));
        return Cell{r - 1, c - 1};
    } catch (...) {
        throw ConfigError("bad cell token '" + token + "'", line);
    }
}

}  // namespace cfg

inline ExperimentConfig load_experiment_config(const std::string& path) {
    cfg::RawConfig raw = cfg::parse_file(path);

    // --- model -------------------------------------------------------------
    const std::string type = raw.get_string("mdp", "type", "maze");
    const double discount = raw.get_double("mdp", "discount", 0.9);
    std::optional<Model> model;
    if (type == "maze") {
        MazeSpec spec;
        if (const cfg::Entry* e = raw.find("mdp", "map_file")) {
            std::string map_path = e->value;
            if (!map_path.empty() && map_path.front() != '/')
                map_path = raw.directory + "/" + map_path;
            std::ifstream map_in(map_path);
            if (!map_in) throw ConfigError("cannot open map_file '" + map_path + "'", e->line);
            std::stringstream buffer;
            buffer << map_in.rdbuf();
            spec = parse_maze_ascii(buffer.str());
        } else {
            const cfg::Entry* rows = raw.find("mdp", "rows");
            const cfg::Entry* cols = raw.find("mdp", "cols");
            if (!rows || !cols)
                throw ConfigError("maze needs either map_file or rows/cols with cell lists");
            spec.rows = static_cast<int>(raw.get_int("mdp", "rows", 0));
            spec.cols = static_cast<int>(raw.get_int("mdp", "cols", 0));
            auto parse_cells = [&](const char* key, std::set<Cell>& out) {
                if (const cfg::Entry* cells = raw.find("mdp", key)) {
                    for (const std::string& tok : cfg::split_ws(cells->value))
                        out.insert(cfg::parse_cell(tok, cells->line));
                }
            };
            parse_cells("walls", spec.walls);
            parse_cells("gray", spec.gray_cells);
            const cfg::Entry* start = raw.find("mdp", "start");
            const cfg::Entry* goal = raw.find("mdp", "goal");
            if (!start || !goal) throw ConfigError("maze needs start and goal cells");
            spec.start = cfg::parse_cell(start->value, start->line);
            spec.goal = cfg::parse_cell(goal->value, goal->line);
        }
        spec.stay_prob = raw.get_double("mdp", "stay_prob", 0.7);
        spec.step_reward = raw.get_double("mdp", "step_reward", -1.0);
        spec.gray_penalty = raw.get_double("mdp", "gray_penalty", -5.0);
        spec.goal_reward = raw.get_double("mdp", "goal_reward", 10.0);
        model.emplace(spec, discount);
    } else if (type == "explicit") {
        const int n = static_cast<int>(raw.get_int("mdp", "n_states", 0));
        const int m = static_cast<int>(raw.get_int("mdp", "n_actions", 0));
        if (n < 1 || m < 1) throw ConfigError("explicit mdp needs n_states and n_actions");
        std::vector<double> transition(static_cast<std::size_t>(n) * m * n, 0.0);
        Table2 reward(n, m, 0.0);
        const cfg::Entry* trans = raw.find("mdp", "transition");
        if (!trans) throw ConfigError("explicit mdp needs 'transition = s a s_next p; ...'");
        std::stringstream ts(trans->value);
        std::string record;
        while (std::getline(ts, record, ';')) {
            record = cfg::trim(record);
            if (record.empty()) continue;
            std::vector<double> vals = cfg::parse_numbers(record, 4, "transition", trans->line);
            int s = static_cast<int>(vals[0]), a = static_cast<int>(vals[1]),
                t = static_cast<int>(vals[2]);
            if (s < 0 || s >= n || a < 0 || a >= m || t < 0 || t >= n)
                throw ConfigError("transition record indices out of range", trans->line);
            transition[(static_cast<std::size_t>(s) * m + a) * n + t] = vals[3];
        }
        if (const cfg::Entry* rew = raw.find("mdp", "reward")) {
            std::stringstream rs(rew->value);
            while (std::getline(rs, record, ';')) {
                record = cfg::trim(record);
                if (record.empty()) continue;
                std::vector<double> vals = cfg::parse_numbers(record, 3, "reward", rew->line);
                int s = static_cast<int>(vals[0]), a = static_cast<int>(vals[1]);
                if (s < 0 || s >= n || a < 0 || a >= m)
                    throw ConfigError("reward record indices out of range", rew->line);
                reward(s, a) = vals[2];
            }
        }
        int start = static_cast<int>(raw.get_int("mdp", "start_state", 0));
        try {
            model.emplace(TabularMdp(n, m, std::move(transition), std::move(reward), discount), start);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("invalid explicit mdp: ") + e.what(), trans->line);
        }
    } else {
        throw ConfigError("mdp type must be 'maze' or 'explicit', got '" + type + "'");
    }

    // --- target policy -----------------------------------------------------
    Policy target;
    {
        const std::string policy = raw.get_string("target", "policy", "optimal_ignoring_gray");
        if (policy == "optimal_ignoring_gray") {
            if (!model->maze_spec)
                throw ConfigError("target policy 'optimal_ignoring_gray' requires a maze mdp");
            target = target_policy_optimal_ignoring_gray(*model->maze_spec, discount);
        } else {
            const cfg::Entry* e = raw.find("target", "policy");
            std::vector<std::string> tokens = cfg::split_ws(policy);
            if (static_cast<int>(tokens.size()) != model->mdp.n_states())
                throw ConfigError("target policy must list one action per state (" +
                                      std::to_string(model->mdp.n_states()) + " states)",
                                  e ? e->line : 0);
            for (const std::string& tok : tokens) {
                if (model->maze_spec && !std::isdigit(static_cast<unsigned char>(tok[0]))) {
                    try {
                        target.push_back(maze_action_from_name(tok));
                    } catch (const std::exception& err) {
                        throw ConfigError(err.what(), e ? e->line : 0);
                    }
                } else {
                    try {
                        target.push_back(std::stoi(tok));
                    } catch (...) {
                        throw ConfigError("bad target action '" + tok + "'", e ? e->line : 0);
                    }
                }
            }
        }
    }

    // --- experiment --------------------------------------------------------
    ExperimentConfig config(std::move(*model), std::move(target));
    config.iterations = raw.get_int("experiment", "iterations", 20000);
    config.repeats = static_cast<int>(raw.get_int("experiment", "repeats", 5));
    config.seed = static_cast<std::uint64_t>(raw.get_int("experiment", "seed", 1));
    config.snapshot_interval = raw.get_int("experiment", "snapshot_interval", 100);
    config.attacker_snapshot_interval = raw.get_int("experiment", "attacker_snapshot_interval", 0);
    const std::string regime = raw.get_string("experiment", "batch_regime", "full_sweep");
    if (regime == "full_sweep") {
        config.batch_regime = BatchRegime::kFullSweep;
    } else if (regime == "on_policy") {
        config.batch_regime = BatchRegime::kOnPolicy;
    } else {
        throw ConfigError("batch_regime must be full_sweep or on_policy, got '" + regime + "'");
    }

    const std::string monitored = raw.get_string("experiment", "monitored", "target_path");
    if (monitored == "target_path") {
        config.monitored_states = target_path_states(config.model, config.target);
    } else {
        const cfg::Entry* e = raw.find("experiment", "monitored");
        for (const std::string& tok : cfg::split_ws(monitored)) {
            if (tok.front() == '(') {
                if (!config.model.layout)
                    throw ConfigError("cell tokens in 'monitored' require a maze mdp", e ? e->line : 0);
                Cell cell = cfg::parse_cell(tok, e ? e->line : 0);
                if (!config.model.maze_spec->in_bounds(cell) || config.model.layout->state_of(cell) < 0)
                    throw ConfigError("monitored cell " + tok + " is not a free cell", e ? e->line : 0);
                config.monitored_states.push_back(config.model.layout->state_of(cell));
            } else {
                try {
                    config.monitored_states.push_back(std::stoi(tok));
                } catch (...) {
                    throw ConfigError("bad monitored state '" + tok + "'", e ? e->line : 0);
                }
            }
        }
    }

    if (const cfg::Entry* e = raw.find("experiment", "ablation_state")) {
        if (e->value.front() == '(') {
            if (!config.model.layout)
                throw ConfigError("cell token in 'ablation_state' requires a maze mdp", e->line);
            config.ablation_state = config.model.layout->state_of(cfg::parse_cell(e->value, e->line));
        } else {
            config.ablation_state = static_cast<int>(raw.get_int("experiment", "ablation_state", -1));
        }
    }
    if (const cfg::Entry* e = raw.find("experiment", "ablation_action")) {
        if (config.model.maze_spec && !std::isdigit(static_cast<unsigned char>(e->value[0]))) {
            config.ablation_action = maze_action_from_name(e->value);
        } else {
            config.ablation_action = static_cast<int>(raw.get_int("experiment", "ablation_action", -1));
        }
    }

    // --- attacker schedules -------------------------------------------------
    config.schedules.eps_gap = raw.get_double("attacker", "eps_gap", 1.0);
    config.schedules.rho_delta = raw.get_double("attacker", "rho_delta", 2.0);
    auto decay = [&](const char* key, DecaySchedule fallback) {
        const cfg::Entry* e = raw.find("attacker", key);
        if (!e) return fallback;
        std::vector<double> v = cfg::parse_numbers(e->value, 3, key, e->line);
        return DecaySchedule{v[0], v[1], v[2]};
    };
    config.schedules.alpha = decay("alpha", config.schedules.alpha);
    config.schedules.beta = decay("beta", config.schedules.beta);
    config.schedules.lambda = decay("lambda", config.schedules.lambda);
    if (const cfg::Entry* e = raw.find("attacker", "rho_phi")) {
        std::vector<double> v = cfg::parse_numbers(e->value, 3, "rho_phi", e->line);
        config.schedules.rho_phi = PenaltySchedule{v[0], v[1], v[2]};
    }

    // --- agent ---------------------------------------------------------------
    if (const cfg::Entry* e = raw.find("agent", "lr")) {
        std::vector<double> v = cfg::parse_numbers(e->value, 2, "lr", e->line);
        config.agent.lr_base = v[0];
        config.agent.lr_tau = v[1];
    }
    config.agent.exploration_epsilon = raw.get_double("agent", "epsilon", 0.1);
    config.agent.initial_q = raw.get_double("agent", "initial_q", 0.0);

    raw.check_all_used();
    try {
        config.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return config;
}

}  // namespace poisonlab
