#pragma once

#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisonlab/mdp.hpp"

namespace poisonlab {

// Grid cell, 0-based. Labels shown to users are 1-based (row, col).
struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell& o) const { return row == o.row && col == o.col; }
    bool operator<(const Cell& o) const { return row != o.row ? row < o.row : col < o.col; }
};

enum MazeAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kMazeActions = 4;

inline const char* maze_action_name(int a) {
    switch (a) {
        case kUp: return "up";
        case kDown: return "down";
        case kLeft: return "left";
        case kRight: return "right";
        default: return "?";
    }
}

inline int maze_action_from_name(const std::string& name) {
    if (name == "up" || name == "u") return kUp;
    if (name == "down" || name == "d") return kDown;
    if (name == "left" || name == "l") return kLeft;
    if (name == "right" || name == "r") return kRight;
    throw std::invalid_argument("unknown maze action '" + name + "'");
}

struct MazeSpec {
    int rows = 0;
    int cols = 0;
    std::set<Cell> walls;
    std::set<Cell> gray_cells;
    Cell start;
    Cell goal;
    double stay_prob = 0.0;
    double step_reward = -1.0;
    double gray_penalty = -5.0;
    double goal_reward = 10.0;

    bool in_bounds(const Cell& c) const {
        return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols;
    }
    bool is_wall(const Cell& c) const { return walls.count(c) > 0; }
    bool is_gray(const Cell& c) const { return gray_cells.count(c) > 0; }

    void validate() const {
        if (rows < 1 || cols < 1) throw std::invalid_argument("maze: empty grid");
        if (!(stay_prob >= 0.0 && stay_prob < 1.0)) throw std::invalid_argument("maze: stay_prob must be in [0,1)");
        auto check_cell = [&](const Cell& c, const char* what) {
            if (!in_bounds(c)) throw std::invalid_argument(std::string("maze: ") + what + " out of bounds");
            if (is_wall(c)) throw std::invalid_argument(std::string("maze: ") + what + " is a wall");
        };
        check_cell(start, "start");
        check_cell(goal, "goal");
        for (const Cell& g : gray_cells) check_cell(g, "gray cell");
        for (const Cell& w : walls) {
            if (!in_bounds(w)) throw std::invalid_argument("maze: wall out of bounds");
        }
    }
};

// Parses an ASCII map: '#'=wall, '.'=free, 'G'=gray, 'S'=start, 'D'=destination.
// One character per cell, rows separated by newlines. Reward/stay parameters
// keep their MazeSpec defaults and can be overridden afterwards.
inline MazeSpec parse_maze_ascii(const std::string& text) {
    MazeSpec spec;
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw std::invalid_argument("maze map: empty");

    spec.rows = static_cast<int>(lines.size());
    spec.cols = static_cast<int>(lines[0].size());
    int starts = 0;
    int goals = 0;
    for (int r = 0; r < spec.rows; ++r) {
        if (static_cast<int>(lines[r].size()) != spec.cols)
            throw std::invalid_argument("maze map: ragged row " + std::to_string(r + 1));
        for (int c = 0; c < spec.cols; ++c) {
            Cell cell{r, c};
            switch (lines[r][c]) {
                case '#': spec.walls.insert(cell); break;
                case '.': break;
                case 'G': spec.gray_cells.insert(cell); break;
                case 'S': spec.start = cell; ++starts; break;
                case 'D': spec.goal = cell; ++goals; break;
                default:
                    throw std::invalid_argument(std::string("maze map: unknown character '") +
                                                lines[r][c] + "' at row " + std::to_string(r + 1));
            }
        }
    }
    if (starts != 1) throw std::invalid_argument("maze map: expected exactly one 'S'");
    if (goals != 1) throw std::invalid_argument("maze map: expected exactly one 'D'");
    spec.validate();
    return spec;
}

// State enumeration: row-major over non-wall cells.
struct MazeLayout {
    int rows = 0;
    int cols = 0;
    std::vector<int> cell_to_state;  // rows*cols entries, -1 for walls
    std::vector<Cell> state_to_cell;

    int state_of(const Cell& c) const { return cell_to_state[static_cast<std::size_t>(c.row) * cols + c.col]; }
    const Cell& cell_of(int state) const { return state_to_cell[state]; }
    int n_states() const { return static_cast<int>(state_to_cell.size()); }

    // 1-based label used in CSV column names, e.g. "s1_1".
    std::string state_label(int state) const {
        const Cell& c = cell_of(state);
        return "s" + std::to_string(c.row + 1) + "_" + std::to_string(c.col + 1);
    }
};

inline MazeLayout make_maze_layout(const MazeSpec& spec) {
    MazeLayout layout;
    layout.rows = spec.rows;
    layout.cols = spec.cols;
    layout.cell_to_state.assign(static_cast<std::size_t>(spec.rows) * spec.cols, -1);
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            Cell cell{r, c};
            if (spec.is_wall(cell)) continue;
            layout.cell_to_state[static_cast<std::size_t>(r) * spec.cols + c] =
                static_cast<int>(layout.state_to_cell.size());
            layout.state_to_cell.push_back(cell);
        }
    }
    return layout;
}

inline Cell maze_step(const MazeSpec& spec, const Cell& from, int action) {
    Cell to = from;
    switch (action) {
        case kUp: to.row -= 1; break;
        case kDown: to.row += 1; break;
        case kLeft: to.col -= 1; break;
        case kRight: to.col += 1; break;
        default: throw std::invalid_argument("maze_step: bad action");
    }
    // Bumping into a wall or the boundary means staying put.
    if (!spec.in_bounds(to) || spec.is_wall(to)) return from;
    return to;
}

// Builds the ground-truth MDP of a maze. The goal cell is absorbing with zero
// reward. Rewards use the expected-immediate-reward convention:
// r(s,a) = step + sum_s' P(s'|s,a) * (gray penalty + goal bonus at s').
inline TabularMdp build_maze(const MazeSpec& spec, double discount) {
    spec.validate();
    MazeLayout layout = make_maze_layout(spec);
    const int n = layout.n_states();
    const int m = kMazeActions;
    if (n < 2) throw std::invalid_argument("maze: degenerate single-cell maze");

    // Reachability check: the goal must be attainable from the start.
    {
        std::vector<bool> seen(n, false);
        std::vector<int> stack{layout.state_of(spec.start)};
        seen[static_cast<std::size_t>(stack.back())] = true;
        while (!stack.empty()) {
            int s = stack.back();
            stack.pop_back();
            for (int a = 0; a < m; ++a) {
                Cell next = maze_step(spec, layout.cell_of(s), a);
                int t = layout.state_of(next);
                if (!seen[t]) {
                    seen[t] = true;
                    stack.push_back(t);
                }
            }
        }
        if (!seen[static_cast<std::size_t>(layout.state_of(spec.goal))])
            throw std::invalid_argument("maze: goal not reachable from start");
    }

    std::vector<double> transition(static_cast<std::size_t>(n) * m * n, 0.0);
    Table2 reward(n, m, 0.0);
    const int goal_state = layout.state_of(spec.goal);

    auto extra_reward = [&](int next_state) {
        const Cell& c = layout.cell_of(next_state);
        double extra = 0.0;
        if (spec.is_gray(c)) extra += spec.gray_penalty;
        if (next_state == goal_state) extra += spec.goal_reward;
        return extra;
    };

    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < m; ++a) {
            std::size_t base = (static_cast<std::size_t>(s) * m + a) * n;
            if (s == goal_state) {
                transition[base + s] = 1.0;
                continue;
            }
            int intended = layout.state_of(maze_step(spec, layout.cell_of(s), a));
            if (intended == s) {
                transition[base + s] = 1.0;
            } else {
                transition[base + s] = spec.stay_prob;
                transition[base + intended] = 1.0 - spec.stay_prob;
            }
            double expected_extra = 0.0;
            for (int t = 0; t < n; ++t) expected_extra += transition[base + t] * extra_reward(t);
            reward(s, a) = spec.step_reward + expected_extra;
        }
    }
    return TabularMdp(n, m, std::move(transition), std::move(reward), discount);
}

// Maze plus its state enumeration, bundled for the harness and exporters.
struct MazeModel {
    MazeSpec spec;
    MazeLayout layout;
    TabularMdp mdp;
};

inline MazeModel make_maze_model(const MazeSpec& spec, double discount) {
    return MazeModel{spec, make_maze_layout(spec), build_maze(spec, discount)};
}

}  // namespace poisonlab
