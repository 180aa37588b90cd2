#pragma once

#include <string>

#include "poisonlab/harness.hpp"
#include "poisonlab/maze.hpp"

namespace poisonlab {
namespace testbeds {

// Default 6x5 maze: destination bottom-right, a gray column walling the left
// corridor off from the open interior. The clean shortest path goes right
// along the top row; the detour down the left corridor crosses one gray cell,
// so the unpoisoned optimal action at the start is 'right' while the
// gray-blind target policy moves 'down' there.
inline const char* kDefaultMazeMap =
    "S....\n"
    ".G...\n"
    ".G...\n"
    ".G...\n"
    ".G...\n"
    ".G..D\n";

inline MazeSpec default_maze_spec() {
    MazeSpec spec = parse_maze_ascii(kDefaultMazeMap);
    spec.stay_prob = 0.7;
    spec.step_reward = -1.0;
    spec.gray_penalty = -5.0;
    spec.goal_reward = 10.0;
    return spec;
}

// The experiment of the shipped maze_default.cfg, built programmatically.
inline ExperimentConfig default_maze_config() {
    MazeSpec spec = default_maze_spec();
    const double discount = 0.9;
    ExperimentConfig config(Model(spec, discount),
                            target_policy_optimal_ignoring_gray(spec, discount));
    config.iterations = 20000;
    config.repeats = 5;
    config.seed = 7;
    config.snapshot_interval = 100;
    config.monitored_states = target_path_states(config.model, config.target);
    config.schedules.eps_gap = 1.0;
    config.schedules.rho_delta = 2.0;
    // Calibrated so the coupled system both converges and goes quiet inside
    // the 20k budget: the penalty ramp finishes early (~2.5k iterations), the
    // attacker steps carry weight while the iterate moves and then decay
    // quadratically to kill the late-stage sampling noise.
    config.schedules.alpha = DecaySchedule{0.5, 2500.0, 2.0};
    config.schedules.beta = DecaySchedule{0.1, 1200.0, 2.0};
    config.schedules.lambda = DecaySchedule{0.05, 1200.0, 2.0};
    config.schedules.rho_phi = PenaltySchedule{0.1, 5.0, 50.0};
    config.agent.lr_base = 0.1;
    config.agent.lr_tau = 400.0;
    config.agent.exploration_epsilon = 0.1;
    config.agent.initial_q = 0.0;
    return config;
}

// Small 3-state, 2-action chain with asymmetric transition rows (so the
// uniform mixture genuinely moves every row) used for oracle-vs-stochastic
// comparisons. The modest discount keeps the value-level mode stiff enough to
// equilibrate inside a 1e4-iteration budget; at gamma near 1 the white-box and
// stochastic runs freeze on different value levels.
inline Model chain3_model() {
    const int n = 3, m = 2;
    std::vector<double> transition((std::size_t)n * m * n, 0.0);
    auto row = [&](int s, int a) { return (static_cast<std::size_t>(s) * m + a) * n; };
    // action 0: mostly stay
    transition[row(0, 0) + 0] = 0.8; transition[row(0, 0) + 1] = 0.2;
    transition[row(1, 0) + 1] = 0.8; transition[row(1, 0) + 2] = 0.2;
    transition[row(2, 0) + 2] = 0.8; transition[row(2, 0) + 0] = 0.2;
    // action 1: advance along the chain
    transition[row(0, 1) + 0] = 0.1; transition[row(0, 1) + 1] = 0.9;
    transition[row(1, 1) + 1] = 0.1; transition[row(1, 1) + 2] = 0.9;
    transition[row(2, 1) + 2] = 0.1; transition[row(2, 1) + 0] = 0.9;
    Table2 reward(n, m, 0.0);
    reward(0, 0) = 0.2; reward(0, 1) = 0.0;
    reward(1, 0) = 0.1; reward(1, 1) = 0.3;
    reward(2, 0) = 1.0; reward(2, 1) = 0.0;
    return Model(TabularMdp(n, m, std::move(transition), std::move(reward), 0.5), 0);
}

// A target that disagrees with the unpoisoned optimal policy at state 2
// (where staying collects the big reward).
inline Policy chain3_target() { return Policy{1, 1, 1}; }

// Schedules sized for the chain: the penalty reaches its cap within ~4k
// iterations (the cap is high enough that the residual gap violation stays
// below 1e-2), and the quadratically decaying steps silence sampling noise so
// the stochastic run lands on the white-box solution.
inline Schedules chain3_schedules() {
    Schedules schedules;
    schedules.alpha = DecaySchedule{0.5, 300.0, 2.0};
    schedules.beta = DecaySchedule{0.08, 300.0, 2.0};
    schedules.lambda = DecaySchedule{0.02, 300.0, 2.0};
    schedules.rho_phi = PenaltySchedule{0.2, 4.0, 200.0};
    schedules.rho_delta = 2.0;
    schedules.eps_gap = 0.5;
    return schedules;
}

inline ExperimentConfig chain3_config(long long iterations = 10000) {
    ExperimentConfig config(chain3_model(), chain3_target());
    config.iterations = iterations;
    config.repeats = 1;
    config.seed = 11;
    config.snapshot_interval = 500;
    config.monitored_states = {0, 1, 2};
    config.schedules = chain3_schedules();
    return config;
}

}  // namespace testbeds
}  // namespace poisonlab
