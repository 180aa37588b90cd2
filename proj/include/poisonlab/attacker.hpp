#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "poisonlab/mdp.hpp"
#include "poisonlab/samples.hpp"
#include "poisonlab/tables.hpp"

namespace poisonlab {

// Hinge used by the value-gap penalty: phi(x) = x for x > 0, else 0.
inline double phi(double x) { return x > 0.0 ? x : 0.0; }

struct DecaySchedule {
    double base = 0.0;
    double tau = 1000.0;
    double power = 1.0;

    double at(long long k) const {
        return base / std::pow(1.0 + static_cast<double>(k) / tau, power);
    }
};

// Linear ramp capped at `cap`; non-decreasing in k by construction.
struct PenaltySchedule {
    double base = 0.1;
    double tau = 500.0;
    double cap = 50.0;

    double at(long long k) const {
        return std::min(cap, base * (1.0 + static_cast<double>(k) / tau));
    }
};

struct Schedules {
    DecaySchedule alpha{0.5, 2500.0, 2.0};   // poisoned reward step
    DecaySchedule beta{0.1, 1200.0, 2.0};    // poisoned Q step
    DecaySchedule lambda{0.05, 1200.0, 2.0}; // poisoned transition step
    PenaltySchedule rho_phi{0.1, 5.0, 50.0};
    double rho_delta = 2.0;
    double eps_gap = 1.0;

    void validate() const {
        if (alpha.base < 0 || beta.base < 0 || lambda.base < 0)
            throw std::invalid_argument("schedules: negative step size");
        if (alpha.tau <= 0 || beta.tau <= 0 || lambda.tau <= 0 || rho_phi.tau <= 0)
            throw std::invalid_argument("schedules: decay scale must be positive");
        if (rho_phi.base < 0 || rho_phi.cap < rho_phi.base)
            throw std::invalid_argument("schedules: penalty ramp must stay below its cap");
        if (!(rho_delta > 0)) throw std::invalid_argument("schedules: rho_delta must be positive");
        if (!(eps_gap > 0)) throw std::invalid_argument("schedules: eps_gap must be positive");
    }
};

// The attacker's decision variables: poisoned rewards r_bar, induced Q-values
// q_bar, transition poisoning intensities delta, and the target policy.
struct AttackerState {
    Table2 r_bar;
    Table2 q_bar;
    Table2 delta;
    Policy target;
    double gamma = 0.9;

    static AttackerState initial(const TabularMdp& mdp, Policy target_policy) {
        // r_bar starts at the true rewards (observable by interception before
        // the first poisoning step), delta at zero, q_bar at zero.
        AttackerState state;
        state.r_bar = mdp.reward_table();
        state.q_bar = Table2(mdp.n_states(), mdp.n_actions(), 0.0);
        state.delta = Table2(mdp.n_states(), mdp.n_actions(), 0.0);
        state.target = std::move(target_policy);
        state.gamma = mdp.discount();
        return state;
    }

    int target_action(int s) const { return target[s]; }
};

// Man-in-the-middle rewrite of one record: the reward is replaced by
// r_bar(s,a); with probability delta(s,a) the next state is replaced by a
// uniform draw from the reachable set, so the poisoned next state follows the
// mixture (1 - delta) P + delta * Uniform(S'_{s,a}).
inline PoisonedSample poison_sample(const AttackerState& state, const TransitionSample& sample,
                                    const ReachableSets& reach, RngStream& rng) {
    PoisonedSample out;
    out.state = sample.state;
    out.action = sample.action;
    out.true_reward = sample.reward;
    out.true_next = sample.next_state;
    out.poisoned_reward = state.r_bar(sample.state, sample.action);
    out.poisoned_next = sample.next_state;
    double d = state.delta(sample.state, sample.action);
    if (d > 0.0 && rng.bernoulli(d)) {
        const auto& support = reach.at(sample.state, sample.action);
        out.poisoned_next = support[rng.uniform_index(static_cast<int>(support.size()))];
    }
    return out;
}

// Poisoned reward update (stochastic descent on the lower-level objective):
// r_bar(s,a) <- r_bar(s,a) - alpha * (r_bar(s,a) - q_bar(s,a) + gamma * q_bar(sbar', target)).
// Samples apply sequentially; q_bar is the pre-update iterate of this round.
inline void update_reward(AttackerState& state, std::span<const PoisonedSample> batch,
                          double alpha_k) {
    for (const PoisonedSample& sample : batch) {
        double bootstrap = state.q_bar(sample.poisoned_next, state.target_action(sample.poisoned_next));
        double grad = state.r_bar(sample.state, sample.action) -
                      state.q_bar(sample.state, sample.action) + state.gamma * bootstrap;
        state.r_bar(sample.state, sample.action) -= alpha_k * grad;
    }
}

// Poisoned Q-value update. Two entries move per sample: the (s,a) entry takes
// the reward-deviation and value-gap penalty terms, and the entry at the
// poisoned next state's target action absorbs the sampled stand-in for the
// inverse-probability sum of the exact gradient. Reads r_bar as already
// updated this iteration; within the batch, later samples see earlier writes.
inline void update_qvalue(AttackerState& state, std::span<const PoisonedSample> batch,
                          double beta_k, double rho_phi_k, double eps) {
    for (const PoisonedSample& sample : batch) {
        const int s = sample.state;
        const int a = sample.action;
        const int target_a = state.target_action(s);
        const double reward_dev = state.r_bar(s, a) - sample.true_reward;

        double penalty;
        if (a != target_a) {
            penalty = rho_phi_k * phi(state.q_bar(s, a) + eps - state.q_bar(s, target_a));
        } else {
            double gap_sum = 0.0;
            for (int u = 0; u < state.q_bar.n_actions(); ++u) {
                if (u == a) continue;
                gap_sum += phi(state.q_bar(s, u) + eps - state.q_bar(s, a));
            }
            penalty = -rho_phi_k * gap_sum;
        }

        const int sbar = sample.poisoned_next;
        const int sbar_a = state.target_action(sbar);
        double bootstrap_inc = beta_k * state.gamma * reward_dev;

        state.q_bar(s, a) -= beta_k * (reward_dev + penalty);
        state.q_bar(sbar, sbar_a) += bootstrap_inc;
    }
}

// Poisoned transition update with projection onto [0,1]. The first value term
// uses the TRUE next state (a one-sample estimate of sum_s' P(s'|s,a) q_bar);
// the uniform-average term is computed exactly over the known reachable set.
// Reads r_bar and q_bar as already updated this iteration.
inline void update_delta(AttackerState& state, std::span<const PoisonedSample> batch,
                         double lambda_k, double rho_delta, const ReachableSets& reach) {
    for (const PoisonedSample& sample : batch) {
        const int s = sample.state;
        const int a = sample.action;
        const double reward_dev = state.r_bar(s, a) - sample.true_reward;

        double sampled_value = state.q_bar(sample.true_next, state.target_action(sample.true_next));

        const auto& support = reach.at(s, a);
        double uniform_value = 0.0;
        for (int t : support) uniform_value += state.q_bar(t, state.target_action(t));
        uniform_value /= static_cast<double>(support.size());

        double grad = state.gamma * reward_dev * sampled_value + rho_delta * state.delta(s, a) -
                      state.gamma * reward_dev * uniform_value;
        state.delta(s, a) = clamp01(state.delta(s, a) - lambda_k * grad);
    }
}

}  // namespace poisonlab
