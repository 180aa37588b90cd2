#pragma once

#include <memory>
#include <span>
#include <stdexcept>

#include "poisonlab/rng.hpp"
#include "poisonlab/samples.hpp"
#include "poisonlab/tables.hpp"

namespace poisonlab {

using QTable = Table2;

struct AgentConfig {
    double lr_base = 0.1;       // learning rate schedule lr_base / (1 + k / lr_tau)
    double lr_tau = 400.0;
    double exploration_epsilon = 0.1;
    double initial_q = 0.0;

    double learning_rate(long long k) const { return lr_base / (1.0 + static_cast<double>(k) / lr_tau); }

    void validate() const {
        if (!(lr_base > 0.0 && lr_base <= 1.0)) throw std::invalid_argument("agent: lr_base must be in (0,1]");
        if (!(lr_tau > 0.0)) throw std::invalid_argument("agent: lr_tau must be positive");
        if (!(exploration_epsilon >= 0.0 && exploration_epsilon <= 1.0))
            throw std::invalid_argument("agent: epsilon must be in [0,1]");
    }
};

// Per state, argmax over actions; ties broken by lowest action index.
inline Policy greedy_policy(const QTable& q) {
    Policy policy(q.n_states(), 0);
    for (int s = 0; s < q.n_states(); ++s) {
        int best = 0;
        for (int a = 1; a < q.n_actions(); ++a) {
            if (q(s, a) > q(s, best)) best = a;
        }
        policy[s] = best;
    }
    return policy;
}

inline int greedy_action(const QTable& q, int s) {
    int best = 0;
    for (int a = 1; a < q.n_actions(); ++a) {
        if (q(s, a) > q(s, best)) best = a;
    }
    return best;
}

// Epsilon-greedy action selection.
inline int act(const QTable& q, int s, double epsilon, RngStream& rng) {
    if (epsilon > 0.0 && rng.bernoulli(epsilon)) return rng.uniform_index(q.n_actions());
    return greedy_action(q, s);
}

// One Q-learning sweep over a poisoned batch, applied sequentially in batch
// order. Only the (s,a) entries of the batch are written.
inline void agent_update(QTable& q, std::span<const PoisonedSample> batch, double gamma, double lr) {
    if (!(lr > 0.0 && lr <= 1.0)) throw std::invalid_argument("agent_update: lr must be in (0,1]");
    for (const PoisonedSample& sample : batch) {
        double next_best = q(sample.poisoned_next, 0);
        for (int a = 1; a < q.n_actions(); ++a) next_best = std::max(next_best, q(sample.poisoned_next, a));
        double target = sample.poisoned_reward + gamma * next_best;
        double& cell = q(sample.state, sample.action);
        cell += lr * (target - cell);
    }
}

// The harness talks to the victim only through this surface, so other tabular
// learners (SARSA, expected SARSA, ...) can be swapped in without touching the
// attacker.
class Agent {
  public:
    virtual ~Agent() = default;
    virtual void consume(std::span<const PoisonedSample> batch, long long iteration) = 0;
    virtual const QTable& q() const = 0;
    virtual Policy policy() const { return greedy_policy(q()); }
};

class QLearningAgent : public Agent {
  public:
    QLearningAgent(int n_states, int n_actions, double gamma, AgentConfig config)
        : config_(config), gamma_(gamma), q_(n_states, n_actions, config.initial_q) {
        config_.validate();
    }

    void consume(std::span<const PoisonedSample> batch, long long iteration) override {
        if (batch.empty()) return;
        agent_update(q_, batch, gamma_, config_.learning_rate(iteration));
    }

    const QTable& q() const override { return q_; }

    int act(int s, RngStream& rng) const {
        return poisonlab::act(q_, s, config_.exploration_epsilon, rng);
    }

  private:
    AgentConfig config_;
    double gamma_;
    QTable q_;
};

}  // namespace poisonlab
