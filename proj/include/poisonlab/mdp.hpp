#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisonlab/rng.hpp"
#include "poisonlab/samples.hpp"
#include "poisonlab/tables.hpp"

namespace poisonlab {

// Probabilities below this are treated as exact zeros when extracting
// transition supports.
inline constexpr double kSupportEps = 1e-12;
inline constexpr double kRowSumTol = 1e-9;

// Ground-truth environment: finite MDP with dense transition tensor P(s,a,s'),
// reward table r(s,a) and discount gamma. Immutable after construction.
class TabularMdp {
  public:
    TabularMdp(int n_states, int n_actions, std::vector<double> transition, Table2 reward,
               double discount)
        : n_states_(n_states), n_actions_(n_actions), transition_(std::move(transition)),
          reward_(std::move(reward)), discount_(discount) {
        validate();
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    double discount() const { return discount_; }

    double transition(int s, int a, int s_next) const { return transition_[tindex(s, a, s_next)]; }
    const Table2& reward_table() const { return reward_; }
    double reward(int s, int a) const { return reward_(s, a); }

  private:
    std::size_t tindex(int s, int a, int s_next) const {
        return (static_cast<std::size_t>(s) * n_actions_ + a) * n_states_ + s_next;
    }

    void validate() const {
        if (n_states_ <= 0 || n_actions_ <= 0) throw std::invalid_argument("mdp: empty state or action space");
        if (!(discount_ >= 0.0 && discount_ <= 1.0)) throw std::invalid_argument("mdp: discount must be in [0,1]");
        if (transition_.size() != static_cast<std::size_t>(n_states_) * n_actions_ * n_states_)
            throw std::invalid_argument("mdp: transition tensor has wrong size");
        if (reward_.n_states() != n_states_ || reward_.n_actions() != n_actions_)
            throw std::invalid_argument("mdp: reward table has wrong shape");
        for (int s = 0; s < n_states_; ++s) {
            for (int a = 0; a < n_actions_; ++a) {
                double sum = 0.0;
                for (int t = 0; t < n_states_; ++t) {
                    double p = transition(s, a, t);
                    if (p < 0.0 || p > 1.0) throw std::invalid_argument("mdp: transition entry outside [0,1]");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > kRowSumTol)
                    throw std::invalid_argument("mdp: transition row does not sum to 1 at (s=" +
                                                std::to_string(s) + ",a=" + std::to_string(a) + ")");
            }
        }
    }

    int n_states_;
    int n_actions_;
    std::vector<double> transition_;  // (s, a, s') row-major
    Table2 reward_;
    double discount_;
};

// Support of each transition row, S'_{s,a} = { s' : P(s'|s,a) > 0 }, kept as
// sorted index lists. This is the attacker's only model knowledge.
class ReachableSets {
  public:
    ReachableSets() = default;
    ReachableSets(int n_states, int n_actions)
        : n_states_(n_states), n_actions_(n_actions),
          sets_(static_cast<std::size_t>(n_states) * n_actions) {}

    std::vector<int>& at(int s, int a) { return sets_[index(s, a)]; }
    const std::vector<int>& at(int s, int a) const { return sets_[index(s, a)]; }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }

    bool contains(int s, int a, int s_next) const {
        const auto& set = at(s, a);
        return std::binary_search(set.begin(), set.end(), s_next);
    }

  private:
    std::size_t index(int s, int a) const { return static_cast<std::size_t>(s) * n_actions_ + a; }

    int n_states_ = 0;
    int n_actions_ = 0;
    std::vector<std::vector<int>> sets_;
};

inline ReachableSets reachable_sets(const TabularMdp& mdp) {
    ReachableSets reach(mdp.n_states(), mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            auto& set = reach.at(s, a);
            for (int t = 0; t < mdp.n_states(); ++t) {
                if (mdp.transition(s, a, t) > kSupportEps) set.push_back(t);
            }
            if (set.empty()) throw std::runtime_error("reachable_sets: empty support row");
        }
    }
    return reach;
}

inline TransitionSample sample_transition(const TabularMdp& mdp, int s, int a, RngStream& rng) {
    double u = rng.uniform01();
    double acc = 0.0;
    int next = mdp.n_states() - 1;
    for (int t = 0; t < mdp.n_states(); ++t) {
        acc += mdp.transition(s, a, t);
        if (u < acc) {
            next = t;
            break;
        }
    }
    return TransitionSample{s, a, mdp.reward(s, a), next};
}

// Exact Q of a deterministic policy: solves the Bellman system
// Q(s,a) = r(s,a) + gamma * sum_s' P(s'|s,a) Q(s', pi(s')) by a direct linear
// solve on the state values V(s) = Q(s, pi(s)).
inline Table2 exact_policy_q(const TabularMdp& mdp, const Policy& policy) {
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    if (static_cast<int>(policy.size()) != n) throw std::invalid_argument("exact_policy_q: policy size mismatch");

    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (int s = 0; s < n; ++s) {
        int a = policy[s];
        if (a < 0 || a >= m) throw std::invalid_argument("exact_policy_q: action out of range");
        for (int t = 0; t < n; ++t) system(s, t) -= mdp.discount() * mdp.transition(s, a, t);
        rhs(s) = mdp.reward(s, a);
    }
    Eigen::VectorXd values = system.partialPivLu().solve(rhs);

    Table2 q(n, m);
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < m; ++a) {
            double backup = 0.0;
            for (int t = 0; t < n; ++t) backup += mdp.transition(s, a, t) * values(t);
            q(s, a) = mdp.reward(s, a) + mdp.discount() * backup;
        }
        residual = std::max(residual, std::abs(values(s) - q(s, policy[s])));
    }
    if (!q.all_finite() || residual > kRowSumTol)
        throw std::runtime_error("exact_policy_q: singular or ill-conditioned Bellman system");
    return q;
}

// Poisoned transition mixture: (1 - delta) P + delta * Uniform(S'_{s,a}).
// Returns the dense tensor in the same layout as TabularMdp's.
inline std::vector<double> apply_delta(const TabularMdp& mdp, const Table2& delta,
                                       const ReachableSets& reach) {
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    if (delta.n_states() != n || delta.n_actions() != m)
        throw std::invalid_argument("apply_delta: delta table has wrong shape");

    std::vector<double> out(static_cast<std::size_t>(n) * m * n, 0.0);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < m; ++a) {
            double d = delta(s, a);
            if (d < 0.0 || d > 1.0) throw std::domain_error("apply_delta: delta entry outside [0,1]");
            const auto& support = reach.at(s, a);
            double uniform = d / static_cast<double>(support.size());
            std::size_t base = (static_cast<std::size_t>(s) * m + a) * n;
            for (int t = 0; t < n; ++t) out[base + t] = (1.0 - d) * mdp.transition(s, a, t);
            for (int t : support) out[base + t] += uniform;
        }
    }
    return out;
}

// Convenience: one row of the poisoned mixture.
inline std::vector<double> poisoned_row(const TabularMdp& mdp, const Table2& delta,
                                        const ReachableSets& reach, int s, int a) {
    double d = delta(s, a);
    const auto& support = reach.at(s, a);
    std::vector<double> row(mdp.n_states(), 0.0);
    for (int t = 0; t < mdp.n_states(); ++t) row[t] = (1.0 - d) * mdp.transition(s, a, t);
    double uniform = d / static_cast<double>(support.size());
    for (int t : support) row[t] += uniform;
    return row;
}

// Rebuild a TabularMdp carrying the poisoned reward table and mixed
// transitions; used to policy-evaluate the model the victim actually sees.
inline TabularMdp poisoned_mdp(const TabularMdp& mdp, const Table2& r_bar, const Table2& delta,
                               const ReachableSets& reach) {
    return TabularMdp(mdp.n_states(), mdp.n_actions(), apply_delta(mdp, delta, reach), r_bar,
                      mdp.discount());
}

// Optimal Q via value iteration. Ties in the implied argmax are irrelevant
// here because the backup uses max, not the maximizer.
inline Table2 optimal_q(const TabularMdp& mdp, double tol = 1e-12, int max_iters = 1000000) {
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    Table2 q(n, m, 0.0);
    std::vector<double> vmax(n, 0.0);
    for (int it = 0; it < max_iters; ++it) {
        for (int t = 0; t < n; ++t) {
            double best = q(t, 0);
            for (int b = 1; b < m; ++b) best = std::max(best, q(t, b));
            vmax[t] = best;
        }
        double change = 0.0;
        for (int s = 0; s < n; ++s) {
            for (int a = 0; a < m; ++a) {
                double backup = 0.0;
                for (int t = 0; t < n; ++t) backup += mdp.transition(s, a, t) * vmax[t];
                double next = mdp.reward(s, a) + mdp.discount() * backup;
                change = std::max(change, std::abs(next - q(s, a)));
                q(s, a) = next;
            }
        }
        if (change < tol) return q;
    }
    throw std::runtime_error("optimal_q: value iteration did not converge");
}

}  // namespace poisonlab
