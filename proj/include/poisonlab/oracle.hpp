#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "poisonlab/attacker.hpp"
#include "poisonlab/mdp.hpp"
#include "poisonlab/tables.hpp"

namespace poisonlab {

struct PenaltyParams {
    double rho_delta = 2.0;
    double rho_phi = 1.0;
    double eps = 1.0;

    void validate() const {
        if (!(rho_delta > 0 && rho_phi > 0 && eps > 0))
            throw std::invalid_argument("penalty params must be positive");
    }
};

namespace detail {

// sum_s' Pbar(s'|s,a) * q(s', target(s')), the backed-up target value of one
// poisoned transition row.
inline double poisoned_backup(const TabularMdp& mdp, const Table2& delta,
                              const ReachableSets& reach, const Table2& q_bar,
                              const Policy& target, int s, int a) {
    double d = delta(s, a);
    double acc = 0.0;
    for (int t = 0; t < mdp.n_states(); ++t) {
        double p = mdp.transition(s, a, t);
        if (p > 0.0) acc += (1.0 - d) * p * q_bar(t, target[t]);
    }
    const auto& support = reach.at(s, a);
    double uniform = 0.0;
    for (int t : support) uniform += q_bar(t, target[t]);
    acc += d * uniform / static_cast<double>(support.size());
    return acc;
}

inline double true_backup(const TabularMdp& mdp, const Table2& q_bar, const Policy& target,
                          int s, int a) {
    double acc = 0.0;
    for (int t = 0; t < mdp.n_states(); ++t) acc += mdp.transition(s, a, t) * q_bar(t, target[t]);
    return acc;
}

inline double uniform_backup(const ReachableSets& reach, const Table2& q_bar,
                             const Policy& target, int s, int a) {
    const auto& support = reach.at(s, a);
    double acc = 0.0;
    for (int t : support) acc += q_bar(t, target[t]);
    return acc / static_cast<double>(support.size());
}

}  // namespace detail

// Closed-form minimizer of the lower-level objective:
// r_bar(s,a) = q_bar(s,a) - gamma * sum_s' Pbar_delta(s'|s,a) q_bar(s', target(s')).
inline Table2 lower_solution(const Table2& delta, const Table2& q_bar, const TabularMdp& mdp,
                             const ReachableSets& reach, const Policy& target) {
    Table2 out(mdp.n_states(), mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            out(s, a) = q_bar(s, a) -
                        mdp.discount() * detail::poisoned_backup(mdp, delta, reach, q_bar, target, s, a);
        }
    }
    return out;
}

// Lower-level objective g: sum of squared Bellman defects of (r_bar, q_bar)
// under the poisoned transitions. Zero exactly at r_bar = lower_solution.
inline double eval_g(const Table2& r_bar, const Table2& delta, const Table2& q_bar,
                     const TabularMdp& mdp, const ReachableSets& reach, const Policy& target) {
    double acc = 0.0;
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            double defect = r_bar(s, a) - q_bar(s, a) +
                            mdp.discount() * detail::poisoned_backup(mdp, delta, reach, q_bar, target, s, a);
            acc += 0.5 * defect * defect;
        }
    }
    return acc;
}

// Upper-level objective F: reward deviation + weighted transition poisoning
// + hinge-squared value-gap penalty over non-target actions.
inline double eval_F(const Table2& delta, const Table2& q_bar, const Table2& r_bar,
                     const TabularMdp& mdp, const PenaltyParams& params, const Policy& target) {
    double acc = 0.0;
    for (int s = 0; s < mdp.n_states(); ++s) {
        int pi_s = target[s];
        for (int a = 0; a < mdp.n_actions(); ++a) {
            double dev = r_bar(s, a) - mdp.reward(s, a);
            acc += 0.5 * dev * dev;
            acc += 0.5 * params.rho_delta * delta(s, a) * delta(s, a);
            if (a != pi_s) {
                double hinge = phi(q_bar(s, a) + params.eps - q_bar(s, pi_s));
                acc += 0.5 * params.rho_phi * hinge * hinge;
            }
        }
    }
    return acc;
}

// Gradient of g in r_bar: the Bellman defect itself.
inline Table2 grad_g_r(const Table2& r_bar, const Table2& delta, const Table2& q_bar,
                       const TabularMdp& mdp, const ReachableSets& reach, const Policy& target) {
    Table2 out(mdp.n_states(), mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            out(s, a) = r_bar(s, a) - q_bar(s, a) +
                        mdp.discount() * detail::poisoned_backup(mdp, delta, reach, q_bar, target, s, a);
        }
    }
    return out;
}

// d r_bar(s,a) / d delta(s,a): the lower solution is affine in delta, with
// slope gamma * sum_s' (P(s'|s,a) - Uniform_{S'}(s')) q_bar(s', target(s')).
// Off-diagonal derivatives vanish, so the diagonal is returned as a table.
// Mixing in more of the uniform distribution removes gamma * (P - U) . q_bar
// worth of backed-up value from the row, which is exactly what the
// delta-gradient of F uses.
inline Table2 grad_r_wrt_delta(const Table2& q_bar, const TabularMdp& mdp,
                               const ReachableSets& reach, const Policy& target) {
    Table2 out(mdp.n_states(), mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            out(s, a) = mdp.discount() * (detail::true_backup(mdp, q_bar, target, s, a) -
                                          detail::uniform_backup(reach, q_bar, target, s, a));
        }
    }
    return out;
}

// The sparse linear map d r_bar(s,a) / d q_bar(st,at). Entries exist only at
// (st,at) = (s,a) and at target actions of states reachable from (s,a).
class RBarQJacobian {
  public:
    RBarQJacobian(const Table2& delta, const TabularMdp& mdp, const ReachableSets& reach,
                  const Policy& target)
        : mdp_(&mdp), reach_(&reach), target_(&target), delta_(delta) {}

    double entry(int s, int a, int st, int at) const {
        double value = (st == s && at == a) ? 1.0 : 0.0;
        if (at == (*target_)[st]) {
            double d = delta_(s, a);
            double pbar = (1.0 - d) * mdp_->transition(s, a, st);
            if (reach_->contains(s, a, st)) pbar += d / static_cast<double>(reach_->at(s, a).size());
            value -= mdp_->discount() * pbar;
        }
        return value;
    }

    // dr(s,a) = sum_{st,at} entry(s,a,st,at) * dq(st,at)
    Table2 apply(const Table2& dq) const {
        Table2 out(mdp_->n_states(), mdp_->n_actions());
        for (int s = 0; s < mdp_->n_states(); ++s) {
            for (int a = 0; a < mdp_->n_actions(); ++a) {
                double acc = dq(s, a);
                double d = delta_(s, a);
                for (int t = 0; t < mdp_->n_states(); ++t) {
                    double pbar = (1.0 - d) * mdp_->transition(s, a, t);
                    if (reach_->contains(s, a, t)) pbar += d / static_cast<double>(reach_->at(s, a).size());
                    if (pbar > 0.0) acc -= mdp_->discount() * pbar * dq(t, (*target_)[t]);
                }
                out(s, a) = acc;
            }
        }
        return out;
    }

  private:
    const TabularMdp* mdp_;
    const ReachableSets* reach_;
    const Policy* target_;
    Table2 delta_;
};

inline RBarQJacobian grad_r_wrt_q(const Table2& delta, const TabularMdp& mdp,
                                  const ReachableSets& reach, const Policy& target) {
    return RBarQJacobian(delta, mdp, reach, target);
}

// Gradient of the outer objective in q_bar, with r_bar_plug substituted for
// the lower-level solution (conjugate mode when the plug is the current
// lower-level iterate; exact total derivative when it is lower_solution).
inline Table2 grad_F_q(const Table2& delta, const Table2& q_bar, const TabularMdp& mdp,
                       const PenaltyParams& params, const ReachableSets& reach,
                       const Policy& target, const Table2& r_bar_plug) {
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    Table2 out(n, m);

    // Incoming mass of reward deviations: for each target entry (st, pi_st),
    // gamma * sum_{s,a} Pbar(st|s,a) (plug(s,a) - r(s,a)).
    std::vector<double> incoming(n, 0.0);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < m; ++a) {
            double dev = r_bar_plug(s, a) - mdp.reward(s, a);
            if (dev == 0.0) continue;
            double d = delta(s, a);
            for (int t = 0; t < n; ++t) {
                double p = mdp.transition(s, a, t);
                if (p > 0.0) incoming[t] += (1.0 - d) * p * dev;
            }
            const auto& support = reach.at(s, a);
            double share = d / static_cast<double>(support.size());
            for (int t : support) incoming[t] += share * dev;
        }
    }

    for (int st = 0; st < n; ++st) {
        int pi_s = target[st];
        for (int at = 0; at < m; ++at) {
            double value = r_bar_plug(st, at) - mdp.reward(st, at);
            if (at != pi_s) {
                value += params.rho_phi * phi(q_bar(st, at) + params.eps - q_bar(st, pi_s));
            } else {
                double gap_sum = 0.0;
                for (int u = 0; u < m; ++u) {
                    if (u == at) continue;
                    gap_sum += phi(q_bar(st, u) + params.eps - q_bar(st, at));
                }
                value -= mdp.discount() * incoming[st] + params.rho_phi * gap_sum;
            }
            out(st, at) = value;
        }
    }
    return out;
}

// Gradient of the outer objective in delta, conjugate form.
inline Table2 grad_F_delta(const Table2& delta, const Table2& q_bar, const TabularMdp& mdp,
                           const PenaltyParams& params, const ReachableSets& reach,
                           const Policy& target, const Table2& r_bar_plug) {
    Table2 out(mdp.n_states(), mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            double dev = r_bar_plug(s, a) - mdp.reward(s, a);
            out(s, a) = mdp.discount() * dev *
                            (detail::true_backup(mdp, q_bar, target, s, a) -
                             detail::uniform_backup(reach, q_bar, target, s, a)) +
                        params.rho_delta * delta(s, a);
        }
    }
    return out;
}

// Residuals of the constrained formulation at an attacker iterate.
struct ConstraintResiduals {
    Table2 bellman_residual;  // left minus right of the Bellman equality
    Table2 gap_margin;        // q(s,pi_s) - q(s,a) - eps; NaN at target actions

    double max_abs_bellman() const { return bellman_residual.max_abs(); }

    double min_gap_margin() const {
        double worst = std::numeric_limits<double>::infinity();
        for (double v : gap_margin.data()) {
            if (!std::isnan(v)) worst = std::min(worst, v);
        }
        return worst;
    }
};

inline ConstraintResiduals check_constraints(const AttackerState& state, const TabularMdp& mdp,
                                             const ReachableSets& reach, double eps) {
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    ConstraintResiduals res{Table2(n, m), Table2(n, m)};
    for (int s = 0; s < n; ++s) {
        int pi_s = state.target[s];
        for (int a = 0; a < m; ++a) {
            double backup =
                detail::poisoned_backup(mdp, state.delta, reach, state.q_bar, state.target, s, a);
            res.bellman_residual(s, a) =
                state.q_bar(s, a) - (state.r_bar(s, a) + mdp.discount() * backup);
            res.gap_margin(s, a) =
                a == pi_s ? std::numeric_limits<double>::quiet_NaN()
                          : state.q_bar(s, pi_s) - state.q_bar(s, a) - eps;
        }
    }
    return res;
}

struct WhiteboxResult {
    AttackerState state;
    long long iterations = 0;
    bool converged = false;  // gradient norm fell below tolerance before the budget
};

class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(const std::string& what, long long iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration(iteration) {}
    long long iteration;
};

// Deterministic full-gradient reference attack: the same single-loop scheme as
// the online algorithm, but every stochastic estimate is replaced by its exact
// expectation under the known transition model.
inline WhiteboxResult whitebox_attack(const TabularMdp& mdp, const Policy& target,
                                      const Schedules& schedules, long long max_iters,
                                      double grad_tol = 1e-8) {
    schedules.validate();
    ReachableSets reach = reachable_sets(mdp);
    WhiteboxResult result{AttackerState::initial(mdp, target), 0, false};
    AttackerState& st = result.state;

    for (long long k = 0; k < max_iters; ++k) {
        PenaltyParams params{schedules.rho_delta, schedules.rho_phi.at(k), schedules.eps_gap};
        double alpha = schedules.alpha.at(k);
        double beta = schedules.beta.at(k);
        double lambda = schedules.lambda.at(k);

        Table2 gr = grad_g_r(st.r_bar, st.delta, st.q_bar, mdp, reach, st.target);
        for (std::size_t i = 0; i < gr.size(); ++i) st.r_bar.data()[i] -= alpha * gr.data()[i];

        Table2 gq = grad_F_q(st.delta, st.q_bar, mdp, params, reach, st.target, st.r_bar);
        for (std::size_t i = 0; i < gq.size(); ++i) st.q_bar.data()[i] -= beta * gq.data()[i];

        Table2 gd = grad_F_delta(st.delta, st.q_bar, mdp, params, reach, st.target, st.r_bar);
        double delta_move = 0.0;
        for (std::size_t i = 0; i < gd.size(); ++i) {
            double before = st.delta.data()[i];
            double after = clamp01(before - lambda * gd.data()[i]);
            st.delta.data()[i] = after;
            delta_move = std::max(delta_move, std::abs(after - before));
        }

        result.iterations = k + 1;
        if (st.r_bar.max_abs() > 1e6 || st.q_bar.max_abs() > 1e6)
            throw DivergenceError("whitebox_attack: iterate exceeded 1e6", k);

        if (gr.max_abs() < grad_tol && gq.max_abs() < grad_tol &&
            (lambda == 0.0 ? gd.max_abs() < grad_tol : delta_move / lambda < grad_tol)) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace poisonlab
