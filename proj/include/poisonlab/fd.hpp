#pragma once

#include <functional>
#include <string>
#include <vector>

#include "poisonlab/oracle.hpp"
#include "poisonlab/rng.hpp"

namespace poisonlab {

// Central difference of a scalar function along one coordinate of a table.
inline double central_difference(const std::function<double(const Table2&)>& f, Table2 point,
                                 int s, int a, double h) {
    double saved = point(s, a);
    point(s, a) = saved + h;
    double up = f(point);
    point(s, a) = saved - h;
    double down = f(point);
    point(s, a) = saved;
    return (up - down) / (2.0 * h);
}

// Relative error with an absolute floor: |a-f| <= 1e-8 passes even when both
// values are essentially zero.
inline double scaled_error(double analytic, double fd) {
    double denom = std::max(std::abs(analytic), std::abs(fd));
    return std::abs(analytic - fd) / std::max(denom, 1e-3);
}

// Random MDP with varied transition supports (essential: a row uniform over
// its support makes the delta-gradient vanish identically).
inline TabularMdp random_mdp(int n_states, int n_actions, double gamma, RngStream& rng) {
    std::vector<double> transition(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
    Table2 reward(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            int support = 2 + rng.uniform_index(n_states - 1);
            std::vector<int> order(n_states);
            for (int i = 0; i < n_states; ++i) order[i] = i;
            for (int i = n_states - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);
            double total = 0.0;
            std::vector<double> weights(support);
            for (int i = 0; i < support; ++i) {
                weights[i] = 0.05 + 0.95 * rng.uniform01();
                total += weights[i];
            }
            std::size_t base = (static_cast<std::size_t>(s) * n_actions + a) * n_states;
            for (int i = 0; i < support; ++i) transition[base + order[i]] = weights[i] / total;
            reward(s, a) = 2.0 * rng.uniform01() - 1.0;
        }
    }
    return TabularMdp(n_states, n_actions, std::move(transition), std::move(reward), gamma);
}

inline Policy random_policy(int n_states, int n_actions, RngStream& rng) {
    Policy target(n_states);
    for (int s = 0; s < n_states; ++s) target[s] = rng.uniform_index(n_actions);
    return target;
}

struct AttackerPoint {
    Table2 r_bar;
    Table2 q_bar;
    Table2 delta;
};

// Random iterate with delta in the interior of [0,1] and no value-gap penalty
// argument near the hinge kink (those points are excluded from FD testing).
inline AttackerPoint random_attacker_point(const TabularMdp& mdp, const Policy& target, double eps,
                                           RngStream& rng, double kink_margin = 1e-3) {
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    while (true) {
        AttackerPoint point{Table2(n, m), Table2(n, m), Table2(n, m)};
        for (int s = 0; s < n; ++s) {
            for (int a = 0; a < m; ++a) {
                point.r_bar(s, a) = 4.0 * rng.uniform01() - 2.0;
                point.q_bar(s, a) = 4.0 * rng.uniform01() - 2.0;
                point.delta(s, a) = 0.1 + 0.8 * rng.uniform01();
            }
        }
        bool near_kink = false;
        for (int s = 0; s < n && !near_kink; ++s) {
            for (int a = 0; a < m; ++a) {
                if (a == target[s]) continue;
                double arg = point.q_bar(s, a) + eps - point.q_bar(s, target[s]);
                if (std::abs(arg) < kink_margin) {
                    near_kink = true;
                    break;
                }
            }
        }
        if (!near_kink) return point;
    }
}

struct EquationReport {
    std::string name;
    double max_error = 0.0;
};

struct GradCheckReport {
    std::vector<EquationReport> equations;
    int points = 0;

    double worst() const {
        double w = 0.0;
        for (const auto& eq : equations) w = std::max(w, eq.max_error);
        return w;
    }
    bool pass(double threshold = 1e-5) const { return worst() <= threshold; }
};

// Checks every analytic gradient of the oracle against central finite
// differences of its objective at `n_points` random attacker iterates.
// `corrupt` deliberately skews one analytic value; the suite must then fail
// (negative control for the checker itself).
inline GradCheckReport run_gradcheck(std::uint64_t seed, int n_points = 20, int n_states = 4,
                                     int n_actions = 3, bool corrupt = false) {
    RngStream rng(splitmix64(seed));
    const double gamma = 0.9;
    const double h = 1e-5;
    TabularMdp mdp = random_mdp(n_states, n_actions, gamma, rng);
    ReachableSets reach = reachable_sets(mdp);
    Policy target = random_policy(n_states, n_actions, rng);
    PenaltyParams params{2.0, 3.0, 1.0};

    GradCheckReport report;
    report.points = n_points;
    EquationReport eq8{"d r_bar / d delta", 0.0};
    EquationReport eq9{"d r_bar / d q_bar", 0.0};
    EquationReport eq10{"d g / d r_bar", 0.0};
    EquationReport eq11{"d F / d q_bar", 0.0};
    EquationReport eq12{"d F / d delta", 0.0};

    for (int p = 0; p < n_points; ++p) {
        AttackerPoint point = random_attacker_point(mdp, target, params.eps, rng);

        // r_bar(delta, q_bar) Jacobians, every output coordinate against every
        // perturbed input coordinate.
        Table2 diag = grad_r_wrt_delta(point.q_bar, mdp, reach, target);
        RBarQJacobian jac = grad_r_wrt_q(point.delta, mdp, reach, target);
        for (int st = 0; st < n_states; ++st) {
            for (int at = 0; at < n_actions; ++at) {
                Table2 delta_up = point.delta;
                Table2 delta_down = point.delta;
                delta_up(st, at) += h;
                delta_down(st, at) -= h;
                Table2 r_up = lower_solution(delta_up, point.q_bar, mdp, reach, target);
                Table2 r_down = lower_solution(delta_down, point.q_bar, mdp, reach, target);
                Table2 q_up = point.q_bar;
                Table2 q_down = point.q_bar;
                q_up(st, at) += h;
                q_down(st, at) -= h;
                Table2 rq_up = lower_solution(point.delta, q_up, mdp, reach, target);
                Table2 rq_down = lower_solution(point.delta, q_down, mdp, reach, target);
                for (int s = 0; s < n_states; ++s) {
                    for (int a = 0; a < n_actions; ++a) {
                        double fd_delta = (r_up(s, a) - r_down(s, a)) / (2.0 * h);
                        double analytic_delta = (s == st && a == at) ? diag(s, a) : 0.0;
                        eq8.max_error = std::max(eq8.max_error, scaled_error(analytic_delta, fd_delta));

                        double fd_q = (rq_up(s, a) - rq_down(s, a)) / (2.0 * h);
                        eq9.max_error =
                            std::max(eq9.max_error, scaled_error(jac.entry(s, a, st, at), fd_q));
                    }
                }
            }
        }

        // Gradient of g in r_bar.
        Table2 analytic_g =
            grad_g_r(point.r_bar, point.delta, point.q_bar, mdp, reach, target);
        if (corrupt) analytic_g(0, 0) += 1e-2 + 0.1 * std::abs(analytic_g(0, 0));
        auto g_of_r = [&](const Table2& r) {
            return eval_g(r, point.delta, point.q_bar, mdp, reach, target);
        };
        for (int s = 0; s < n_states; ++s) {
            for (int a = 0; a < n_actions; ++a) {
                double fd = central_difference(g_of_r, point.r_bar, s, a, h);
                eq10.max_error = std::max(eq10.max_error, scaled_error(analytic_g(s, a), fd));
            }
        }

        // Total derivatives of F(delta, q_bar, r_bar(delta, q_bar)), analytic
        // side evaluated with the plug at the exact lower solution.
        Table2 r_star = lower_solution(point.delta, point.q_bar, mdp, reach, target);
        Table2 analytic_fq = grad_F_q(point.delta, point.q_bar, mdp, params, reach, target, r_star);
        Table2 analytic_fd = grad_F_delta(point.delta, point.q_bar, mdp, params, reach, target, r_star);
        auto f_of_q = [&](const Table2& q) {
            return eval_F(point.delta, q, lower_solution(point.delta, q, mdp, reach, target), mdp,
                          params, target);
        };
        auto f_of_delta = [&](const Table2& d) {
            return eval_F(d, point.q_bar, lower_solution(d, point.q_bar, mdp, reach, target), mdp,
                          params, target);
        };
        for (int s = 0; s < n_states; ++s) {
            for (int a = 0; a < n_actions; ++a) {
                double fd_q = central_difference(f_of_q, point.q_bar, s, a, h);
                eq11.max_error = std::max(eq11.max_error, scaled_error(analytic_fq(s, a), fd_q));
                double fd_d = central_difference(f_of_delta, point.delta, s, a, h);
                eq12.max_error = std::max(eq12.max_error, scaled_error(analytic_fd(s, a), fd_d));
            }
        }
    }

    report.equations = {eq8, eq9, eq10, eq11, eq12};
    return report;
}

}  // namespace poisonlab
