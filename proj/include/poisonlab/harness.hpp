#pragma once

#include <functional>
#include <future>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisonlab/agent.hpp"
#include "poisonlab/attacker.hpp"
#include "poisonlab/maze.hpp"
#include "poisonlab/mdp.hpp"
#include "poisonlab/oracle.hpp"

namespace poisonlab {

// Environment bundle handed to the harness: the MDP plus naming/geometry
// metadata. Maze-built models keep their layout so outputs can use 1-based
// (row, col) labels.
struct Model {
    TabularMdp mdp;
    ReachableSets reach;
    std::optional<MazeSpec> maze_spec;
    std::optional<MazeLayout> layout;
    int start_state = 0;
    int goal_state = -1;  // -1: no absorbing goal
    std::vector<std::string> state_labels;
    std::vector<std::string> action_labels;

    explicit Model(TabularMdp m, int start = 0)
        : mdp(std::move(m)), reach(reachable_sets(mdp)), start_state(start) {
        for (int s = 0; s < mdp.n_states(); ++s) state_labels.push_back("s" + std::to_string(s));
        for (int a = 0; a < mdp.n_actions(); ++a) action_labels.push_back("a" + std::to_string(a));
    }

    Model(const MazeSpec& spec, double discount)
        : mdp(build_maze(spec, discount)), reach(reachable_sets(mdp)), maze_spec(spec),
          layout(make_maze_layout(spec)) {
        start_state = layout->state_of(spec.start);
        goal_state = layout->state_of(spec.goal);
        for (int s = 0; s < mdp.n_states(); ++s) state_labels.push_back(layout->state_label(s));
        for (int a = 0; a < mdp.n_actions(); ++a) action_labels.push_back(maze_action_name(a));
    }

    std::string pair_label(int s, int a) const { return state_labels[s] + "_" + action_labels[a]; }
};

enum class BatchRegime { kFullSweep, kOnPolicy };

struct ExperimentConfig {
    ExperimentConfig(Model m, Policy t) : model(std::move(m)), target(std::move(t)) {}

    Model model;
    Policy target;
    Schedules schedules;
    AgentConfig agent;
    long long iterations = 20000;
    int repeats = 5;
    std::uint64_t seed = 1;
    BatchRegime batch_regime = BatchRegime::kFullSweep;
    std::vector<int> monitored_states;
    long long snapshot_interval = 100;
    long long attacker_snapshot_interval = 0;  // 0: keep only the final state
    int ablation_state = -1;                   // defaults to the start state
    int ablation_action = -1;                  // defaults to the target action there

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
        if (repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
        if (snapshot_interval < 1) throw std::invalid_argument("config: snapshot_interval must be >= 1");
        if (static_cast<int>(target.size()) != model.mdp.n_states())
            throw std::invalid_argument("config: target policy size mismatch");
        for (int a : target) {
            if (a < 0 || a >= model.mdp.n_actions())
                throw std::invalid_argument("config: target policy action out of range");
        }
        for (int s : monitored_states) {
            if (s < 0 || s >= model.mdp.n_states())
                throw std::invalid_argument("config: monitored state out of range");
        }
        if (monitored_states.empty()) throw std::invalid_argument("config: no monitored states");
        schedules.validate();
        agent.validate();
    }

    int ablation_state_or_default() const { return ablation_state >= 0 ? ablation_state : model.start_state; }
    int ablation_action_or_default() const {
        return ablation_action >= 0 ? ablation_action : target[ablation_state_or_default()];
    }
};

// The attacker's default target policy on mazes: the optimal policy of the
// same maze with the gray penalty removed, ties broken toward the lowest
// action index. On the shipped map this turns "move right" into "move down"
// at the start while staying a coherent goal-seeking policy elsewhere.
inline Policy target_policy_optimal_ignoring_gray(const MazeSpec& spec, double discount) {
    MazeSpec relaxed = spec;
    relaxed.gray_penalty = 0.0;
    TabularMdp relaxed_mdp = build_maze(relaxed, discount);
    return greedy_policy(optimal_q(relaxed_mdp));
}

// States on the path traced by the target policy's intended moves from the
// start; this is the default monitored set.
inline std::vector<int> target_path_states(const Model& model, const Policy& target) {
    std::vector<int> path;
    std::vector<bool> seen(model.mdp.n_states(), false);
    int s = model.start_state;
    for (int step = 0; step < model.mdp.n_states(); ++step) {
        if (seen[s]) break;
        seen[s] = true;
        path.push_back(s);
        if (s == model.goal_state) break;
        int a = target[s];
        if (model.layout && model.maze_spec) {
            s = model.layout->state_of(maze_step(*model.maze_spec, model.layout->cell_of(s), a));
        } else {
            // Generic MDP: follow the most likely next state.
            int best = 0;
            for (int t = 1; t < model.mdp.n_states(); ++t) {
                if (model.mdp.transition(s, a, t) > model.mdp.transition(s, a, best)) best = t;
            }
            s = best;
        }
    }
    return path;
}

// Flat metric row layout shared by the CSV writers and the tests.
struct MetricsSchema {
    std::vector<std::string> fields;

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (fields[i] == name) return static_cast<int>(i);
        }
        throw std::out_of_range("metrics field not found: " + name);
    }
};

inline MetricsSchema make_metrics_schema(const ExperimentConfig& config) {
    MetricsSchema schema;
    const Model& model = config.model;
    const int m = model.mdp.n_actions();
    for (const char* family : {"rbar", "qbar", "delta", "agentq"}) {
        for (int s : config.monitored_states) {
            for (int a = 0; a < m; ++a) {
                schema.fields.push_back(std::string(family) + "_" + model.pair_label(s, a));
            }
        }
    }
    for (int s : config.monitored_states) schema.fields.push_back("gap_" + model.state_labels[s]);
    schema.fields.push_back("reward_deviation_norm");
    schema.fields.push_back("delta_norm");
    schema.fields.push_back("max_bellman_residual");
    schema.fields.push_back("min_gap_margin");
    return schema;
}

struct MetricsRow {
    long long iteration = 0;
    std::vector<double> values;
};

struct SuccessReport {
    std::vector<bool> per_state_match;  // all states
    double match_rate = 0.0;
    bool monitored_success = false;     // match at every monitored state
    std::vector<double> monitored_gaps; // q_bar value gap at monitored states
};

struct TrialResult {
    int trial_index = 0;
    AttackerState attacker;
    QTable agent_q;
    Policy agent_policy;
    std::vector<MetricsRow> metrics;
    bool success = false;
    long long support_violations = 0;  // poisoned next states outside S'_{s,a}
    long long delta_violations = 0;    // delta entries outside [0,1]
    std::vector<std::pair<long long, AttackerState>> attacker_snapshots;
};

class TrialAbort : public std::runtime_error {
  public:
    TrialAbort(int trial, long long iteration, const std::string& what)
        : std::runtime_error("trial " + std::to_string(trial) + " aborted at iteration " +
                             std::to_string(iteration) + ": " + what),
          trial(trial), iteration(iteration) {}
    int trial;
    long long iteration;
};

// Called after the attacker updates of every iteration; used by tests and the
// acceptance audit. Keep it cheap.
using TrialObserver =
    std::function<void(long long iteration, std::span<const PoisonedSample> batch,
                       const AttackerState& attacker)>;

inline SuccessReport attack_success(const QTable& agent_q, const AttackerState& attacker,
                                    const std::vector<int>& monitored) {
    SuccessReport report;
    Policy greedy = greedy_policy(agent_q);
    int matches = 0;
    report.per_state_match.resize(greedy.size());
    for (std::size_t s = 0; s < greedy.size(); ++s) {
        bool ok = greedy[s] == attacker.target[s];
        report.per_state_match[s] = ok;
        if (ok) ++matches;
    }
    report.match_rate = static_cast<double>(matches) / static_cast<double>(greedy.size());
    report.monitored_success = true;
    for (int s : monitored) {
        if (!report.per_state_match[s]) report.monitored_success = false;
        int pi_s = attacker.target[s];
        double best_other = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < attacker.q_bar.n_actions(); ++a) {
            if (a != pi_s) best_other = std::max(best_other, attacker.q_bar(s, a));
        }
        report.monitored_gaps.push_back(attacker.q_bar(s, pi_s) - best_other);
    }
    return report;
}

namespace detail {

class BatchEmitter {
  public:
    BatchEmitter(const Model& model, BatchRegime regime) : model_(&model), regime_(regime),
        current_(model.start_state) {}

    std::vector<TransitionSample> emit(const Agent& agent, double epsilon, RngStream& env,
                                       RngStream& agent_rng) {
        const TabularMdp& mdp = model_->mdp;
        std::vector<TransitionSample> batch;
        batch.reserve(static_cast<std::size_t>(mdp.n_states()) * mdp.n_actions());
        if (regime_ == BatchRegime::kFullSweep) {
            for (int s = 0; s < mdp.n_states(); ++s) {
                for (int a = 0; a < mdp.n_actions(); ++a) {
                    batch.push_back(sample_transition(mdp, s, a, env));
                }
            }
        } else {
            const std::size_t batch_size =
                static_cast<std::size_t>(mdp.n_states()) * mdp.n_actions();
            for (std::size_t i = 0; i < batch_size; ++i) {
                int a = act(agent.q(), current_, epsilon, agent_rng);
                TransitionSample sample = sample_transition(mdp, current_, a, env);
                batch.push_back(sample);
                current_ = sample.next_state;
                if (current_ == model_->goal_state) current_ = model_->start_state;
            }
        }
        return batch;
    }

  private:
    const Model* model_;
    BatchRegime regime_;
    int current_;
};

inline void record_metrics(const ExperimentConfig& config, long long k,
                           const AttackerState& attacker, const QTable& agent_q,
                           std::vector<MetricsRow>& out) {
    const Model& model = config.model;
    const int m = model.mdp.n_actions();
    MetricsRow row;
    row.iteration = k;
    auto push_family = [&](auto&& value_at) {
        for (int s : config.monitored_states) {
            for (int a = 0; a < m; ++a) row.values.push_back(value_at(s, a));
        }
    };
    push_family([&](int s, int a) { return attacker.r_bar(s, a); });
    push_family([&](int s, int a) { return attacker.q_bar(s, a); });
    push_family([&](int s, int a) { return attacker.delta(s, a); });
    push_family([&](int s, int a) { return agent_q(s, a); });
    for (int s : config.monitored_states) {
        int pi_s = attacker.target[s];
        double best_other = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < m; ++a) {
            if (a != pi_s) best_other = std::max(best_other, attacker.q_bar(s, a));
        }
        row.values.push_back(attacker.q_bar(s, pi_s) - best_other);
    }
    row.values.push_back(l2_norm(attacker.r_bar - model.mdp.reward_table()));
    row.values.push_back(l2_norm(attacker.delta));
    ConstraintResiduals residuals =
        check_constraints(attacker, model.mdp, model.reach, config.schedules.eps_gap);
    row.values.push_back(residuals.max_abs_bellman());
    row.values.push_back(residuals.min_gap_margin());
    out.push_back(std::move(row));
}

}  // namespace detail

// One seeded trial of the full interaction loop: environment batch, attacker
// poisoning, victim update, attacker updates (steps 5-7), metrics. Bit
// deterministic given (config, seed, trial_index).
inline TrialResult run_trial(const ExperimentConfig& config, std::uint64_t experiment_seed,
                             int trial_index, const TrialObserver& observer = {}) {
    config.validate();
    const Model& model = config.model;
    const TabularMdp& mdp = model.mdp;

    RngStream env_rng = RngStream::for_trial(experiment_seed, trial_index, StreamId::Environment);
    RngStream atk_rng = RngStream::for_trial(experiment_seed, trial_index, StreamId::Attacker);
    RngStream agent_rng = RngStream::for_trial(experiment_seed, trial_index, StreamId::Agent);

    TrialResult result;
    result.trial_index = trial_index;
    result.attacker = AttackerState::initial(mdp, config.target);
    QLearningAgent agent(mdp.n_states(), mdp.n_actions(), mdp.discount(), config.agent);
    detail::BatchEmitter emitter(model, config.batch_regime);

    std::vector<PoisonedSample> poisoned;
    for (long long k = 0; k < config.iterations; ++k) {
        std::vector<TransitionSample> batch =
            emitter.emit(agent, config.agent.exploration_epsilon, env_rng, agent_rng);

        poisoned.clear();
        poisoned.reserve(batch.size());
        for (const TransitionSample& sample : batch) {
            poisoned.push_back(poison_sample(result.attacker, sample, model.reach, atk_rng));
        }

        agent.consume(poisoned, k);

        update_reward(result.attacker, poisoned, config.schedules.alpha.at(k));
        update_qvalue(result.attacker, poisoned, config.schedules.beta.at(k),
                      config.schedules.rho_phi.at(k), config.schedules.eps_gap);
        update_delta(result.attacker, poisoned, config.schedules.lambda.at(k),
                     config.schedules.rho_delta, model.reach);

        // Stealth audit, every iteration.
        for (const PoisonedSample& sample : poisoned) {
            if (!model.reach.contains(sample.state, sample.action, sample.poisoned_next))
                ++result.support_violations;
        }
        for (double d : result.attacker.delta.data()) {
            if (d < 0.0 || d > 1.0) ++result.delta_violations;
        }

        double worst = std::max(result.attacker.r_bar.max_abs(), result.attacker.q_bar.max_abs());
        if (worst > 1e6 || !result.attacker.r_bar.all_finite() || !result.attacker.q_bar.all_finite())
            throw TrialAbort(trial_index, k, "attacker iterate exceeded 1e6; schedules diverged");

        if (observer) observer(k, poisoned, result.attacker);

        if (k % config.snapshot_interval == 0 || k == config.iterations - 1) {
            detail::record_metrics(config, k, result.attacker, agent.q(), result.metrics);
        }
        if (config.attacker_snapshot_interval > 0 && k % config.attacker_snapshot_interval == 0) {
            result.attacker_snapshots.emplace_back(k, result.attacker);
        }
    }

    result.agent_q = agent.q();
    result.agent_policy = greedy_policy(result.agent_q);
    SuccessReport report = attack_success(result.agent_q, result.attacker, config.monitored_states);
    result.success = report.monitored_success;
    return result;
}

struct AggregateRow {
    long long iteration = 0;
    std::vector<double> mean;
    std::vector<double> min;
    std::vector<double> max;
};

struct ExperimentResult {
    MetricsSchema schema;
    std::vector<TrialResult> trials;
    std::vector<AggregateRow> aggregate;

    bool all_succeeded() const {
        for (const TrialResult& t : trials) {
            if (!t.success) return false;
        }
        return true;
    }
};

// Runs `repeats` trials (seeds seed+0 .. seed+repeats-1), concurrently when
// possible, and aggregates per-iteration mean/min/max envelopes per field.
inline ExperimentResult run_experiment(const ExperimentConfig& config,
                                       const TrialObserver& observer = {}) {
    config.validate();
    ExperimentResult result;
    result.schema = make_metrics_schema(config);

    if (observer) {
        // Observers are not required to be thread-safe; run sequentially.
        for (int t = 0; t < config.repeats; ++t) {
            result.trials.push_back(run_trial(config, config.seed, t, observer));
        }
    } else {
        std::vector<std::future<TrialResult>> futures;
        futures.reserve(config.repeats);
        for (int t = 0; t < config.repeats; ++t) {
            futures.push_back(std::async(std::launch::async, [&config, t] {
                return run_trial(config, config.seed, t);
            }));
        }
        for (auto& f : futures) result.trials.push_back(f.get());
    }

    const std::size_t rows = result.trials.front().metrics.size();
    const std::size_t cols = result.schema.fields.size();
    for (std::size_t r = 0; r < rows; ++r) {
        AggregateRow agg;
        agg.iteration = result.trials.front().metrics[r].iteration;
        agg.mean.assign(cols, 0.0);
        agg.min.assign(cols, std::numeric_limits<double>::infinity());
        agg.max.assign(cols, -std::numeric_limits<double>::infinity());
        for (const TrialResult& trial : result.trials) {
            const MetricsRow& row = trial.metrics[r];
            for (std::size_t c = 0; c < cols; ++c) {
                agg.mean[c] += row.values[c];
                agg.min[c] = std::min(agg.min[c], row.values[c]);
                agg.max[c] = std::max(agg.max[c], row.values[c]);
            }
        }
        for (std::size_t c = 0; c < cols; ++c) agg.mean[c] /= static_cast<double>(config.repeats);
        result.aggregate.push_back(std::move(agg));
    }
    return result;
}

struct AblationRow {
    double rho_delta = 0.0;
    double delta_mean = 0.0, delta_min = 0.0, delta_max = 0.0;
    double rdev_mean = 0.0, rdev_min = 0.0, rdev_max = 0.0;
};

// Re-runs the experiment for each rho_delta and summarizes the final
// transition-poisoning intensity and absolute reward deviation at the
// monitored (state, action) pair.
inline std::vector<AblationRow> ablation_rho_delta(const ExperimentConfig& config,
                                                   const std::vector<double>& rho_values) {
    std::vector<AblationRow> rows;
    const int s = config.ablation_state_or_default();
    const int a = config.ablation_action_or_default();
    for (double rho : rho_values) {
        if (!(rho > 0)) throw std::invalid_argument("ablation: rho_delta must be positive");
        ExperimentConfig variant = config;
        variant.schedules.rho_delta = rho;
        ExperimentResult experiment = run_experiment(variant);
        AblationRow row;
        row.rho_delta = rho;
        row.delta_min = std::numeric_limits<double>::infinity();
        row.delta_max = -row.delta_min;
        row.rdev_min = std::numeric_limits<double>::infinity();
        row.rdev_max = -row.rdev_min;
        for (const TrialResult& trial : experiment.trials) {
            double d = trial.attacker.delta(s, a);
            double rdev = std::abs(trial.attacker.r_bar(s, a) - config.model.mdp.reward(s, a));
            row.delta_mean += d;
            row.delta_min = std::min(row.delta_min, d);
            row.delta_max = std::max(row.delta_max, d);
            row.rdev_mean += rdev;
            row.rdev_min = std::min(row.rdev_min, rdev);
            row.rdev_max = std::max(row.rdev_max, rdev);
        }
        row.delta_mean /= static_cast<double>(experiment.trials.size());
        row.rdev_mean /= static_cast<double>(experiment.trials.size());
        rows.push_back(row);
    }
    return rows;
}

}  // namespace poisonlab
