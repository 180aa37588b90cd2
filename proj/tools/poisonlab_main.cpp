// poisonlab command line: run poisoning experiments from config files, run
// gradient/oracle validation suites, and render CSV metrics as SVG charts.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "poisonlab/poisonlab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace poisonlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitFailed = 2;

std::string default_out_dir() {
    const char* env = std::getenv("POISONLAB_OUT");
    return env && *env ? env : "out";
}

struct Overrides {
    std::int64_t seed = -1;
    std::int64_t iterations = -1;
    int repeats = -1;

    void apply(ExperimentConfig& config) const {
        if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
        if (iterations >= 0) config.iterations = iterations;
        if (repeats >= 0) config.repeats = repeats;
    }
};

void write_run_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                       const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_metrics_csv(out_dir + "/metrics.csv", result.schema, result.trials);
    write_aggregate_csv(out_dir + "/aggregate.csv", result.schema, result.aggregate);
    write_reward_csv(out_dir + "/mdp_rewards.csv", config.model.mdp);
    write_transition_csv(out_dir + "/mdp_transitions.csv", config.model.mdp);

    AttackerState mean_state = result.trials.front().attacker;
    for (std::size_t i = 0; i < mean_state.r_bar.size(); ++i) {
        double r = 0.0, q = 0.0, d = 0.0;
        for (const TrialResult& trial : result.trials) {
            r += trial.attacker.r_bar.data()[i];
            q += trial.attacker.q_bar.data()[i];
            d += trial.attacker.delta.data()[i];
        }
        double inv = 1.0 / static_cast<double>(result.trials.size());
        mean_state.r_bar.data()[i] = r * inv;
        mean_state.q_bar.data()[i] = q * inv;
        mean_state.delta.data()[i] = d * inv;
    }
    write_attacker_csv(out_dir + "/attacker_final_mean.csv", mean_state);

    for (const TrialResult& trial : result.trials) {
        std::string suffix = "_trial" + std::to_string(trial.trial_index) + ".csv";
        write_qtable_csv(out_dir + "/agent_q" + suffix, trial.agent_q);
        write_attacker_csv(out_dir + "/attacker_final" + suffix, trial.attacker);
        ConstraintResiduals residuals = check_constraints(trial.attacker, config.model.mdp,
                                                          config.model.reach,
                                                          config.schedules.eps_gap);
        write_residuals_csv(out_dir + "/residuals" + suffix, residuals);
        for (const auto& [iteration, snapshot] : trial.attacker_snapshots) {
            write_attacker_csv(out_dir + "/attacker_trial" + std::to_string(trial.trial_index) +
                                   "_iter" + std::to_string(iteration) + ".csv",
                               snapshot);
        }
    }
}

json summary_of(const ExperimentConfig& config, const ExperimentResult& result) {
    json trials = json::array();
    for (const TrialResult& trial : result.trials) {
        SuccessReport report = attack_success(trial.agent_q, trial.attacker, config.monitored_states);
        json gaps = json::object();
        for (std::size_t i = 0; i < config.monitored_states.size(); ++i) {
            gaps[config.model.state_labels[config.monitored_states[i]]] = report.monitored_gaps[i];
        }
        trials.push_back({{"trial", trial.trial_index},
                          {"success", trial.success},
                          {"match_rate", report.match_rate},
                          {"final_gaps", gaps},
                          {"support_violations", trial.support_violations},
                          {"delta_violations", trial.delta_violations}});
    }
    json monitored = json::array();
    for (int s : config.monitored_states) monitored.push_back(config.model.state_labels[s]);
    return json{{"success", result.all_succeeded()},
                {"monitored_states", monitored},
                {"repeats", config.repeats},
                {"iterations", config.iterations},
                {"seed", config.seed},
                {"trials", trials}};
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const Overrides& overrides) {
    ExperimentConfig config = load_experiment_config(config_path);
    overrides.apply(config);
    config.validate();
    ExperimentResult result = run_experiment(config);
    write_run_outputs(config, result, out_dir);
    json summary = summary_of(config, result);
    {
        std::ofstream out = open_output(out_dir + "/summary.json");
        out << summary.dump(2) << '\n';
    }
    std::cout << summary.dump(2) << '\n';
    return result.all_succeeded() ? kExitOk : kExitFailed;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               const Overrides& overrides, std::vector<double> rho_values) {
    ExperimentConfig config = load_experiment_config(config_path);
    overrides.apply(config);
    config.validate();
    if (rho_values.empty()) rho_values = {0.5, 2.0, 8.0};
    std::vector<AblationRow> rows = ablation_rho_delta(config, rho_values);
    fs::create_directories(out_dir);
    write_ablation_csv(out_dir + "/ablation.csv", rows);
    for (const AblationRow& row : rows) {
        std::cout << "rho_delta=" << fmt_double(row.rho_delta)
                  << " final_delta_mean=" << fmt_double(row.delta_mean)
                  << " final_rdev_mean=" << fmt_double(row.rdev_mean) << '\n';
    }
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, int points, bool corrupt) {
    GradCheckReport report = run_gradcheck(seed, points, 4, 3, corrupt);
    bool pass = report.pass(1e-5);
    for (const EquationReport& eq : report.equations) {
        std::cout << eq.name << ": max scaled error = " << fmt_double(eq.max_error)
                  << (eq.max_error <= 1e-5 ? "  [ok]" : "  [FAIL]") << '\n';
    }
    std::cout << (pass ? "gradcheck: all gradients within 1e-5\n"
                       : "gradcheck: tolerance exceeded\n");
    return pass ? kExitOk : kExitFailed;
}

struct ConstraintSummary {
    double max_bellman = 0.0;
    double min_gap_own = 0.0;
    double min_gap_exact = 0.0;
    bool pass = false;
};

ConstraintSummary summarize_constraints(const AttackerState& state, const Model& model,
                                        double eps) {
    ConstraintSummary summary;
    ConstraintResiduals own = check_constraints(state, model.mdp, model.reach, eps);
    summary.max_bellman = own.max_abs_bellman();
    summary.min_gap_own = own.min_gap_margin();

    AttackerState exact = state;
    exact.q_bar = exact_policy_q(poisoned_mdp(model.mdp, state.r_bar, state.delta, model.reach),
                                 state.target);
    ConstraintResiduals recomputed = check_constraints(exact, model.mdp, model.reach, eps);
    summary.min_gap_exact = recomputed.min_gap_margin();
    summary.pass = summary.max_bellman <= 1e-2 && summary.min_gap_own >= -1e-2 &&
                   summary.min_gap_exact >= -1e-2;
    return summary;
}

int cmd_oracle_compare(std::uint64_t seed, long long iterations) {
    Model model = testbeds::chain3_model();
    Policy target = testbeds::chain3_target();
    Schedules schedules = testbeds::chain3_schedules();

    AttackerState white = whitebox_attack(model.mdp, target, schedules, iterations).state;

    AttackerState stoch = AttackerState::initial(model.mdp, target);
    if (iterations > 0) {
        ExperimentConfig config = testbeds::chain3_config(iterations);
        config.seed = seed;
        stoch = run_trial(config, config.seed, 0).attacker;
    }

    double r_diff = max_abs_diff(stoch.r_bar, white.r_bar);
    double d_diff = max_abs_diff(stoch.delta, white.delta);
    ConstraintSummary white_summary = summarize_constraints(white, model, schedules.eps_gap);
    ConstraintSummary stoch_summary = summarize_constraints(stoch, model, schedules.eps_gap);

    std::cout << "max |r_bar_stoch - r_bar_white| = " << fmt_double(r_diff) << '\n';
    std::cout << "max |delta_stoch - delta_white| = " << fmt_double(d_diff) << '\n';
    auto print = [](const char* name, const ConstraintSummary& s) {
        std::cout << name << ": max|bellman|=" << fmt_double(s.max_bellman)
                  << " min_gap(own)=" << fmt_double(s.min_gap_own)
                  << " min_gap(exact_policy_q)=" << fmt_double(s.min_gap_exact)
                  << (s.pass ? "  [ok]" : "  [FAIL]") << '\n';
    };
    print("whitebox ", white_summary);
    print("stochastic", stoch_summary);
    return (white_summary.pass && stoch_summary.pass) ? kExitOk : kExitFailed;
}

int cmd_plot(const std::string& aggregate, const std::string& attacker, const std::string& ablation,
             const std::string& out_dir, const std::string& format) {
    if (format != "svg") throw std::runtime_error("unsupported --format '" + format + "' (only svg)");
    if (aggregate.empty() && attacker.empty() && ablation.empty())
        throw std::runtime_error("plot: provide at least one of --aggregate/--attacker/--ablation");
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    if (!aggregate.empty()) {
        for (auto& f : plot_trajectories(aggregate, out_dir)) written.push_back(std::move(f));
    }
    if (!attacker.empty()) {
        for (auto& f : plot_attacker_heat(attacker, out_dir)) written.push_back(std::move(f));
    }
    if (!ablation.empty()) {
        for (auto& f : plot_ablation(ablation, out_dir)) written.push_back(std::move(f));
    }
    for (const std::string& f : written) std::cout << "wrote " << f << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online environment poisoning laboratory for tabular RL victims"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = default_out_dir();
    Overrides overrides;
    std::vector<double> rho_values;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config file");
        if (needs_config) opt->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "output directory (env POISONLAB_OUT)");
        cmd->add_option("--seed", overrides.seed, "seed override");
        cmd->add_option("--iterations", overrides.iterations, "iteration count override");
        cmd->add_option("--repeats", overrides.repeats, "repeat count override");
    };

    CLI::App* run = app.add_subcommand("run", "run the poisoning experiment from a config");
    add_common(run, true);

    CLI::App* ablate = app.add_subcommand("ablate", "sweep rho_delta and record the trade-off");
    add_common(ablate, true);
    ablate->add_option("--rho-delta", rho_values, "rho_delta values")->delimiter(',');

    std::uint64_t tool_seed = 20240601;
    int gradcheck_points = 20;
    bool corrupt = false;
    CLI::App* gradcheck = app.add_subcommand("gradcheck",
                                             "finite-difference check of all analytic gradients");
    gradcheck->add_option("--seed", tool_seed, "rng seed for the random test instance");
    gradcheck->add_option("--points", gradcheck_points, "number of random evaluation points");
    gradcheck->add_flag("--corrupt", corrupt,
                        "negative control: skew one gradient and expect failure");

    long long compare_iters = 10000;
    CLI::App* oracle = app.add_subcommand(
        "oracle-compare", "stochastic attack vs white-box full-gradient attack on a small MDP");
    oracle->add_option("--seed", tool_seed, "seed for the stochastic attack");
    oracle->add_option("--iterations", compare_iters, "iteration budget for both attacks");

    std::string aggregate_csv, attacker_csv, ablation_csv, format = "svg";
    CLI::App* plot = app.add_subcommand("plot", "render CSV outputs as SVG charts");
    plot->add_option("--aggregate", aggregate_csv, "aggregate.csv from 'run'")->check(CLI::ExistingFile);
    plot->add_option("--attacker", attacker_csv, "attacker_final CSV from 'run'")->check(CLI::ExistingFile);
    plot->add_option("--ablation", ablation_csv, "ablation.csv from 'ablate'")->check(CLI::ExistingFile);
    plot->add_option("--out", out_dir, "output directory (env POISONLAB_OUT)");
    plot->add_option("--format", format, "chart format (svg)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, overrides);
        if (ablate->parsed()) return cmd_ablate(config_path, out_dir, overrides, rho_values);
        if (gradcheck->parsed()) return cmd_gradcheck(tool_seed, gradcheck_points, corrupt);
        if (oracle->parsed()) return cmd_oracle_compare(tool_seed, compare_iters);
        if (plot->parsed()) return cmd_plot(aggregate_csv, attacker_csv, ablation_csv, out_dir, format);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
