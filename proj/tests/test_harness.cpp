#include <gtest/gtest.h>

#include "poisonlab/harness.hpp"
#include "poisonlab/testbeds.hpp"

using namespace poisonlab;

namespace {

ExperimentConfig small_maze_config(long long iterations) {
    ExperimentConfig config = testbeds::default_maze_config();
    config.iterations = iterations;
    config.repeats = 2;
    config.snapshot_interval = 50;
    return config;
}

TEST(TargetPath, DefaultMazeFollowsLeftCorridorThenBottomRow) {
    ExperimentConfig config = testbeds::default_maze_config();
    const MazeLayout& layout = *config.model.layout;
    ASSERT_EQ(config.monitored_states.size(), 10u);
    std::vector<std::string> labels;
    for (int s : config.monitored_states) labels.push_back(layout.state_label(s));
    std::vector<std::string> expected = {"s1_1", "s2_1", "s3_1", "s4_1", "s5_1",
                                         "s6_1", "s6_2", "s6_3", "s6_4", "s6_5"};
    EXPECT_EQ(labels, expected);
    // the target policy heads down at the intersection state (1,1)
    EXPECT_EQ(config.target[config.model.start_state], kDown);
}

TEST(MetricsSchema, UsesMazeCoordinateLabels) {
    ExperimentConfig config = testbeds::default_maze_config();
    MetricsSchema schema = make_metrics_schema(config);
    EXPECT_NO_THROW(schema.index_of("qbar_s1_1_down"));
    EXPECT_NO_THROW(schema.index_of("delta_s6_5_right"));
    EXPECT_NO_THROW(schema.index_of("gap_s1_1"));
    EXPECT_NO_THROW(schema.index_of("reward_deviation_norm"));
    EXPECT_NO_THROW(schema.index_of("min_gap_margin"));
    EXPECT_THROW(schema.index_of("qbar_s0_a0"), std::out_of_range);
}

TEST(RunTrial, DeterministicGivenSeed) {
    ExperimentConfig config = small_maze_config(300);
    TrialResult a = run_trial(config, config.seed, 0);
    TrialResult b = run_trial(config, config.seed, 0);
    ASSERT_EQ(a.metrics.size(), b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        EXPECT_EQ(a.metrics[i].iteration, b.metrics[i].iteration);
        EXPECT_EQ(a.metrics[i].values, b.metrics[i].values);  // exact double equality
    }
    EXPECT_EQ(a.attacker.r_bar.data(), b.attacker.r_bar.data());
    EXPECT_EQ(a.attacker.delta.data(), b.attacker.delta.data());
    EXPECT_EQ(a.agent_q.data(), b.agent_q.data());

    TrialResult c = run_trial(config, config.seed, 1);
    EXPECT_NE(a.agent_q.data(), c.agent_q.data());  // different trial, different draws
}

TEST(RunTrial, EnvironmentDrawsIsolatedFromAttackerAndAgentRandomness) {
    // Same seed, radically different attacker schedules and agent exploration:
    // the TRUE transition stream must be identical sample for sample.
    auto capture = [](const ExperimentConfig& config) {
        std::vector<std::tuple<int, int, int>> stream;
        TrialObserver observer = [&](long long, std::span<const PoisonedSample> batch,
                                     const AttackerState&) {
            for (const PoisonedSample& p : batch) stream.emplace_back(p.state, p.action, p.true_next);
        };
        run_trial(config, config.seed, 0, observer);
        return stream;
    };

    ExperimentConfig attacked = small_maze_config(60);
    attacked.repeats = 1;

    ExperimentConfig passive = attacked;
    passive.schedules.alpha.base = 0.0;
    passive.schedules.beta.base = 0.0;
    passive.schedules.lambda.base = 0.0;
    passive.agent.exploration_epsilon = 1.0;

    EXPECT_EQ(capture(attacked), capture(passive));
}

TEST(RunTrial, ZeroAttackerStepsLetVictimLearnTrueOptimum) {
    ExperimentConfig config = small_maze_config(3000);
    config.repeats = 1;
    config.schedules.alpha.base = 0.0;
    config.schedules.beta.base = 0.0;
    config.schedules.lambda.base = 0.0;
    TrialResult trial = run_trial(config, config.seed, 0);
    // attacker state never moves
    EXPECT_EQ(trial.attacker.r_bar.data(), config.model.mdp.reward_table().data());
    EXPECT_DOUBLE_EQ(l2_norm(trial.attacker.delta), 0.0);
    // the unpoisoned optimal action at (1,1) is 'right'
    EXPECT_EQ(trial.agent_policy[config.model.start_state], kRight);
}

TEST(RunTrial, SingleAlphaIterationTouchesOnlyRewards) {
    ExperimentConfig config = small_maze_config(1);
    config.repeats = 1;
    config.schedules.beta.base = 0.0;
    config.schedules.lambda.base = 0.0;
    TrialResult trial = run_trial(config, config.seed, 0);
    AttackerState init = AttackerState::initial(config.model.mdp, config.target);
    EXPECT_NE(trial.attacker.r_bar.data(), init.r_bar.data());
    EXPECT_EQ(trial.attacker.q_bar.data(), init.q_bar.data());
    EXPECT_EQ(trial.attacker.delta.data(), init.delta.data());
}

TEST(RunTrial, AbortsOnDivergentSchedules) {
    ExperimentConfig config = small_maze_config(4000);
    config.repeats = 1;
    config.schedules.alpha = DecaySchedule{800.0, 1e9, 0.0};
    config.schedules.beta = DecaySchedule{800.0, 1e9, 0.0};
    try {
        run_trial(config, config.seed, 0);
        FAIL() << "expected TrialAbort";
    } catch (const TrialAbort& abort) {
        EXPECT_EQ(abort.trial, 0);
        EXPECT_GE(abort.iteration, 0);
    }
}

TEST(RunTrial, AttackerSnapshotsFollowConfiguredInterval) {
    ExperimentConfig config = small_maze_config(100);
    config.attacker_snapshot_interval = 25;
    TrialResult trial = run_trial(config, config.seed, 0);
    ASSERT_EQ(trial.attacker_snapshots.size(), 4u);  // k = 0, 25, 50, 75
    EXPECT_EQ(trial.attacker_snapshots[1].first, 25);
    EXPECT_TRUE(trial.attacker_snapshots[1].second.r_bar.all_finite());
}

TEST(RunTrial, StealthCountersStayZero) {
    ExperimentConfig config = small_maze_config(200);
    TrialResult trial = run_trial(config, config.seed, 0);
    EXPECT_EQ(trial.support_violations, 0);
    EXPECT_EQ(trial.delta_violations, 0);
}

TEST(RunTrial, OnPolicyRegimeRunsDeterministically) {
    ExperimentConfig config = small_maze_config(50);
    config.batch_regime = BatchRegime::kOnPolicy;
    // rollout batches revisit the same (s,a) many times per iteration, so the
    // per-sample steps must be much smaller than in the full-sweep regime
    config.schedules.alpha.base = 0.05;
    config.schedules.beta.base = 0.005;
    config.schedules.lambda.base = 0.005;
    std::vector<std::size_t> batch_sizes;
    TrialObserver observer = [&](long long, std::span<const PoisonedSample> batch,
                                 const AttackerState&) { batch_sizes.push_back(batch.size()); };
    TrialResult a = run_trial(config, config.seed, 0, observer);
    TrialResult b = run_trial(config, config.seed, 0);
    EXPECT_EQ(a.agent_q.data(), b.agent_q.data());
    const std::size_t expected =
        static_cast<std::size_t>(config.model.mdp.n_states()) * config.model.mdp.n_actions();
    for (std::size_t size : batch_sizes) EXPECT_EQ(size, expected);
}

TEST(RunExperiment, SingleRepeatCollapsesEnvelopes) {
    ExperimentConfig config = small_maze_config(120);
    config.repeats = 1;
    ExperimentResult result = run_experiment(config);
    for (const AggregateRow& row : result.aggregate) {
        EXPECT_EQ(row.mean, row.min);
        EXPECT_EQ(row.mean, row.max);
    }
}

TEST(RunExperiment, EnvelopesBracketMeanAndTrialsMatchSeeds) {
    ExperimentConfig config = small_maze_config(120);
    config.repeats = 3;
    ExperimentResult result = run_experiment(config);
    ASSERT_EQ(result.trials.size(), 3u);
    for (int t = 0; t < 3; ++t) {
        TrialResult lone = run_trial(config, config.seed, t);
        EXPECT_EQ(result.trials[t].agent_q.data(), lone.agent_q.data());
    }
    for (const AggregateRow& row : result.aggregate) {
        for (std::size_t c = 0; c < row.mean.size(); ++c) {
            EXPECT_LE(row.min[c], row.mean[c] + 1e-12);
            EXPECT_GE(row.max[c], row.mean[c] - 1e-12);
        }
    }
}

TEST(AttackSuccess, ReportsMatchesAndGaps) {
    Model model = testbeds::chain3_model();
    Policy target = testbeds::chain3_target();
    AttackerState attacker = AttackerState::initial(model.mdp, target);
    for (int s = 0; s < 3; ++s) {
        attacker.q_bar(s, target[s]) = 2.0;  // gaps of 2 everywhere
    }
    QTable agent_q = attacker.q_bar;
    SuccessReport report = attack_success(agent_q, attacker, {0, 1, 2});
    EXPECT_TRUE(report.monitored_success);
    EXPECT_DOUBLE_EQ(report.match_rate, 1.0);
    for (double gap : report.monitored_gaps) EXPECT_DOUBLE_EQ(gap, 2.0);

    // untrained all-zero victim: tie-break picks action 0, target wants 1
    QTable zeros(3, 2, 0.0);
    SuccessReport fail = attack_success(zeros, attacker, {0, 1, 2});
    EXPECT_FALSE(fail.monitored_success);
    EXPECT_DOUBLE_EQ(fail.match_rate, 0.0);
}

TEST(Ablation, SingleValueMatchesPlainExperiment) {
    ExperimentConfig config = small_maze_config(150);
    config.repeats = 2;
    std::vector<AblationRow> rows = ablation_rho_delta(config, {config.schedules.rho_delta});
    ASSERT_EQ(rows.size(), 1u);
    ExperimentResult direct = run_experiment(config);
    int s = config.ablation_state_or_default();
    int a = config.ablation_action_or_default();
    double mean = 0.0;
    for (const TrialResult& t : direct.trials) mean += t.attacker.delta(s, a);
    mean /= 2.0;
    EXPECT_DOUBLE_EQ(rows[0].delta_mean, mean);
    EXPECT_EQ(s, config.model.start_state);
    EXPECT_EQ(a, kDown);
}

}  // namespace
