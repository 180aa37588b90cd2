#include <gtest/gtest.h>

#include "poisonlab/agent.hpp"
#include "poisonlab/mdp.hpp"
#include "poisonlab/testbeds.hpp"
#include "support/oracles.hpp"

using namespace poisonlab;

namespace {

PoisonedSample sample_of(int s, int a, double reward, int next) {
    PoisonedSample p;
    p.state = s;
    p.action = a;
    p.true_reward = reward;
    p.poisoned_reward = reward;
    p.true_next = next;
    p.poisoned_next = next;
    return p;
}

TEST(AgentUpdate, FullReplacementAtGammaZero) {
    QTable q(2, 2, 0.0);
    std::vector<PoisonedSample> batch{sample_of(0, 1, 3.0, 1)};
    agent_update(q, batch, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(q(0, 1), 3.0);
}

TEST(AgentUpdate, EmptyBatchLeavesQUntouched) {
    QTable q(2, 2, 0.5);
    std::vector<PoisonedSample> batch;
    QLearningAgent agent(2, 2, 0.9, AgentConfig{});
    agent.consume(batch, 0);
    EXPECT_DOUBLE_EQ(agent.q()(0, 0), 0.0);
    agent_update(q, batch, 0.9, 0.5);
    EXPECT_DOUBLE_EQ(q(1, 1), 0.5);
}

TEST(AgentUpdate, DirectRuleEvaluation) {
    // lr=0.5, q(s,a)=0, r=1, gamma=0.9, max next q = 2 -> q(s,a) = 1.4
    QTable q(2, 2, 0.0);
    q(1, 0) = 2.0;
    q(1, 1) = 1.0;
    std::vector<PoisonedSample> batch{sample_of(0, 0, 1.0, 1)};
    agent_update(q, batch, 0.9, 0.5);
    EXPECT_DOUBLE_EQ(q(0, 0), 1.4);
}

TEST(AgentUpdate, ContractionTowardSampleTarget) {
    QTable q(2, 2, 0.0);
    q(0, 0) = 5.0;
    q(1, 0) = 2.0;
    double target = 1.0 + 0.9 * 2.0;
    for (double lr : {0.1, 0.5, 0.9}) {
        QTable before = q;
        std::vector<PoisonedSample> batch{sample_of(0, 0, 1.0, 1)};
        agent_update(before, batch, 0.9, lr);
        EXPECT_NEAR(std::abs(before(0, 0) - target), (1.0 - lr) * std::abs(q(0, 0) - target), 1e-12);
    }
}

TEST(AgentUpdate, UntouchedEntriesBitIdentical) {
    QTable q(3, 2, 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) q.data()[i] = 0.1 * static_cast<double>(i) - 0.2;
    QTable before = q;
    std::vector<PoisonedSample> batch{sample_of(1, 0, 1.0, 2)};
    agent_update(q, batch, 0.9, 0.3);
    for (int s = 0; s < 3; ++s) {
        for (int a = 0; a < 2; ++a) {
            if (s == 1 && a == 0) continue;
            EXPECT_EQ(q(s, a), before(s, a));  // exact bit equality
        }
    }
}

TEST(GreedyPolicy, ArgmaxAndTieBreak) {
    QTable q(2, 4, 0.0);
    q(0, 0) = 1; q(0, 1) = 3; q(0, 2) = 2; q(0, 3) = 0;
    Policy policy = greedy_policy(q);
    EXPECT_EQ(policy[0], 1);
    EXPECT_EQ(policy[1], 0);  // all-equal row: lowest index wins
}

TEST(GreedyPolicy, RecoversOptimalPolicyOnChain) {
    // two-state chain: action 1 moves toward state 1 which pays off
    std::vector<double> transition = {
        1.0, 0.0,  0.0, 1.0,   // s0: a0 stay, a1 go
        1.0, 0.0,  0.0, 1.0,   // s1: a0 back to s0, a1 stay
    };
    Table2 reward(2, 2, 0.0);
    reward(1, 1) = 1.0;
    TabularMdp mdp(2, 2, transition, reward, 0.9);
    Policy optimal{1, 1};
    // value iteration oracle agrees that {1,1} is optimal
    Table2 vi = optimal_q(mdp);
    EXPECT_EQ(greedy_policy(vi), optimal);
    Table2 q = exact_policy_q(mdp, optimal);
    EXPECT_EQ(greedy_policy(q), optimal);
}

TEST(Act, GreedyWhenEpsilonZero) {
    QTable q(1, 3, 0.0);
    q(0, 2) = 1.0;
    RngStream rng(5);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(act(q, 0, 0.0, rng), 2);
}

TEST(Act, UniformWhenEpsilonOne) {
    QTable q(1, 4, 0.0);
    q(0, 1) = 9.0;
    RngStream rng(17);
    const int n = 100000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) ++counts[act(q, 0, 1.0, rng)];
    for (int a = 0; a < 4; ++a) EXPECT_NEAR(counts[a] / double(n), 0.25, 0.02);
}

TEST(Act, SingleActionAlwaysChosen) {
    QTable q(1, 1, 0.0);
    RngStream rng(3);
    for (double eps : {0.0, 0.5, 1.0}) EXPECT_EQ(act(q, 0, eps, rng), 0);
}

TEST(QLearning, ConvergesToOptimalQOnCleanData) {
    // 3-state chain, full sweep of one sample per (s,a) per iteration,
    // decaying learning rate: q approaches the optimal Q of the true MDP.
    Model model = testbeds::chain3_model();
    const TabularMdp& mdp = model.mdp;
    AgentConfig config;
    config.lr_base = 1.0;
    config.lr_tau = 5.0;
    QLearningAgent agent(3, 2, mdp.discount(), config);
    RngStream rng(2024);
    for (long long k = 0; k < 100000; ++k) {
        std::vector<PoisonedSample> batch;
        for (int s = 0; s < 3; ++s) {
            for (int a = 0; a < 2; ++a) {
                TransitionSample t = sample_transition(mdp, s, a, rng);
                batch.push_back(sample_of(s, a, t.reward, t.next_state));
            }
        }
        agent.consume(batch, k);
    }
    Table2 reference = optimal_q(mdp);
    EXPECT_LE(max_abs_diff(agent.q(), reference), 1e-2);
}

}  // namespace
