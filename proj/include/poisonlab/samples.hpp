#pragma once

namespace poisonlab {

// One intercepted environment record <s, a, r, s'>.
struct TransitionSample {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
};

// A record after man-in-the-middle manipulation. The agent only ever sees
// (state, action, poisoned_reward, poisoned_next); the true reward and true
// next state are retained because the attacker's own updates need them.
struct PoisonedSample {
    int state = 0;
    int action = 0;
    double true_reward = 0.0;
    double poisoned_reward = 0.0;
    int true_next = 0;
    int poisoned_next = 0;
};

}  // namespace poisonlab
