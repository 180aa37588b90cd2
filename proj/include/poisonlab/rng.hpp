#pragma once

#include <cstdint>
#include <random>

namespace poisonlab {

// splitmix64 step, used only to spread user seeds into full-entropy state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Named sub-streams of a trial. A trial derives one generator per stream so
// that, e.g., toggling agent exploration never perturbs environment draws.
enum class StreamId : std::uint64_t {
    Environment = 1,
    Attacker = 2,
    Agent = 3,
};

// Deterministic random stream. All draws go through the helpers below rather
// than std::*_distribution, whose output is implementation-defined; this keeps
// runs byte-reproducible across standard libraries.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    static RngStream for_trial(std::uint64_t experiment_seed, std::uint64_t trial_index,
                               StreamId id) {
        // Splitting rule: trial t uses experiment_seed + t, then one splitmix64
        // walk per stream id.
        std::uint64_t s = experiment_seed + trial_index;
        std::uint64_t mixed = splitmix64(s);
        for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(id); ++i) {
            mixed = splitmix64(s);
        }
        return RngStream(mixed);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, n). Rejection sampling keeps it exactly uniform.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    int uniform_index(int n) { return static_cast<int>(uniform_below(static_cast<std::uint64_t>(n))); }

  private:
    std::mt19937_64 engine_;
};

}  // namespace poisonlab
