#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace poisonlab {

// Dense (state, action) table of doubles, the basic currency of the library.
class Table2 {
  public:
    Table2() = default;
    Table2(int n_states, int n_actions, double fill = 0.0)
        : n_states_(n_states), n_actions_(n_actions),
          data_(static_cast<std::size_t>(n_states) * n_actions, fill) {}

    double& operator()(int s, int a) { return data_[index(s, a)]; }
    double operator()(int s, int a) const { return data_[index(s, a)]; }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    std::size_t size() const { return data_.size(); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Table2& other) const {
        return n_states_ == other.n_states_ && n_actions_ == other.n_actions_;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(),
                           [](double v) { return std::isfinite(v); });
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    friend Table2 operator-(const Table2& a, const Table2& b) {
        assert(a.same_shape(b));
        Table2 out(a.n_states_, a.n_actions_);
        for (std::size_t i = 0; i < a.data_.size(); ++i) out.data_[i] = a.data_[i] - b.data_[i];
        return out;
    }

  private:
    std::size_t index(int s, int a) const {
        assert(s >= 0 && s < n_states_ && a >= 0 && a < n_actions_);
        return static_cast<std::size_t>(s) * n_actions_ + a;
    }

    int n_states_ = 0;
    int n_actions_ = 0;
    std::vector<double> data_;
};

inline double l2_norm(const Table2& t) {
    double acc = 0.0;
    for (double v : t.data()) acc += v * v;
    return std::sqrt(acc);
}

inline double max_abs_diff(const Table2& a, const Table2& b) {
    return (a - b).max_abs();
}

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Deterministic state -> action map.
using Policy = std::vector<int>;

}  // namespace poisonlab
