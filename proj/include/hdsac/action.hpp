#pragma once

#include <algorithm>
#include <cmath>

namespace hdsac {

/// Normalized control command. steer maps to +-max wheel angle, accel maps
/// piecewise-linearly onto [max brake, max acceleration].
struct Action {
    double steer = 0.0;
    double accel = 0.0;

    static constexpr int kDim = 2;

    Action clamped() const { return {std::clamp(steer, -1.0, 1.0), std::clamp(accel, -1.0, 1.0)}; }

    friend bool operator==(const Action&, const Action&) = default;
};

/// Infinity-norm distance between two actions.
inline double max_abs_difference(const Action& a, const Action& b) {
    return std::max(std::abs(a.steer - b.steer), std::abs(a.accel - b.accel));
}

}  // namespace hdsac
