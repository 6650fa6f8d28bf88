#pragma once

// Finite-difference oracle shared by the gradient tests.

#include "hdsac/nn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

namespace testing_util {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kSkipBelow = 1e-6;

inline hdsac::nn::Matrix<double> uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                                double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    hdsac::nn::Matrix<double> m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = u(rng);
    return m;
}

/// Relative error; components where both values are below kSkipBelow count as exact.
inline double rel_error(double analytic, double numeric) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale <= kSkipBelow) return 0.0;
    return std::abs(analytic - numeric) / scale;
}

struct GradReport {
    double max_rel_error = 0.0;
    std::string worst;
    int checked = 0;
};

/// Compares every parameter component of `grads` against central differences
/// of `loss` around `net`.
inline GradReport check_param_grads(const hdsac::nn::Mlp<double>& net, const hdsac::nn::Mlp<double>& grads,
                                    const std::function<double(const hdsac::nn::Mlp<double>&)>& loss) {
    GradReport report;
    auto probe = net;
    auto visit = [&](double& slot, double analytic, const std::string& name) {
        const double saved = slot;
        slot = saved + kFdStep;
        const double up = loss(probe);
        slot = saved - kFdStep;
        const double down = loss(probe);
        slot = saved;
        const double fd = (up - down) / (2.0 * kFdStep);
        const double err = rel_error(analytic, fd);
        ++report.checked;
        if (err > report.max_rel_error) {
            report.max_rel_error = err;
            report.worst = name + " analytic=" + std::to_string(analytic) + " fd=" + std::to_string(fd);
        }
    };
    for (std::size_t k = 0; k < probe.layers.size(); ++k) {
        auto& l = probe.layers[k];
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                visit(l.weight(r, c), grads.layers[k].weight(r, c),
                      "layers[" + std::to_string(k) + "].weight(" + std::to_string(r) + "," + std::to_string(c) + ")");
        for (Eigen::Index r = 0; r < l.bias.size(); ++r)
            visit(l.bias(r), grads.layers[k].bias(r), "layers[" + std::to_string(k) + "].bias(" + std::to_string(r) + ")");
    }
    return report;
}

}  // namespace testing_util
