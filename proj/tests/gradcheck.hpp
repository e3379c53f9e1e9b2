// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference oracle shared by the gradient tests.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>

namespace gradcheck {

// Fourth-order central difference of f at x along every coordinate.
inline Eigen::MatrixXd numeric(const std::function<double(const Eigen::MatrixXd&)>& f, Eigen::MatrixXd x,
                               double h = 1e-3) {
    Eigen::MatrixXd g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double x0 = x(i);
        auto at = [&](double d) {
            x(i) = x0 + d;
            return f(x);
        };
        g(i) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
        x(i) = x0;
    }
    return g;
}

// Largest entrywise |a - b| / max(|a|, |b|, floor).
inline double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-6) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = std::max({std::abs(a(i)), std::abs(b(i)), floor});
        worst = std::max(worst, std::abs(a(i) - b(i)) / d);
    }
    return worst;
}

}  // namespace gradcheck
