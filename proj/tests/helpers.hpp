#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "mgt/grid.hpp"
#include "mgt/linearize.hpp"

namespace testutil {

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = nd(rng);
    return v;
}

// exp(-x^2 / (2 w^2)) sampled on omega.
inline Eigen::VectorXd bump(const mgt::Grid& g, double amp, double w) {
    Eigen::VectorXd q(g.n_omega());
    for (int k = 0; k < g.n_omega(); ++k) {
        const double x = g.coord(g.omega[k]);
        q(k) = amp * std::exp(-x * x / (2.0 * w * w));
    }
    return q;
}

inline double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double s = std::max(a.norm(), b.norm());
    return s > 0.0 ? (a - b).norm() / s : 0.0;
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double k = 0.0, r2 = 0.0;
    mgt::fit_loglog(x, y, k, r2);
    return k;
}

}  // namespace testutil
