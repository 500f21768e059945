#include "mgt/field.hpp"

#include <cmath>

#include "mgt/errors.hpp"

namespace mgt {

TimeGrid TimeGrid::from_horizon(double T, double dt) {
    if (!(T > 0.0) || !(dt > 0.0)) throw ConfigError("T and dt must be positive");
    TimeGrid g;
    g.steps = static_cast<int>(std::llround(T / dt));
    if (g.steps < 1) throw ConfigError("dt exceeds T");
    g.dt = T / g.steps;
    return g;
}

Eigen::MatrixXd SpaceTimeField::to_box(const Grid& grid) const {
    if (support == Support::Box) return values;
    const auto& idx = support == Support::Omega ? grid.omega : grid.omega_e;
    if (static_cast<Eigen::Index>(idx.size()) != values.rows())
        throw ShapeMismatch("field rows do not match its support set");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(grid.n_tot, values.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(idx[i]) = values.row(i);
    return out;
}

Eigen::MatrixXd reverse_time(const Eigen::MatrixXd& values) {
    return values.rowwise().reverse();
}

double trapezoid(const Eigen::VectorXd& samples, double dt) {
    const Eigen::Index n = samples.size();
    if (n < 2) return 0.0;
    return dt * (samples.sum() - 0.5 * (samples(0) + samples(n - 1)));
}

double spacetime_inner(const Grid& grid, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double dt) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("spacetime_inner shapes differ");
    const Eigen::VectorXd per_time = (a.array() * b.array()).colwise().sum().transpose();
    return grid.cell() * trapezoid(per_time, dt);
}

double grid_norm(const Grid& grid, const Eigen::VectorXd& v) {
    return std::sqrt(grid.cell() * v.squaredNorm());
}

}  // namespace mgt
