#pragma once

#include <Eigen/Dense>

#include "mgt/grid.hpp"

namespace mgt {

/// Uniform time grid t_n = n dt, n = 0..steps.
struct TimeGrid {
    double dt = 1e-3;
    int steps = 1000;

    double T() const { return dt * steps; }
    double t(int n) const { return dt * n; }
    double mid(int n) const { return dt * (n + 0.5); }

    static TimeGrid from_horizon(double T, double dt);
};

enum class Support { Box, Omega, Exterior };

/// Field over grid x time. Only the rows of the tagged index set are stored;
/// to_box() scatters them into a full box field whose other rows are exactly 0.
struct SpaceTimeField {
    Support support = Support::Omega;
    Eigen::MatrixXd values;  ///< rows: nodes of the support set, cols: time nodes
    double dt = 0.0;

    int steps() const { return static_cast<int>(values.cols()) - 1; }
    double T() const { return dt * steps(); }
    Eigen::MatrixXd to_box(const Grid& grid) const;
};

/// Column order reversed: h*(t_n) = h(t_{M-n}).
Eigen::MatrixXd reverse_time(const Eigen::MatrixXd& values);

/// Composite trapezoid rule over equally spaced samples.
double trapezoid(const Eigen::VectorXd& samples, double dt);

/// Trapezoid in time of the h^d-weighted pointwise product of two Omega fields.
double spacetime_inner(const Grid& grid, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double dt);

/// h^d-weighted Euclidean norm.
double grid_norm(const Grid& grid, const Eigen::VectorXd& v);

}  // namespace mgt
