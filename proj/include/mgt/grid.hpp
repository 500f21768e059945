#pragma once

#include <vector>

namespace mgt {

/// Inclusive node-index range along one axis.
struct AxisRange {
    int lo = 0;
    int hi = -1;
    bool empty() const { return hi < lo; }
};

/// Index box: one range per axis (the y range is ignored in 1D).
struct RegionSpec {
    AxisRange x;
    AxisRange y;
};

/// Truncated box [-L, L]^d with N interior nodes per axis and homogeneous
/// Dirichlet walls. Nodes are numbered row-major (x slowest in 2D).
struct Grid {
    int d = 1;
    double L = 2.0;
    int N = 0;
    double h = 0.0;
    int n_tot = 0;

    std::vector<int> omega;    ///< ascending box indices of Omega
    std::vector<int> omega_e;  ///< ascending box indices of the exterior
    std::vector<int> w1;
    std::vector<int> w2;

    std::vector<int> omega_pos;     ///< box index -> position in omega, or -1
    std::vector<int> exterior_pos;  ///< box index -> position in omega_e, or -1

    double coord(int node, int axis = 0) const;
    /// Quadrature weight of one node (h^d).
    double cell() const;
    int n_omega() const { return static_cast<int>(omega.size()); }
    int n_exterior() const { return static_cast<int>(omega_e.size()); }
};

Grid build_grid(int d, double L, int N, const RegionSpec& omega, const RegionSpec& w1,
                const RegionSpec& w2);

/// Node range whose coordinates lie strictly inside (a, b).
AxisRange nodes_in_interval(double L, int N, double a, double b);

/// 1D box with Omega = (-1, 1) and windows made of the `window` leftmost and
/// rightmost exterior nodes.
Grid default_grid_1d(int N, double L = 2.0, int window = 5);

}  // namespace mgt
