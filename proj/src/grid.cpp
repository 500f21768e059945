#include "mgt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgt/errors.hpp"

namespace mgt {

namespace {

std::vector<int> expand(const Grid& g, const RegionSpec& r, const char* name) {
    const bool bad_x = r.x.empty() || r.x.lo < 0 || r.x.hi >= g.N;
    const bool bad_y = g.d == 2 && (r.y.empty() || r.y.lo < 0 || r.y.hi >= g.N);
    if (bad_x || bad_y) throw EmptySetError(std::string(name) + " is empty or leaves the box");
    std::vector<int> out;
    if (g.d == 1) {
        for (int i = r.x.lo; i <= r.x.hi; ++i) out.push_back(i);
    } else {
        for (int i = r.x.lo; i <= r.x.hi; ++i)
            for (int j = r.y.lo; j <= r.y.hi; ++j) out.push_back(i * g.N + j);
    }
    return out;
}

}  // namespace

double Grid::coord(int node, int axis) const {
    const int i = d == 1 ? node : (axis == 0 ? node / N : node % N);
    return -L + (i + 1) * h;
}

double Grid::cell() const { return d == 1 ? h : h * h; }

Grid build_grid(int d, double L, int N, const RegionSpec& omega, const RegionSpec& w1,
                const RegionSpec& w2) {
    if (d != 1 && d != 2) throw ConfigError("dimension must be 1 or 2");
    if (!(L > 0.0)) throw ConfigError("half width must be positive");
    if (N < 8) throw ConfigError("need at least 8 nodes per axis");

    Grid g;
    g.d = d;
    g.L = L;
    g.N = N;
    g.h = 2.0 * L / (N + 1);
    g.n_tot = d == 1 ? N : N * N;

    // Omega must leave at least one exterior node on every side.
    auto strictly_inside = [&](const AxisRange& a) { return a.lo >= 1 && a.hi <= N - 2; };
    if (omega.x.empty() || (d == 2 && omega.y.empty())) throw EmptySetError("omega is empty");
    if (!strictly_inside(omega.x) || (d == 2 && !strictly_inside(omega.y)))
        throw ConfigError("omega must lie strictly inside the box");
    g.omega = expand(g, omega, "omega");

    g.omega_pos.assign(g.n_tot, -1);
    for (std::size_t k = 0; k < g.omega.size(); ++k) g.omega_pos[g.omega[k]] = static_cast<int>(k);
    g.exterior_pos.assign(g.n_tot, -1);
    for (int i = 0; i < g.n_tot; ++i) {
        if (g.omega_pos[i] < 0) {
            g.exterior_pos[i] = static_cast<int>(g.omega_e.size());
            g.omega_e.push_back(i);
        }
    }

    g.w1 = expand(g, w1, "w1");
    g.w2 = expand(g, w2, "w2");
    for (const auto* w : {&g.w1, &g.w2}) {
        for (int i : *w)
            if (g.omega_pos[i] >= 0) throw OverlapError("window node " + std::to_string(i) + " lies in omega");
    }
    return g;
}

AxisRange nodes_in_interval(double L, int N, double a, double b) {
    const double h = 2.0 * L / (N + 1);
    AxisRange r{N, -1};
    for (int i = 0; i < N; ++i) {
        const double x = -L + (i + 1) * h;
        if (x > a + 1e-12 && x < b - 1e-12) {
            r.lo = std::min(r.lo, i);
            r.hi = std::max(r.hi, i);
        }
    }
    return r;
}

Grid default_grid_1d(int N, double L, int window) {
    const AxisRange om = nodes_in_interval(L, N, -1.0, 1.0);
    RegionSpec o{om, {}};
    RegionSpec a{{0, std::min(window, om.lo) - 1}, {}};
    RegionSpec b{{std::max(N - window, om.hi + 1), N - 1}, {}};
    return build_grid(1, L, N, o, a, b);
}

}  // namespace mgt
