#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "mgt/errors.hpp"
#include "mgt/forward.hpp"
#include "mgt/regularize.hpp"

using namespace mgt;

namespace {

struct Fixture {
    Grid grid = default_grid_1d(31);
    FracOp op = build_fracop(grid, 0.75);
    MGTParams p;
    TimeGrid tg = TimeGrid::from_horizon(1.0, 2e-3);
    int n() const { return grid.n_omega(); }
    ExteriorInput phi() const { return make_input(grid, grid.w1, sin_cubed(tg.T()), 1.0); }
};

// Sources that do not vanish at either end of [0, T].
void generic_sources(const Grid& g, const TimeGrid& tg, Eigen::MatrixXd& F, Eigen::MatrixXd& G) {
    const int n = g.n_omega();
    F.resize(n, tg.steps + 1);
    G.resize(n, tg.steps + 1);
    for (int j = 0; j <= tg.steps; ++j) {
        const double t = tg.t(j);
        for (int k = 0; k < n; ++k) {
            const double x = g.coord(g.omega[k]);
            F(k, j) = (1.0 + t) * std::cos(x);
            G(k, j) = (1.0 + 0.5 * std::cos(M_PI * t)) * std::exp(-x * x) * (1.0 + x);
        }
    }
}

}  // namespace

TEST_CASE("eps = 0 reproduces the base solver") {
    Fixture f;
    const Potential q = Potential::constant(Eigen::VectorXd::Constant(f.n(), 0.3));
    const Trajectory a = solve_regularized(f.op, f.p, q, Forcing::zero(), f.phi(), 0.0, f.tg);
    const Trajectory b = solve_linear_mgt(f.op, f.p, q, Forcing::zero(), f.phi(), f.tg);
    CHECK((a.u - b.u).norm() == 0.0);
    CHECK((a.utt - b.utt).norm() == 0.0);
    CHECK_THROWS_AS(solve_regularized(f.op, f.p, q, Forcing::zero(), f.phi(), -1e-3, f.tg), ConfigError);
}

TEST_CASE("zero data stay zero and large eps damps the acceleration") {
    Fixture f;
    for (double eps : {0.0, 1e-2, 1.0}) {
        const Trajectory z = solve_regularized(f.op, f.p, Potential::zero(), Forcing::zero(), ExteriorInput{}, eps, f.tg);
        CHECK(x_norm(f.op, z) == 0.0);
    }
    const Trajectory base = solve_regularized(f.op, f.p, Potential::zero(), Forcing::zero(), f.phi(), 0.0, f.tg);
    const Trajectory damped = solve_regularized(f.op, f.p, Potential::zero(), Forcing::zero(), f.phi(), 10.0, f.tg);
    const double energy0 = std::sqrt(spacetime_inner(f.grid, base.utt, base.utt, f.tg.dt));
    const double energy1 = std::sqrt(spacetime_inner(f.grid, damped.utt, damped.utt, f.tg.dt));
    CHECK(energy1 < energy0);
}

TEST_CASE("geometric ladder") {
    const auto l = geometric_ladder(1e-1, 0.5, 4);
    REQUIRE(l.size() == 4);
    CHECK(l[0] == doctest::Approx(0.1));
    CHECK(l[3] == doctest::Approx(0.0125));
    CHECK_THROWS_AS(geometric_ladder(1e-1, 1.5, 3), ConfigError);
    CHECK_THROWS_AS(geometric_ladder(-1.0, 0.5, 3), ConfigError);
}

TEST_CASE("deviations shrink along the ladder with bounded dissipation") {
    Fixture f;
    const auto ladder = geometric_ladder(1e-1, 0.1, 4);
    const RegularizationLadder r =
        regularization_sweep(f.op, f.p, Potential::zero(), Forcing::zero(), f.phi(), ladder, f.tg);
    REQUIRE(r.rows.size() == ladder.size());
    CHECK(r.strictly_decreasing);
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
        CHECK(r.rows[i].dev_u < r.rows[i - 1].dev_u);
        CHECK(r.rows[i].dev_utt < r.rows[i - 1].dev_utt);
    }
    CHECK(r.dissipation_ratio >= 1.0);
    CHECK(r.dissipation_ratio <= 1.2);
    CHECK_THROWS_AS(regularization_sweep(f.op, f.p, Potential::zero(), Forcing::zero(), f.phi(), {1e-2, 1e-1}, f.tg),
                    ConfigError);
}

TEST_CASE("integration by parts: zero sources and bilinearity") {
    Fixture f;
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(f.n(), f.tg.steps + 1);
    Eigen::MatrixXd F, G;
    generic_sources(f.grid, f.tg, F, G);
    const IbpCheck z = ibp_residual(f.op, f.p, Potential::zero(), Potential::zero(), Z, G, f.tg);
    CHECK(z.lhs == 0.0);
    CHECK(z.rhs == 0.0);
    CHECK(z.residual == 0.0);
    const IbpCheck a = ibp_residual(f.op, f.p, Potential::zero(), Potential::zero(), F, G, f.tg);
    const IbpCheck b = ibp_residual(f.op, f.p, Potential::zero(), Potential::zero(), 2.0 * F, -3.0 * G, f.tg);
    CHECK(b.lhs == doctest::Approx(-6.0 * a.lhs).epsilon(1e-10));
    CHECK(b.rhs == doctest::Approx(-6.0 * a.rhs).epsilon(1e-10));
    CHECK(a.residual <= 1e-5);
}

TEST_CASE("integration by parts defect is second order in dt") {
    Fixture f;
    const Potential q = Potential::constant(testutil::bump(f.grid, 0.5, 0.3));
    std::vector<double> dts{4e-3, 2e-3, 1e-3}, res;
    for (double dt : dts) {
        const TimeGrid tg = TimeGrid::from_horizon(1.0, dt);
        Eigen::MatrixXd F, G;
        generic_sources(f.grid, tg, F, G);
        res.push_back(ibp_residual(f.op, f.p, q, q, F, G, tg).residual);
    }
    const double k = testutil::loglog_slope(dts, res);
    CHECK(k >= 1.8);
    CHECK(k <= 2.2);
}
