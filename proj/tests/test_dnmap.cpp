#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "mgt/dnmap.hpp"
#include "mgt/errors.hpp"
#include "mgt/forward.hpp"

using namespace mgt;

namespace {

struct Fixture {
    Grid grid = default_grid_1d(31);
    FracOp op = build_fracop(grid, 0.75);
    MGTParams p;
    TimeGrid tg = TimeGrid::from_horizon(2.0, 1e-3);
    int n() const { return grid.n_omega(); }
    ExteriorInput on_w1(int mode = 0, int degree = 0, double amp = 1.0) const {
        return make_input(grid, grid.w1, sin_cubed(tg.T(), mode), amp, degree);
    }
    ExteriorInput on_w2(int mode = 0, int degree = 0, double amp = 1.0) const {
        return make_input(grid, grid.w2, sin_cubed(tg.T(), mode), amp, degree);
    }
    Trajectory solve(const ExteriorInput& phi, const Potential& q = Potential::zero()) const {
        return solve_linear_mgt(op, p, q, Forcing::zero(), phi, tg);
    }
};

// Time-symmetric potential 1 + 0.5 sin(pi t / T) times a bump.
Potential symmetric_q(const Fixture& f, double amp) {
    const Eigen::VectorXd b = testutil::bump(f.grid, amp, 0.3);
    Eigen::MatrixXd v(f.n(), f.tg.steps + 1);
    for (int s = 0; s <= f.tg.steps; ++s) v.col(s) = (1.0 + 0.5 * std::sin(M_PI * f.tg.t(s) / f.tg.T())) * b;
    return Potential::sampled(v, f.tg.dt, true);
}

}  // namespace

TEST_CASE("zero datum gives a zero trace") {
    Fixture f;
    const DNTrace t = dn_trace(f.solve(ExteriorInput{}), f.op, f.p);
    CHECK(t.trace.support == Support::Exterior);
    CHECK(t.trace.values.rows() == f.grid.n_exterior());
    CHECK(t.trace.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trace is linear in the datum and reaches the far window") {
    Fixture f;
    const ExteriorInput a = f.on_w1(), b = f.on_w1(1, 1);
    const Eigen::MatrixXd ta = dn_trace(f.solve(a), f.op, f.p).trace.values;
    const Eigen::MatrixXd tb = dn_trace(f.solve(b), f.op, f.p).trace.values;
    const Eigen::MatrixXd tab = dn_trace(f.solve(a.scaled(2.0) + b.scaled(-1.5)), f.op, f.p).trace.values;
    CHECK((tab - (2.0 * ta - 1.5 * tb)).norm() <= 1e-12 * tab.norm());
    const Eigen::MatrixXd far = restrict_trace(dn_trace(f.solve(a), f.op, f.p), f.grid, f.grid.w2);
    CHECK(far.rows() == 5);
    CHECK(far.cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("pairing is bilinear and vanishes on a zero test function") {
    Fixture f;
    const Trajectory tr = f.solve(f.on_w1());
    CHECK(dn_pairing(tr, ExteriorInput{}, f.op, f.p) == 0.0);
    const ExteriorInput r1 = f.on_w2(), r2 = f.on_w2(2, 1);
    const double p1 = dn_pairing(tr, r1, f.op, f.p), p2 = dn_pairing(tr, r2, f.op, f.p);
    const double p12 = dn_pairing(tr, r1.scaled(0.5) + r2.scaled(3.0), f.op, f.p);
    CHECK(std::abs(p12 - (0.5 * p1 + 3.0 * p2)) <= 1e-12 * std::abs(p12));
    CHECK(std::abs(p1) > 0.0);

    ExteriorInput bad = f.on_w2();
    bad.terms[0].profile(f.grid.omega[0]) = 1.0;
    CHECK_THROWS_AS(dn_pairing(tr, bad, f.op, f.p), SupportError);
}

TEST_CASE("pairing converges at second order in dt") {
    Fixture f;
    std::vector<double> dts{0.02, 0.01, 0.005, 0.0025}, vals;
    for (double dt : dts) {
        Fixture g;
        g.tg = TimeGrid::from_horizon(2.0, dt);
        vals.push_back(dn_pairing(g.solve(g.on_w1()), g.on_w2(1), g.op, g.p));
    }
    std::vector<double> h, d;
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        h.push_back(dts[i]);
        d.push_back(std::abs(vals[i] - vals[i + 1]));
    }
    const double k = testutil::loglog_slope(h, d);
    CHECK(k >= 1.8);
    CHECK(k <= 2.2);
}

TEST_CASE("adjoint identity for q = 0 and a time-symmetric q") {
    Fixture f;
    const ExteriorInput phi1 = f.on_w1(), phi2 = f.on_w2(1);
    const IdentityCheck z = adjoint_identity_residual(f.op, f.p, Potential::zero(), phi1, phi2, f.tg);
    CHECK(z.residual <= 1e-8);
    CHECK(std::abs(z.lhs) > 0.0);
    const IdentityCheck s = adjoint_identity_residual(f.op, f.p, symmetric_q(f, 0.5), phi1, phi2, f.tg);
    CHECK(s.residual <= 1e-8);

    const IdentityCheck none = adjoint_identity_residual(f.op, f.p, Potential::zero(), ExteriorInput{}, phi2, f.tg);
    CHECK(none.lhs == 0.0);
    CHECK(none.rhs == 0.0);
    CHECK(none.residual == 0.0);
}

TEST_CASE("integral identity: equal potentials, a bump and swapped roles") {
    Fixture f;
    const ExteriorInput phi1 = f.on_w1(), phi2 = f.on_w2(1);
    const Potential qs = symmetric_q(f, 0.5);
    const IdentityCheck eq = integral_identity_residual(f.op, f.p, qs, qs, phi1, phi2, f.tg);
    CHECK(std::abs(eq.lhs) <= 1e-20);
    CHECK(eq.rhs == 0.0);

    const Potential q1 = Potential::constant(testutil::bump(f.grid, 2.0, 0.25));
    const Potential q2 = Potential::constant(Eigen::VectorXd::Constant(f.n(), 0.1));
    const IdentityCheck r = integral_identity_residual(f.op, f.p, q1, q2, phi1, phi2, f.tg);
    CHECK(r.residual <= 1e-6);
    CHECK(std::abs(r.lhs) > 0.0);
    const IdentityCheck sw = integral_identity_residual(f.op, f.p, q2, q1, phi1, phi2, f.tg);
    CHECK(sw.residual <= 1e-6);
    CHECK(std::abs(sw.lhs + r.lhs) <= 1e-6 * std::abs(r.lhs));
}

TEST_CASE("relative residual conventions") {
    CHECK(relative_residual(0.0, 0.0) == 0.0);
    CHECK(relative_residual(1.0, 1.0) == 0.0);
    CHECK(relative_residual(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(relative_residual(-1.0, 1.0) == doctest::Approx(2.0));
}
