#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "mgt/errors.hpp"
#include "mgt/forward.hpp"

using namespace mgt;

namespace {

struct Fixture {
    Grid grid = default_grid_1d(31);
    FracOp op = build_fracop(grid, 0.75);
    MGTParams p;
    TimeGrid tg = TimeGrid::from_horizon(1.0, 5e-3);
    int n() const { return grid.n_omega(); }
    ExteriorInput input(double amp, int mode = 0, int degree = 0) const {
        return make_input(grid, grid.w1, sin_cubed(tg.T(), mode), amp, degree);
    }
};

using testutil::loglog_slope;

}  // namespace

TEST_CASE("lift of a zero datum is zero and the lift is linear") {
    Fixture f;
    CHECK(lift_exterior(ExteriorInput{}, f.p, f.op).empty());
    CHECK(lift_samples(ExteriorInput{}, f.p, f.op, f.tg).norm() == 0.0);
    const ExteriorInput a = f.input(1.0), b = f.input(1.0, 1, 1);
    const Eigen::MatrixXd la = lift_samples(a, f.p, f.op, f.tg);
    const Eigen::MatrixXd lb = lift_samples(b, f.p, f.op, f.tg);
    CHECK(la.cwiseAbs().maxCoeff() > 0.0);
    const Eigen::MatrixXd lab = lift_samples(a.scaled(2.0) + b.scaled(-0.5), f.p, f.op, f.tg);
    CHECK((lab - (2.0 * la - 0.5 * lb)).norm() <= 1e-12 * lab.norm());
}

TEST_CASE("a datum touching omega is rejected") {
    Fixture f;
    ExteriorInput bad = f.input(1.0);
    bad.terms[0].profile(f.grid.omega[3]) = 1.0;
    CHECK_THROWS_AS(solve_linear_mgt(f.op, f.p, Potential::zero(), Forcing::zero(), bad, f.tg), SupportError);
}

TEST_CASE("zero data give the zero solution exactly") {
    Fixture f;
    const Potential q = Potential::constant(Eigen::VectorXd::Constant(f.n(), 0.3));
    for (Scheme sc : {Scheme::ImplicitMidpoint, Scheme::RK4}) {
        SolveOptions opt;
        opt.scheme = sc;
        const Trajectory tr = solve_linear_mgt(f.op, f.p, q, Forcing::zero(), ExteriorInput{}, f.tg, opt);
        CHECK(x_norm(f.op, tr) == 0.0);
    }
}

TEST_CASE("manufactured solution converges at second order") {
    Fixture f;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.op.A_oo);
    const Eigen::VectorXd e1 = es.eigenvectors().col(0);
    const double mu = es.eigenvalues()(0);
    const MGTParams p = f.p;
    const Forcing F = Forcing::analytic([&](double t, Eigen::Ref<Eigen::VectorXd> out) {
        out += (6.0 + 6.0 * p.alpha * t + 3.0 * p.b * mu * t * t + p.c * mu * t * t * t) * e1;
    });
    std::vector<double> dts{0.02, 0.01, 0.005}, errs;
    for (double dt : dts) {
        const TimeGrid tg = TimeGrid::from_horizon(1.0, dt);
        const Trajectory tr = solve_linear_mgt(f.op, p, Potential::zero(), F, ExteriorInput{}, tg);
        errs.push_back((tr.u.col(tg.steps) - e1).norm());
    }
    const double k = loglog_slope(dts, errs);
    CHECK(k >= 1.8);
    CHECK(k <= 2.2);
}

TEST_CASE("linear solve superposes exterior data") {
    Fixture f;
    const Potential q = Potential::constant(Eigen::VectorXd::Constant(f.n(), 0.2));
    const ExteriorInput a = f.input(1.0), b = f.input(1.0, 2, 1);
    const Trajectory ta = solve_linear_mgt(f.op, f.p, q, Forcing::zero(), a, f.tg);
    const Trajectory tb = solve_linear_mgt(f.op, f.p, q, Forcing::zero(), b, f.tg);
    const Trajectory tab = solve_linear_mgt(f.op, f.p, q, Forcing::zero(), a.scaled(3.0) + b, f.tg);
    CHECK((tab.u - 3.0 * ta.u - tb.u).norm() <= 1e-12 * tab.u.norm());
    CHECK((tab.utt - 3.0 * ta.utt - tb.utt).norm() <= 1e-12 * tab.utt.norm());
}

TEST_CASE("backward adjoint: zero source, terminal data and double reversal") {
    Fixture f;
    Eigen::MatrixXd qs(f.n(), f.tg.steps + 1);
    for (int s = 0; s <= f.tg.steps; ++s) qs.col(s).setConstant(0.1 + 0.2 * f.tg.t(s));
    const Potential q = Potential::sampled(qs, f.tg.dt, false);

    const Trajectory zero = solve_backward_adjoint(f.op, f.p, q, Eigen::MatrixXd(), f.tg);
    CHECK(x_norm(f.op, zero) == 0.0);

    std::mt19937_64 rng(7);
    Eigen::MatrixXd G(f.n(), f.tg.steps + 1);
    const Eigen::VectorXd shape = testutil::random_vector(f.n(), rng);
    for (int s = 0; s <= f.tg.steps; ++s) G.col(s) = std::sin(M_PI * f.tg.t(s)) * shape;
    const Trajectory w = solve_backward_adjoint(f.op, f.p, q, G, f.tg);
    const int M = f.tg.steps;
    CHECK(w.u.col(M).norm() == 0.0);
    CHECK(w.ut.col(M).norm() == 0.0);
    CHECK(w.utt.col(M).norm() == 0.0);
    CHECK(w.u.norm() > 0.0);

    const Trajectory z =
        solve_linear_mgt(f.op, f.p, q.time_reversed(), Forcing::nodal(-reverse_time(G), f.tg.dt), ExteriorInput{}, f.tg);
    CHECK((reverse_time(w.u) - z.u).norm() <= 1e-12 * z.u.norm());
    CHECK((reverse_time(w.ut) + z.ut).norm() <= 1e-12 * z.ut.norm());
    CHECK_THROWS_AS(solve_backward_adjoint(f.op, f.p, q, Eigen::MatrixXd::Zero(f.n(), 3), f.tg), ShapeMismatch);
}

TEST_CASE("semilinear solve with g = 0 matches the linear solve") {
    Fixture f;
    const ExteriorInput phi = f.input(50.0);
    const Trajectory lin = solve_linear_mgt(f.op, f.p, Potential::zero(), Forcing::zero(), phi, f.tg);
    const Trajectory nl = solve_semilinear_mgt(f.op, f.p, Potential::zero(), zero_nonlinearity(), phi, f.tg);
    CHECK(x_norm_diff(f.op, lin, nl) == 0.0);
}

TEST_CASE("cubic nonlinearity perturbs the linear solution at third order") {
    Fixture f;
    const Nonlinearity g = monomial(f.n(), 1.0, 3);
    SolveOptions opt;
    opt.tol = 1e-14;
    std::vector<double> eps{200.0, 100.0, 50.0}, dev;
    for (double e : eps) {
        const ExteriorInput phi = f.input(e);
        const Trajectory lin = solve_linear_mgt(f.op, f.p, Potential::zero(), Forcing::zero(), phi, f.tg);
        const Trajectory nl = solve_semilinear_mgt(f.op, f.p, Potential::zero(), g, phi, f.tg, opt);
        dev.push_back(x_norm_diff(f.op, lin, nl));
    }
    const double k = loglog_slope(eps, dev);
    CHECK(k >= 2.8);
    CHECK(k <= 3.2);
}

TEST_CASE("Picard contraction improves at half amplitude") {
    Fixture f;
    const Nonlinearity g = monomial(f.n(), 1.0, 3);
    const ExteriorInput phi = f.input(600.0);
    const Trajectory full = solve_semilinear_mgt(f.op, f.p, Potential::zero(), g, phi, f.tg);
    const Trajectory half = solve_semilinear_mgt(f.op, f.p, Potential::zero(), g, phi.scaled(0.5), f.tg);
    REQUIRE(!full.contraction.empty());
    REQUIRE(!half.contraction.empty());
    const double rho = *std::max_element(full.contraction.begin(), full.contraction.end());
    const double rho_half = *std::max_element(half.contraction.begin(), half.contraction.end());
    CHECK(rho <= 0.5);
    CHECK(rho_half < rho);
    CHECK(half.iterations <= full.iterations);
}

TEST_CASE("Picard reports non-contraction and iteration caps") {
    Fixture f;
    const Nonlinearity g = monomial(f.n(), 1.0, 3);
    SolveOptions opt;
    opt.max_iter = 2;
    opt.tol = 1e-15;
    CHECK_THROWS_AS(solve_semilinear_mgt(f.op, f.p, Potential::zero(), g, f.input(600.0), f.tg, opt), MaxIterExceeded);
}

TEST_CASE("Westervelt beta source deviates at second order") {
    Fixture f;
    const FracOp op = build_fracop(f.grid, 1.5);
    const Nonlinearity g = WesterveltBeta{Coefficient::constant(f.n(), 1.0)};
    std::vector<double> eps{4.0, 2.0, 1.0}, dev;
    SolveOptions opt;
    opt.tol = 1e-14;
    for (double e : eps) {
        const ExteriorInput phi = f.input(e);
        const Trajectory lin = solve_linear_mgt(op, f.p, Potential::zero(), Forcing::zero(), phi, f.tg);
        const Trajectory w = solve_westervelt(op, f.p, g, phi, f.tg, opt);
        dev.push_back(x_norm_diff(op, lin, w));
    }
    const double k = loglog_slope(eps, dev);
    CHECK(k >= 1.8);
    CHECK(k <= 2.2);

    const Trajectory none = solve_westervelt(op, f.p, WesterveltBeta{Coefficient::constant(f.n(), 0.0)},
                                             f.input(1.0), f.tg);
    const Trajectory lin = solve_linear_mgt(op, f.p, Potential::zero(), Forcing::zero(), f.input(1.0), f.tg);
    CHECK(x_norm_diff(op, none, lin) <= 1e-14 * x_norm(op, lin));
    CHECK_THROWS_AS(solve_westervelt(build_fracop(f.grid, 0.5), f.p, g, f.input(1.0), f.tg), DimensionGate);
}

TEST_CASE("Westervelt kappa source fades once the datum stops moving") {
    Fixture f;
    const FracOp op = build_fracop(f.grid, 1.5);
    const TimeGrid tg = TimeGrid::from_horizon(24.0, 1e-2);
    const ExteriorInput phi = make_input(f.grid, f.grid.w1, smoothstep(tg.T(), 1.0), 4.0);
    const Nonlinearity g = WesterveltKappa{Coefficient::constant(f.n(), 1.0)};
    const Trajectory tr = solve_westervelt(op, f.p, g, phi, tg);
    const Eigen::MatrixXd src = westervelt_source_mid(g, tr);
    const double peak = src.cwiseAbs().maxCoeff();
    const double tail = src.col(src.cols() - 1).cwiseAbs().maxCoeff();
    CHECK(peak > 0.0);
    CHECK(tail <= 1e-3 * peak);
}

TEST_CASE("energy ledger: zero data and a stable constant") {
    Fixture f;
    const Trajectory zero = solve_linear_mgt(f.op, f.p, Potential::zero(), Forcing::zero(), ExteriorInput{}, f.tg);
    const EnergyLedger z = energy_identity_check(zero, f.op, f.p, Potential::zero());
    CHECK(z.max_residual == 0.0);
    CHECK(z.x_norm == 0.0);
    CHECK(z.empirical_C == 0.0);

    // Smooth random sources built from the three lowest modes.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.op.A_oo);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    std::vector<double> cs;
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd shape = Eigen::VectorXd::Zero(f.n());
        for (int k = 0; k < 3; ++k) shape += nd(rng) * es.eigenvectors().col(k);
        const double w = 1.0 + 0.5 * nd(rng);
        const Forcing F = Forcing::analytic([=](double t, Eigen::Ref<Eigen::VectorXd> out) {
            out += std::sin(M_PI * t) * (1.0 + 0.1 * w * t) * shape;
        });
        const Trajectory tr = solve_linear_mgt(f.op, f.p, Potential::zero(), F, ExteriorInput{}, f.tg);
        cs.push_back(energy_identity_check(tr, f.op, f.p, Potential::zero()).empirical_C);
    }
    double mean = 0.0;
    for (double c : cs) mean += c / cs.size();
    for (double c : cs) CHECK(std::abs(c - mean) <= 0.2 * mean);
}
