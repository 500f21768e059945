#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "fdb_oracle.hpp"
#include "helpers.hpp"
#include "mgt/errors.hpp"
#include "mgt/forward.hpp"
#include "mgt/linearize.hpp"

using namespace mgt;

namespace {

struct Fixture {
    Grid grid = default_grid_1d(31);
    FracOp op = build_fracop(grid, 0.75);
    MGTParams p;
    TimeGrid tg = TimeGrid::from_horizon(1.0, 5e-3);
    int n() const { return grid.n_omega(); }
    std::vector<ExteriorInput> bank(double amp) const { return make_bank(grid, grid.w1, 2, 1, tg.T(), amp); }
    Nonlinearity quad_cubic() const {
        PolynomialType g;
        g.coefs = {Coefficient::constant(n(), 0.5), Coefficient::constant(n(), 1.0)};
        g.powers = {2, 3};
        return g;
    }
};

}  // namespace

TEST_CASE("partition counts follow the Bell numbers") {
    const std::vector<std::size_t> bell{1, 2, 5, 15, 52, 203};
    for (int N = 1; N <= 6; ++N) {
        const auto all = enumerate_partitions(N);
        CHECK(all.size() == bell[N - 1]);
        CHECK(proper_partitions(N).size() == bell[N - 1] - 1);
        std::set<Partition> distinct(all.begin(), all.end());
        CHECK(distinct.size() == all.size());
        for (const auto& p : all) {
            std::vector<int> seen;
            for (std::size_t b = 0; b < p.size(); ++b) {
                REQUIRE(!p[b].empty());
                if (b > 0) CHECK(p[b].front() > p[b - 1].front());
                seen.insert(seen.end(), p[b].begin(), p[b].end());
            }
            std::sort(seen.begin(), seen.end());
            for (int i = 0; i < N; ++i) CHECK(seen[i] == i);
        }
    }
    CHECK_THROWS(enumerate_partitions(0));
    CHECK_THROWS(enumerate_partitions(9));
}

TEST_CASE("slashed source matches a multidual expansion") {
    std::mt19937_64 rng(42);
    const int n = 6, cols = 4;
    std::vector<double> times{0.1, 0.4, 0.7, 0.9};

    PolynomialType poly;
    poly.coefs = {Coefficient::profile(Eigen::VectorXd::LinSpaced(n, 0.5, 1.5), {1.0, 0.3}),
                  Coefficient::constant(n, -0.7), Coefficient::constant(n, 0.25)};
    poly.powers = {2, 3, 5};
    PolynomialType gauss = poly;
    gauss.gauss_exponent = 2;
    const std::vector<Nonlinearity> gs{Nonlinearity(poly), Nonlinearity(gauss)};

    const std::vector<std::vector<int>> index_sets{{0, 1}, {0, 0}, {0, 1, 2}, {1, 1, 0}, {0, 1, 2, 3}, {2, 0, 2, 0}};
    for (const auto& g : gs)
        for (const auto& indices : index_sets) {
            const int N = static_cast<int>(indices.size());
            const Eigen::MatrixXd base = 0.5 * Eigen::MatrixXd::Random(n, cols);
            DerivativeBank bank;
            const std::size_t full = (std::size_t{1} << N) - 1;
            for (std::size_t m = 1; m < full; ++m) {
                const auto key = testutil::key_of(indices, m);
                if (!bank.has(key)) {
                    Eigen::MatrixXd f(n, cols);
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < cols; ++j) f(i, j) = std::normal_distribution<double>()(rng);
                    bank.put(key, f);
                }
            }
            const Eigen::MatrixXd src = faa_di_bruno_source(g, base, bank, indices, times);
            double worst = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < cols; ++j) {
                    std::vector<double> parts(full + 1, 0.0);
                    for (std::size_t m = 1; m < full; ++m) parts[m] = bank.get(testutil::key_of(indices, m))(i, j);
                    const double ref = testutil::oracle_source(g, i, times[j], base(i, j), parts, N);
                    worst = std::max(worst, std::abs(src(i, j) - ref) / std::max(1.0, std::abs(ref)));
                }
            CHECK(worst <= 1e-10);
        }
}

TEST_CASE("cubic at zero gives six times the triple product") {
    const int n = 5;
    const Nonlinearity g = monomial(n, 1.0, 3);
    DerivativeBank bank;
    const Eigen::MatrixXd v0 = Eigen::MatrixXd::Random(n, 3), v1 = Eigen::MatrixXd::Random(n, 3),
                          v2 = Eigen::MatrixXd::Random(n, 3);
    bank.put({0}, v0);
    bank.put({1}, v1);
    bank.put({2}, v2);
    bank.put({0, 1}, Eigen::MatrixXd::Random(n, 3));
    bank.put({0, 2}, Eigen::MatrixXd::Random(n, 3));
    bank.put({1, 2}, Eigen::MatrixXd::Random(n, 3));
    const Eigen::MatrixXd src = faa_di_bruno_source(g, Eigen::MatrixXd::Zero(n, 3), bank, {0, 1, 2}, {0.0, 0.5, 1.0});
    const Eigen::MatrixXd ref = 6.0 * v0.cwiseProduct(v1).cwiseProduct(v2);
    CHECK((src - ref).norm() <= 1e-12 * ref.norm());
}

TEST_CASE("linear nonlinearity has no slashed source") {
    const int n = 4;
    DerivativeBank bank;
    bank.put({0}, Eigen::MatrixXd::Random(n, 2));
    bank.put({1}, Eigen::MatrixXd::Random(n, 2));
    const Eigen::MatrixXd src =
        faa_di_bruno_source(monomial(n, 2.0, 1), Eigen::MatrixXd::Random(n, 2), bank, {0, 1}, {0.0, 1.0});
    CHECK(src.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("first linearization at zero is the linear solve") {
    Fixture f;
    const auto bank = f.bank(30.0);
    LinearizationStack st =
        build_stack(f.op, f.p, Potential::zero(), f.quad_cubic(), bank, Eigen::VectorXd::Zero(2), f.tg);
    for (int k = 0; k < 2; ++k) {
        const Trajectory& v = solve_linearized(st, {k});
        const Trajectory lin = solve_linear_mgt(f.op, f.p, Potential::zero(), Forcing::zero(), bank[k], f.tg);
        CHECK(x_norm_diff(f.op, v, lin) <= 1e-12 * x_norm(f.op, lin));
    }
    CHECK_THROWS_AS(solve_linearized(st, {2}), ConfigError);
}

TEST_CASE("second linearization: zero for g = 0 and u^3, direct assembly for a u^2") {
    Fixture f;
    const auto bank = f.bank(30.0);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    {
        LinearizationStack st = build_stack(f.op, f.p, Potential::zero(), zero_nonlinearity(), bank, zero, f.tg);
        CHECK(x_norm(f.op, solve_linearized(st, {0, 1})) == 0.0);
    }
    {
        LinearizationStack st = build_stack(f.op, f.p, Potential::zero(), monomial(f.n(), 1.0, 3), bank, zero, f.tg);
        CHECK(x_norm(f.op, solve_linearized(st, {1, 0})) == 0.0);
        CHECK(x_norm(f.op, solve_linearized(st, {0, 1, 1})) > 0.0);
    }
    const double a = 0.8;
    LinearizationStack st = build_stack(f.op, f.p, Potential::zero(), monomial(f.n(), a, 2), bank, zero, f.tg);
    const Trajectory& v0 = solve_linearized(st, {0});
    const Trajectory& v1 = solve_linearized(st, {1});
    const Eigen::MatrixXd src = -2.0 * a * midpoint_average(v0.u).cwiseProduct(midpoint_average(v1.u));
    const Trajectory direct =
        solve_linear_mgt(f.op, f.p, Potential::zero(), Forcing::midpoint(src, f.tg.dt), ExteriorInput{}, f.tg);
    const Trajectory& v01 = solve_linearized(st, {0, 1});
    CHECK(x_norm(f.op, v01) > 0.0);
    CHECK(x_norm_diff(f.op, v01, direct) <= 1e-12 * x_norm(f.op, direct));
}

TEST_CASE("difference quotients converge to the linearizations") {
    Fixture f;
    LinearizationStack st =
        build_stack(f.op, f.p, Potential::zero(), f.quad_cubic(), f.bank(30.0), Eigen::VectorXd::Zero(2), f.tg);
    const std::vector<double> etas{0.2, 0.1, 0.05, 0.025};
    const ConvergenceTable one = linearization_convergence_report(st, {0}, etas, false);
    CHECK(one.fitted_slope >= 0.8);
    CHECK(one.rows.size() == etas.size());
    const ConvergenceTable one_c = linearization_convergence_report(st, {0}, etas, true);
    CHECK(one_c.fitted_slope >= 1.8);
    const ConvergenceTable two = linearization_convergence_report(st, {0, 1}, etas, false);
    CHECK(two.fitted_slope >= 0.8);
    const ConvergenceTable two_c = linearization_convergence_report(st, {0, 1}, etas, true);
    CHECK(two_c.fitted_slope >= 1.8);
    CHECK(two_c.rows.back().error < two_c.rows.front().error);
    CHECK_THROWS_AS(diff_quotient_solution_map(st, {0}, 0.0, true), ConfigError);
}

TEST_CASE("DN derivatives agree with quotients of the pairing") {
    Fixture f;
    LinearizationStack st =
        build_stack(f.op, f.p, Potential::zero(), f.quad_cubic(), f.bank(30.0), Eigen::VectorXd::Zero(2), f.tg);
    const ExteriorInput psi = make_input(f.grid, f.grid.w2, sin_cubed(f.tg.T(), 1));
    for (const std::vector<int>& idx : {std::vector<int>{0}, std::vector<int>{0, 1}}) {
        const double exact = dn_derivative(st, idx, psi);
        const double quot = dn_derivative_quotient(st, idx, psi, 0.01);
        CHECK(std::abs(exact) > 0.0);
        CHECK(std::abs(exact - quot) <= 1e-3 * std::abs(exact));
    }
}

TEST_CASE("log-log fit recovers a power law") {
    double k = 0.0, r2 = 0.0;
    fit_loglog({1.0, 2.0, 4.0, 8.0}, {3.0, 12.0, 48.0, 192.0}, k, r2);
    CHECK(k == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r2 == doctest::Approx(1.0).epsilon(1e-12));
}
