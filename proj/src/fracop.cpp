#include "mgt/fracop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>

#include "mgt/errors.hpp"

namespace mgt {

namespace {

Eigen::MatrixXd laplacian_1d(int N, double h) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N, N);
    const double w = 1.0 / (h * h);
    for (int i = 0; i < N; ++i) {
        D(i, i) = 2.0 * w;
        if (i > 0) D(i, i - 1) = -w;
        if (i + 1 < N) D(i, i + 1) = -w;
    }
    return D;
}

Eigen::MatrixXd block(const Eigen::MatrixXd& A, const std::vector<int>& rows,
                      const std::vector<int>& cols) {
    Eigen::MatrixXd B(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) B(i, j) = A(rows[i], cols[j]);
    return B;
}

}  // namespace

Eigen::MatrixXd base_laplacian(const Grid& grid) {
    const Eigen::MatrixXd D = laplacian_1d(grid.N, grid.h);
    if (grid.d == 1) return D;
    const int N = grid.N;
    Eigen::MatrixXd L2 = Eigen::MatrixXd::Zero(N * N, N * N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                L2(i * N + j, k * N + j) += D(i, k);
                L2(i * N + j, i * N + k) += D(j, k);
            }
    return L2;
}

Eigen::MatrixXd FracOp::power(double t) const {
    Eigen::VectorXd m(lambda.size());
    for (Eigen::Index k = 0; k < lambda.size(); ++k) m(k) = t == 0.0 ? 1.0 : std::pow(lambda(k), t);
    return V * m.asDiagonal() * V.transpose();
}

FracOp build_fracop(const Grid& grid, double s) {
    if (!(s > 0.0)) throw NonPositiveExponent("s must be positive, got " + std::to_string(s));
    FracOp op;
    op.grid = grid;
    op.s = s;

    const Eigen::MatrixXd D = laplacian_1d(grid.N, grid.h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
    if (grid.d == 1) {
        op.V = es.eigenvectors();
        op.lambda = es.eigenvalues();
    } else {
        // Separable box: eigenpairs are Kronecker products of the 1D ones.
        const int N = grid.N;
        const Eigen::MatrixXd& V1 = es.eigenvectors();
        const Eigen::VectorXd& l1 = es.eigenvalues();
        std::vector<std::pair<double, std::pair<int, int>>> pairs;
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) pairs.push_back({l1(a) + l1(b), {a, b}});
        std::stable_sort(pairs.begin(), pairs.end(),
                         [](const auto& x, const auto& y) { return x.first < y.first; });
        op.V.resize(N * N, N * N);
        op.lambda.resize(N * N);
        for (int k = 0; k < N * N; ++k) {
            const auto [a, b] = pairs[k].second;
            op.lambda(k) = pairs[k].first;
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) op.V(i * N + j, k) = V1(i, a) * V1(j, b);
        }
    }
    op.multiplier.resize(op.lambda.size());
    for (Eigen::Index k = 0; k < op.lambda.size(); ++k) op.multiplier(k) = std::pow(op.lambda(k), s);
    op.A = op.V * op.multiplier.asDiagonal() * op.V.transpose();

    std::vector<int> all(grid.n_tot);
    std::iota(all.begin(), all.end(), 0);
    op.A_oo = block(op.A, grid.omega, grid.omega);
    op.A_ob = block(op.A, grid.omega, all);
    op.A_eb = block(op.A, grid.omega_e, all);
    return op;
}

Eigen::MatrixXd frac_apply(const FracOp& op, const Eigen::MatrixXd& field) {
    if (field.rows() != op.grid.n_tot)
        throw ShapeMismatch("field has " + std::to_string(field.rows()) + " rows, box has " +
                            std::to_string(op.grid.n_tot));
    return op.A * field;
}

double frac_pairing(const FracOp& op, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
    if (f.size() != op.grid.n_tot || g.size() != op.grid.n_tot)
        throw ShapeMismatch("pairing expects box vectors");
    return op.grid.cell() * f.dot(op.A * g);
}

double omega_energy(const FracOp& op, const Eigen::VectorXd& v) {
    return op.grid.cell() * v.dot(op.A_oo * v);
}

OperatorLawsReport check_operator_laws(const std::vector<FracOp>& ops, int samples,
                                       std::uint64_t seed) {
    OperatorLawsReport rep;
    rep.samples = samples;
    if (ops.empty()) return rep;
    const FracOp& ref = ops.front();
    const int n = ref.grid.n_tot;

    rep.orthonormality =
        (ref.V.transpose() * ref.V - Eigen::MatrixXd::Identity(n, n)).norm();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<Eigen::VectorXd> draws(samples);
    for (auto& u : draws) {
        u.resize(n);
        for (int i = 0; i < n; ++i) u(i) = nd(rng);
    }

    rep.psd_min = std::numeric_limits<double>::infinity();
    for (const auto& op : ops) {
        const double an = op.A.norm();
        rep.symmetry = std::max(rep.symmetry, (op.A - op.A.transpose()).norm() / an);
        rep.psd_min = std::min(rep.psd_min, op.multiplier.minCoeff());
        for (const auto& u : draws) rep.psd_min = std::min(rep.psd_min, u.dot(op.A * u) / u.squaredNorm());
        if (std::abs(op.s - 1.0) < 1e-15) {
            const Eigen::MatrixXd D = base_laplacian(op.grid);
            rep.base_residual = (op.A - D).norm() / D.norm();
        }
    }

    for (std::size_t a = 0; a < ops.size(); ++a)
        for (std::size_t b = a; b < ops.size(); ++b) {
            const Eigen::MatrixXd sum = ref.power(ops[a].s + ops[b].s);
            rep.semigroup = std::max(rep.semigroup, (ops[a].A * ops[b].A - sum).norm() / sum.norm());
        }

    // Poincare in eigen-coordinates: ||A^{t/2}u||^2 = sum lambda^t uhat^2.
    std::vector<double> exps;
    for (const auto& op : ops) exps.push_back(op.s);
    exps.push_back(0.0);
    for (const auto& u : draws) {
        const Eigen::VectorXd uh = ref.V.transpose() * u;
        for (double t : exps)
            for (double s : exps) {
                if (t > s) continue;
                double nt = 0.0, ns = 0.0;
                for (int k = 0; k < n; ++k) {
                    const double w = uh(k) * uh(k);
                    nt += std::pow(ref.lambda(k), t) * w;
                    ns += std::pow(ref.lambda(k), s) * w;
                }
                const double ratio = std::sqrt(nt / ns);
                const double bound = std::pow(ref.lambda_min(), (t - s) / 2.0);
                rep.poincare_excess = std::max(rep.poincare_excess, ratio / bound - 1.0);
            }
    }
    return rep;
}

}  // namespace mgt
