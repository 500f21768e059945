#include "mgt/regularize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mgt/errors.hpp"

namespace mgt {

Trajectory solve_regularized(const FracOp& op, const MGTParams& p, const Potential& q, const Forcing& F,
                             const ExteriorInput& phi, double eps, const TimeGrid& tg, SolveOptions opt) {
    if (!(eps >= 0.0)) throw ConfigError("regularization eps must be >= 0");
    opt.eps_reg = eps;
    return solve_linear_mgt(op, p, q, F, phi, tg, opt);
}

std::vector<double> geometric_ladder(double first, double ratio, int count) {
    if (!(first > 0.0) || !(ratio > 0.0 && ratio < 1.0) || count < 1)
        throw ConfigError("ladder needs first > 0, ratio in (0, 1) and count >= 1");
    std::vector<double> out;
    double e = first;
    for (int k = 0; k < count; ++k, e *= ratio) out.push_back(e);
    return out;
}

namespace {

double max_grid_norm(const Grid& g, const Eigen::MatrixXd& m) {
    double best = 0.0;
    for (Eigen::Index n = 0; n < m.cols(); ++n) best = std::max(best, grid_norm(g, m.col(n)));
    return best;
}

}  // namespace

RegularizationLadder regularization_sweep(const FracOp& op, const MGTParams& p, const Potential& q, const Forcing& F,
                                          const ExteriorInput& phi, const std::vector<double>& eps,
                                          const TimeGrid& tg, const SolveOptions& opt) {
    if (eps.empty()) throw ConfigError("eps ladder is empty");
    for (std::size_t k = 0; k < eps.size(); ++k) {
        if (!(eps[k] >= 0.0)) throw ConfigError("eps ladder entries must be >= 0");
        if (k > 0 && !(eps[k] < eps[k - 1])) throw ConfigError("eps ladder must be strictly decreasing");
    }
    const Grid& g = op.grid;
    const Trajectory ref = solve_regularized(op, p, q, F, phi, 0.0, tg, opt);
    RegularizationLadder lad;
    for (double e : eps) {
        const Trajectory u = solve_regularized(op, p, q, F, phi, e, tg, opt);
        LadderRow r;
        r.eps = e;
        r.dev_u = max_grid_norm(g, u.u - ref.u);
        r.dev_ut = max_grid_norm(g, u.ut - ref.ut);
        r.dev_utt = max_grid_norm(g, u.utt - ref.utt);
        const Eigen::MatrixXd Autt = op.A_oo * u.utt;
        Eigen::VectorXd per_t(tg.steps + 1);
        for (int s = 0; s <= tg.steps; ++s) per_t(s) = g.cell() * u.utt.col(s).dot(Autt.col(s));
        r.weighted_dissipation = std::sqrt(e * std::max(0.0, trapezoid(per_t, tg.dt)));
        lad.rows.push_back(r);
    }
    lad.strictly_decreasing = true;
    for (std::size_t k = 1; k < lad.rows.size(); ++k) {
        const auto &a = lad.rows[k - 1], &b = lad.rows[k];
        if (!(b.dev_u < a.dev_u && b.dev_ut < a.dev_ut && b.dev_utt < a.dev_utt)) lad.strictly_decreasing = false;
    }
    double mx = 0.0;
    for (const auto& r : lad.rows) mx = std::max(mx, r.weighted_dissipation);
    const double first = lad.rows.front().weighted_dissipation;
    lad.dissipation_ratio = first > 0.0 ? mx / first : (mx > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return lad;
}

IbpCheck ibp_residual(const FracOp& op, const MGTParams& p, const Potential& q1, const Potential& q2,
                      const Eigen::MatrixXd& F, const Eigen::MatrixXd& G, const TimeGrid& tg,
                      const SolveOptions& opt) {
    const Grid& g = op.grid;
    const int n = g.n_omega(), M = tg.steps;
    if (F.rows() != n || F.cols() != M + 1 || G.rows() != n || G.cols() != M + 1)
        throw ShapeMismatch("sources must be n_omega x (M+1)");
    const Trajectory u = solve_linear_mgt(op, p, q1, Forcing::nodal(F, tg.dt), ExteriorInput{}, tg, opt);
    const Trajectory v = solve_backward_adjoint(op, p, q2, G, tg, opt);
    const Eigen::MatrixXd u3 = u.third_derivative(op, p, q1, opt.eps_reg);
    // Backward equation: v''' = G + alpha v'' - b A v' + c A v + q2 v.
    Eigen::MatrixXd v3 = G + p.alpha * v.utt - p.b * (op.A_oo * v.ut) + p.c * (op.A_oo * v.u);
    if (opt.eps_reg != 0.0) v3 += opt.eps_reg * (op.A_oo * v.utt);
    for (int s = 0; s <= M; ++s) v3.col(s) += q2.at(tg.t(s), n).cwiseProduct(v.u.col(s));

    Eigen::VectorXd a(M + 1), b(M + 1);
    for (int s = 0; s <= M; ++s) {
        a(s) = g.cell() * u3.col(s).dot(v.u.col(s));
        b(s) = g.cell() * u.u.col(s).dot(v3.col(s));
    }
    IbpCheck c;
    c.lhs = trapezoid(a, tg.dt);
    c.rhs = trapezoid(b, tg.dt);
    const double scale = std::max({std::abs(c.lhs), std::abs(c.rhs), std::numeric_limits<double>::epsilon()});
    c.residual = (c.lhs == 0.0 && c.rhs == 0.0) ? 0.0 : std::abs(c.lhs + c.rhs) / scale;
    return c;
}

}  // namespace mgt
