#include "mgt/dnmap.hpp"

#include <cmath>
#include <limits>

#include "mgt/errors.hpp"

namespace mgt {

DNTrace dn_trace(const Trajectory& tr, const FracOp& op, const MGTParams& p) {
    const Grid& g = op.grid;
    const int M = tr.time.steps;
    DNTrace out;
    out.trace.support = Support::Exterior;
    out.trace.dt = tr.time.dt;
    out.trace.values.resize(g.n_exterior(), M + 1);
    // Omega part through the exterior-omega block, exterior part from phi directly.
    Eigen::MatrixXd A_eo(g.n_exterior(), g.n_omega());
    for (int k = 0; k < g.n_omega(); ++k) A_eo.col(k) = op.A_eb.col(g.omega[k]);
    out.trace.values = A_eo * (p.b * tr.ut + p.c * tr.u);
    if (!tr.phi.empty()) {
        for (int n = 0; n <= M; ++n) {
            const double t = tr.time.t(n);
            const Eigen::VectorXd f = p.b * tr.phi.value(g.n_tot, t, 1) + p.c * tr.phi.value(g.n_tot, t, 0);
            out.trace.values.col(n) += op.A_eb * f;
        }
    }
    return out;
}

Eigen::MatrixXd restrict_trace(const DNTrace& tr, const Grid& grid, const std::vector<int>& window) {
    Eigen::MatrixXd out(window.size(), tr.trace.values.cols());
    for (std::size_t i = 0; i < window.size(); ++i) {
        const int e = grid.exterior_pos[window[i]];
        if (e < 0) throw SupportError("window node is not exterior");
        out.row(i) = tr.trace.values.row(e);
    }
    return out;
}

double dn_pairing(const DNTrace& trace, const ExteriorInput& rho, const Grid& grid) {
    rho.validate(grid);
    const int M = trace.trace.steps();
    const double dt = trace.trace.dt;
    Eigen::VectorXd per_t(M + 1);
    for (int n = 0; n <= M; ++n) {
        const Eigen::VectorXd r = rho.value(grid.n_tot, dt * n);
        double acc = 0.0;
        for (int e = 0; e < grid.n_exterior(); ++e) acc += trace.trace.values(e, n) * r(grid.omega_e[e]);
        per_t(n) = grid.cell() * acc;
    }
    return trapezoid(per_t, dt);
}

double dn_pairing(const Trajectory& tr, const ExteriorInput& rho, const FracOp& op, const MGTParams& p) {
    return dn_pairing(dn_trace(tr, op, p), rho, op.grid);
}

double relative_residual(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), std::numeric_limits<double>::epsilon()});
    return std::abs(a - b) / scale;
}

IdentityCheck adjoint_identity_residual(const FracOp& op, const MGTParams& p, const Potential& q,
                                        const ExteriorInput& phi1, const ExteriorInput& phi2, const TimeGrid& tg,
                                        const SolveOptions& opt) {
    const Trajectory a = solve_linear_mgt(op, p, q, Forcing::zero(), phi1, tg, opt);
    const Trajectory b = solve_linear_mgt(op, p, q.time_reversed(), Forcing::zero(), phi2, tg, opt);
    IdentityCheck r;
    r.lhs = dn_pairing(a, phi2.time_reversed(), op, p);
    r.rhs = dn_pairing(b, phi1.time_reversed(), op, p);
    r.residual = (phi1.empty() || phi2.empty()) && r.lhs == 0.0 && r.rhs == 0.0 ? 0.0 : relative_residual(r.lhs, r.rhs);
    return r;
}

double omega_product_integral(const Grid& grid, const Potential& q1, const Potential& q2,
                              const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const TimeGrid& tg) {
    const int n = grid.n_omega(), M = tg.steps;
    Eigen::VectorXd per_t(M + 1);
    for (int s = 0; s <= M; ++s) {
        const Eigen::VectorXd w = q1.at(tg.t(s), n) - q2.at(tg.T() - tg.t(s), n);
        per_t(s) = grid.cell() * (w.array() * a.col(s).array() * b.col(M - s).array()).sum();
    }
    return trapezoid(per_t, tg.dt);
}

IdentityCheck integral_identity_residual(const FracOp& op, const MGTParams& p, const Potential& q1,
                                         const Potential& q2, const ExteriorInput& phi1, const ExteriorInput& phi2,
                                         const TimeGrid& tg, const SolveOptions& opt) {
    const Trajectory u1 = solve_linear_mgt(op, p, q1, Forcing::zero(), phi1, tg, opt);
    const Trajectory u2 = solve_linear_mgt(op, p, q2, Forcing::zero(), phi2, tg, opt);
    const Trajectory u2s = solve_linear_mgt(op, p, q2.time_reversed(), Forcing::zero(), phi1, tg, opt);
    const ExteriorInput test = phi2.time_reversed();
    IdentityCheck r;
    r.lhs = omega_product_integral(op.grid, q1, q2, u1.u, u2.u, tg);
    r.rhs = dn_pairing(u1, test, op, p) - dn_pairing(u2s, test, op, p);
    r.residual = (r.lhs == 0.0 && std::abs(r.rhs) <= 1e-300) ? 0.0 : relative_residual(r.lhs, r.rhs);
    return r;
}

}  // namespace mgt
