#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mgt/forward.hpp"

namespace mgt {

/// Exterior trace (b A_s d_t u + c A_s u) on omega_e x [0, T].
struct DNTrace {
    SpaceTimeField trace;  ///< support Exterior
};

DNTrace dn_trace(const Trajectory& tr, const FracOp& op, const MGTParams& p);

/// Rows of the trace belonging to a window (box indices inside omega_e).
Eigen::MatrixXd restrict_trace(const DNTrace& tr, const Grid& grid, const std::vector<int>& window);

/// Trapezoid-in-time pairing <Lambda phi, rho>; rho must live in omega_e.
double dn_pairing(const DNTrace& trace, const ExteriorInput& rho, const Grid& grid);
double dn_pairing(const Trajectory& tr, const ExteriorInput& rho, const FracOp& op, const MGTParams& p);

/// |a - b| / max(|a|, |b|, machine epsilon).
double relative_residual(double a, double b);

struct IdentityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
};

/// <Lambda_q phi1, phi2*> against <Lambda_{q*} phi2, phi1*>.
IdentityCheck adjoint_identity_residual(const FracOp& op, const MGTParams& p, const Potential& q,
                                        const ExteriorInput& phi1, const ExteriorInput& phi2, const TimeGrid& tg,
                                        const SolveOptions& opt = {});

/// int (q1 - q2*)(u1 - phi1)(u2 - phi2)* against <(Lambda_{q1} - Lambda_{q2*}) phi1, phi2*>.
IdentityCheck integral_identity_residual(const FracOp& op, const MGTParams& p, const Potential& q1,
                                         const Potential& q2, const ExteriorInput& phi1, const ExteriorInput& phi2,
                                         const TimeGrid& tg, const SolveOptions& opt = {});

/// Trapezoid-in-time integral of h^d sum_x w(x,t) a(x,t) b*(x,t) on omega, with w the
/// potential difference q1(t) - q2(T - t).
double omega_product_integral(const Grid& grid, const Potential& q1, const Potential& q2,
                              const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const TimeGrid& tg);

}  // namespace mgt
