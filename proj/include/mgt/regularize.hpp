#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mgt/forward.hpp"

namespace mgt {

/// (d_t^3 + eps A d_t^2 + alpha d_t^2 + b A d_t + c A + q) u = F. eps = 0 runs the
/// base solver unchanged.
Trajectory solve_regularized(const FracOp& op, const MGTParams& p, const Potential& q, const Forcing& F,
                             const ExteriorInput& phi, double eps, const TimeGrid& tg, SolveOptions opt = {});

struct LadderRow {
    double eps = 0.0;
    double dev_u = 0.0;    ///< max_t ||u_eps - u||
    double dev_ut = 0.0;
    double dev_utt = 0.0;
    double weighted_dissipation = 0.0;  ///< eps^{1/2} ||A^{s/2} d_t^2 u_eps||_{L^2(0,T; L^2)}
};

struct RegularizationLadder {
    std::vector<LadderRow> rows;  ///< one row per eps, in ladder order
    bool strictly_decreasing = false;  ///< every deviation column decreases along the ladder
    double dissipation_ratio = 0.0;    ///< max weighted dissipation / value at the first rung
};

/// Geometric ladder eps_k = first * ratio^k, k < count.
std::vector<double> geometric_ladder(double first, double ratio, int count);

/// Deviations from the eps = 0 solve along a strictly decreasing eps ladder.
RegularizationLadder regularization_sweep(const FracOp& op, const MGTParams& p, const Potential& q, const Forcing& F,
                                          const ExteriorInput& phi, const std::vector<double>& eps,
                                          const TimeGrid& tg, const SolveOptions& opt = {});

struct IbpCheck {
    double lhs = 0.0;  ///< int <d_t^3 u, v>
    double rhs = 0.0;  ///< int <u, d_t^3 v>
    double residual = 0.0;
};

/// Integration-by-parts check for u solving the forward problem with (q1, F) from
/// rest and v solving the backward problem with (q2, G) to rest at T. Both sources
/// are nodal samples on omega. Third derivatives come from the equations.
IbpCheck ibp_residual(const FracOp& op, const MGTParams& p, const Potential& q1, const Potential& q2,
                      const Eigen::MatrixXd& F, const Eigen::MatrixXd& G, const TimeGrid& tg,
                      const SolveOptions& opt = {});

}  // namespace mgt
