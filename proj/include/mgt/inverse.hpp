#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mgt/dnmap.hpp"
#include "mgt/forward.hpp"
#include "mgt/linearize.hpp"

namespace mgt {

struct TikhonovResult {
    Eigen::VectorXd x;
    double lambda = 0.0;
    double sigma_max = 0.0;
    double sigma_min = 0.0;
    double cond_raw = 0.0;  ///< sigma_max / sigma_min
    double cond_reg = 0.0;  ///< sqrt((sigma_max^2 + lambda) / (sigma_min^2 + lambda))
    double residual = 0.0;  ///< ||K x - d|| / ||d||
};

/// argmin ||K x - d||^2 + lambda ||x||^2 with lambda = lambda_rel * sigma_max^2.
/// Throws IllConditioned when the regularized condition number exceeds 1e12.
TikhonovResult tikhonov_solve(const Eigen::MatrixXd& K, const Eigen::VectorXd& d, double lambda_rel = 1e-8);

/// Smooth indicator of omega: 1 on the inner 80% of each axis, C^3 taper to 0 at the boundary.
Eigen::VectorXd mollified_indicator(const Grid& grid);
/// Space-time Runge target: mollified indicator times a C^3 ramp over [0, ramp * T].
Eigen::MatrixXd runge_target(const Grid& grid, const TimeGrid& tg, double ramp = 0.25);

struct RungeProblem {
    Eigen::MatrixXd target;
    double lambda = 0.0;
    Eigen::VectorXd c;
    Eigen::MatrixXd achieved;  ///< sum_i c_i (u_i - phi_i)
    double residual = 0.0;     ///< L2(Omega_T) norm of achieved - target
    double target_norm = 0.0;
};

/// Ridge-regularized steering of sum_i c_i (u_{phi_i} - phi_i) toward target in L2(Omega_T).
/// `bank` holds the homogeneous parts (trajectory u) of the bank solutions.
RungeProblem runge_control(const Grid& grid, const TimeGrid& tg, const Eigen::MatrixXd& target,
                           const std::vector<Eigen::MatrixXd>& bank, double lambda);

/// Pairings <Lambda_q phi_i, rho_j*> over an input and a test bank.
struct DNDataset {
    std::vector<ExteriorInput> inputs;
    std::vector<ExteriorInput> tests;
    Eigen::MatrixXd pairings;  ///< inputs x tests
    MGTParams params;
    TimeGrid time;
    double noise_level = 0.0;
};

DNDataset make_dn_dataset(const FracOp& op, const MGTParams& p, const Potential& q,
                          const std::vector<ExteriorInput>& inputs, const std::vector<ExteriorInput>& tests,
                          const TimeGrid& tg, const SolveOptions& opt = {}, double noise_level = 0.0,
                          std::uint64_t seed = 0);

struct ReconstructionReport {
    std::string name;
    Eigen::MatrixXd recovered;  ///< n_omega x columns (time-independent fields: one column)
    Eigen::MatrixXd truth;      ///< optional, same shape
    double rel_error = -1.0;    ///< relative L2 error vs truth, -1 when unknown
    double lambda = 0.0;
    double cond_raw = 0.0;
    double cond_reg = 0.0;
    double data_residual = 0.0;
    std::vector<double> misfit_log;
    std::vector<double> error_log;
    std::map<std::string, double> extras;
};

double relative_l2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& truth);

struct QRecoveryOptions {
    double lambda_rel = 1e-8;
    int newton_iters = 0;
    double lambda_decay = 0.1;   ///< Newton step k uses lambda_rel * lambda_decay^k
    bool exact_jacobian = true;  ///< Newton steps use the discrete sensitivity instead of the Born matrix
    const Eigen::VectorXd* truth = nullptr;
    SolveOptions solve;
};

/// Born matrix rows (i, j), columns omega nodes:
///   int_0^T h (u_i - phi_i)(x_k, t) (u_j - rho_j)(x_k, T - t) dt
/// with u_i solved under q and the test solutions under q*.
Eigen::MatrixXd born_matrix(const FracOp& op, const DNDataset& data, const Potential& q, const SolveOptions& opt = {});
/// Exact derivative of the discrete pairings with respect to a time-independent
/// nodal perturbation of q (one sensitivity solve per input and node).
Eigen::MatrixXd pairing_jacobian(const FracOp& op, const DNDataset& data, const Potential& q,
                                 const SolveOptions& opt = {});
/// Forward pairings for the dataset's banks under q.
Eigen::MatrixXd forward_pairings(const FracOp& op, const DNDataset& data, const Potential& q,
                                 const SolveOptions& opt = {});

/// Time-independent potential recovery: Born step about the prior plus optional
/// Gauss-Newton refinement with the Born matrix re-assembled at each iterate.
ReconstructionReport recover_q(const FracOp& op, const DNDataset& data, const Potential& prior,
                               const QRecoveryOptions& o = {});

/// Linear map from a coefficient field c(x) on omega to exterior traces on a window,
/// for sources  c(x) * weight(x, t)  given at step midpoints. Columns: omega nodes.
/// Rows: window nodes x time nodes (time-major).
Eigen::MatrixXd source_to_trace_map(const FracOp& op, const MGTParams& p, const Potential& q,
                                    const Eigen::MatrixXd& weight_mid, const TimeGrid& tg,
                                    const std::vector<int>& window, const SolveOptions& opt = {});

/// Same map for a source that is an arbitrary linear function of the coefficient,
/// with one precomputed midpoint source per omega node.
Eigen::MatrixXd columns_to_trace_map(const FracOp& op, const MGTParams& p, const Potential& q,
                                     const std::vector<Eigen::MatrixXd>& column_sources, const TimeGrid& tg,
                                     const std::vector<int>& window, const SolveOptions& opt = {});

/// Trace on a window, flattened time-major (matches the map rows above).
Eigen::VectorXd flatten_trace(const DNTrace& tr, const Grid& grid, const std::vector<int>& window);

struct SteeringOptions {
    int bank_spatial = 2;
    int bank_temporal = 8;
    double runge_lambda = 1e-10;
    double ramp = 0.25;
    double amplitude = 1.0;  ///< size of the steered datum in the nonlinear runs
};

/// Exterior datum on W1 whose linear response approximates the Runge target,
/// scaled so its response has unit sup-norm; also returns the response.
struct SteeredInput {
    ExteriorInput phi;
    Trajectory response;
    RungeProblem runge;
};

SteeredInput steer_to_indicator(const FracOp& op, const MGTParams& p, const Potential& q, const TimeGrid& tg,
                                const SteeringOptions& so, const SolveOptions& opt = {});

struct TaylorRecoveryOptions {
    int order = 2;
    double eta = 1e-2;          ///< eps-step of the central quotient (relative to the steered datum)
    double lambda_rel = 1e-8;
    double divisor_floor = 0.1;
    SteeringOptions steering;
    SolveOptions solve;
    const Eigen::VectorXd* truth = nullptr;  ///< d^N_tau g(0) on omega, for reporting
};

/// Recovers x -> d^N_tau g(x, 0) (time-independent) from eps-families of exterior traces.
/// Lower Taylor orders (2..N-1) are taken from `known_lower` when N > 2.
ReconstructionReport recover_g_taylor(const FracOp& op, const MGTParams& p, const Potential& q, const Nonlinearity& g_true,
                                      const TimeGrid& tg, const TaylorRecoveryOptions& o,
                                      const std::vector<Eigen::VectorXd>& known_lower = {});

struct PolyRecoveryOptions {
    std::vector<double> r;                     ///< known exponents
    std::vector<double> eps_ladder{0.02, 0.01, 0.005, 0.0025};
    double lambda_rel = 1e-8;
    int refinements = 4;
    bool joint = false;                        ///< fit all amplitudes at once instead of peeling
    SteeringOptions steering;
    SolveOptions solve;
    const std::vector<double>* truth = nullptr;
};

/// Recovers constant amplitudes alpha_k of g = sum alpha_k |u|^{r_k} u.
ReconstructionReport recover_polyhomogeneous(const FracOp& op, const MGTParams& p, const Potential& q,
                                             const Nonlinearity& g_true, const TimeGrid& tg,
                                             const PolyRecoveryOptions& o);

/// Decay of ||v - u_eps / eps||_X along an eps ladder, with fitted slope.
struct DecayReport {
    std::vector<double> eps;
    std::vector<double> deviation;
    double slope = 0.0;
    double r_squared = 0.0;
};

DecayReport polyhomogeneous_decay(const FracOp& op, const MGTParams& p, const Potential& q, const Nonlinearity& g,
                                  const ExteriorInput& phi, const TimeGrid& tg, const std::vector<double>& eps,
                                  const SolveOptions& opt = {});

struct WesterveltRecoveryOptions {
    double eta = 1e-2;
    double lambda_rel = 1e-8;
    double divisor_floor = 0.1;
    bool constant_coefficient = false;  ///< fit one scalar instead of a nodal field
    SteeringOptions steering;
    SolveOptions solve;
    const Eigen::VectorXd* truth = nullptr;
};

ReconstructionReport recover_westervelt_beta(const FracOp& op, const MGTParams& p, const Nonlinearity& g_true,
                                             const TimeGrid& tg, const WesterveltRecoveryOptions& o);
ReconstructionReport recover_westervelt_kappa(const FracOp& op, const MGTParams& p, const Nonlinearity& g_true,
                                              const TimeGrid& tg, const WesterveltRecoveryOptions& o);

}  // namespace mgt
