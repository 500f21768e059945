#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

#include "mgt/envelope.hpp"
#include "mgt/field.hpp"
#include "mgt/fracop.hpp"
#include "mgt/nonlinearity.hpp"

namespace mgt {

/// (d_t^3 + alpha d_t^2 + b A d_t + c A + q) u with tau fixed to 1.
struct MGTParams {
    double alpha = 1.0;
    double b = 1.0;
    double c = 0.5;
    double tau = 1.0;

    void validate() const;
};

enum class Scheme { ImplicitMidpoint, RK4 };

/// Potential q on omega: constant in time (one column) or sampled on a time
/// grid with linear interpolation between slices.
struct Potential {
    Eigen::MatrixXd values;  ///< n_omega x 1 or n_omega x (M+1); empty means q = 0
    double dt = 0.0;
    bool time_reversal_invariant = true;
    double p_exponent = std::numeric_limits<double>::infinity();

    static Potential zero() { return {}; }
    static Potential constant(Eigen::VectorXd q);
    static Potential sampled(Eigen::MatrixXd q, double dt, bool reversal_invariant);

    bool is_zero() const { return values.size() == 0; }
    bool time_dependent() const { return values.cols() > 1; }
    Eigen::VectorXd at(double t, int n_omega) const;
    Potential time_reversed() const;
    /// Max deviation between q(t_n) and q(T - t_n).
    double reversal_defect() const;
};

/// Source on omega. A sum of parts that are either callables of t, nodal
/// samples (linear interpolation) or one sample per step midpoint.
class Forcing {
public:
    using Fn = std::function<void(double, Eigen::Ref<Eigen::VectorXd>)>;

    static Forcing zero() { return {}; }
    static Forcing analytic(Fn f);
    static Forcing nodal(Eigen::MatrixXd values, double dt);
    static Forcing midpoint(Eigen::MatrixXd values, double dt);

    Forcing operator+(const Forcing& o) const;
    Forcing scaled(double a) const;
    bool empty() const { return parts_.empty(); }

    /// Accumulates the source at time t into out.
    void add_at(double t, Eigen::Ref<Eigen::VectorXd> out) const;
    /// Accumulates the source of step n (midpoint time) into out.
    void add_mid(int n, double t_mid, Eigen::Ref<Eigen::VectorXd> out) const;

private:
    struct Part {
        int kind = 0;  // 0 analytic, 1 nodal, 2 midpoint
        Fn fn;
        Eigen::MatrixXd values;
        double dt = 0.0;
        double scale = 1.0;
    };
    std::vector<Part> parts_;
};

/// Homogeneous part (u, u_t, u_tt) on omega plus the exterior lift.
struct Trajectory {
    TimeGrid time;
    Eigen::MatrixXd u, ut, utt;  ///< n_omega x (M+1)
    Eigen::MatrixXd source;      ///< total source on omega at the time nodes
    ExteriorInput phi;
    int iterations = 0;
    std::vector<double> residuals;     ///< Picard X-norm increments
    std::vector<double> contraction;   ///< successive increment ratios

    /// Full box vector of d^k u / dt^k at node n (omega part + phi), k <= 2.
    Eigen::VectorXd full(const Grid& grid, int n, int deriv = 0) const;
    /// Reconstructed nodal third derivative from the system right-hand side.
    Eigen::MatrixXd third_derivative(const FracOp& op, const MGTParams& p, const Potential& q,
                                     double eps_reg = 0.0) const;
};

struct SolveOptions {
    Scheme scheme = Scheme::ImplicitMidpoint;
    double eps_reg = 0.0;  ///< parabolic regularization eps A d_t^2
    double tol = 1e-10;
    int max_iter = 200;
};

/// F_tilde = -(b A d_t phi + c A phi) restricted to omega, as an analytic forcing.
Forcing lift_exterior(const ExteriorInput& phi, const MGTParams& p, const FracOp& op);
/// Nodal samples of the lift on the time grid.
Eigen::MatrixXd lift_samples(const ExteriorInput& phi, const MGTParams& p, const FracOp& op, const TimeGrid& tg);

/// Linear solve. `extra_mid` (n_omega x M), when given, is an additional
/// multiplicative potential sampled at the step midpoints.
Trajectory solve_linear_mgt(const FracOp& op, const MGTParams& p, const Potential& q, const Forcing& F,
                            const ExteriorInput& phi, const TimeGrid& tg, const SolveOptions& opt = {},
                            const Eigen::MatrixXd* extra_mid = nullptr);

/// Backward problem (d_t^3 - alpha d_t^2 + b A d_t - c A - q) w = G with zero
/// data at t = T, by time reversal of a forward solve with source -G*.
/// G is given as nodal samples on omega.
Trajectory solve_backward_adjoint(const FracOp& op, const MGTParams& p, const Potential& q,
                                  const Eigen::MatrixXd& G, const TimeGrid& tg, const SolveOptions& opt = {});

/// Picard iteration u^{k+1} = LinearSolve(F + F_tilde - g(u^k)).
Trajectory solve_semilinear_mgt(const FracOp& op, const MGTParams& p, const Potential& q, const Nonlinearity& g,
                                const ExteriorInput& phi, const TimeGrid& tg, const SolveOptions& opt = {},
                                const Forcing& F = Forcing::zero());

/// Frozen-nonlinearity iteration for the Westervelt forms (source on the right).
Trajectory solve_westervelt(const FracOp& op, const MGTParams& p, const Nonlinearity& g, const ExteriorInput& phi,
                            const TimeGrid& tg, const SolveOptions& opt = {}, const Potential& q = Potential::zero());

/// Midpoint samples of -g(u) for a trajectory, as used by the Picard map.
Eigen::MatrixXd semilinear_source_mid(const Nonlinearity& g, const Trajectory& tr);
/// Midpoint samples of the Westervelt source B(u,u).
Eigen::MatrixXd westervelt_source_mid(const Nonlinearity& g, const Trajectory& tr);
/// Midpoint samples of B(a, b) for two trajectories (polarization).
Eigen::MatrixXd westervelt_bilinear_mid(const Nonlinearity& g, const Trajectory& a, const Trajectory& b);

/// max_n ||u_tt|| + ||A^{s/2}u_t|| + ||A^{s/2}u||, h-weighted.
double x_norm(const FracOp& op, const Eigen::MatrixXd& u, const Eigen::MatrixXd& ut, const Eigen::MatrixXd& utt);
double x_norm(const FracOp& op, const Trajectory& tr);
double x_norm_diff(const FracOp& op, const Trajectory& a, const Trajectory& b);

struct EnergyLedger {
    Eigen::VectorXd kinetic;     ///< 1/2 ||u_tt||^2
    Eigen::VectorXd potential;   ///< b/2 ||A^{s/2}u_t||^2
    Eigen::VectorXd elastic;     ///< ||A^{s/2}u||^2
    Eigen::VectorXd cross;       ///< <A^{s/2}u, A^{s/2}u_tt>
    Eigen::VectorXd residual;    ///< per-step residual, trapezoid right-hand side
    double max_residual = 0.0;
    double x_norm = 0.0;
    double data_norm = 0.0;      ///< ||total source||_{L^2(Omega_T)}
    double empirical_C = 0.0;    ///< x_norm / data_norm
};

EnergyLedger energy_identity_check(const Trajectory& tr, const FracOp& op, const MGTParams& p, const Potential& q);

}  // namespace mgt
