#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>
#include <vector>

namespace mgt {

/// Coefficient a(x,t) on omega. Either spatial profile times a polynomial in t
/// (exact time derivatives) or samples on the time grid (linear interpolation,
/// centered differences with one-sided ends for derivatives).
struct Coefficient {
    Eigen::VectorXd spatial;
    std::vector<double> poly{1.0};
    Eigen::MatrixXd sampled;
    double dt = 0.0;

    static Coefficient constant(int n_omega, double value);
    static Coefficient profile(Eigen::VectorXd spatial, std::vector<double> poly = {1.0});
    static Coefficient samples(Eigen::MatrixXd values, double dt);

    double at(int k, double t, int deriv = 0) const;
    bool is_sampled() const { return sampled.size() > 0; }
    bool is_zero() const;
    int rows() const { return static_cast<int>(is_sampled() ? sampled.rows() : spatial.size()); }
};

/// g = (sum_j a_j tau^{p_j}) * exp(-tau^K)   (K = 0: no Gaussian factor).
struct PolynomialType {
    std::vector<Coefficient> coefs;
    std::vector<int> powers;
    int gauss_exponent = 0;
};

/// g = sum_k alpha_k |tau|^{r_k} tau with 0 < r_1 < ... < r_L <= 1.
struct Polyhomogeneous {
    std::vector<Coefficient> alpha;
    std::vector<double> r;
};

/// Source d_t^2(beta u^2) on the right-hand side.
struct WesterveltBeta {
    Coefficient beta;
};

/// Source d_t(kappa (d_t u)^2) on the right-hand side.
struct WesterveltKappa {
    Coefficient kappa;
};

using Nonlinearity = std::variant<PolynomialType, Polyhomogeneous, WesterveltBeta, WesterveltKappa>;

Nonlinearity zero_nonlinearity();
/// a * tau^p with a constant on omega.
Nonlinearity monomial(int n_omega, double a, int p);

bool is_westervelt(const Nonlinearity& g);

/// Throws ExponentOrderViolation for a badly ordered polyhomogeneous family.
void validate(const Nonlinearity& g);

/// Advisory growth checks; returns human-readable warnings (never throws).
std::vector<std::string> advisory_warnings(const Nonlinearity& g, int dim, double s);

/// g(x_k, t, tau).
double g_eval(const Nonlinearity& g, int k, double t, double tau);

/// d^j g / d tau^j at (x_k, t, tau) for j = 0..order.
std::vector<double> g_taylor(const Nonlinearity& g, int k, double t, double tau, int order);

double g_dtau(const Nonlinearity& g, int k, double t, double tau, int order);

/// Nodal state (u, u_t, u_tt) used by the Westervelt sources.
struct NodeState {
    double u = 0.0, ut = 0.0, utt = 0.0;
};

/// Symmetric bilinear form B with Westervelt source B(u,u):
///   beta:  d_t^2(beta u w),   kappa: d_t(kappa u_t w_t).
double westervelt_bilinear(const Nonlinearity& g, int k, double t, const NodeState& a, const NodeState& b);

}  // namespace mgt
