#include "mgt/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mgt/errors.hpp"
#include "mgt/series.hpp"

namespace mgt {

Coefficient Coefficient::constant(int n_omega, double value) {
    Coefficient c;
    c.spatial = Eigen::VectorXd::Constant(n_omega, value);
    return c;
}

Coefficient Coefficient::profile(Eigen::VectorXd spatial, std::vector<double> poly) {
    Coefficient c;
    c.spatial = std::move(spatial);
    c.poly = std::move(poly);
    return c;
}

Coefficient Coefficient::samples(Eigen::MatrixXd values, double dt) {
    Coefficient c;
    c.sampled = std::move(values);
    c.dt = dt;
    return c;
}

bool Coefficient::is_zero() const {
    if (is_sampled()) return sampled.cwiseAbs().maxCoeff() == 0.0;
    if (spatial.size() == 0 || spatial.cwiseAbs().maxCoeff() == 0.0) return true;
    return std::all_of(poly.begin(), poly.end(), [](double p) { return p == 0.0; });
}

namespace {

double poly_derivative(const std::vector<double>& p, double t, int deriv) {
    double acc = 0.0;
    for (int j = static_cast<int>(p.size()) - 1; j >= deriv; --j) {
        double f = 1.0;
        for (int i = 0; i < deriv; ++i) f *= (j - i);
        acc = acc * t + f * p[j];
    }
    return acc;
}

double sampled_at(const Eigen::MatrixXd& v, double dt, int k, double t) {
    const int M = static_cast<int>(v.cols()) - 1;
    if (M == 0) return v(k, 0);
    double x = t / dt;
    x = std::clamp(x, 0.0, static_cast<double>(M));
    const int n = std::min(static_cast<int>(std::floor(x)), M - 1);
    const double th = x - n;
    return (1.0 - th) * v(k, n) + th * v(k, n + 1);
}

}  // namespace

double Coefficient::at(int k, double t, int deriv) const {
    if (!is_sampled()) {
        if (spatial.size() == 0) return 0.0;
        return spatial(k) * poly_derivative(poly, t, deriv);
    }
    if (deriv == 0) return sampled_at(sampled, dt, k, t);
    const int M = static_cast<int>(sampled.cols()) - 1;
    if (M < 2) return 0.0;
    // Differences on the nodal derivative field, then interpolate.
    auto nodal = [&](int d, int n) -> double {
        std::function<double(int, int)> rec = [&](int dd, int nn) -> double {
            if (dd == 0) return sampled(k, nn);
            if (nn == 0) return (rec(dd - 1, 1) - rec(dd - 1, 0)) / dt;
            if (nn == M) return (rec(dd - 1, M) - rec(dd - 1, M - 1)) / dt;
            return (rec(dd - 1, nn + 1) - rec(dd - 1, nn - 1)) / (2.0 * dt);
        };
        return rec(d, n);
    };
    double x = std::clamp(t / dt, 0.0, static_cast<double>(M));
    const int n = std::min(static_cast<int>(std::floor(x)), M - 1);
    const double th = x - n;
    return (1.0 - th) * nodal(deriv, n) + th * nodal(deriv, n + 1);
}

Nonlinearity zero_nonlinearity() { return PolynomialType{}; }

Nonlinearity monomial(int n_omega, double a, int p) {
    PolynomialType g;
    g.coefs.push_back(Coefficient::constant(n_omega, a));
    g.powers.push_back(p);
    return g;
}

bool is_westervelt(const Nonlinearity& g) {
    return std::holds_alternative<WesterveltBeta>(g) || std::holds_alternative<WesterveltKappa>(g);
}

void validate(const Nonlinearity& g) {
    if (const auto* p = std::get_if<PolynomialType>(&g)) {
        if (p->coefs.size() != p->powers.size()) throw ConfigError("coefficient/power count mismatch");
        for (int pw : p->powers)
            if (pw < 1) throw ConfigError("polynomial powers must be >= 1");
        if (p->gauss_exponent < 0) throw ConfigError("Gaussian exponent must be >= 0");
    } else if (const auto* h = std::get_if<Polyhomogeneous>(&g)) {
        if (h->alpha.size() != h->r.size() || h->r.empty())
            throw ConfigError("polyhomogeneous needs one amplitude per exponent");
        for (std::size_t k = 0; k < h->r.size(); ++k) {
            if (!(h->r[k] > 0.0) || h->r[k] > 1.0)
                throw ExponentOrderViolation("exponents must lie in (0, 1]");
            if (k > 0 && !(h->r[k] > h->r[k - 1]))
                throw ExponentOrderViolation("exponents must be strictly increasing");
        }
    }
}

std::vector<std::string> advisory_warnings(const Nonlinearity& g, int dim, double s) {
    std::vector<std::string> w;
    if (const auto* p = std::get_if<PolynomialType>(&g)) {
        for (int pw : p->powers) {
            if (pw < 2) w.push_back("power " + std::to_string(pw) + " < 2: d_tau g(0) may not vanish");
            // Sobolev-type growth: H^s embeds into L^{2 pw} when pw <= n/(n-2s) for 2s < n.
            if (2.0 * s < dim && pw > dim / (dim - 2.0 * s))
                w.push_back("power " + std::to_string(pw) + " exceeds the H^s growth range");
        }
    }
    if (is_westervelt(g) && s <= dim / 2.0) w.push_back("Westervelt runs need s > n/2");
    return w;
}

std::vector<double> g_taylor(const Nonlinearity& g, int k, double t, double tau, int order) {
    std::vector<double> out(order + 1, 0.0);
    if (const auto* p = std::get_if<PolynomialType>(&g)) {
        const std::size_t K = static_cast<std::size_t>(order);
        const Series x = Series::variable(K, tau);
        Series poly(K, 0.0);
        for (std::size_t j = 0; j < p->coefs.size(); ++j) {
            const double a = p->coefs[j].at(k, t);
            if (a != 0.0) poly = poly + x.pow(static_cast<unsigned>(p->powers[j])) * a;
        }
        if (p->gauss_exponent > 0) poly = poly * exp(x.pow(static_cast<unsigned>(p->gauss_exponent)) * -1.0);
        for (std::size_t j = 0; j <= K; ++j) out[j] = poly.derivative(j);
        return out;
    }
    if (const auto* h = std::get_if<Polyhomogeneous>(&g)) {
        if (order > 1) throw DerivativeOrderUnsupported("polyhomogeneous g is only C^1 at tau = 0");
        for (std::size_t j = 0; j < h->r.size(); ++j) {
            const double a = h->alpha[j].at(k, t);
            const double r = h->r[j];
            const double m = std::pow(std::abs(tau), r);
            out[0] += a * m * tau;
            if (order >= 1) out[1] += a * (r + 1.0) * m;
        }
        return out;
    }
    throw DerivativeOrderUnsupported("Westervelt nonlinearities are not functions of tau alone");
}

double g_eval(const Nonlinearity& g, int k, double t, double tau) { return g_taylor(g, k, t, tau, 0)[0]; }

double g_dtau(const Nonlinearity& g, int k, double t, double tau, int order) {
    return g_taylor(g, k, t, tau, order)[order];
}

double westervelt_bilinear(const Nonlinearity& g, int k, double t, const NodeState& a, const NodeState& b) {
    if (const auto* wb = std::get_if<WesterveltBeta>(&g)) {
        const double be = wb->beta.at(k, t), b1 = wb->beta.at(k, t, 1), b2 = wb->beta.at(k, t, 2);
        const double p = a.u * b.u;
        const double p1 = a.ut * b.u + a.u * b.ut;
        const double p2 = a.utt * b.u + 2.0 * a.ut * b.ut + a.u * b.utt;
        return b2 * p + 2.0 * b1 * p1 + be * p2;
    }
    if (const auto* wk = std::get_if<WesterveltKappa>(&g)) {
        const double ka = wk->kappa.at(k, t), k1 = wk->kappa.at(k, t, 1);
        return k1 * a.ut * b.ut + ka * (a.utt * b.ut + a.ut * b.utt);
    }
    throw DerivativeOrderUnsupported("bilinear source is defined for Westervelt forms only");
}

}  // namespace mgt
