#include "mgt/envelope.hpp"

#include <cmath>
#include <numbers>

#include "mgt/errors.hpp"

namespace mgt {

Series Envelope::jet(double t, int order) const {
    const std::size_t K = static_cast<std::size_t>(order);
    Series x = Series::variable(K, reversed ? T - t : t);
    if (reversed) x[1] = -1.0;
    switch (kind) {
        case Kind::SinCubed: {
            const double w = std::numbers::pi / T;
            const Series s = sin(x * w);
            const Series c = cos(x * (mode * w) + Series(K, phase));
            return s.pow(3) * c;
        }
        case Kind::Power: {
            const double y = x[0] / T;
            std::vector<double> f(K + 1, 0.0);
            double coef = 1.0;
            for (std::size_t k = 0; k <= K; ++k) {
                const double e = power - static_cast<double>(k);
                f[k] = (y <= 0.0) ? (e == 0.0 ? coef : 0.0) : coef * std::pow(y, e);
                f[k] /= std::pow(T, static_cast<double>(k));
                coef *= e;
            }
            return x.compose(f);
        }
        case Kind::Smoothstep: {
            // 35y^4 - 84y^5 + 70y^6 - 20y^7 has three vanishing derivatives at both ends.
            const double y0 = x[0] / t_ramp;
            if (y0 <= 0.0) return Series(K, 0.0);
            if (y0 >= 1.0) return Series(K, 1.0);
            Series y = x * (1.0 / t_ramp);
            return y.pow(4) * 35.0 - y.pow(5) * 84.0 + y.pow(6) * 70.0 - y.pow(7) * 20.0;
        }
    }
    return Series(K, 0.0);
}

double Envelope::value(double t, int deriv) const {
    return jet(t, std::max(deriv, 0)).derivative(static_cast<std::size_t>(deriv));
}

Envelope Envelope::time_reversed() const {
    Envelope e(*this);
    e.reversed = !reversed;
    return e;
}

Envelope sin_cubed(double T, int mode, double phase) {
    Envelope e;
    e.kind = Envelope::Kind::SinCubed;
    e.T = T;
    e.mode = mode;
    e.phase = phase;
    return e;
}

Envelope smoothstep(double T, double t_ramp) {
    Envelope e;
    e.kind = Envelope::Kind::Smoothstep;
    e.T = T;
    e.t_ramp = t_ramp;
    return e;
}

Envelope power_envelope(double T, double p) {
    Envelope e;
    e.kind = Envelope::Kind::Power;
    e.T = T;
    e.power = p;
    return e;
}

Eigen::VectorXd ExteriorInput::value(int n_tot, double t, int deriv) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_tot);
    for (const auto& term : terms) {
        const double e = term.envelope.value(t, deriv);
        if (e != 0.0) out += (amplitude * term.weight * e) * term.profile;
    }
    return out;
}

ExteriorInput ExteriorInput::scaled(double a) const {
    ExteriorInput r(*this);
    r.amplitude *= a;
    return r;
}

ExteriorInput ExteriorInput::time_reversed() const {
    ExteriorInput r(*this);
    for (auto& term : r.terms) term.envelope = term.envelope.time_reversed();
    return r;
}

ExteriorInput ExteriorInput::operator+(const ExteriorInput& o) const {
    ExteriorInput r;
    r.amplitude = 1.0;
    for (const auto* src : {this, &o})
        for (auto term : src->terms) {
            term.weight *= src->amplitude;
            r.terms.push_back(term);
        }
    return r;
}

void ExteriorInput::validate(const Grid& grid) const {
    for (const auto& term : terms) {
        if (term.profile.size() != grid.n_tot) throw ShapeMismatch("exterior profile is not a box vector");
        for (int i : grid.omega)
            if (term.profile(i) != 0.0) throw SupportError("exterior datum touches omega");
        if (!term.envelope.reversed) {
            const Series j = term.envelope.jet(0.0, 2);
            for (std::size_t k = 0; k <= 2; ++k)
                if (std::abs(j.derivative(k)) > 1e-14)
                    throw ConfigError("envelope violates eta(0)=eta'(0)=eta''(0)=0");
        }
    }
}

Eigen::VectorXd window_profile(const Grid& grid, const std::vector<int>& window, int degree) {
    if (window.empty()) throw EmptySetError("window is empty");
    Eigen::VectorXd p = Eigen::VectorXd::Zero(grid.n_tot);
    // Normalized coordinate per axis; the bump is the product over axes.
    const int axes = grid.d;
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (int i : window)
        for (int a = 0; a < axes; ++a) {
            lo[a] = std::min(lo[a], grid.coord(i, a));
            hi[a] = std::max(hi[a], grid.coord(i, a));
        }
    for (int i : window) {
        double v = 1.0;
        for (int a = 0; a < axes; ++a) {
            const double c = 0.5 * (lo[a] + hi[a]);
            const double w = 0.5 * (hi[a] - lo[a]) + grid.h;
            const double xi = (grid.coord(i, a) - c) / w;
            const double b = std::cos(0.5 * std::numbers::pi * xi);
            v *= b * b;
            if (a == 0 && degree > 0) v *= std::legendre(static_cast<unsigned>(degree), xi);
        }
        p(i) = v;
    }
    return p;
}

ExteriorInput make_input(const Grid& grid, const std::vector<int>& window, const Envelope& env,
                         double amplitude, int degree) {
    ExteriorInput in;
    in.amplitude = amplitude;
    in.terms.push_back({window_profile(grid, window, degree), env, 1.0});
    return in;
}

std::vector<ExteriorInput> make_bank(const Grid& grid, const std::vector<int>& window, int n_spatial,
                                     int n_temporal, double T, double amplitude) {
    std::vector<ExteriorInput> bank;
    for (int m = 0; m < n_temporal; ++m)
        for (int j = 0; j < n_spatial; ++j) {
            // The quarter-period shift would cancel a mode-0 envelope outright.
            const double phase = (m > 0 && j % 2) ? 0.5 * std::numbers::pi : 0.0;
            bank.push_back(make_input(grid, window, sin_cubed(T, m, phase), amplitude, j));
        }
    return bank;
}

}  // namespace mgt
