#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mgt/grid.hpp"
#include "mgt/series.hpp"

namespace mgt {

/// Temporal envelope eta(t) with eta(0) = eta'(0) = eta''(0) = 0.
struct Envelope {
    enum class Kind { SinCubed, Power, Smoothstep };

    Kind kind = Kind::SinCubed;
    double T = 1.0;
    int mode = 0;          ///< SinCubed: sin^3(pi t/T) cos(mode pi t/T + phase)
    double phase = 0.0;
    double power = 3.0;    ///< Power: (t/T)^power, power >= 3
    double t_ramp = 0.5;   ///< Smoothstep: C^3 ramp from 0 to 1 on [0, t_ramp]
    bool reversed = false; ///< evaluate at T - t

    /// Taylor jet of eta around t (derivatives up to `order`).
    Series jet(double t, int order = 3) const;
    double value(double t, int deriv = 0) const;
    Envelope time_reversed() const;
};

Envelope sin_cubed(double T, int mode = 0, double phase = 0.0);
Envelope smoothstep(double T, double t_ramp);
Envelope power_envelope(double T, double p);

/// One separable piece profile(x) * weight * eta(t) of an exterior datum.
struct ExteriorTerm {
    Eigen::VectorXd profile;  ///< box vector, zero on omega
    Envelope envelope;
    double weight = 1.0;
};

/// Exterior Dirichlet datum phi(x,t) = amplitude * sum_j weight_j eta_j(t) p_j(x).
struct ExteriorInput {
    std::vector<ExteriorTerm> terms;
    double amplitude = 1.0;

    bool empty() const { return terms.empty() || amplitude == 0.0; }
    /// Box vector of d^k phi / dt^k at time t (zero-length box yields n_tot zeros).
    Eigen::VectorXd value(int n_tot, double t, int deriv = 0) const;
    ExteriorInput scaled(double a) const;
    ExteriorInput time_reversed() const;
    ExteriorInput operator+(const ExteriorInput& o) const;
    /// Throws SupportError when any profile touches omega, ConfigError on an
    /// envelope that violates the compatibility condition at t = 0.
    void validate(const Grid& grid) const;
};

/// cos^2 bump over the window nodes, multiplied by the Legendre polynomial of
/// the given degree in the window's normalized coordinate.
Eigen::VectorXd window_profile(const Grid& grid, const std::vector<int>& window, int degree = 0);

ExteriorInput make_input(const Grid& grid, const std::vector<int>& window, const Envelope& env,
                         double amplitude = 1.0, int degree = 0);

/// Bank of n_spatial x n_temporal inputs on a window: profile degree j, envelope
/// sin^3 with mode m (phase alternating by j for m > 0).
std::vector<ExteriorInput> make_bank(const Grid& grid, const std::vector<int>& window,
                                     int n_spatial, int n_temporal, double T, double amplitude = 1.0);

}  // namespace mgt
