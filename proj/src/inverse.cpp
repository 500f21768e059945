#include "mgt/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mgt/errors.hpp"
#include "mgt/parallel.hpp"

namespace mgt {

// ---------------------------------------------------------------- least squares

TikhonovResult tikhonov_solve(const Eigen::MatrixXd& K, const Eigen::VectorXd& d, double lambda_rel) {
    if (K.rows() != d.size()) throw ShapeMismatch("least-squares matrix and data sizes differ");
    if (K.cols() == 0) throw ShapeMismatch("least-squares matrix has no columns");
    if (lambda_rel < 0.0) throw ConfigError("regularization must be >= 0");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    TikhonovResult r;
    r.sigma_max = sv.size() ? sv(0) : 0.0;
    // Columns beyond the row count carry zero singular values.
    r.sigma_min = K.cols() > K.rows() ? 0.0 : sv(sv.size() - 1);
    if (!(r.sigma_max > 0.0)) throw IllConditioned("assembled linear map is zero");
    r.lambda = lambda_rel * r.sigma_max * r.sigma_max;
    r.cond_raw = r.sigma_min > 0.0 ? r.sigma_max / r.sigma_min : std::numeric_limits<double>::infinity();
    const double den = r.sigma_min * r.sigma_min + r.lambda;
    r.cond_reg = den > 0.0 ? std::sqrt((r.sigma_max * r.sigma_max + r.lambda) / den)
                           : std::numeric_limits<double>::infinity();
    if (!(r.cond_reg <= 1e12))
        throw IllConditioned("regularized condition number " + std::to_string(r.cond_reg) + " exceeds 1e12");
    Eigen::VectorXd f(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        const double s = sv(i), dd = s * s + r.lambda;
        f(i) = dd > 0.0 ? s / dd : 0.0;
    }
    r.x = svd.matrixV() * f.asDiagonal() * (svd.matrixU().transpose() * d);
    const double dn = d.norm();
    r.residual = dn > 0.0 ? (K * r.x - d).norm() / dn : 0.0;
    return r;
}

double relative_l2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& truth) {
    if (a.rows() != truth.rows() || a.cols() != truth.cols()) throw ShapeMismatch("fields differ in shape");
    const double t = truth.norm();
    return t > 0.0 ? (a - truth).norm() / t : (a - truth).norm();
}

// ---------------------------------------------------------------- Runge control

namespace {

// C^3 step: 0 for y <= 0, 1 for y >= 1.
double c3_step(double y) {
    if (y <= 0.0) return 0.0;
    if (y >= 1.0) return 1.0;
    const double y4 = y * y * y * y;
    return y4 * (35.0 - 84.0 * y + 70.0 * y * y - 20.0 * y * y * y);
}

}  // namespace

Eigen::VectorXd mollified_indicator(const Grid& grid) {
    const int n = grid.n_omega();
    Eigen::VectorXd chi(n);
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (int i : grid.omega)
        for (int a = 0; a < grid.d; ++a) {
            lo[a] = std::min(lo[a], grid.coord(i, a));
            hi[a] = std::max(hi[a], grid.coord(i, a));
        }
    for (int k = 0; k < n; ++k) {
        double v = 1.0;
        for (int a = 0; a < grid.d; ++a) {
            const double c = 0.5 * (lo[a] + hi[a]);
            const double half = 0.5 * (hi[a] - lo[a]) + 0.5 * grid.h;
            const double xi = std::abs(grid.coord(grid.omega[k], a) - c) / half;
            v *= c3_step((1.0 - xi) / 0.2);
        }
        chi(k) = v;
    }
    return chi;
}

Eigen::MatrixXd runge_target(const Grid& grid, const TimeGrid& tg, double ramp) {
    if (!(ramp > 0.0)) throw ConfigError("ramp fraction must be positive");
    const Eigen::VectorXd chi = mollified_indicator(grid);
    Eigen::MatrixXd t(grid.n_omega(), tg.steps + 1);
    for (int s = 0; s <= tg.steps; ++s) t.col(s) = chi * c3_step(tg.t(s) / (ramp * tg.T()));
    return t;
}

namespace {

// Trapezoid-in-time, h^d-in-space weights flattened column-major.
Eigen::VectorXd l2_weights(const Grid& grid, const TimeGrid& tg) {
    const int n = grid.n_omega(), M = tg.steps;
    Eigen::VectorXd w(static_cast<Eigen::Index>(n) * (M + 1));
    for (int s = 0; s <= M; ++s) {
        const double wt = (s == 0 || s == M) ? 0.5 * tg.dt : tg.dt;
        w.segment(static_cast<Eigen::Index>(s) * n, n).setConstant(grid.cell() * wt);
    }
    return w;
}

Eigen::Map<const Eigen::VectorXd> flat(const Eigen::MatrixXd& m) { return {m.data(), m.size()}; }

}  // namespace

RungeProblem runge_control(const Grid& grid, const TimeGrid& tg, const Eigen::MatrixXd& target,
                           const std::vector<Eigen::MatrixXd>& bank, double lambda) {
    if (bank.empty()) throw EmptyBank("Runge bank is empty");
    if (lambda < 0.0) throw ConfigError("Runge regularization must be >= 0");
    const int n = grid.n_omega(), M = tg.steps;
    if (target.rows() != n || target.cols() != M + 1) throw ShapeMismatch("Runge target has the wrong shape");
    const Eigen::VectorXd sw = l2_weights(grid, tg).cwiseSqrt();
    Eigen::MatrixXd B(sw.size(), static_cast<Eigen::Index>(bank.size()));
    for (std::size_t i = 0; i < bank.size(); ++i) {
        if (bank[i].rows() != n || bank[i].cols() != M + 1) throw ShapeMismatch("Runge bank field has the wrong shape");
        B.col(static_cast<Eigen::Index>(i)) = sw.cwiseProduct(flat(bank[i]));
    }
    const Eigen::VectorXd t = sw.cwiseProduct(flat(target));

    Eigen::BDCSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = sv.size() ? sv(0) * 1e-14 : 0.0;
    Eigen::VectorXd f(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        const double s = sv(i);
        f(i) = s > cutoff ? s / (s * s + lambda) : 0.0;
    }
    RungeProblem r;
    r.target = target;
    r.lambda = lambda;
    r.c = svd.matrixV() * f.asDiagonal() * (svd.matrixU().transpose() * t);
    r.achieved = Eigen::MatrixXd::Zero(n, M + 1);
    for (std::size_t i = 0; i < bank.size(); ++i) r.achieved += r.c(static_cast<Eigen::Index>(i)) * bank[i];
    r.residual = std::sqrt(spacetime_inner(grid, r.achieved - target, r.achieved - target, tg.dt));
    r.target_norm = std::sqrt(spacetime_inner(grid, target, target, tg.dt));
    return r;
}

// ---------------------------------------------------------------- potential recovery

DNDataset make_dn_dataset(const FracOp& op, const MGTParams& p, const Potential& q,
                          const std::vector<ExteriorInput>& inputs, const std::vector<ExteriorInput>& tests,
                          const TimeGrid& tg, const SolveOptions& opt, double noise_level, std::uint64_t seed) {
    if (inputs.empty() || tests.empty()) throw EmptyBank("DN dataset needs inputs and tests");
    if (noise_level < 0.0) throw ConfigError("noise level must be >= 0");
    DNDataset ds;
    ds.inputs = inputs;
    ds.tests = tests;
    ds.params = p;
    ds.time = tg;
    ds.noise_level = noise_level;
    ds.pairings = forward_pairings(op, ds, q, opt);
    if (noise_level > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd(0.0, 1.0);
        const double rms = ds.pairings.norm() / std::sqrt(static_cast<double>(ds.pairings.size()));
        for (Eigen::Index j = 0; j < ds.pairings.cols(); ++j)
            for (Eigen::Index i = 0; i < ds.pairings.rows(); ++i) ds.pairings(i, j) += noise_level * rms * nd(rng);
    }
    return ds;
}

Eigen::MatrixXd forward_pairings(const FracOp& op, const DNDataset& data, const Potential& q,
                                 const SolveOptions& opt) {
    std::vector<ExteriorInput> tests_rev;
    for (const auto& r : data.tests) tests_rev.push_back(r.time_reversed());
    Eigen::MatrixXd D(data.inputs.size(), data.tests.size());
    parallel_for(data.inputs.size(), [&](std::size_t i) {
        const Trajectory u = solve_linear_mgt(op, data.params, q, Forcing::zero(), data.inputs[i], data.time, opt);
        const DNTrace tr = dn_trace(u, op, data.params);
        for (std::size_t j = 0; j < tests_rev.size(); ++j)
            D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dn_pairing(tr, tests_rev[j], op.grid);
    });
    return D;
}

Eigen::MatrixXd born_matrix(const FracOp& op, const DNDataset& data, const Potential& q, const SolveOptions& opt) {
    const Grid& g = op.grid;
    const TimeGrid& tg = data.time;
    const int n = g.n_omega(), M = tg.steps;
    const Potential qs = q.time_reversed();
    std::vector<Eigen::MatrixXd> U(data.inputs.size()), Z(data.tests.size());
    // Test solutions are paired reversed in time; store them already reversed.
    parallel_for(U.size() + Z.size(), [&](std::size_t i) {
        if (i < U.size())
            U[i] = solve_linear_mgt(op, data.params, q, Forcing::zero(), data.inputs[i], tg, opt).u;
        else
            Z[i - U.size()] = reverse_time(
                solve_linear_mgt(op, data.params, qs, Forcing::zero(), data.tests[i - U.size()], tg, opt).u);
    });
    Eigen::VectorXd w(M + 1);
    for (int s = 0; s <= M; ++s) w(s) = g.cell() * ((s == 0 || s == M) ? 0.5 * tg.dt : tg.dt);
    Eigen::MatrixXd K(static_cast<Eigen::Index>(U.size() * Z.size()), n);
    for (std::size_t i = 0; i < U.size(); ++i) {
        const Eigen::MatrixXd Uw = U[i] * w.asDiagonal();
        for (std::size_t j = 0; j < Z.size(); ++j)
            K.row(static_cast<Eigen::Index>(i * Z.size() + j)) = Uw.cwiseProduct(Z[j]).rowwise().sum().transpose();
    }
    return K;
}

Eigen::MatrixXd pairing_jacobian(const FracOp& op, const DNDataset& data, const Potential& q,
                                 const SolveOptions& opt) {
    const int n = op.grid.n_omega();
    const TimeGrid& tg = data.time;
    std::vector<ExteriorInput> tests_rev;
    for (const auto& r : data.tests) tests_rev.push_back(r.time_reversed());
    const Eigen::Index nt = static_cast<Eigen::Index>(tests_rev.size());
    Eigen::MatrixXd J(static_cast<Eigen::Index>(data.inputs.size()) * nt, n);
    std::vector<Eigen::MatrixXd> um(data.inputs.size());
    parallel_for(um.size(), [&](std::size_t i) {
        um[i] = midpoint_average(
            solve_linear_mgt(op, data.params, q, Forcing::zero(), data.inputs[i], tg, opt).u);
    });
    parallel_for(data.inputs.size() * static_cast<std::size_t>(n), [&](std::size_t job) {
        const std::size_t i = job / static_cast<std::size_t>(n);
        const int k = static_cast<int>(job % static_cast<std::size_t>(n));
        Eigen::MatrixXd src = Eigen::MatrixXd::Zero(n, tg.steps);
        src.row(k) = -um[i].row(k);
        const Trajectory du =
            solve_linear_mgt(op, data.params, q, Forcing::midpoint(src, tg.dt), ExteriorInput{}, tg, opt);
        const DNTrace tr = dn_trace(du, op, data.params);
        for (Eigen::Index j = 0; j < nt; ++j)
            J(static_cast<Eigen::Index>(i) * nt + j, k) = dn_pairing(tr, tests_rev[j], op.grid);
    });
    return J;
}

namespace {

Potential shifted(const Potential& q, const Eigen::VectorXd& dq) {
    if (q.is_zero()) return Potential::constant(dq);
    if (!q.time_dependent()) return Potential::constant(q.values.col(0) + dq);
    Eigen::MatrixXd v = q.values;
    v.colwise() += dq;
    return Potential::sampled(v, q.dt, q.time_reversal_invariant);
}

Eigen::VectorXd row_major(const Eigen::MatrixXd& m) {
    Eigen::VectorXd v(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
    return v;
}

}  // namespace

ReconstructionReport recover_q(const FracOp& op, const DNDataset& data, const Potential& prior,
                               const QRecoveryOptions& o) {
    const int n = op.grid.n_omega();
    if (data.pairings.rows() != static_cast<Eigen::Index>(data.inputs.size()) ||
        data.pairings.cols() != static_cast<Eigen::Index>(data.tests.size()))
        throw ShapeMismatch("dataset pairings do not match the banks");
    if (prior.reversal_defect() > 1e-12) throw ConfigError("prior potential must be time-reversal invariant");
    if (o.newton_iters < 0) throw ConfigError("newton iterations must be >= 0");
    if (!(o.lambda_decay > 0.0) || o.lambda_decay > 1.0) throw ConfigError("lambda decay must lie in (0, 1]");
    if (o.truth && o.truth->size() != n) throw ShapeMismatch("truth has the wrong size");

    ReconstructionReport rep;
    rep.name = "potential";
    const Eigen::VectorXd D = row_major(data.pairings);
    const double dnorm = D.norm();
    Eigen::VectorXd dq = Eigen::VectorXd::Zero(n);

    auto misfit_at = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd r = D - row_major(forward_pairings(op, data, shifted(prior, x), o.solve));
        return r;
    };

    Eigen::VectorXd r = misfit_at(dq);
    rep.misfit_log.push_back(dnorm > 0.0 ? r.norm() / dnorm : r.norm());
    if (o.truth) rep.error_log.push_back(relative_l2(dq, *o.truth));
    for (int it = 0; it <= o.newton_iters; ++it) {
        const Potential cur = shifted(prior, dq);
        const Eigen::MatrixXd K =
            (it > 0 && o.exact_jacobian) ? pairing_jacobian(op, data, cur, o.solve) : born_matrix(op, data, cur, o.solve);
        const TikhonovResult t = tikhonov_solve(K, r, o.lambda_rel * std::pow(o.lambda_decay, it));
        dq += t.x;
        rep.lambda = t.lambda;
        rep.cond_raw = t.cond_raw;
        rep.cond_reg = t.cond_reg;
        r = misfit_at(dq);
        rep.misfit_log.push_back(dnorm > 0.0 ? r.norm() / dnorm : r.norm());
        if (o.truth) rep.error_log.push_back(relative_l2(dq, *o.truth));
        if (it == 0) rep.extras["born_error"] = o.truth ? rep.error_log.back() : -1.0;
    }
    rep.recovered = dq;
    rep.data_residual = rep.misfit_log.back();
    if (o.truth) {
        rep.truth = *o.truth;
        rep.rel_error = relative_l2(dq, *o.truth);
    }
    return rep;
}

// ---------------------------------------------------------------- source-to-trace maps

Eigen::VectorXd flatten_trace(const DNTrace& tr, const Grid& grid, const std::vector<int>& window) {
    const Eigen::MatrixXd w = restrict_trace(tr, grid, window);
    return flat(w);
}

Eigen::MatrixXd columns_to_trace_map(const FracOp& op, const MGTParams& p, const Potential& q,
                                     const std::vector<Eigen::MatrixXd>& column_sources, const TimeGrid& tg,
                                     const std::vector<int>& window, const SolveOptions& opt) {
    if (column_sources.empty()) throw EmptyBank("no columns to assemble");
    const Eigen::Index rows = static_cast<Eigen::Index>(window.size()) * (tg.steps + 1);
    Eigen::MatrixXd K(rows, static_cast<Eigen::Index>(column_sources.size()));
    parallel_for(column_sources.size(), [&](std::size_t c) {
        const Trajectory w =
            solve_linear_mgt(op, p, q, Forcing::midpoint(column_sources[c], tg.dt), ExteriorInput{}, tg, opt);
        K.col(static_cast<Eigen::Index>(c)) = flatten_trace(dn_trace(w, op, p), op.grid, window);
    });
    return K;
}

Eigen::MatrixXd source_to_trace_map(const FracOp& op, const MGTParams& p, const Potential& q,
                                    const Eigen::MatrixXd& weight_mid, const TimeGrid& tg,
                                    const std::vector<int>& window, const SolveOptions& opt) {
    const int n = op.grid.n_omega();
    if (weight_mid.rows() != n || weight_mid.cols() != tg.steps) throw ShapeMismatch("weight must be n_omega x M");
    std::vector<Eigen::MatrixXd> cols;
    for (int k = 0; k < n; ++k) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, tg.steps);
        s.row(k) = weight_mid.row(k);
        cols.push_back(std::move(s));
    }
    return columns_to_trace_map(op, p, q, cols, tg, window, opt);
}

// ---------------------------------------------------------------- steering

SteeredInput steer_to_indicator(const FracOp& op, const MGTParams& p, const Potential& q, const TimeGrid& tg,
                                const SteeringOptions& so, const SolveOptions& opt) {
    const Grid& g = op.grid;
    const auto bank = make_bank(g, g.w1, so.bank_spatial, so.bank_temporal, tg.T(), 1.0);
    std::vector<Eigen::MatrixXd> fields;
    for (const auto& phi : bank) fields.push_back(solve_linear_mgt(op, p, q, Forcing::zero(), phi, tg, opt).u);
    SteeredInput out;
    out.runge = runge_control(g, tg, runge_target(g, tg, so.ramp), fields, so.runge_lambda);
    ExteriorInput phi;
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const double c = out.runge.c(static_cast<Eigen::Index>(i));
        if (c != 0.0) phi = phi + bank[i].scaled(c);
    }
    const double peak = out.runge.achieved.cwiseAbs().maxCoeff();
    if (!(peak > 0.0)) throw SmallDivisor("Runge steering produced a zero field");
    out.phi = phi.scaled(so.amplitude / peak);
    out.response = solve_linear_mgt(op, p, q, Forcing::zero(), out.phi, tg, opt);
    return out;
}

namespace {

// Per-node peak of |prod v| over time, checked against the floor on the plateau
// of the indicator. Returns the smallest plateau ratio.
double check_divisor(const Grid& grid, const Eigen::MatrixXd& weight_mid, double floor) {
    const Eigen::VectorXd chi = mollified_indicator(grid);
    const Eigen::VectorXd d = weight_mid.cwiseAbs().rowwise().maxCoeff();
    const double dmax = d.maxCoeff();
    if (!(dmax > 0.0)) throw SmallDivisor("divisor vanishes identically");
    double worst = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < d.size(); ++k)
        if (chi(k) >= 0.9) worst = std::min(worst, d(k) / dmax);
    if (worst < floor)
        throw SmallDivisor("divisor dropped to " + std::to_string(worst) + " of its max inside omega (floor " +
                           std::to_string(floor) + ")");
    return worst;
}

// Central N-th difference of eps -> trace(eps phi) with spacing eta (error O(eta^2)).
template <class TraceAt>
Eigen::VectorXd central_quotient(int N, double eta, TraceAt trace_at) {
    Eigen::VectorXd acc;
    double binom = 1.0;
    for (int j = 0; j <= N; ++j) {
        const double e = (0.5 * N - j) * eta;
        const double w = ((j % 2) ? -binom : binom) / std::pow(eta, N);
        Eigen::VectorXd t = trace_at(e);
        if (acc.size() == 0) acc = Eigen::VectorXd::Zero(t.size());
        acc += w * t;
        binom = binom * (N - j) / (j + 1);
    }
    return acc;
}

void fill_report(ReconstructionReport& rep, const TikhonovResult& t) {
    rep.lambda = t.lambda;
    rep.cond_raw = t.cond_raw;
    rep.cond_reg = t.cond_reg;
    rep.data_residual = t.residual;
    rep.misfit_log.push_back(t.residual);
}

}  // namespace

// ---------------------------------------------------------------- Taylor coefficients of g

ReconstructionReport recover_g_taylor(const FracOp& op, const MGTParams& p, const Potential& q, const Nonlinearity& g_true,
                                      const TimeGrid& tg, const TaylorRecoveryOptions& o,
                                      const std::vector<Eigen::VectorXd>& known_lower) {
    const Grid& grid = op.grid;
    const int N = o.order;
    if (N < 2 || N > 8) throw OrderTooLarge("Taylor order must lie in 2..8");
    if (static_cast<int>(known_lower.size()) < N - 2) throw ConfigError("lower Taylor coefficients are missing");
    if (is_westervelt(g_true)) throw ConfigError("Taylor recovery expects a semilinear nonlinearity");
    if (!(o.eta > 0.0)) throw ConfigError("eta must be positive");

    const SteeredInput st = steer_to_indicator(op, p, q, tg, o.steering, o.solve);
    const Eigen::MatrixXd v_mid = midpoint_average(st.response.u);
    const Eigen::MatrixXd weight = -v_mid.array().pow(N).matrix();

    ReconstructionReport rep;
    rep.name = "taylor_order_" + std::to_string(N);
    rep.extras["runge_residual"] = st.runge.residual / st.runge.target_norm;
    rep.extras["divisor_min_ratio"] = check_divisor(grid, weight, o.divisor_floor);

    auto trace_at = [&](double e) -> Eigen::VectorXd {
        if (e == 0.0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.w2.size()) * (tg.steps + 1));
        const Trajectory u = solve_semilinear_mgt(op, p, q, g_true, st.phi.scaled(e), tg, o.solve);
        return flatten_trace(dn_trace(u, op, p), grid, grid.w2);
    };
    Eigen::VectorXd data = central_quotient(N, o.eta, trace_at);

    if (N > 2) {
        // Contribution of the already known orders 2..N-1 to the N-th derivative.
        PolynomialType known;
        for (int m = 2; m < N; ++m) {
            double fact = 1.0;
            for (int i = 2; i <= m; ++i) fact *= i;
            known.coefs.push_back(Coefficient::profile(known_lower[m - 2] / fact));
            known.powers.push_back(m);
        }
        LinearizationStack stack = build_stack(op, p, q, known, {st.phi}, Eigen::VectorXd::Zero(1), tg, o.solve);
        const Trajectory& w = solve_linearized(stack, std::vector<int>(N, 0));
        data -= flatten_trace(dn_trace(w, op, p), grid, grid.w2);
    }

    const Eigen::MatrixXd K = source_to_trace_map(op, p, q, weight, tg, grid.w2, o.solve);
    const TikhonovResult t = tikhonov_solve(K, data, o.lambda_rel);
    fill_report(rep, t);
    rep.recovered = t.x;
    rep.extras["data_norm"] = data.norm();
    if (o.truth) {
        rep.truth = *o.truth;
        rep.rel_error = relative_l2(t.x, *o.truth);
    }
    return rep;
}

// ---------------------------------------------------------------- polyhomogeneous amplitudes

namespace {

Polyhomogeneous poly_model(int n, const std::vector<double>& r, const Eigen::VectorXd& a) {
    Polyhomogeneous g;
    g.r = r;
    for (Eigen::Index k = 0; k < a.size(); ++k) g.alpha.push_back(Coefficient::constant(n, a(k)));
    return g;
}

// Midpoint source -|u|^r u of one homogeneity stage.
Eigen::MatrixXd stage_source(const Trajectory& u, double r) {
    const Eigen::MatrixXd m = midpoint_average(u.u);
    return -(m.array().abs().pow(r) * m.array()).matrix();
}

}  // namespace

DecayReport polyhomogeneous_decay(const FracOp& op, const MGTParams& p, const Potential& q, const Nonlinearity& g,
                                  const ExteriorInput& phi, const TimeGrid& tg, const std::vector<double>& eps,
                                  const SolveOptions& opt) {
    validate(g);
    const Trajectory v = solve_linear_mgt(op, p, q, Forcing::zero(), phi, tg, opt);
    DecayReport rep;
    for (double e : eps) {
        if (!(e > 0.0)) throw ConfigError("eps ladder must be positive");
        const Trajectory u = solve_semilinear_mgt(op, p, q, g, phi.scaled(e), tg, opt);
        rep.eps.push_back(e);
        rep.deviation.push_back(x_norm(op, v.u - u.u / e, v.ut - u.ut / e, v.utt - u.utt / e));
    }
    fit_loglog(rep.eps, rep.deviation, rep.slope, rep.r_squared);
    return rep;
}

ReconstructionReport recover_polyhomogeneous(const FracOp& op, const MGTParams& p, const Potential& q,
                                             const Nonlinearity& g_true, const TimeGrid& tg,
                                             const PolyRecoveryOptions& o) {
    const Grid& grid = op.grid;
    const int n = grid.n_omega();
    const int L = static_cast<int>(o.r.size());
    if (L == 0) throw ConfigError("no exponents given");
    for (int k = 0; k < L; ++k) {
        if (!(o.r[k] > 0.0) || o.r[k] > 1.0) throw ExponentOrderViolation("exponents must lie in (0, 1]");
        if (k > 0 && !(o.r[k] > o.r[k - 1])) throw ExponentOrderViolation("exponents must increase strictly");
    }
    if (o.eps_ladder.empty()) throw ConfigError("eps ladder is empty");
    validate(g_true);

    const SteeredInput st = steer_to_indicator(op, p, q, tg, o.steering, o.solve);
    ReconstructionReport rep;
    rep.name = o.joint ? "polyhomogeneous_joint" : "polyhomogeneous_peeling";
    rep.extras["runge_residual"] = st.runge.residual / st.runge.target_norm;
    {
        Eigen::MatrixXd w = stage_source(st.response, o.r[0]);
        rep.extras["divisor_min_ratio"] = check_divisor(grid, w, 0.1);
    }

    // Nonlinear part of each measured trace: trace(u_eps) - eps trace(v), scaled by eps^{-(1 + r_1)}.
    const Eigen::VectorXd tv = flatten_trace(dn_trace(st.response, op, p), grid, grid.w2);
    std::vector<Eigen::VectorXd> data;
    for (double e : o.eps_ladder) {
        const Trajectory u = solve_semilinear_mgt(op, p, q, g_true, st.phi.scaled(e), tg, o.solve);
        data.push_back((flatten_trace(dn_trace(u, op, p), grid, grid.w2) - e * tv) / std::pow(e, 1.0 + o.r[0]));
    }
    const Eigen::Index blk = tv.size();
    const Eigen::Index rows = blk * static_cast<Eigen::Index>(o.eps_ladder.size());
    Eigen::VectorXd d(rows);
    for (std::size_t i = 0; i < data.size(); ++i) d.segment(static_cast<Eigen::Index>(i) * blk, blk) = data[i];

    // Stage columns evaluated along the current model solution u_eps(alpha).
    auto columns = [&](const Eigen::VectorXd& a) {
        Eigen::MatrixXd J(rows, L);
        const Polyhomogeneous model = poly_model(n, o.r, a);
        for (std::size_t i = 0; i < o.eps_ladder.size(); ++i) {
            const double e = o.eps_ladder[i];
            const Trajectory u = solve_semilinear_mgt(op, p, q, model, st.phi.scaled(e), tg, o.solve);
            for (int k = 0; k < L; ++k) {
                const Trajectory w = solve_linear_mgt(op, p, q, Forcing::midpoint(stage_source(u, o.r[k]), tg.dt),
                                                      ExteriorInput{}, tg, o.solve);
                J.block(static_cast<Eigen::Index>(i) * blk, k, blk, 1) =
                    flatten_trace(dn_trace(w, op, p), grid, grid.w2) / std::pow(e, 1.0 + o.r[0]);
            }
        }
        return J;
    };

    Eigen::VectorXd a = Eigen::VectorXd::Zero(L);
    TikhonovResult last;
    const int sweeps = std::max(1, o.refinements);
    for (int it = 0; it < sweeps; ++it) {
        const Eigen::MatrixXd J = columns(a);
        if (o.joint) {
            last = tikhonov_solve(J, d, o.lambda_rel);
            a = last.x;
        } else {
            // Peel one stage at a time with the other amplitudes frozen, sweeping
            // until the stage fits stop moving on this set of columns.
            for (int sweep = 0; sweep < 10000; ++sweep) {
                const Eigen::VectorXd before = a;
                for (int k = 0; k < L; ++k) {
                    Eigen::VectorXd rk = d;
                    for (int j = 0; j < L; ++j)
                        if (j != k) rk -= a(j) * J.col(j);
                    last = tikhonov_solve(J.col(k), rk, o.lambda_rel);
                    a(k) = last.x(0);
                }
                if ((a - before).norm() <= 1e-13 * std::max(1.0, a.norm())) break;
            }
        }
        rep.misfit_log.push_back((J * a - d).norm() / std::max(d.norm(), 1e-300));
        if (o.truth) {
            Eigen::VectorXd tr(L);
            for (int k = 0; k < L; ++k) tr(k) = (*o.truth)[k];
            rep.error_log.push_back(relative_l2(a, tr));
        }
    }
    rep.lambda = last.lambda;
    rep.cond_raw = last.cond_raw;
    rep.cond_reg = last.cond_reg;
    rep.data_residual = rep.misfit_log.back();
    rep.recovered = a;
    if (o.truth) {
        rep.truth = Eigen::VectorXd::Map(o.truth->data(), L);
        rep.rel_error = relative_l2(a, rep.truth);
    }
    return rep;
}

// ---------------------------------------------------------------- Westervelt coefficients

namespace {

template <class Coef>
ReconstructionReport recover_westervelt(const FracOp& op, const MGTParams& p, const Nonlinearity& g_true,
                                        const TimeGrid& tg, const WesterveltRecoveryOptions& o, bool kappa) {
    const Grid& grid = op.grid;
    const int n = grid.n_omega();
    if (!(op.s > grid.d / 2.0)) throw DimensionGate("Westervelt recovery needs s > n/2");
    if (!(o.eta > 0.0)) throw ConfigError("eta must be positive");
    if (kappa != std::holds_alternative<WesterveltKappa>(g_true) ||
        (!kappa && !std::holds_alternative<WesterveltBeta>(g_true)))
        throw ConfigError("nonlinearity does not match the requested Westervelt form");
    const Potential q = Potential::zero();

    // For kappa, v is steered toward the time antiderivative of the target so that
    // d_t v follows the target itself.
    SteeredInput st;
    {
        const auto bank = make_bank(grid, grid.w1, o.steering.bank_spatial, o.steering.bank_temporal, tg.T(), 1.0);
        std::vector<Eigen::MatrixXd> fields;
        for (const auto& phi : bank)
            fields.push_back(solve_linear_mgt(op, p, q, Forcing::zero(), phi, tg, o.solve).u);
        Eigen::MatrixXd target = runge_target(grid, tg, o.steering.ramp);
        if (kappa) {
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(target.rows(), target.cols());
            for (int s = 1; s <= tg.steps; ++s)
                acc.col(s) = acc.col(s - 1) + 0.5 * tg.dt * (target.col(s - 1) + target.col(s));
            target = acc;
        }
        st.runge = runge_control(grid, tg, target, fields, o.steering.runge_lambda);
        ExteriorInput phi;
        for (std::size_t i = 0; i < bank.size(); ++i) {
            const double c = st.runge.c(static_cast<Eigen::Index>(i));
            if (c != 0.0) phi = phi + bank[i].scaled(c);
        }
        const double peak = st.runge.achieved.cwiseAbs().maxCoeff();
        if (!(peak > 0.0)) throw SmallDivisor("Runge steering produced a zero field");
        st.phi = phi.scaled(o.steering.amplitude / peak);
        st.response = solve_linear_mgt(op, p, q, Forcing::zero(), st.phi, tg, o.solve);
    }

    ReconstructionReport rep;
    rep.name = kappa ? "westervelt_kappa" : "westervelt_beta";
    rep.extras["runge_residual"] = st.runge.residual / st.runge.target_norm;
    {
        const Eigen::MatrixXd& f = kappa ? st.response.ut : st.response.u;
        const Eigen::MatrixXd m = midpoint_average(f);
        rep.extras["divisor_min_ratio"] = check_divisor(grid, m.cwiseProduct(m), o.divisor_floor);
    }

    // Second central quotient: trace of the linear solve with source 2 B(v, v).
    auto trace_at = [&](double e) -> Eigen::VectorXd {
        if (e == 0.0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.w2.size()) * (tg.steps + 1));
        const Trajectory u = solve_westervelt(op, p, g_true, st.phi.scaled(e), tg, o.solve);
        return flatten_trace(dn_trace(u, op, p), grid, grid.w2);
    };
    const Eigen::VectorXd data = central_quotient(2, o.eta, trace_at);

    auto unit = [&](const Eigen::VectorXd& c) -> Nonlinearity { return Coef{Coefficient::profile(c)}; };
    std::vector<Eigen::MatrixXd> cols;
    if (o.constant_coefficient) {
        cols.push_back(2.0 * westervelt_bilinear_mid(unit(Eigen::VectorXd::Ones(n)), st.response, st.response));
    } else {
        for (int k = 0; k < n; ++k)
            cols.push_back(2.0 *
                           westervelt_bilinear_mid(unit(Eigen::VectorXd::Unit(n, k)), st.response, st.response));
    }
    const Eigen::MatrixXd K = columns_to_trace_map(op, p, q, cols, tg, grid.w2, o.solve);
    const TikhonovResult t = tikhonov_solve(K, data, o.lambda_rel);
    fill_report(rep, t);
    rep.recovered = t.x;
    if (o.truth) {
        rep.truth = *o.truth;
        rep.rel_error = relative_l2(t.x, *o.truth);
    }
    return rep;
}

}  // namespace

ReconstructionReport recover_westervelt_beta(const FracOp& op, const MGTParams& p, const Nonlinearity& g_true,
                                             const TimeGrid& tg, const WesterveltRecoveryOptions& o) {
    return recover_westervelt<WesterveltBeta>(op, p, g_true, tg, o, false);
}

ReconstructionReport recover_westervelt_kappa(const FracOp& op, const MGTParams& p, const Nonlinearity& g_true,
                                              const TimeGrid& tg, const WesterveltRecoveryOptions& o) {
    return recover_westervelt<WesterveltKappa>(op, p, g_true, tg, o, true);
}

}  // namespace mgt
