#include "mgt/forward.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgt/errors.hpp"

namespace mgt {

void MGTParams::validate() const {
    if (!(b > 0.0)) throw ConfigError("b must be positive");
    if (tau != 1.0) throw ConfigError("tau is fixed to 1");
    if (!std::isfinite(alpha) || !std::isfinite(c)) throw ConfigError("alpha and c must be finite");
}

// ---------------------------------------------------------------- Potential

Potential Potential::constant(Eigen::VectorXd q) {
    Potential p;
    p.values = std::move(q);
    return p;
}

Potential Potential::sampled(Eigen::MatrixXd q, double dt, bool reversal_invariant) {
    Potential p;
    p.values = std::move(q);
    p.dt = dt;
    p.time_reversal_invariant = reversal_invariant;
    return p;
}

Eigen::VectorXd Potential::at(double t, int n_omega) const {
    if (is_zero()) return Eigen::VectorXd::Zero(n_omega);
    if (values.rows() != n_omega) throw ShapeMismatch("potential rows differ from |omega|");
    if (!time_dependent()) return values.col(0);
    const int M = static_cast<int>(values.cols()) - 1;
    const double x = std::clamp(t / dt, 0.0, static_cast<double>(M));
    const int n = std::min(static_cast<int>(std::floor(x)), M - 1);
    const double th = x - n;
    return (1.0 - th) * values.col(n) + th * values.col(n + 1);
}

Potential Potential::time_reversed() const {
    Potential r(*this);
    if (time_dependent()) r.values = reverse_time(values);
    return r;
}

double Potential::reversal_defect() const {
    if (!time_dependent()) return 0.0;
    return (values - reverse_time(values)).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------- Forcing

Forcing Forcing::analytic(Fn f) {
    Forcing r;
    Part p;
    p.kind = 0;
    p.fn = std::move(f);
    r.parts_.push_back(std::move(p));
    return r;
}

Forcing Forcing::nodal(Eigen::MatrixXd values, double dt) {
    Forcing r;
    Part p;
    p.kind = 1;
    p.values = std::move(values);
    p.dt = dt;
    r.parts_.push_back(std::move(p));
    return r;
}

Forcing Forcing::midpoint(Eigen::MatrixXd values, double dt) {
    Forcing r;
    Part p;
    p.kind = 2;
    p.values = std::move(values);
    p.dt = dt;
    r.parts_.push_back(std::move(p));
    return r;
}

Forcing Forcing::operator+(const Forcing& o) const {
    Forcing r(*this);
    r.parts_.insert(r.parts_.end(), o.parts_.begin(), o.parts_.end());
    return r;
}

Forcing Forcing::scaled(double a) const {
    Forcing r(*this);
    for (auto& p : r.parts_) p.scale *= a;
    return r;
}

namespace {

// Linear interpolation in column space at fractional index x.
void add_interp(const Eigen::MatrixXd& v, double x, double scale, Eigen::Ref<Eigen::VectorXd> out) {
    const int last = static_cast<int>(v.cols()) - 1;
    if (last == 0) {
        out += scale * v.col(0);
        return;
    }
    x = std::clamp(x, 0.0, static_cast<double>(last));
    const int n = std::min(static_cast<int>(std::floor(x)), last - 1);
    const double th = x - n;
    out += (scale * (1.0 - th)) * v.col(n) + (scale * th) * v.col(n + 1);
}

}  // namespace

void Forcing::add_at(double t, Eigen::Ref<Eigen::VectorXd> out) const {
    for (const auto& p : parts_) {
        switch (p.kind) {
            case 0: {
                Eigen::VectorXd tmp = Eigen::VectorXd::Zero(out.size());
                p.fn(t, tmp);
                out += p.scale * tmp;
                break;
            }
            case 1: add_interp(p.values, t / p.dt, p.scale, out); break;
            default: add_interp(p.values, t / p.dt - 0.5, p.scale, out); break;
        }
    }
}

void Forcing::add_mid(int n, double t_mid, Eigen::Ref<Eigen::VectorXd> out) const {
    for (const auto& p : parts_) {
        switch (p.kind) {
            case 0: {
                Eigen::VectorXd tmp = Eigen::VectorXd::Zero(out.size());
                p.fn(t_mid, tmp);
                out += p.scale * tmp;
                break;
            }
            case 1: add_interp(p.values, t_mid / p.dt, p.scale, out); break;
            default:
                if (n >= p.values.cols()) throw ShapeMismatch("midpoint forcing shorter than the time grid");
                out += p.scale * p.values.col(n);
                break;
        }
    }
}

// ---------------------------------------------------------------- Trajectory

Eigen::VectorXd Trajectory::full(const Grid& grid, int n, int deriv) const {
    Eigen::VectorXd box = phi.empty() ? Eigen::VectorXd::Zero(grid.n_tot)
                                      : phi.value(grid.n_tot, time.t(n), deriv);
    const Eigen::MatrixXd& src = deriv == 0 ? u : (deriv == 1 ? ut : utt);
    for (int k = 0; k < grid.n_omega(); ++k) box(grid.omega[k]) += src(k, n);
    return box;
}

Eigen::MatrixXd Trajectory::third_derivative(const FracOp& op, const MGTParams& p, const Potential& q,
                                             double eps_reg) const {
    const int n_om = op.grid.n_omega();
    Eigen::MatrixXd d3 = source - p.alpha * utt - op.A_oo * (p.b * ut + p.c * u);
    if (eps_reg != 0.0) d3 -= eps_reg * (op.A_oo * utt);
    if (!q.is_zero())
        for (int n = 0; n <= time.steps; ++n) d3.col(n) -= q.at(time.t(n), n_om).cwiseProduct(u.col(n));
    return d3;
}

// ---------------------------------------------------------------- lifting

Forcing lift_exterior(const ExteriorInput& phi, const MGTParams& p, const FracOp& op) {
    if (phi.empty()) return Forcing::zero();
    std::vector<Eigen::VectorXd> coupled;
    std::vector<Envelope> env;
    std::vector<double> w;
    for (const auto& term : phi.terms) {
        coupled.push_back(op.A_ob * term.profile);
        env.push_back(term.envelope);
        w.push_back(phi.amplitude * term.weight);
    }
    const double b = p.b, c = p.c;
    return Forcing::analytic([coupled, env, w, b, c](double t, Eigen::Ref<Eigen::VectorXd> out) {
        for (std::size_t j = 0; j < coupled.size(); ++j) {
            const Series e = env[j].jet(t, 1);
            out -= (w[j] * (b * e.derivative(1) + c * e[0])) * coupled[j];
        }
    });
}

Eigen::MatrixXd lift_samples(const ExteriorInput& phi, const MGTParams& p, const FracOp& op, const TimeGrid& tg) {
    const Forcing f = lift_exterior(phi, p, op);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(op.grid.n_omega(), tg.steps + 1);
    for (int n = 0; n <= tg.steps; ++n) f.add_at(tg.t(n), out.col(n));
    return out;
}

// ---------------------------------------------------------------- integrators

namespace {

void check_finite(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c, int n) {
    const double m = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), c.cwiseAbs().maxCoeff()});
    if (!std::isfinite(m) || m > 1e12) throw BlowUp("state norm exceeded 1e12 at step " + std::to_string(n));
}

struct Operators {
    Eigen::MatrixXd bA, cA, D;  // D = eps A + alpha I
};

Operators make_operators(const FracOp& op, const MGTParams& p, double eps) {
    const int n = op.grid.n_omega();
    Operators o;
    o.bA = p.b * op.A_oo;
    o.cA = p.c * op.A_oo;
    o.D = p.alpha * Eigen::MatrixXd::Identity(n, n);
    if (eps != 0.0) o.D += eps * op.A_oo;
    return o;
}

Eigen::PartialPivLU<Eigen::MatrixXd> factor_step(const Operators& o, const Eigen::VectorXd& qd, double k) {
    const int n = static_cast<int>(qd.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) + k * o.D + (k * k) * o.bA + (k * k * k) * o.cA;
    M.diagonal() += (k * k * k) * qd;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    const double rc = lu.rcond();
    if (!(rc > 1e-14)) throw SingularStepMatrix("implicit step matrix is singular (rcond " + std::to_string(rc) + ")");
    return lu;
}

void midpoint_run(const FracOp& op, const MGTParams& p, const Potential& q, const Forcing& F,
                  const TimeGrid& tg, double eps, const Eigen::MatrixXd* extra_mid, Trajectory& tr) {
    const int n = op.grid.n_omega();
    const double dt = tg.dt, k = 0.5 * dt;
    const Operators o = make_operators(op, p, eps);
    const bool varying = q.time_dependent() || extra_mid != nullptr;
    if (extra_mid && (extra_mid->rows() != n || extra_mid->cols() < tg.steps))
        throw ShapeMismatch("midpoint potential has the wrong shape");

    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::VectorXd qd = q.at(0.0, n);
    if (!varying) lu = factor_step(o, qd, k);

    Eigen::VectorXd f(n), w(n), rhs(n), z0(n), z1(n), z2(n);
    for (int s = 0; s < tg.steps; ++s) {
        const double tm = tg.mid(s);
        if (varying) {
            qd = q.at(tm, n);
            if (extra_mid) qd += extra_mid->col(s);
            lu = factor_step(o, qd, k);
        }
        f.setZero();
        F.add_mid(s, tm, f);
        const auto y0 = tr.u.col(s), y1 = tr.ut.col(s), y2 = tr.utt.col(s);
        w = y0 + k * y1 + (k * k) * y2;
        rhs = f - o.cA * w - qd.cwiseProduct(w) - o.bA * (y1 + k * y2) - o.D * y2;
        z2 = lu.solve(rhs);
        z1 = y2 + k * z2;
        z0 = y1 + k * z1;
        tr.u.col(s + 1) = y0 + dt * z0;
        tr.ut.col(s + 1) = y1 + dt * z1;
        tr.utt.col(s + 1) = y2 + dt * z2;
        check_finite(tr.u.col(s + 1), tr.ut.col(s + 1), tr.utt.col(s + 1), s + 1);
    }
}

void rk4_run(const FracOp& op, const MGTParams& p, const Potential& q, const Forcing& F, const TimeGrid& tg,
             double eps, const Eigen::MatrixXd* extra_mid, Trajectory& tr) {
    const int n = op.grid.n_omega();
    const Operators o = make_operators(op, p, eps);
    auto rhs = [&](int s, double t, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                   const Eigen::VectorXd& y2, Eigen::VectorXd& d0, Eigen::VectorXd& d1, Eigen::VectorXd& d2) {
        Eigen::VectorXd qd = q.at(t, n);
        if (extra_mid) qd += extra_mid->col(s);  // piecewise constant per step
        Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
        F.add_at(t, f);
        d0 = y1;
        d1 = y2;
        d2 = f - o.cA * y0 - qd.cwiseProduct(y0) - o.bA * y1 - o.D * y2;
    };
    Eigen::VectorXd a0(n), a1(n), a2(n), b0(n), b1(n), b2(n), c0(n), c1(n), c2(n), e0(n), e1(n), e2(n);
    const double dt = tg.dt;
    for (int s = 0; s < tg.steps; ++s) {
        const double t = tg.t(s);
        const Eigen::VectorXd y0 = tr.u.col(s), y1 = tr.ut.col(s), y2 = tr.utt.col(s);
        rhs(s, t, y0, y1, y2, a0, a1, a2);
        rhs(s, t + 0.5 * dt, y0 + 0.5 * dt * a0, y1 + 0.5 * dt * a1, y2 + 0.5 * dt * a2, b0, b1, b2);
        rhs(s, t + 0.5 * dt, y0 + 0.5 * dt * b0, y1 + 0.5 * dt * b1, y2 + 0.5 * dt * b2, c0, c1, c2);
        rhs(s, t + dt, y0 + dt * c0, y1 + dt * c1, y2 + dt * c2, e0, e1, e2);
        tr.u.col(s + 1) = y0 + (dt / 6.0) * (a0 + 2.0 * b0 + 2.0 * c0 + e0);
        tr.ut.col(s + 1) = y1 + (dt / 6.0) * (a1 + 2.0 * b1 + 2.0 * c1 + e1);
        tr.utt.col(s + 1) = y2 + (dt / 6.0) * (a2 + 2.0 * b2 + 2.0 * c2 + e2);
        check_finite(tr.u.col(s + 1), tr.ut.col(s + 1), tr.utt.col(s + 1), s + 1);
    }
}

}  // namespace

Trajectory solve_linear_mgt(const FracOp& op, const MGTParams& p, const Potential& q, const Forcing& F,
                            const ExteriorInput& phi, const TimeGrid& tg, const SolveOptions& opt,
                            const Eigen::MatrixXd* extra_mid) {
    p.validate();
    if (opt.eps_reg < 0.0) throw ConfigError("regularization eps must be >= 0");
    const int n = op.grid.n_omega();
    phi.validate(op.grid);

    Trajectory tr;
    tr.time = tg;
    tr.phi = phi;
    tr.u = Eigen::MatrixXd::Zero(n, tg.steps + 1);
    tr.ut = tr.u;
    tr.utt = tr.u;

    const Forcing total = F + lift_exterior(phi, p, op);
    if (opt.scheme == Scheme::ImplicitMidpoint)
        midpoint_run(op, p, q, total, tg, opt.eps_reg, extra_mid, tr);
    else
        rk4_run(op, p, q, total, tg, opt.eps_reg, extra_mid, tr);

    tr.source = Eigen::MatrixXd::Zero(n, tg.steps + 1);
    for (int s = 0; s <= tg.steps; ++s) total.add_at(tg.t(s), tr.source.col(s));
    return tr;
}

Trajectory solve_backward_adjoint(const FracOp& op, const MGTParams& p, const Potential& q,
                                  const Eigen::MatrixXd& G, const TimeGrid& tg, const SolveOptions& opt) {
    const int n = op.grid.n_omega();
    if (G.size() != 0 && (G.rows() != n || G.cols() != tg.steps + 1))
        throw ShapeMismatch("backward source must be n_omega x (M+1)");
    const Eigen::MatrixXd Gs = G.size() == 0 ? Eigen::MatrixXd::Zero(n, tg.steps + 1) : G;
    const Trajectory v = solve_linear_mgt(op, p, q.time_reversed(), Forcing::nodal(-reverse_time(Gs), tg.dt),
                                          ExteriorInput{}, tg, opt);
    Trajectory w;
    w.time = tg;
    w.u = reverse_time(v.u);
    w.ut = -reverse_time(v.ut);
    w.utt = reverse_time(v.utt);
    w.source = Gs;
    return w;
}

// ---------------------------------------------------------------- norms

double x_norm(const FracOp& op, const Eigen::MatrixXd& u, const Eigen::MatrixXd& ut, const Eigen::MatrixXd& utt) {
    const double h = op.grid.cell();
    const Eigen::MatrixXd Au = op.A_oo * u, Aut = op.A_oo * ut;
    double best = 0.0;
    for (Eigen::Index n = 0; n < u.cols(); ++n) {
        const double v = std::sqrt(h * utt.col(n).squaredNorm()) +
                         std::sqrt(std::max(0.0, h * ut.col(n).dot(Aut.col(n)))) +
                         std::sqrt(std::max(0.0, h * u.col(n).dot(Au.col(n))));
        best = std::max(best, v);
    }
    return best;
}

double x_norm(const FracOp& op, const Trajectory& tr) { return x_norm(op, tr.u, tr.ut, tr.utt); }

double x_norm_diff(const FracOp& op, const Trajectory& a, const Trajectory& b) {
    return x_norm(op, a.u - b.u, a.ut - b.ut, a.utt - b.utt);
}

// ---------------------------------------------------------------- fixed points

Eigen::MatrixXd semilinear_source_mid(const Nonlinearity& g, const Trajectory& tr) {
    const int n = static_cast<int>(tr.u.rows());
    Eigen::MatrixXd S(n, tr.time.steps);
    for (int s = 0; s < tr.time.steps; ++s) {
        const double tm = tr.time.mid(s);
        for (int k = 0; k < n; ++k) S(k, s) = -g_eval(g, k, tm, 0.5 * (tr.u(k, s) + tr.u(k, s + 1)));
    }
    return S;
}

Eigen::MatrixXd westervelt_bilinear_mid(const Nonlinearity& g, const Trajectory& a, const Trajectory& b) {
    const int n = static_cast<int>(a.u.rows());
    Eigen::MatrixXd S(n, a.time.steps);
    for (int s = 0; s < a.time.steps; ++s) {
        const double tm = a.time.mid(s);
        for (int k = 0; k < n; ++k) {
            const NodeState x{0.5 * (a.u(k, s) + a.u(k, s + 1)), 0.5 * (a.ut(k, s) + a.ut(k, s + 1)),
                              0.5 * (a.utt(k, s) + a.utt(k, s + 1))};
            const NodeState y{0.5 * (b.u(k, s) + b.u(k, s + 1)), 0.5 * (b.ut(k, s) + b.ut(k, s + 1)),
                              0.5 * (b.utt(k, s) + b.utt(k, s + 1))};
            S(k, s) = westervelt_bilinear(g, k, tm, x, y);
        }
    }
    return S;
}

Eigen::MatrixXd westervelt_source_mid(const Nonlinearity& g, const Trajectory& tr) {
    return westervelt_bilinear_mid(g, tr, tr);
}

namespace {

template <class SourceOf>
Trajectory picard(const FracOp& op, const MGTParams& p, const Potential& q, const Forcing& base,
                  const ExteriorInput& phi, const TimeGrid& tg, const SolveOptions& opt, SourceOf source_of) {
    Trajectory cur = solve_linear_mgt(op, p, q, base, phi, tg, opt);
    std::vector<double> residuals, ratios;
    int above = 0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        Trajectory next =
            solve_linear_mgt(op, p, q, base + Forcing::midpoint(source_of(cur), tg.dt), phi, tg, opt);
        const double d = x_norm_diff(op, next, cur);
        residuals.push_back(d);
        if (residuals.size() >= 2) {
            const double prev = residuals[residuals.size() - 2];
            const double r = prev > 0.0 ? d / prev : 0.0;
            ratios.push_back(r);
            above = r >= 1.0 ? above + 1 : 0;
        }
        const double scale = x_norm(op, next);
        cur = std::move(next);
        cur.iterations = it;
        if (d <= opt.tol * scale || d == 0.0) {
            cur.residuals = residuals;
            cur.contraction = ratios;
            return cur;
        }
        if (above >= 3)
            throw NoContraction("increment ratio >= 1 for 3 consecutive iterations (last " +
                                std::to_string(ratios.back()) + ")");
    }
    throw MaxIterExceeded("fixed point not reached in " + std::to_string(opt.max_iter) + " iterations");
}

}  // namespace

Trajectory solve_semilinear_mgt(const FracOp& op, const MGTParams& p, const Potential& q, const Nonlinearity& g,
                                const ExteriorInput& phi, const TimeGrid& tg, const SolveOptions& opt,
                                const Forcing& F) {
    validate(g);
    if (is_westervelt(g)) throw ConfigError("use solve_westervelt for Westervelt nonlinearities");
    return picard(op, p, q, F, phi, tg, opt, [&](const Trajectory& tr) { return semilinear_source_mid(g, tr); });
}

Trajectory solve_westervelt(const FracOp& op, const MGTParams& p, const Nonlinearity& g, const ExteriorInput& phi,
                            const TimeGrid& tg, const SolveOptions& opt, const Potential& q) {
    if (!is_westervelt(g)) throw ConfigError("solve_westervelt expects a Westervelt nonlinearity");
    if (!(op.s > op.grid.d / 2.0))
        throw DimensionGate("Westervelt runs need s > n/2 (s = " + std::to_string(op.s) + ")");
    return picard(op, p, q, Forcing::zero(), phi, tg, opt,
                  [&](const Trajectory& tr) { return westervelt_source_mid(g, tr); });
}

// ---------------------------------------------------------------- energy

EnergyLedger energy_identity_check(const Trajectory& tr, const FracOp& op, const MGTParams& p, const Potential& q) {
    const int M = tr.time.steps, n = op.grid.n_omega();
    const double h = op.grid.cell(), dt = tr.time.dt;
    EnergyLedger L;
    L.kinetic.resize(M + 1);
    L.potential.resize(M + 1);
    L.elastic.resize(M + 1);
    L.cross.resize(M + 1);
    Eigen::VectorXd rhs(M + 1), fnorm2(M + 1);
    const Eigen::MatrixXd Au = op.A_oo * tr.u, Aut = op.A_oo * tr.ut;
    for (int s = 0; s <= M; ++s) {
        const auto u = tr.u.col(s), ut = tr.ut.col(s), utt = tr.utt.col(s);
        L.kinetic(s) = 0.5 * h * utt.squaredNorm();
        L.potential(s) = 0.5 * p.b * h * ut.dot(Aut.col(s));
        L.elastic(s) = h * u.dot(Au.col(s));
        L.cross(s) = h * utt.dot(Au.col(s));
        const Eigen::VectorXd qd = q.at(tr.time.t(s), n);
        rhs(s) = -p.alpha * h * utt.squaredNorm() - h * utt.dot(qd.cwiseProduct(u)) - p.c * L.cross(s) +
                 h * utt.dot(tr.source.col(s));
        fnorm2(s) = h * tr.source.col(s).squaredNorm();
    }
    L.residual.resize(M);
    for (int s = 0; s < M; ++s) {
        const double dE = (L.kinetic(s + 1) + L.potential(s + 1) - L.kinetic(s) - L.potential(s)) / dt;
        L.residual(s) = dE - 0.5 * (rhs(s) + rhs(s + 1));
    }
    L.max_residual = M > 0 ? L.residual.cwiseAbs().maxCoeff() : 0.0;
    L.x_norm = x_norm(op, tr);
    L.data_norm = std::sqrt(trapezoid(fnorm2, dt));
    L.empirical_C = L.data_norm > 0.0 ? L.x_norm / L.data_norm : 0.0;
    return L;
}

}  // namespace mgt
