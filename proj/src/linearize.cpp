#include "mgt/linearize.hpp"

#include <algorithm>
#include <cmath>

#include "mgt/errors.hpp"

namespace mgt {

std::vector<Partition> enumerate_partitions(int N) {
    if (N < 1 || N > 8) throw OrderTooLarge("partition order must be in 1..8, got " + std::to_string(N));
    std::vector<Partition> out;
    std::vector<int> a(N, 0), maxes(N, 0);  // restricted-growth string and prefix maxima
    while (true) {
        int blocks = *std::max_element(a.begin(), a.end()) + 1;
        Partition p(blocks);
        for (int i = 0; i < N; ++i) p[a[i]].push_back(i);
        out.push_back(std::move(p));
        // Advance to the next RGS: bump the rightmost position that may grow.
        int i = N - 1;
        while (i > 0 && a[i] == maxes[i - 1] + 1) --i;
        if (i == 0) break;
        ++a[i];
        maxes[i] = std::max(maxes[i - 1], a[i]);
        for (int j = i + 1; j < N; ++j) {
            a[j] = 0;
            maxes[j] = maxes[i];
        }
    }
    return out;
}

std::vector<Partition> proper_partitions(int N) {
    std::vector<Partition> all = enumerate_partitions(N), out;
    for (auto& p : all)
        if (p.size() > 1) out.push_back(std::move(p));
    return out;
}

void DerivativeBank::put(std::vector<int> key, Eigen::MatrixXd field) {
    std::sort(key.begin(), key.end());
    fields_[key] = std::move(field);
}

bool DerivativeBank::has(std::vector<int> key) const {
    std::sort(key.begin(), key.end());
    return fields_.count(key) > 0;
}

const Eigen::MatrixXd& DerivativeBank::get(std::vector<int> key) const {
    std::sort(key.begin(), key.end());
    auto it = fields_.find(key);
    if (it == fields_.end()) {
        std::string s;
        for (int k : key) s += std::to_string(k) + " ";
        throw MissingDerivative("no derivative field for indices { " + s + "}");
    }
    return it->second;
}

Eigen::MatrixXd faa_di_bruno_source(const Nonlinearity& g, const Eigen::MatrixXd& base_u, const DerivativeBank& bank,
                                    const std::vector<int>& indices, const std::vector<double>& times) {
    const int N = static_cast<int>(indices.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(base_u.rows(), base_u.cols());
    if (N < 2) return out;
    const auto parts = proper_partitions(N);

    // Resolve every block's field once.
    std::vector<std::vector<const Eigen::MatrixXd*>> factors;
    for (const auto& p : parts) {
        std::vector<const Eigen::MatrixXd*> f;
        for (const auto& block : p) {
            std::vector<int> key;
            for (int b : block) key.push_back(indices[b]);
            f.push_back(&bank.get(key));
        }
        factors.push_back(std::move(f));
    }

    for (Eigen::Index j = 0; j < base_u.cols(); ++j) {
        for (Eigen::Index k = 0; k < base_u.rows(); ++k) {
            const std::vector<double> d = g_taylor(g, static_cast<int>(k), times[j], base_u(k, j), N);
            double acc = 0.0;
            for (std::size_t pi = 0; pi < parts.size(); ++pi) {
                const double gm = d[parts[pi].size()];
                if (gm == 0.0) continue;
                double prod = gm;
                for (const auto* f : factors[pi]) prod *= (*f)(k, j);
                acc += prod;
            }
            out(k, j) = acc;
        }
    }
    return out;
}

Eigen::MatrixXd midpoint_average(const Eigen::MatrixXd& nodal) {
    const Eigen::Index M = nodal.cols() - 1;
    return 0.5 * (nodal.leftCols(M) + nodal.rightCols(M));
}

ExteriorInput LinearizationStack::combined(const Eigen::VectorXd& e) const {
    ExteriorInput out;
    for (std::size_t k = 0; k < bank.size(); ++k)
        if (e(k) != 0.0) out = out + bank[k].scaled(e(k));
    return out;
}

Trajectory LinearizationStack::solve_at(const Eigen::VectorXd& e) const {
    return solve_semilinear_mgt(*op, params, q, g, combined(e), time, opt);
}

LinearizationStack build_stack(const FracOp& op, const MGTParams& p, const Potential& q, const Nonlinearity& g,
                               const std::vector<ExteriorInput>& bank, const Eigen::VectorXd& eps,
                               const TimeGrid& tg, const SolveOptions& opt) {
    if (bank.empty() || bank.size() > 4) throw ConfigError("linearization bank needs 1..4 inputs");
    if (static_cast<std::size_t>(eps.size()) != bank.size()) throw ShapeMismatch("eps and bank sizes differ");
    LinearizationStack st;
    st.op = &op;
    st.params = p;
    st.q = q;
    st.g = g;
    st.bank = bank;
    st.eps = eps;
    st.time = tg;
    st.opt = opt;
    st.base = st.solve_at(eps);

    const int n = op.grid.n_omega();
    st.dg_mid.resize(n, tg.steps);
    bool any = false;
    for (int s = 0; s < tg.steps; ++s)
        for (int k = 0; k < n; ++k) {
            const double ub = 0.5 * (st.base.u(k, s) + st.base.u(k, s + 1));
            st.dg_mid(k, s) = g_dtau(g, k, tg.mid(s), ub, 1);
            any = any || st.dg_mid(k, s) != 0.0;
        }
    if (!any) st.dg_mid.resize(0, 0);
    return st;
}

const Trajectory& solve_linearized(LinearizationStack& st, std::vector<int> indices) {
    std::sort(indices.begin(), indices.end());
    if (indices.empty()) return st.base;
    for (int k : indices)
        if (k < 0 || k >= static_cast<int>(st.bank.size())) throw ConfigError("linearization index out of range");
    if (auto it = st.derivs.find(indices); it != st.derivs.end()) return it->second;

    const Eigen::MatrixXd* extra = st.dg_mid.size() ? &st.dg_mid : nullptr;
    const int N = static_cast<int>(indices.size());
    Trajectory tr;
    if (N == 1) {
        tr = solve_linear_mgt(*st.op, st.params, st.q, Forcing::zero(), st.bank[indices[0]], st.time, st.opt, extra);
    } else {
        DerivativeBank bank;
        for (const auto& p : proper_partitions(N))
            for (const auto& block : p) {
                std::vector<int> key;
                for (int b : block) key.push_back(indices[b]);
                if (!bank.has(key)) bank.put(key, midpoint_average(solve_linearized(st, key).u));
            }
        std::vector<double> times(st.time.steps);
        for (int s = 0; s < st.time.steps; ++s) times[s] = st.time.mid(s);
        const Eigen::MatrixXd src =
            -faa_di_bruno_source(st.g, midpoint_average(st.base.u), bank, indices, times);
        tr = solve_linear_mgt(*st.op, st.params, st.q, Forcing::midpoint(src, st.time.dt), ExteriorInput{}, st.time,
                              st.opt, extra);
    }
    return st.derivs.emplace(indices, std::move(tr)).first->second;
}

namespace {

// Visit every sign pattern of a nested quotient: callback(weight, eps point).
template <class F>
void for_each_stencil(const LinearizationStack& st, const std::vector<int>& indices, double eta, bool central, F&& f) {
    const int N = static_cast<int>(indices.size());
    for (int mask = 0; mask < (1 << N); ++mask) {
        Eigen::VectorXd e = st.eps;
        double w = 1.0;
        for (int j = 0; j < N; ++j) {
            const bool up = (mask >> j) & 1;
            if (central) {
                e(indices[j]) += up ? eta : -eta;
                w *= up ? 1.0 / (2.0 * eta) : -1.0 / (2.0 * eta);
            } else {
                if (up) e(indices[j]) += eta;
                w *= up ? 1.0 / eta : -1.0 / eta;
            }
        }
        f(w, e);
    }
}

struct VecLess {
    bool operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    }
};

}  // namespace

Trajectory diff_quotient_solution_map(const LinearizationStack& st, const std::vector<int>& indices, double eta,
                                      bool central) {
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    Trajectory q;
    q.time = st.time;
    const int n = st.op->grid.n_omega();
    q.u = Eigen::MatrixXd::Zero(n, st.time.steps + 1);
    q.ut = q.u;
    q.utt = q.u;
    std::map<Eigen::VectorXd, Trajectory, VecLess> cache;
    for_each_stencil(st, indices, eta, central, [&](double w, const Eigen::VectorXd& e) {
        auto it = cache.find(e);
        if (it == cache.end()) {
            const bool is_base = (e - st.eps).cwiseAbs().maxCoeff() == 0.0;
            it = cache.emplace(e, is_base ? st.base : st.solve_at(e)).first;
        }
        q.u += w * it->second.u;
        q.ut += w * it->second.ut;
        q.utt += w * it->second.utt;
    });
    return q;
}

void fit_loglog(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& r2) {
    const std::size_t n = x.size();
    slope = 0.0;
    r2 = 0.0;
    if (n < 2) return;
    double mx = 0, my = 0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(x[i]);
        ly[i] = std::log(std::max(y[i], 1e-300));
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    slope = sxx > 0 ? sxy / sxx : 0.0;
    r2 = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 1.0;
}

ConvergenceTable linearization_convergence_report(LinearizationStack& st, const std::vector<int>& indices,
                                                  const std::vector<double>& etas, bool central) {
    const Trajectory& v = solve_linearized(st, indices);
    const double vn = x_norm(*st.op, v);
    std::string label;
    for (std::size_t j = 0; j < indices.size(); ++j) label += (j ? "-" : "") + std::to_string(indices[j]);
    ConvergenceTable tab;
    std::vector<double> xs, ys;
    for (double eta : etas) {
        const Trajectory q = diff_quotient_solution_map(st, indices, eta, central);
        ConvergenceRow r;
        r.order = static_cast<int>(indices.size());
        r.indices = label;
        r.eta = eta;
        r.error = x_norm_diff(*st.op, v, q) / (vn > 0.0 ? vn : 1.0);
        if (!tab.rows.empty()) {
            const auto& prev = tab.rows.back();
            r.slope = std::log(prev.error / r.error) / std::log(prev.eta / r.eta);
        }
        tab.rows.push_back(r);
        xs.push_back(eta);
        ys.push_back(r.error);
    }
    fit_loglog(xs, ys, tab.fitted_slope, tab.r_squared);
    return tab;
}

double dn_derivative(LinearizationStack& st, const std::vector<int>& indices, const ExteriorInput& psi) {
    return dn_pairing(solve_linearized(st, indices), psi, *st.op, st.params);
}

double dn_derivative_quotient(const LinearizationStack& st, const std::vector<int>& indices, const ExteriorInput& psi,
                              double eta) {
    double acc = 0.0;
    for_each_stencil(st, indices, eta, true, [&](double w, const Eigen::VectorXd& e) {
        acc += w * dn_pairing(st.solve_at(e), psi, *st.op, st.params);
    });
    return acc;
}

}  // namespace mgt
