#include "mgt/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mgt/errors.hpp"

namespace mgt {

using nlohmann::json;

const std::vector<std::string>& pipeline_names() {
    static const std::vector<std::string> names{"forward",    "dn",         "linearize",         "invert-q",
                                                "invert-g",   "invert-poly", "invert-westervelt", "regularize",
                                                "identities", "sweep"};
    return names;
}

namespace {

// Reads fields out of one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + "." + key + " has the wrong type");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    const json& child(const char* key) {
        seen_.insert(key);
        static const json empty = json::object();
        return j_.contains(key) ? j_.at(key) : empty;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown key " + path_ + "." + k);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<Interval> intervals(const json& j, const std::string& path) {
    std::vector<Interval> out;
    if (j.is_null()) return out;
    if (!j.is_array()) throw ConfigError(path + " must be a list of [lo, hi] pairs");
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw ConfigError(path + " must be a list of [lo, hi] pairs");
        out.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    return out;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

bool positive_list(const std::vector<double>& v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig c;
    c.raw = doc;
    Section top(doc, "config");
    top.get("pipeline", c.pipeline);
    top.get("s", c.s);

    {
        Section g(top.child("grid"), "grid");
        g.get("dim", c.grid.dim);
        g.get("L", c.grid.L);
        g.get("N", c.grid.N);
        g.get("window", c.grid.window);
        json o = nullptr, a = nullptr, b = nullptr;
        g.get("omega", o);
        g.get("w1", a);
        g.get("w2", b);
        c.grid.omega = intervals(o, "grid.omega");
        c.grid.w1 = intervals(a, "grid.w1");
        c.grid.w2 = intervals(b, "grid.w2");
        g.finish();
    }
    {
        Section p(top.child("params"), "params");
        p.get("alpha", c.params.alpha);
        p.get("b", c.params.b);
        p.get("c", c.params.c);
        p.get("tau", c.params.tau);
        p.finish();
    }
    {
        Section p(top.child("potential"), "potential");
        p.get("profile", c.potential.profile);
        p.get("amplitude", c.potential.amplitude);
        p.get("width", c.potential.width);
        p.get("time_dependence", c.potential.time_dependence);
        p.get("rate", c.potential.rate);
        p.get("reversal_invariant", c.potential.reversal_invariant);
        p.finish();
    }
    {
        Section n(top.child("nonlinearity"), "nonlinearity");
        n.get("type", c.nonlinearity.type);
        n.get("coefficients", c.nonlinearity.coefficients);
        n.get("powers", c.nonlinearity.powers);
        n.get("gauss_exponent", c.nonlinearity.gauss_exponent);
        n.get("exponents", c.nonlinearity.exponents);
        n.get("profile", c.nonlinearity.profile);
        n.finish();
    }
    {
        Section e(top.child("exterior"), "exterior");
        e.get("n_spatial", c.exterior.n_spatial);
        e.get("n_temporal", c.exterior.n_temporal);
        e.get("amplitude", c.exterior.amplitude);
        e.finish();
    }
    {
        Section t(top.child("time"), "time");
        t.get("T", c.time.T);
        t.get("dt", c.time.dt);
        t.finish();
    }
    {
        Section s(top.child("solver"), "solver");
        s.get("scheme", c.solver.scheme);
        s.get("tol", c.solver.tol);
        s.get("max_iter", c.solver.max_iter);
        s.get("eps_reg", c.solver.eps_reg);
        s.finish();
    }
    {
        Section l(top.child("linearize"), "linearize");
        l.get("etas", c.linearize.etas);
        l.get("base_eps", c.linearize.base_eps);
        l.get("max_order", c.linearize.max_order);
        l.finish();
    }
    {
        Section i(top.child("inversion"), "inversion");
        i.get("lambda_rel", c.inversion.lambda_rel);
        i.get("newton_iters", c.inversion.newton_iters);
        i.get("lambda_decay", c.inversion.lambda_decay);
        i.get("noise_level", c.inversion.noise_level);
        if (i.has("seed")) {
            std::uint64_t seed = 0;
            i.get("seed", seed);
            c.inversion.seed = seed;
        } else {
            i.child("seed");
        }
        i.get("taylor_order", c.inversion.taylor_order);
        i.get("eta", c.inversion.eta);
        i.get("eps_ladder", c.inversion.eps_ladder);
        i.get("constant_coefficient", c.inversion.constant_coefficient);
        i.get("steering_spatial", c.inversion.steering_spatial);
        i.get("steering_temporal", c.inversion.steering_temporal);
        i.finish();
    }
    {
        Section r(top.child("regularize"), "regularize");
        r.get("ladder", c.regularize.ladder);
        r.finish();
    }
    {
        Section s(top.child("sweep"), "sweep");
        s.get("dts", c.sweep.dts);
        s.finish();
    }
    {
        Section o(top.child("output"), "output");
        o.get("dir", c.output_dir);
        o.finish();
    }
    top.finish();

    const auto& names = pipeline_names();
    require(std::find(names.begin(), names.end(), c.pipeline) != names.end(), "unknown pipeline " + c.pipeline);
    require(c.s > 0.0, "s must be positive");
    require(c.grid.dim == 1 || c.grid.dim == 2, "grid.dim must be 1 or 2");
    require(c.grid.dim == 1 || !c.grid.omega.empty(), "2D grids need explicit omega/w1/w2 regions");
    for (const auto* r : {&c.grid.omega, &c.grid.w1, &c.grid.w2})
        require(r->empty() || static_cast<int>(r->size()) == c.grid.dim, "region intervals must match grid.dim");
    require(c.grid.omega.empty() == c.grid.w1.empty() && c.grid.w1.empty() == c.grid.w2.empty(),
            "give all of omega, w1, w2 or none");
    require(c.time.T > 0.0 && c.time.dt > 0.0 && c.time.dt <= c.time.T, "need 0 < dt <= T");
    require(c.solver.scheme == "midpoint" || c.solver.scheme == "rk4", "solver.scheme must be midpoint or rk4");
    require(c.solver.tol > 0.0 && c.solver.max_iter > 0, "solver tolerances must be positive");
    require(c.solver.eps_reg >= 0.0, "solver.eps_reg must be >= 0");
    require(c.exterior.n_spatial >= 1 && c.exterior.n_temporal >= 1, "exterior bank must be non-empty");
    require(c.potential.profile == "zero" || c.potential.profile == "constant" || c.potential.profile == "gaussian",
            "potential.profile must be zero, constant or gaussian");
    require(c.potential.time_dependence == "none" || c.potential.time_dependence == "symmetric" ||
                c.potential.time_dependence == "linear",
            "potential.time_dependence must be none, symmetric or linear");
    const bool tri = c.potential.time_dependence != "linear" || c.potential.rate == 0.0 ||
                     c.potential.amplitude == 0.0 || c.potential.profile == "zero";
    require(tri == c.potential.reversal_invariant, "potential.reversal_invariant contradicts its time dependence");
    require(c.potential.width > 0.0, "potential.width must be positive");
    const auto& t = c.nonlinearity.type;
    require(t == "none" || t == "polynomial" || t == "polyhomogeneous" || t == "westervelt_beta" ||
                t == "westervelt_kappa",
            "unknown nonlinearity type " + t);
    require(c.nonlinearity.profile == "constant" || c.nonlinearity.profile == "sine",
            "nonlinearity.profile must be constant or sine");
    if (t == "polynomial")
        require(!c.nonlinearity.coefficients.empty() &&
                    c.nonlinearity.coefficients.size() == c.nonlinearity.powers.size(),
                "polynomial nonlinearity needs matching coefficients and powers");
    if (t == "polyhomogeneous")
        require(!c.nonlinearity.coefficients.empty() &&
                    c.nonlinearity.coefficients.size() == c.nonlinearity.exponents.size(),
                "polyhomogeneous nonlinearity needs matching coefficients and exponents");
    if (t == "westervelt_beta" || t == "westervelt_kappa")
        require(c.nonlinearity.coefficients.size() == 1, "Westervelt nonlinearity needs one coefficient");
    require(positive_list(c.linearize.etas), "linearize.etas must be positive");
    require(c.linearize.max_order >= 1 && c.linearize.max_order <= 4, "linearize.max_order must lie in 1..4");
    require(!c.linearize.base_eps.empty() && c.linearize.base_eps.size() <= 4, "linearize.base_eps needs 1..4 entries");
    require(c.inversion.lambda_rel >= 0.0, "inversion.lambda_rel must be >= 0");
    require(c.inversion.newton_iters >= 0, "inversion.newton_iters must be >= 0");
    require(c.inversion.lambda_decay > 0.0 && c.inversion.lambda_decay <= 1.0, "inversion.lambda_decay must lie in (0, 1]");
    require(c.inversion.noise_level >= 0.0, "inversion.noise_level must be >= 0");
    require(c.inversion.noise_level == 0.0 || c.inversion.seed.has_value(), "inversion.seed is required when noise is enabled");
    require(c.inversion.taylor_order >= 2 && c.inversion.taylor_order <= 8, "inversion.taylor_order must lie in 2..8");
    require(c.inversion.eta > 0.0, "inversion.eta must be positive");
    require(positive_list(c.inversion.eps_ladder), "inversion.eps_ladder must be positive");
    require(c.inversion.steering_spatial >= 1 && c.inversion.steering_temporal >= 1, "steering bank must be non-empty");
    require(!c.regularize.ladder.empty(), "regularize.ladder is empty");
    for (std::size_t k = 0; k < c.regularize.ladder.size(); ++k)
        require(c.regularize.ladder[k] > 0.0 && (k == 0 || c.regularize.ladder[k] < c.regularize.ladder[k - 1]),
                "regularize.ladder must be positive and strictly decreasing");
    require(positive_list(c.sweep.dts), "sweep.dts must be positive");
    require(!c.output_dir.empty(), "output.dir is empty");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
    auto ivs = [](const std::vector<Interval>& v) {
        json a = json::array();
        for (const auto& i : v) a.push_back({i.lo, i.hi});
        return a;
    };
    json j;
    j["pipeline"] = c.pipeline;
    j["s"] = c.s;
    j["grid"] = {{"dim", c.grid.dim}, {"L", c.grid.L},           {"N", c.grid.N},      {"window", c.grid.window},
                 {"omega", ivs(c.grid.omega)}, {"w1", ivs(c.grid.w1)}, {"w2", ivs(c.grid.w2)}};
    j["params"] = {{"alpha", c.params.alpha}, {"b", c.params.b}, {"c", c.params.c}, {"tau", c.params.tau}};
    j["potential"] = {{"profile", c.potential.profile},
                      {"amplitude", c.potential.amplitude},
                      {"width", c.potential.width},
                      {"time_dependence", c.potential.time_dependence},
                      {"rate", c.potential.rate},
                      {"reversal_invariant", c.potential.reversal_invariant}};
    j["nonlinearity"] = {{"type", c.nonlinearity.type},
                         {"coefficients", c.nonlinearity.coefficients},
                         {"powers", c.nonlinearity.powers},
                         {"gauss_exponent", c.nonlinearity.gauss_exponent},
                         {"exponents", c.nonlinearity.exponents},
                         {"profile", c.nonlinearity.profile}};
    j["exterior"] = {{"n_spatial", c.exterior.n_spatial},
                     {"n_temporal", c.exterior.n_temporal},
                     {"amplitude", c.exterior.amplitude}};
    j["time"] = {{"T", c.time.T}, {"dt", c.time.dt}};
    j["solver"] = {{"scheme", c.solver.scheme},
                   {"tol", c.solver.tol},
                   {"max_iter", c.solver.max_iter},
                   {"eps_reg", c.solver.eps_reg}};
    j["linearize"] = {{"etas", c.linearize.etas},
                      {"base_eps", c.linearize.base_eps},
                      {"max_order", c.linearize.max_order}};
    j["inversion"] = {{"lambda_rel", c.inversion.lambda_rel},
                      {"newton_iters", c.inversion.newton_iters},
                      {"lambda_decay", c.inversion.lambda_decay},
                      {"noise_level", c.inversion.noise_level},
                      {"taylor_order", c.inversion.taylor_order},
                      {"eta", c.inversion.eta},
                      {"eps_ladder", c.inversion.eps_ladder},
                      {"constant_coefficient", c.inversion.constant_coefficient},
                      {"steering_spatial", c.inversion.steering_spatial},
                      {"steering_temporal", c.inversion.steering_temporal}};
    if (c.inversion.seed) j["inversion"]["seed"] = *c.inversion.seed;
    j["regularize"] = {{"ladder", c.regularize.ladder}};
    j["sweep"] = {{"dts", c.sweep.dts}};
    j["output"] = {{"dir", c.output_dir}};
    return j;
}

Grid build_grid(const GridSpec& g) {
    if (g.omega.empty()) {
        if (g.dim != 1) throw ConfigError("2D grids need explicit regions");
        return default_grid_1d(g.N, g.L, g.window);
    }
    auto region = [&](const std::vector<Interval>& iv) {
        RegionSpec r;
        r.x = nodes_in_interval(g.L, g.N, iv[0].lo, iv[0].hi);
        if (g.dim == 2) r.y = nodes_in_interval(g.L, g.N, iv[1].lo, iv[1].hi);
        return r;
    };
    return build_grid(g.dim, g.L, g.N, region(g.omega), region(g.w1), region(g.w2));
}

Eigen::VectorXd potential_profile(const PotentialSpec& p, const Grid& grid) {
    const int n = grid.n_omega();
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    if (p.profile == "zero" || p.amplitude == 0.0) return q;
    for (int k = 0; k < n; ++k) {
        double r2 = 0.0;
        for (int a = 0; a < grid.d; ++a) r2 += std::pow(grid.coord(grid.omega[k], a), 2);
        q(k) = p.profile == "constant" ? p.amplitude : p.amplitude * std::exp(-r2 / (2.0 * p.width * p.width));
    }
    return q;
}

Potential build_potential(const PotentialSpec& p, const Grid& grid, const TimeGrid& tg) {
    const Eigen::VectorXd q = potential_profile(p, grid);
    if (q.cwiseAbs().maxCoeff() == 0.0) return Potential::zero();
    if (p.time_dependence == "none" || p.rate == 0.0) return Potential::constant(q);
    const int M = tg.steps;
    Eigen::MatrixXd Q(q.size(), M + 1);
    for (int s = 0; s <= M; ++s) {
        const double t = tg.t(s) / tg.T();
        const double f = p.time_dependence == "symmetric" ? 1.0 + p.rate * std::sin(3.141592653589793 * t)
                                                          : 1.0 + p.rate * t;
        Q.col(s) = q * f;
    }
    return Potential::sampled(Q, tg.dt, p.time_dependence == "symmetric");
}

Nonlinearity build_nonlinearity(const NonlinearitySpec& s, const Grid& grid) {
    const int n = grid.n_omega();
    auto coef = [&](double c) {
        if (s.profile == "constant") return Coefficient::constant(n, c);
        Eigen::VectorXd v(n);
        for (int k = 0; k < n; ++k) v(k) = c * (1.0 + 0.5 * std::sin(grid.coord(grid.omega[k], 0)));
        return Coefficient::profile(v);
    };
    if (s.type == "none") return zero_nonlinearity();
    if (s.type == "polynomial") {
        PolynomialType g;
        for (std::size_t i = 0; i < s.coefficients.size(); ++i) {
            g.coefs.push_back(coef(s.coefficients[i]));
            g.powers.push_back(s.powers[i]);
        }
        g.gauss_exponent = s.gauss_exponent;
        return g;
    }
    if (s.type == "polyhomogeneous") {
        Polyhomogeneous g;
        for (std::size_t i = 0; i < s.coefficients.size(); ++i) g.alpha.push_back(coef(s.coefficients[i]));
        g.r = s.exponents;
        validate(Nonlinearity(g));
        return g;
    }
    if (s.type == "westervelt_beta") return WesterveltBeta{coef(s.coefficients.at(0))};
    return WesterveltKappa{coef(s.coefficients.at(0))};
}

SolveOptions build_solve_options(const SolverSpec& s) {
    SolveOptions o;
    o.scheme = s.scheme == "rk4" ? Scheme::RK4 : Scheme::ImplicitMidpoint;
    o.eps_reg = s.eps_reg;
    o.tol = s.tol;
    o.max_iter = s.max_iter;
    return o;
}

}  // namespace mgt
