// Acceptance run: one PASS/FAIL line per criterion. Exit code 1 if any fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fdb_oracle.hpp"
#include "mgt/config.hpp"
#include "mgt/experiment.hpp"
#include "mgt/fracop.hpp"
#include "mgt/linearize.hpp"

using namespace mgt;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    std::string id;
    std::string title;
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        detail += (detail.empty() ? "" : "; ") + what + (ok ? "" : " [fail]");
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

class Runs {
public:
    explicit Runs(fs::path root) : root_(std::move(root)) {}

    const RunManifest& run(const std::string& key, ExperimentConfig c) {
        c.output_dir = (root_ / key).string();
        auto [it, fresh] = runs_.try_emplace(key);
        if (fresh) {
            std::cerr << "running " << key << "...\n";
            it->second = run_experiment(parse_config(to_json(c)));
        }
        return it->second;
    }
    const RunManifest& run(const std::string& pipeline) { return run(pipeline, default_config(pipeline)); }

    std::vector<RunManifest> all() const {
        std::vector<RunManifest> v;
        for (const auto& [k, m] : runs_) v.push_back(m);
        return v;
    }

private:
    fs::path root_;
    std::map<std::string, RunManifest> runs_;
};

// Adds one check of a run to the criterion, using the window stored with it.
void use(Criterion& c, const RunManifest& m, const std::string& name) {
    for (const auto& k : m.checks)
        if (k.name == name) {
            c.require(k.pass, name + " " + num(k.value));
            return;
        }
    c.require(false, name + " missing");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Criterion operator_laws() {
    Criterion c{"C01", "operator laws at N = 127"};
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g = default_grid_1d(127);
    const std::vector<FracOp> ops{build_fracop(g, 0.3), build_fracop(g, 0.7), build_fracop(g, 1.0)};
    const OperatorLawsReport r = check_operator_laws(ops, 1000);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.require(r.orthonormality <= 1e-10, "orthonormality " + num(r.orthonormality));
    c.require(r.symmetry <= 1e-10, "symmetry " + num(r.symmetry));
    c.require(r.psd_min >= -1e-10, "psd_min " + num(r.psd_min));
    c.require(r.semigroup <= 1e-9, "semigroup " + num(r.semigroup));
    c.require(r.base_residual <= 1e-10, "base " + num(r.base_residual));
    c.require(r.poincare_excess <= 1e-8, "poincare " + num(r.poincare_excess));
    c.require(secs < 10.0, "time " + num(secs) + " s");
    return c;
}

Criterion faa_di_bruno() {
    Criterion c{"C07", "Faa di Bruno source and partition counts"};
    const std::vector<std::size_t> bell{1, 2, 5, 15};
    bool counts = true;
    for (int N = 1; N <= 4; ++N) counts = counts && enumerate_partitions(N).size() == bell[N - 1];
    c.require(counts, "Bell numbers 1, 2, 5, 15");

    const int n = 5, cols = 3;
    const std::vector<double> times{0.2, 0.5, 0.8};
    PolynomialType poly;
    poly.coefs = {Coefficient::constant(n, 0.5), Coefficient::constant(n, 1.0), Coefficient::constant(n, -0.3)};
    poly.powers = {2, 3, 4};
    poly.gauss_exponent = 2;
    const Nonlinearity g = poly;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (const std::vector<int>& idx : {std::vector<int>{0, 1}, {0, 1, 2}, {0, 0, 1}, {0, 1, 2, 3}, {1, 1, 1, 1}}) {
        const int N = static_cast<int>(idx.size());
        const std::size_t full = (std::size_t{1} << N) - 1;
        Eigen::MatrixXd base(n, cols);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cols; ++j) base(i, j) = 0.3 * nd(rng);
        DerivativeBank bank;
        for (std::size_t m = 1; m < full; ++m) {
            const auto key = testutil::key_of(idx, m);
            if (bank.has(key)) continue;
            Eigen::MatrixXd f(n, cols);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < cols; ++j) f(i, j) = nd(rng);
            bank.put(key, f);
        }
        const Eigen::MatrixXd src = faa_di_bruno_source(g, base, bank, idx, times);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cols; ++j) {
                std::vector<double> parts(full + 1, 0.0);
                for (std::size_t m = 1; m < full; ++m) parts[m] = bank.get(testutil::key_of(idx, m))(i, j);
                const double ref = testutil::oracle_source(g, i, times[j], base(i, j), parts, N);
                worst = std::max(worst, std::abs(src(i, j) - ref));
            }
    }
    c.require(worst <= 1e-10, "max deviation " + num(worst));
    return c;
}

Criterion determinism(Runs& runs, const fs::path& root) {
    Criterion c{"C13", "byte-identical reruns"};
    for (const std::string p : {"forward", "linearize", "invert-q"}) {
        const RunManifest& a = runs.run(p);
        const RunManifest& b = runs.run(p + "-rerun", default_config(p));
        bool same = a.artifacts == b.artifacts;
        for (const auto& f : a.artifacts)
            if (f.ends_with(".csv") || f.ends_with(".bin"))
                same = same && slurp(root / p / f) == slurp(root / (p + "-rerun") / f);
        c.require(same, p);
    }
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "mgt_acceptance";
    fs::remove_all(root);
    Runs runs(root);
    std::vector<Criterion> out;

    try {
        out.push_back(operator_laws());

        Criterion c2{"C02", "manufactured solution, second order"};
        use(c2, runs.run("sweep"), "manufactured_order");
        out.push_back(c2);

        Criterion c3{"C03", "zero data and energy identity"};
        use(c3, runs.run("sweep"), "zero_data_norm");
        use(c3, runs.run("sweep"), "energy_residual_order");
        out.push_back(c3);

        Criterion c4{"C04", "adjoint and integral identities"};
        for (const char* k : {"adjoint_residual_ref_dt", "integral_residual_ref_dt", "adjoint_order", "integral_order"})
            use(c4, runs.run("sweep"), k);
        use(c4, runs.run("identities"), "adjoint_residual");
        use(c4, runs.run("identities"), "integral_residual");
        out.push_back(c4);

        Criterion c5{"C05", "Picard contraction"};
        use(c5, runs.run("forward"), "picard_rate");
        use(c5, runs.run("forward"), "picard_rate_drop");
        out.push_back(c5);

        Criterion c6{"C06", "higher-order linearization"};
        for (const char* k : {"slope_order1_one_sided", "slope_order1_central", "slope_order2_one_sided",
                              "slope_order2_central", "dn_first_order_residual"})
            use(c6, runs.run("linearize"), k);
        out.push_back(c6);

        out.push_back(faa_di_bruno());

        Criterion c8{"C08", "potential recovery"};
        use(c8, runs.run("invert-q"), "born_error");
        use(c8, runs.run("invert-q"), "newton_error");
        out.push_back(c8);

        Criterion c9{"C09", "Taylor coefficient recovery"};
        use(c9, runs.run("invert-g"), "taylor_rel_error");
        out.push_back(c9);

        Criterion c10{"C10", "polyhomogeneous recovery"};
        for (const char* k : {"decay_slope_error", "peeling_rel_error", "peeling_joint_gap"})
            use(c10, runs.run("invert-poly"), k);
        out.push_back(c10);

        Criterion c11{"C11", "Westervelt coefficients"};
        use(c11, runs.run("invert-westervelt"), "westervelt_beta_rel_error");
        ExperimentConfig kc = default_config("invert-westervelt");
        kc.nonlinearity.type = "westervelt_kappa";
        kc.nonlinearity.coefficients = {0.05};
        use(c11, runs.run("invert-westervelt-kappa", kc), "westervelt_kappa_rel_error");
        out.push_back(c11);

        Criterion c12{"C12", "parabolic regularization and integration by parts"};
        use(c12, runs.run("regularize"), "deviations_strictly_decreasing");
        use(c12, runs.run("regularize"), "dissipation_ratio");
        use(c12, runs.run("sweep"), "ibp_generic_order");
        use(c12, runs.run("identities"), "ibp_generic_residual");
        out.push_back(c12);

        out.push_back(determinism(runs, root));
        emit_report(runs.all(), root);
    } catch (const std::exception& e) {
        std::cout << "FAIL  acceptance aborted: " << e.what() << "\n";
        return 1;
    }

    bool ok = true;
    for (const auto& c : out) {
        ok = ok && c.pass;
        std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.id << " " << c.title << "  (" << c.detail << ")\n";
    }
    std::cout << (ok ? "all criteria passed" : "some criteria failed") << "; report in " << root.string() << "\n";
    return ok ? 0 : 1;
}
