#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgt/forward.hpp"
#include "mgt/grid.hpp"
#include "mgt/nonlinearity.hpp"

namespace mgt {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct GridSpec {
    int dim = 1;
    double L = 2.0;
    int N = 63;
    int window = 5;  ///< 1D default layout: nodes per exterior window
    /// Explicit regions as coordinate intervals (x, then y in 2D); empty = default layout.
    std::vector<Interval> omega, w1, w2;
};

struct PotentialSpec {
    std::string profile = "gaussian";  ///< zero | constant | gaussian
    double amplitude = 0.0;
    double width = 0.5;
    std::string time_dependence = "none";  ///< none | symmetric | linear
    double rate = 0.5;
    bool reversal_invariant = true;
};

struct NonlinearitySpec {
    std::string type = "none";  ///< none | polynomial | polyhomogeneous | westervelt_beta | westervelt_kappa
    std::vector<double> coefficients;
    std::vector<int> powers;
    int gauss_exponent = 0;
    std::vector<double> exponents;
    std::string profile = "constant";  ///< constant | sine: c (1 + 0.5 sin x)
};

struct BankSpec {
    int n_spatial = 2;
    int n_temporal = 4;
    double amplitude = 1.0;
};

struct TimeSpec {
    double T = 2.0;
    double dt = 1e-3;
};

struct SolverSpec {
    std::string scheme = "midpoint";  ///< midpoint | rk4
    double tol = 1e-10;
    int max_iter = 200;
    double eps_reg = 0.0;
};

struct LinearizeSpec {
    std::vector<double> etas{4e-2, 2e-2, 1e-2, 5e-3};
    std::vector<double> base_eps{0.0, 0.0};
    int max_order = 2;
};

struct InversionSpec {
    double lambda_rel = 1e-8;
    int newton_iters = 5;
    double lambda_decay = 0.1;
    double noise_level = 0.0;
    std::optional<std::uint64_t> seed;
    int taylor_order = 2;
    double eta = 1e-2;
    std::vector<double> eps_ladder{0.2, 0.1, 0.05, 0.02, 0.01};
    bool constant_coefficient = true;
    int steering_spatial = 2;
    int steering_temporal = 8;
};

struct RegularizeSpec {
    std::vector<double> ladder{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
};

struct SweepSpec {
    std::vector<double> dts{4e-3, 2e-3, 1e-3, 5e-4};
};

struct ExperimentConfig {
    std::string pipeline = "forward";
    GridSpec grid;
    double s = 0.5;
    MGTParams params;
    PotentialSpec potential;
    NonlinearitySpec nonlinearity;
    BankSpec exterior;
    TimeSpec time;
    SolverSpec solver;
    LinearizeSpec linearize;
    InversionSpec inversion;
    RegularizeSpec regularize;
    SweepSpec sweep;
    std::string output_dir = "out";
    nlohmann::json raw;  ///< input document, for hashing

    std::uint64_t seed() const { return inversion.seed.value_or(0); }
};

const std::vector<std::string>& pipeline_names();

/// Schema-checked parse; throws ConfigError on unknown keys, wrong types or bad values.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON of the effective configuration (sorted keys).
nlohmann::json to_json(const ExperimentConfig& c);

Grid build_grid(const GridSpec& g);
Potential build_potential(const PotentialSpec& p, const Grid& grid, const TimeGrid& tg);
/// Spatial profile of the potential on omega (time factor excluded).
Eigen::VectorXd potential_profile(const PotentialSpec& p, const Grid& grid);
Nonlinearity build_nonlinearity(const NonlinearitySpec& n, const Grid& grid);
SolveOptions build_solve_options(const SolverSpec& s);

}  // namespace mgt
