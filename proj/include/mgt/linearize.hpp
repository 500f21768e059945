#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "mgt/dnmap.hpp"
#include "mgt/forward.hpp"

namespace mgt {

/// Set partition of {0..N-1}; blocks listed in order of their smallest element.
using Partition = std::vector<std::vector<int>>;

/// All set partitions of {0..N-1} via restricted-growth strings, 1 <= N <= 8.
std::vector<Partition> enumerate_partitions(int N);
/// Partitions with at least two blocks.
std::vector<Partition> proper_partitions(int N);

/// Derivative fields of u^eps keyed by the sorted list of eps-components.
class DerivativeBank {
public:
    void put(std::vector<int> key, Eigen::MatrixXd field);
    bool has(std::vector<int> key) const;
    const Eigen::MatrixXd& get(std::vector<int> key) const;

private:
    std::map<std::vector<int>, Eigen::MatrixXd> fields_;
};

/// Slashed Faa di Bruno source: sum over proper partitions pi of indices of
///   d_tau^{|pi|} g(base_u) * prod_{B in pi} d^B u.
/// All fields share the column layout of base_u; times[j] is the time of column j.
Eigen::MatrixXd faa_di_bruno_source(const Nonlinearity& g, const Eigen::MatrixXd& base_u, const DerivativeBank& bank,
                                    const std::vector<int>& indices, const std::vector<double>& times);

/// Column-wise midpoint averages (n x M from n x (M+1)).
Eigen::MatrixXd midpoint_average(const Eigen::MatrixXd& nodal);

/// Solution map eps -> u^eps for a fixed exterior bank, with cached linearizations.
struct LinearizationStack {
    const FracOp* op = nullptr;
    MGTParams params;
    Potential q;
    Nonlinearity g;
    std::vector<ExteriorInput> bank;
    Eigen::VectorXd eps;
    TimeGrid time;
    SolveOptions opt;

    Trajectory base;                                  ///< u^eps
    Eigen::MatrixXd dg_mid;                           ///< d_tau g(u^eps) at midpoints
    std::map<std::vector<int>, Trajectory> derivs;   ///< sorted multi-index -> d^alpha u^eps

    /// Exterior datum sum_k eps_k phi_k.
    ExteriorInput combined(const Eigen::VectorXd& e) const;
    /// Semilinear solve at an arbitrary eps.
    Trajectory solve_at(const Eigen::VectorXd& e) const;
};

LinearizationStack build_stack(const FracOp& op, const MGTParams& p, const Potential& q, const Nonlinearity& g,
                               const std::vector<ExteriorInput>& bank, const Eigen::VectorXd& eps,
                               const TimeGrid& tg, const SolveOptions& opt = {});

/// d^N u^eps / d eps_{k1} ... d eps_{kN}, solving lower orders on demand.
const Trajectory& solve_linearized(LinearizationStack& stack, std::vector<int> indices);

/// Nested difference quotient of the solution map along the listed directions.
/// One-sided: prod_j delta^{k_j}_eta; central: prod_j (u(+eta) - u(-eta)) / (2 eta).
Trajectory diff_quotient_solution_map(const LinearizationStack& stack, const std::vector<int>& indices, double eta,
                                      bool central);

struct ConvergenceRow {
    int order = 0;
    std::string indices;
    double eta = 0.0;
    double error = 0.0;
    double slope = 0.0;  ///< local log-log slope against the previous rung (0 for the first)
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    double fitted_slope = 0.0;
    double r_squared = 0.0;
};

/// ||v_N - delta^N_eta u||_X / ||v_N||_X along an eta-ladder.
ConvergenceTable linearization_convergence_report(LinearizationStack& stack, const std::vector<int>& indices,
                                                  const std::vector<double>& etas, bool central);

/// <d^N Lambda(eps phi), psi> from the linearized solve.
double dn_derivative(LinearizationStack& stack, const std::vector<int>& indices, const ExteriorInput& psi);
/// Same quantity from nested central differences of eps -> <Lambda(eps phi), psi>.
double dn_derivative_quotient(const LinearizationStack& stack, const std::vector<int>& indices,
                              const ExteriorInput& psi, double eta);

/// Least-squares slope and R^2 of log y against log x.
void fit_loglog(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& r2);

}  // namespace mgt
