#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mgt/grid.hpp"

namespace mgt {

/// Spectral power A_s = V diag(lambda^s) V^T of the box-Dirichlet
/// second-difference Laplacian. Immutable after construction.
struct FracOp {
    Grid grid;
    double s = 0.0;
    Eigen::MatrixXd V;           ///< orthonormal eigenvectors, columns
    Eigen::VectorXd lambda;      ///< ascending eigenvalues of the base Laplacian
    Eigen::VectorXd multiplier;  ///< lambda^s

    Eigen::MatrixXd A;     ///< full box operator
    Eigen::MatrixXd A_oo;  ///< omega rows, omega columns
    Eigen::MatrixXd A_ob;  ///< omega rows, all columns
    Eigen::MatrixXd A_eb;  ///< exterior rows, all columns

    double lambda_min() const { return lambda(0); }
    /// V diag(lambda^t) V^T for an arbitrary power t >= 0.
    Eigen::MatrixXd power(double t) const;
};

/// Base second-difference Dirichlet Laplacian on the box (dense).
Eigen::MatrixXd base_laplacian(const Grid& grid);

FracOp build_fracop(const Grid& grid, double s);

/// Columnwise A_s * field for a box field (rows = n_tot).
Eigen::MatrixXd frac_apply(const FracOp& op, const Eigen::MatrixXd& field);

/// h^d f^T A_s g for two box vectors.
double frac_pairing(const FracOp& op, const Eigen::VectorXd& f, const Eigen::VectorXd& g);

/// Squared fractional seminorm h^d v^T A_oo v of a field supported in omega.
double omega_energy(const FracOp& op, const Eigen::VectorXd& v);

struct OperatorLawsReport {
    double orthonormality = 0.0;   ///< ||V^T V - I||_F
    double symmetry = 0.0;         ///< max ||A - A^T||_F / ||A||_F
    double psd_min = 0.0;          ///< min Rayleigh quotient over sampled vectors and spectrum
    double semigroup = 0.0;        ///< max relative ||A_a A_b - A_{a+b}||_F over pairs
    double base_residual = -1.0;   ///< relative ||A_1 - Laplacian||_F when s = 1 is present
    double poincare_excess = 0.0;  ///< max of ratio / bound - 1 over samples and pairs t <= s
    int samples = 0;
};

/// Checks symmetry, positivity, the semigroup law and the discrete Poincare
/// inequality for operators sharing one grid.
OperatorLawsReport check_operator_laws(const std::vector<FracOp>& ops, int samples = 1000,
                                       std::uint64_t seed = 7);

}  // namespace mgt
