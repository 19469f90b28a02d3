#ifndef COXMESH_FEM_HPP
#define COXMESH_FEM_HPP

#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "coxmesh/geometry.hpp"

namespace coxmesh {

/// Symmetric sparse matrix; only the upper triangle is stored.
struct SparseSym {
    Eigen::SparseMatrix<double> upper; // column compressed, j >= i entries

    Eigen::Index n() const { return upper.rows(); }

    /// Full symmetrized copy (both triangles), for dense oracles and solvers
    /// that want the complete pattern.
    Eigen::SparseMatrix<double> full() const;

    Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
};

/// Discretized Matern SPDE operator pieces plus current hyperparameters.
/// Q(alpha=1) = tau^2 (kappa^2 C + G), Q(alpha=2) = tau^2 (kappa^2 C + G)
/// C^{-1} (kappa^2 C + G), with C the lumped (diagonal) mass matrix.
struct SpdeModel {
    double log_tau = 0.0;
    double log_kappa2 = 0.0;
    std::vector<double> C_diag;
    SparseSym G;
    int alpha = 2;
};

struct MaternParams {
    double sigma2 = 1.0;
    double nu = 1.0;
    double kappa = 1.0;
};

/// C_diag[i] = integral of basis i = sum of area/3 over incident triangles.
std::vector<double> assemble_mass_lumped(const TriMesh& mesh);

/// G_ij = integral of grad(phi_i) . grad(phi_j); row sums vanish.
SparseSym assemble_stiffness(const TriMesh& mesh);

SpdeModel make_spde(const TriMesh& mesh, int alpha);

SparseSym precision(const SpdeModel& model);

/// Matern correlation c(h)/sigma^2 for nu in {1/2, 1, 3/2}.
std::vector<double> matern_correlation_oracle(const MaternParams& params,
                                              const std::vector<double>& distances);

/// Variance of the 1D alpha = 3/2 SPDE on [0,1] with Neumann boundaries,
/// by the folded covariance sum 2 sum' r(2k) + sum r(2|s-k|); both sums
/// truncated once the tail drops below 1e-12.
std::vector<double> neumann_variance_1d_oracle(double kappa,
                                               const std::vector<double>& points);

/// Debug export, coordinate text `i j value`, zero based, upper triangle.
void save_matrix(const std::string& path, const SparseSym& m);

} // namespace coxmesh

#endif
