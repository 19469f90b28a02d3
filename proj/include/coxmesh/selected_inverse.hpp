#ifndef COXMESH_SELECTED_INVERSE_HPP
#define COXMESH_SELECTED_INVERSE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace coxmesh {

/// Diagonal of Q^{-1} from a sparse Cholesky factor, by the Takahashi
/// recursion restricted to the factor's sparsity pattern. Exact for the
/// diagonal because the pattern of L contains every entry the recursion
/// touches. Handles the solver's fill-reducing permutation internally.
Eigen::VectorXd selected_inverse_diagonal(
    const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& llt);

/// Dense fallback used below 500 unknowns and as a cross-check in tests.
Eigen::VectorXd dense_inverse_diagonal(const Eigen::SparseMatrix<double>& Q);

} // namespace coxmesh

#endif
