#include "coxmesh/selected_inverse.hpp"

#include <vector>

#include "coxmesh/errors.hpp"

namespace coxmesh {

Eigen::VectorXd selected_inverse_diagonal(
    const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& llt) {
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("Cholesky factorization not available");

    // Work on the permuted system B = P Q P^T = L L^T. The recursion fills
    // Sigma = B^{-1} on the pattern of L, which is closed under everything
    // the recursion reads, so the diagonal is exact.
    Eigen::SparseMatrix<double> L = llt.matrixL();
    L.makeCompressed();
    const Eigen::Index n = L.rows();
    const int* outer = L.outerIndexPtr();
    const int* inner = L.innerIndexPtr();
    const double* val = L.valuePtr();

    std::vector<double> sigma(static_cast<std::size_t>(outer[n]), 0.0);

    // Sigma entry at pattern position (row i, column j), i >= j.
    auto sigma_at = [&](Eigen::Index i, Eigen::Index j) -> double {
        if (i < j) std::swap(i, j);
        int lo = outer[j], hi = outer[j + 1];
        while (lo < hi) {
            int mid = (lo + hi) / 2;
            if (inner[mid] < i)
                lo = mid + 1;
            else if (inner[mid] > i)
                hi = mid;
            else
                return sigma[mid];
        }
        return 0.0; // outside the pattern; contributes nothing exact to the diagonal
    };

    for (Eigen::Index j = n - 1; j >= 0; --j) {
        int begin = outer[j], end = outer[j + 1];
        double ljj = val[begin]; // first row in the column is the diagonal
        // Descending i so the diagonal entry is finished last.
        for (int idx = end - 1; idx >= begin; --idx) {
            Eigen::Index i = inner[idx];
            double s = 0.0;
            for (int kdx = begin + 1; kdx < end; ++kdx) {
                Eigen::Index k = inner[kdx];
                s += val[kdx] * sigma_at(k, i);
            }
            if (i == j)
                sigma[idx] = 1.0 / (ljj * ljj) - s / ljj;
            else
                sigma[idx] = -s / ljj;
        }
    }

    Eigen::VectorXd diag(n);
    const auto& perm = llt.permutationP().indices();
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index pi = perm[i];
        diag[i] = sigma[outer[pi]]; // diagonal entry leads column pi
    }
    return diag;
}

Eigen::VectorXd dense_inverse_diagonal(const Eigen::SparseMatrix<double>& Q) {
    Eigen::MatrixXd dense(Q);
    Eigen::LLT<Eigen::MatrixXd> llt(dense);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("dense factorization failed");
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(dense.rows(), dense.cols()));
    return inv.diagonal();
}

} // namespace coxmesh
