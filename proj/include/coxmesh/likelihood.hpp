#ifndef COXMESH_LIKELIHOOD_HPP
#define COXMESH_LIKELIHOOD_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "coxmesh/quadrature.hpp"

namespace coxmesh {

/// Fixed-effect design: column 0 is the intercept (all ones), further
/// columns are covariates evaluated at integration nodes and data points.
struct LinearPredictorMap {
    Eigen::Index n_field = 0;
    Eigen::Index n_fixed = 0;
    Eigen::MatrixXd covariate_at_nodes;  // p x n_fixed
    Eigen::MatrixXd covariate_at_points; // N x n_fixed
};

/// Pseudo-Poisson stacking of the point-process log-likelihood: p
/// integration rows (y = 0, exposure = weight * effort) followed by N data
/// rows (y = 1, exposure = 0, so each contributes eta linearly and nothing
/// to the exponential term).
struct PseudoPoisson {
    Eigen::VectorXd y;
    Eigen::VectorXd exposure;
    Eigen::SparseMatrix<double> A; // (p+N) x (n_field + n_fixed)
    Eigen::VectorXd offset;        // empty means zero
    Eigen::Index p = 0;
    Eigen::Index N = 0;
    Eigen::Index n_field = 0;
    Eigen::Index n_fixed = 0;

    Eigen::VectorXd eta(const Eigen::VectorXd& latent) const;
};

PseudoPoisson build_pseudo(const IntegrationScheme& scheme,
                           const EffortField& effort,
                           const BasisEval& points,
                           const LinearPredictorMap& predictor);

/// -sum_i exposure_i exp(eta_i) + sum_{data rows} eta_i, constants dropped.
/// Throws EtaOverflow past eta = 700.
double loglik(const PseudoPoisson& pp, const Eigen::VectorXd& latent);

struct GradHess {
    Eigen::VectorXd gradient;     // A^T (y_data - exposure exp(eta))
    Eigen::VectorXd hess_weights; // exposure exp(eta); -H = A^T diag(w) A
};

GradHess grad_hess(const PseudoPoisson& pp, const Eigen::VectorXd& latent);

} // namespace coxmesh

#endif
