#ifndef COXMESH_INFERENCE_HPP
#define COXMESH_INFERENCE_HPP

#include <utility>
#include <vector>

#include "coxmesh/fem.hpp"
#include "coxmesh/likelihood.hpp"

namespace coxmesh {

struct Hyper {
    double log_tau = 0.0;
    double log_kappa2 = 0.0;
};

/// Independent Gaussian priors on the log hyperparameters.
struct HyperPrior {
    double mean_log_tau = 0.0;
    double sd_log_tau = 3.0;
    double mean_log_kappa2 = 0.0;
    double sd_log_kappa2 = 3.0;

    double logpdf(const Hyper& h) const;
};

struct GridSpec {
    double step = 0.5;      // grid spacing in each log hyperparameter
    double log_drop = 6.0;  // stop expanding once log-posterior falls this far
    int max_points = 1024;  // expansion cap, HyperOptFailure beyond
};

/// Laplace approximation at fixed hyperparameters: latent mode, marginal
/// standard deviations of the extended vector (field then fixed effects),
/// covariance columns for the fixed-effect block, and the Laplace model
/// evidence.
struct GaussianApprox {
    Eigen::VectorXd mode;
    Eigen::VectorXd marginal_sd;
    Eigen::MatrixXd fixed_cov_cols; // (n_field+n_fixed) x n_fixed slice of Q_post^{-1}
    double log_evidence = 0.0;
    int newton_iters = 0;
};

struct GridPoint {
    Hyper hyper;
    double log_post = 0.0; // unnormalized
    double weight = 0.0;   // normalized across the grid
};

struct HyperGrid {
    std::vector<GridPoint> points;
    Hyper mode;
    double step = 0.5;
};

/// Grid exploration keeps the per-point Gaussian approximations so the
/// mixture marginals need no refitting.
struct GridFit {
    HyperGrid grid;
    std::vector<GaussianApprox> approxs;
};

using DensityCurve = std::vector<std::pair<double, double>>; // (value, density)

struct FixedEffectSummary {
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double q50 = 0.0;
    double q975 = 0.0;
    DensityCurve density;
};

/// Mixture posterior over the grid. Field quantities are per vertex;
/// predictor quantities are for the full linear predictor at vertices
/// (field + fixed effects through the vertex covariates), which is what
/// exceedance maps threshold.
struct PosteriorResult {
    Eigen::VectorXd field_mean;
    Eigen::VectorXd field_sd;
    Eigen::VectorXd predictor_mean;
    Eigen::VectorXd predictor_sd;
    std::vector<FixedEffectSummary> fixed_effects;
    DensityCurve marg_log_tau;
    DensityCurve marg_log_kappa2;
    HyperGrid grid;
    // mixture components of the vertex predictor, one column per grid point
    Eigen::MatrixXd comp_mean;
    Eigen::MatrixXd comp_sd;
    Eigen::VectorXd comp_weight;
};

/// Newton iteration on the concave objective loglik + Gaussian prior.
/// fixed_prior_prec is the near-flat precision on the fixed-effect block.
GaussianApprox fit_mode(const PseudoPoisson& pp, const SpdeModel& model,
                        const Hyper& hyper, double fixed_prior_prec = 1e-6);

/// Locates the hyper mode of log_evidence + log prior by pattern search on
/// the step lattice, then expands the grid outward until the log posterior
/// drops `log_drop` below the mode. Grid points may be fit concurrently
/// (`threads`, 0 = hardware count); results are independent of the order.
GridFit explore_grid(const PseudoPoisson& pp, const SpdeModel& model,
                     const HyperPrior& prior, const GridSpec& spec,
                     double fixed_prior_prec = 1e-6, int threads = 1);

/// covariate_at_vertices: n_vertices x n_fixed design used to form the
/// vertex predictor (intercept column of ones when n_fixed >= 1).
PosteriorResult marginals(const HyperGrid& grid,
                          const std::vector<GaussianApprox>& approxs,
                          const Eigen::MatrixXd& covariate_at_vertices);

/// Per-vertex P(predictor > threshold) under the Gaussian mixture.
Eigen::VectorXd exceedance_map(const PosteriorResult& result, double threshold);

} // namespace coxmesh

#endif
