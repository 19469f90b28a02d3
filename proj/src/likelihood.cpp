#include "coxmesh/likelihood.hpp"

#include <cmath>
#include <vector>

#include "coxmesh/errors.hpp"

namespace coxmesh {

Eigen::VectorXd PseudoPoisson::eta(const Eigen::VectorXd& latent) const {
    if (latent.size() != n_field + n_fixed)
        throw BuildError("latent vector has the wrong length");
    Eigen::VectorXd e = A * latent;
    if (offset.size() > 0) e += offset;
    return e;
}

PseudoPoisson build_pseudo(const IntegrationScheme& scheme,
                           const EffortField& effort,
                           const BasisEval& points,
                           const LinearPredictorMap& predictor) {
    const Eigen::Index p = static_cast<Eigen::Index>(scheme.nodes.size());
    const Eigen::Index N = static_cast<Eigen::Index>(points.rows);
    const Eigen::Index n_field = static_cast<Eigen::Index>(scheme.node_basis.cols);
    const Eigen::Index n_fixed = predictor.n_fixed;

    if (N > 0 && static_cast<Eigen::Index>(points.cols) != n_field)
        throw BuildError("point basis and scheme are built on different meshes");
    if (n_fixed > 0) {
        if (predictor.covariate_at_nodes.rows() != p ||
            predictor.covariate_at_nodes.cols() != n_fixed)
            throw BuildError("node covariate matrix has the wrong shape");
        if (N > 0 && (predictor.covariate_at_points.rows() != N ||
                      predictor.covariate_at_points.cols() != n_fixed))
            throw BuildError("point covariate matrix has the wrong shape");
    }

    PseudoPoisson pp;
    pp.p = p;
    pp.N = N;
    pp.n_field = n_field;
    pp.n_fixed = n_fixed;

    pp.y.setZero(p + N);
    pp.y.tail(N).setOnes();

    std::vector<double> exposures = apply_effort(scheme, effort);
    pp.exposure.setZero(p + N);
    for (Eigen::Index i = 0; i < p; ++i) pp.exposure[i] = exposures[i];

    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index i = 0; i < p; ++i)
        for (const auto& [j, w] : scheme.node_basis.entries[i])
            trips.emplace_back(i, j, w);
    for (Eigen::Index i = 0; i < N; ++i)
        for (const auto& [j, w] : points.entries[i])
            trips.emplace_back(p + i, j, w);
    for (Eigen::Index j = 0; j < n_fixed; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) {
            double v = predictor.covariate_at_nodes(i, j);
            if (v != 0) trips.emplace_back(i, n_field + j, v);
        }
        for (Eigen::Index i = 0; i < N; ++i) {
            double v = predictor.covariate_at_points(i, j);
            if (v != 0) trips.emplace_back(p + i, n_field + j, v);
        }
    }
    pp.A.resize(p + N, n_field + n_fixed);
    pp.A.setFromTriplets(trips.begin(), trips.end());
    pp.A.makeCompressed();
    return pp;
}

double loglik(const PseudoPoisson& pp, const Eigen::VectorXd& latent) {
    Eigen::VectorXd e = pp.eta(latent);
    double val = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        if (e[i] > 700.0) throw EtaOverflow("linear predictor overflow at row " +
                                            std::to_string(i));
        val += pp.y[i] * e[i] - pp.exposure[i] * std::exp(e[i]);
    }
    return val;
}

GradHess grad_hess(const PseudoPoisson& pp, const Eigen::VectorXd& latent) {
    Eigen::VectorXd e = pp.eta(latent);
    Eigen::VectorXd w(e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        if (e[i] > 700.0) throw EtaOverflow("linear predictor overflow at row " +
                                            std::to_string(i));
        w[i] = pp.exposure[i] * std::exp(e[i]);
    }
    GradHess gh;
    gh.gradient = pp.A.transpose() * (pp.y - w);
    gh.hess_weights = std::move(w);
    return gh;
}

} // namespace coxmesh
