#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "coxmesh/errors.hpp"
#include "coxmesh/inference.hpp"
#include "coxmesh/selected_inverse.hpp"
#include "coxmesh/simulate.hpp"
#include "support.hpp"

using namespace coxmesh;

namespace {

struct Problem {
    TriMesh mesh;
    SpdeModel model;
    IntegrationScheme scheme;
    EffortField effort;
    LinearPredictorMap predictor;
    PseudoPoisson pp;
    Eigen::MatrixXd X; // vertex design for marginals
};

// Intercept-only problem over the given pattern; effort constant `s`.
Problem make_problem(const TriMesh& mesh, const std::vector<Vec2>& pts, double s) {
    Problem pr;
    pr.mesh = mesh;
    pr.model = make_spde(pr.mesh, 2);
    pr.scheme = midpoint_scheme(pr.mesh);
    pr.effort.kind = EffortField::Kind::constant;
    pr.effort.constant = s;
    BasisEval located = locate_points(pr.mesh, pts);
    pr.predictor.n_field = static_cast<Eigen::Index>(pr.mesh.n_vertices());
    pr.predictor.n_fixed = 1;
    pr.predictor.covariate_at_nodes = Eigen::MatrixXd::Ones(pr.scheme.nodes.size(), 1);
    pr.predictor.covariate_at_points = Eigen::MatrixXd::Ones(pts.size(), 1);
    pr.pp = build_pseudo(pr.scheme, pr.effort, located, pr.predictor);
    pr.X = Eigen::MatrixXd::Ones(pr.mesh.n_vertices(), 1);
    return pr;
}

Eigen::MatrixXd dense_prior(const Problem& pr, const Hyper& hyper, double fprec) {
    SpdeModel m = pr.model;
    m.log_tau = hyper.log_tau;
    m.log_kappa2 = hyper.log_kappa2;
    Eigen::Index n = pr.predictor.n_field;
    Eigen::Index nf = pr.predictor.n_fixed;
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n + nf, n + nf);
    Q.topLeftCorner(n, n) = Eigen::MatrixXd(precision(m).full());
    for (Eigen::Index k = 0; k < nf; ++k) Q(n + k, n + k) = fprec;
    return Q;
}

} // namespace

TEST_CASE("degenerate fit: zero exposure and no data returns the prior") {
    TriMesh mesh = testutil::build_lattice(3, 3, 1.0 / 3.0);
    Problem pr = make_problem(mesh, {}, 0.0);
    Hyper hyper{-0.5, 1.0};
    GaussianApprox ga = fit_mode(pr.pp, pr.model, hyper);

    CHECK(ga.mode.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(ga.log_evidence) <= 1e-10);

    Eigen::MatrixXd Qp = dense_prior(pr, hyper, 1e-6);
    Eigen::VectorXd prior_sd = Qp.inverse().diagonal().cwiseSqrt();
    REQUIRE(ga.marginal_sd.size() == prior_sd.size());
    for (Eigen::Index i = 0; i < prior_sd.size(); ++i)
        CHECK(ga.marginal_sd[i] == doctest::Approx(prior_sd[i]).epsilon(1e-9));
}

TEST_CASE("mode satisfies the stationarity certificate") {
    TriMesh mesh = testutil::build_lattice(5, 5, 0.2);
    std::mt19937 gen(19);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    std::vector<Vec2> pts;
    for (int i = 0; i < 120; ++i) pts.push_back({u(gen), u(gen)});
    Problem pr = make_problem(mesh, pts, 1.0);
    Hyper hyper{-1.0, 2.0};
    GaussianApprox ga = fit_mode(pr.pp, pr.model, hyper);
    CHECK(ga.newton_iters >= 1);
    CHECK(ga.newton_iters <= 100);

    SpdeModel m = pr.model;
    m.log_tau = hyper.log_tau;
    m.log_kappa2 = hyper.log_kappa2;
    Eigen::MatrixXd Qp = dense_prior(pr, hyper, 1e-6);
    Eigen::VectorXd grad =
        grad_hess(pr.pp, ga.mode).gradient - Qp * ga.mode;
    double obj = loglik(pr.pp, ga.mode) - 0.5 * ga.mode.dot(Qp * ga.mode);
    CHECK(grad.norm() <= 1e-8 * (1 + std::abs(obj)));

    // Homogeneous-ish data: the intercept sits near log(N / area).
    double target = std::log(120.0 / 1.0);
    Eigen::Index ic = pr.predictor.n_field;
    CHECK(std::abs(ga.mode[ic] - target) <= 2.0 * ga.marginal_sd[ic]);
}

TEST_CASE("fit rejects mismatched designs and bad precisions") {
    TriMesh mesh = testutil::build_lattice(2, 2, 0.5);
    Problem pr = make_problem(mesh, {}, 1.0);
    TriMesh other = testutil::build_lattice(3, 3, 0.25);
    SpdeModel wrong = make_spde(other, 2);
    CHECK_THROWS_AS(fit_mode(pr.pp, wrong, Hyper{0, 0}), BuildError);
    CHECK_THROWS_AS(fit_mode(pr.pp, pr.model, Hyper{0, 0}, -1.0), BuildError);
}

TEST_CASE("flat likelihood reduces the grid posterior to the prior") {
    TriMesh mesh = testutil::build_lattice(3, 3, 1.0 / 3.0);
    Problem pr = make_problem(mesh, {}, 0.0);
    HyperPrior prior;
    prior.mean_log_tau = -0.3;
    prior.sd_log_tau = 1.0;
    prior.mean_log_kappa2 = 0.4;
    prior.sd_log_kappa2 = 1.0;
    GridSpec spec;
    GridFit gf = explore_grid(pr.pp, pr.model, prior, spec, 1e-6, 2);

    REQUIRE(gf.grid.points.size() >= 9);
    double wsum = 0;
    // Evidence is hyper-free here, so log_post - log prior is constant and
    // the weights match the prior restricted to the grid.
    double c0 = gf.grid.points[0].log_post - prior.logpdf(gf.grid.points[0].hyper);
    double prior_mass = 0;
    for (const auto& gp : gf.grid.points) {
        wsum += gp.weight;
        CHECK(std::abs(gp.log_post - prior.logpdf(gp.hyper) - c0) <= 1e-8);
        prior_mass += std::exp(prior.logpdf(gp.hyper));
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& gp : gf.grid.points) {
        double expect = std::exp(prior.logpdf(gp.hyper)) / prior_mass;
        CHECK(std::abs(gp.weight - expect) <= 1e-6);
    }

    // Lattice alignment: every point sits on the step grid anchored at the
    // rounded prior mean.
    for (const auto& gp : gf.grid.points) {
        double it = gp.hyper.log_tau / spec.step;
        double ik = gp.hyper.log_kappa2 / spec.step;
        CHECK(std::abs(it - std::round(it)) <= 1e-9);
        CHECK(std::abs(ik - std::round(ik)) <= 1e-9);
    }
    CHECK(gf.grid.step == spec.step);
}

TEST_CASE("grid failures surface as HyperOptFailure") {
    TriMesh mesh = testutil::build_lattice(2, 2, 0.5);
    Problem pr = make_problem(mesh, {}, 0.0);

    // Expansion can never drop 6 log units inside the cap: the flat
    // posterior spreads as far as the wide prior allows.
    HyperPrior wide;
    wide.sd_log_tau = 3.0;
    wide.sd_log_kappa2 = 3.0;
    GridSpec tight;
    tight.max_points = 64;
    CHECK_THROWS_AS(explore_grid(pr.pp, pr.model, wide, tight, 1e-6, 2),
                    HyperOptFailure);

    // Start point beyond floating-point range fails immediately.
    HyperPrior insane;
    insane.mean_log_tau = 400.0;
    CHECK_THROWS_AS(explore_grid(pr.pp, pr.model, insane, GridSpec{}, 1e-6, 1),
                    HyperOptFailure);
}

TEST_CASE("simulated field is recovered by the grid fit") {
    DomainSpec dom;
    dom.outer = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
    dom.max_edge_global = 0.16;
    TriMesh mesh = build_planar_mesh(dom);
    SpdeModel model = make_spde(mesh, 2);

    Hyper truth{-2.8543, std::log(16.0)}; // sigma^2 = 1.5, range = 0.71
    double mu = 4.771;
    FieldSample field = sample_field(model, truth, 314);
    PointPattern pattern = simulate_lgcp(mesh, field, mu, 315);
    REQUIRE(pattern.n() > 300);

    Problem pr = make_problem(mesh, pattern.points, 1.0);
    HyperPrior prior;
    prior.mean_log_tau = -2.0;
    prior.sd_log_tau = 1.5;
    prior.mean_log_kappa2 = 2.0;
    prior.sd_log_kappa2 = 1.5;
    GridFit gf = explore_grid(pr.pp, pr.model, prior, GridSpec{}, 1e-6, 0);

    CHECK(gf.grid.points.size() < 200);
    CHECK(std::abs(gf.grid.mode.log_tau - truth.log_tau) <= 1.5);
    CHECK(std::abs(gf.grid.mode.log_kappa2 - truth.log_kappa2) <= 1.5);

    // Truth lands inside the 95% highest-weight cells.
    std::vector<const GridPoint*> sorted;
    for (const auto& gp : gf.grid.points) sorted.push_back(&gp);
    std::sort(sorted.begin(), sorted.end(),
              [](const GridPoint* a, const GridPoint* b) { return a->weight > b->weight; });
    double acc = 0;
    bool covered = false;
    for (const auto* gp : sorted) {
        if (std::abs(gp->hyper.log_tau - truth.log_tau) <= 0.25 + 1e-12 &&
            std::abs(gp->hyper.log_kappa2 - truth.log_kappa2) <= 0.25 + 1e-12)
            covered = true;
        acc += gp->weight;
        if (acc >= 0.95) break;
    }
    CHECK(covered);

    PosteriorResult post = marginals(gf.grid, gf.approxs, pr.X);
    REQUIRE(post.field_mean.size() == static_cast<Eigen::Index>(mesh.n_vertices()));
    double num = 0, da = 0, db = 0;
    Eigen::VectorXd zc = field.z.array() - field.z.mean();
    Eigen::VectorXd fc = post.field_mean.array() - post.field_mean.mean();
    num = zc.dot(fc);
    da = zc.norm();
    db = fc.norm();
    CHECK(num / (da * db) > 0.5);

    REQUIRE(post.fixed_effects.size() == 1);
    CHECK(std::abs(post.fixed_effects[0].mean - mu) <=
          3.0 * post.fixed_effects[0].sd + 0.5);

    // Predictor = field + intercept under the all-ones design.
    double beta = post.fixed_effects[0].mean;
    for (Eigen::Index i = 0; i < post.field_mean.size(); ++i) {
        CHECK(post.predictor_mean[i] ==
              doctest::Approx(post.field_mean[i] + beta).epsilon(1e-9));
        CHECK(post.predictor_sd[i] >= 0.0);
    }

    // Hyper marginals integrate to one on the step lattice.
    for (const DensityCurve* curve : {&post.marg_log_tau, &post.marg_log_kappa2}) {
        double mass = 0;
        for (const auto& [v, d] : *curve) mass += d * gf.grid.step;
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    }

    // Threads only change the schedule, not any result.
    GridFit gf3 = explore_grid(pr.pp, pr.model, prior, GridSpec{}, 1e-6, 3);
    REQUIRE(gf3.grid.points.size() == gf.grid.points.size());
    for (std::size_t g = 0; g < gf.grid.points.size(); ++g) {
        CHECK(gf3.grid.points[g].hyper.log_tau == gf.grid.points[g].hyper.log_tau);
        CHECK(gf3.grid.points[g].hyper.log_kappa2 == gf.grid.points[g].hyper.log_kappa2);
        CHECK(gf3.grid.points[g].log_post == gf.grid.points[g].log_post);
        CHECK(gf3.grid.points[g].weight == gf.grid.points[g].weight);
    }
}

TEST_CASE("single-component marginals reproduce the Gaussian approximation") {
    Eigen::Index n = 6;
    HyperGrid grid;
    grid.step = 0.5;
    grid.mode = {0.0, 0.0};
    grid.points.push_back({{0.0, 0.0}, -1.0, 1.0});

    GaussianApprox ga;
    ga.mode = Eigen::VectorXd::LinSpaced(n + 1, -1.0, 1.0);
    ga.marginal_sd = Eigen::VectorXd::LinSpaced(n + 1, 0.5, 1.1);
    ga.fixed_cov_cols = Eigen::MatrixXd::Zero(n + 1, 1);
    double s_beta = ga.marginal_sd[n];
    ga.fixed_cov_cols(n, 0) = s_beta * s_beta;

    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
    PosteriorResult post = marginals(grid, {ga}, X);

    for (Eigen::Index i = 0; i < n; ++i) {
        CHECK(post.field_mean[i] == doctest::Approx(ga.mode[i]).epsilon(1e-14));
        CHECK(post.field_sd[i] == doctest::Approx(ga.marginal_sd[i]).epsilon(1e-12));
        // Independent blocks: predictor variance adds the intercept's.
        double want = std::sqrt(ga.marginal_sd[i] * ga.marginal_sd[i] + s_beta * s_beta);
        CHECK(post.predictor_sd[i] == doctest::Approx(want).epsilon(1e-12));
        CHECK(post.predictor_mean[i] ==
              doctest::Approx(ga.mode[i] + ga.mode[n]).epsilon(1e-12));
    }

    REQUIRE(post.fixed_effects.size() == 1);
    const FixedEffectSummary& fe = post.fixed_effects[0];
    CHECK(fe.mean == doctest::Approx(ga.mode[n]).epsilon(1e-12));
    CHECK(fe.sd == doctest::Approx(s_beta).epsilon(1e-12));
    CHECK(fe.q50 == doctest::Approx(fe.mean).epsilon(1e-9));
    CHECK(fe.q975 == doctest::Approx(fe.mean + 1.959963984540054 * fe.sd).epsilon(1e-7));
    CHECK(fe.q025 == doctest::Approx(fe.mean - 1.959963984540054 * fe.sd).epsilon(1e-7));

    double mass = 0;
    for (std::size_t k = 1; k < fe.density.size(); ++k) {
        double dx = fe.density[k].first - fe.density[k - 1].first;
        mass += 0.5 * dx * (fe.density[k].second + fe.density[k - 1].second);
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("two symmetric components mix to the combined spread") {
    Eigen::Index n = 4;
    double m = 0.8, s = 0.3;
    HyperGrid grid;
    grid.step = 0.5;
    grid.points.push_back({{0.0, 0.0}, -1.0, 0.5});
    grid.points.push_back({{0.5, 0.0}, -1.0, 0.5});
    grid.mode = grid.points[0].hyper;

    std::vector<GaussianApprox> gas(2);
    for (int g = 0; g < 2; ++g) {
        gas[g].mode = Eigen::VectorXd::Constant(n, g == 0 ? m : -m);
        gas[g].marginal_sd = Eigen::VectorXd::Constant(n, s);
        gas[g].fixed_cov_cols = Eigen::MatrixXd::Zero(n, 0);
    }
    Eigen::MatrixXd X(n, 0);
    PosteriorResult post = marginals(grid, gas, X);
    for (Eigen::Index i = 0; i < n; ++i) {
        CHECK(post.field_mean[i] == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(post.field_sd[i] ==
              doctest::Approx(std::sqrt(s * s + m * m)).epsilon(1e-12));
        CHECK(post.predictor_mean[i] == post.field_mean[i]);
        CHECK(post.predictor_sd[i] == post.field_sd[i]);
    }
    CHECK(post.fixed_effects.empty());
}

TEST_CASE("exceedance probabilities follow the normal tail") {
    Eigen::Index n = 3;
    HyperGrid grid;
    grid.step = 0.5;
    grid.points.push_back({{0.0, 0.0}, -1.0, 1.0});
    grid.mode = grid.points[0].hyper;
    GaussianApprox ga;
    ga.mode = Eigen::VectorXd::Constant(n, 6.0);
    ga.marginal_sd = Eigen::VectorXd::Constant(n, 0.5);
    ga.fixed_cov_cols = Eigen::MatrixXd::Zero(n, 0);
    PosteriorResult post = marginals(grid, {ga}, Eigen::MatrixXd(n, 0));

    Eigen::VectorXd p = exceedance_map(post, 5.5);
    for (Eigen::Index i = 0; i < n; ++i)
        CHECK(p[i] == doctest::Approx(0.8413447460685429).epsilon(1e-12));

    Eigen::VectorXd all = exceedance_map(post, -1e9);
    Eigen::VectorXd none = exceedance_map(post, 1e9);
    Eigen::VectorXd half = exceedance_map(post, 6.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        CHECK(all[i] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(none[i] == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(half[i] == doctest::Approx(0.5).epsilon(1e-12));
    }

    // Monotone in the threshold.
    Eigen::VectorXd prev = exceedance_map(post, -5.0);
    for (double t = -4.0; t <= 10.0; t += 0.5) {
        Eigen::VectorXd cur = exceedance_map(post, t);
        for (Eigen::Index i = 0; i < n; ++i) {
            CHECK(cur[i] <= prev[i] + 1e-15);
            CHECK(cur[i] >= 0.0);
            CHECK(cur[i] <= 1.0);
        }
        prev = cur;
    }

    // Degenerate component: indicator of mean > threshold.
    GaussianApprox point = ga;
    point.marginal_sd.setZero();
    PosteriorResult ppost = marginals(grid, {point}, Eigen::MatrixXd(n, 0));
    CHECK(exceedance_map(ppost, 5.9)[0] == 1.0);
    CHECK(exceedance_map(ppost, 6.1)[0] == 0.0);
}

TEST_CASE("marginals validate their inputs") {
    HyperGrid grid;
    grid.step = 0.5;
    grid.points.push_back({{0.0, 0.0}, -1.0, 1.0});
    grid.mode = grid.points[0].hyper;
    GaussianApprox ga;
    ga.mode = Eigen::VectorXd::Zero(4);
    ga.marginal_sd = Eigen::VectorXd::Ones(4);
    ga.fixed_cov_cols = Eigen::MatrixXd::Zero(4, 0);

    CHECK_THROWS_AS(marginals(grid, {}, Eigen::MatrixXd(4, 0)), BuildError);
    CHECK_THROWS_AS(marginals(grid, {ga}, Eigen::MatrixXd(3, 0)), BuildError);
    std::vector<GaussianApprox> two = {ga, ga};
    CHECK_THROWS_AS(marginals(grid, two, Eigen::MatrixXd(4, 0)), BuildError);
}
