#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "coxmesh/errors.hpp"
#include "coxmesh/selected_inverse.hpp"
#include "coxmesh/simulate.hpp"
#include "support.hpp"

using namespace coxmesh;

namespace {

TriMesh small_square(double max_edge) {
    DomainSpec spec;
    spec.outer = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    spec.max_edge_global = max_edge;
    return build_planar_mesh(spec);
}

} // namespace

TEST_CASE("field samples are reproducible and seed sensitive") {
    TriMesh mesh = testutil::build_lattice(4, 4, 0.25);
    SpdeModel model = make_spde(mesh, 2);
    Hyper hyper{-1.0, 1.5};
    FieldSample a = sample_field(model, hyper, 42);
    FieldSample b = sample_field(model, hyper, 42);
    FieldSample c = sample_field(model, hyper, 43);
    REQUIRE(a.z.size() == static_cast<Eigen::Index>(mesh.n_vertices()));
    CHECK(a.z == b.z);
    CHECK(a.z != c.z);
    CHECK(a.seed == 42);
}

TEST_CASE("field moments match the dense covariance") {
    // 25-vertex lattice keeps the dense reference exact and the sampling
    // loop cheap.
    TriMesh mesh = testutil::build_lattice(4, 4, 0.25);
    SpdeModel model = make_spde(mesh, 2);
    Hyper hyper{-2.3, std::log(8.0)};
    model.log_tau = hyper.log_tau;
    model.log_kappa2 = hyper.log_kappa2;
    Eigen::MatrixXd Q = Eigen::MatrixXd(precision(model).full());
    Eigen::MatrixXd cov = Q.inverse();

    const int M = 10000;
    Eigen::Index n = mesh.n_vertices();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(n, n);
    for (int m = 0; m < M; ++m) {
        FieldSample s = sample_field(model, hyper, 1000 + m);
        mean += s.z;
        second += s.z * s.z.transpose();
    }
    mean /= M;
    second /= M;

    for (Eigen::Index i = 0; i < n; ++i)
        CHECK(std::abs(mean[i]) <= 4.0 * std::sqrt(cov(i, i) / M));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            double se =
                std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / M);
            CHECK(std::abs(second(i, j) - cov(i, j)) <= 5.0 * se);
        }
}

TEST_CASE("flat field at log 5 produces five points per unit area") {
    TriMesh mesh = small_square(0.3);
    FieldSample flat;
    flat.z = Eigen::VectorXd::Zero(mesh.n_vertices());

    const int R = 1000;
    double total = 0;
    for (int r = 0; r < R; ++r)
        total += static_cast<double>(simulate_lgcp(mesh, flat, std::log(5.0), 100 + r).n());
    double mc = 4.0 * std::sqrt(5.0 / R);
    CHECK(std::abs(total / R - 5.0) <= mc);
}

TEST_CASE("per-triangle bound dominates the intensity everywhere") {
    TriMesh mesh = small_square(0.25);
    SpdeModel model = make_spde(mesh, 2);
    Hyper hyper{-2.3, std::log(8.0)};
    FieldSample field = sample_field(model, hyper, 7);
    double mu = 1.0;

    std::mt19937 gen(55);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        double bound = mu + std::max({field.z[tri[0]], field.z[tri[1]], field.z[tri[2]]});
        for (int k = 0; k < 100; ++k) {
            double r1 = std::sqrt(u(gen)), r2 = u(gen);
            double w0 = 1 - r1, w1 = r1 * (1 - r2), w2 = r1 * r2;
            double eta =
                mu + w0 * field.z[tri[0]] + w1 * field.z[tri[1]] + w2 * field.z[tri[2]];
            CHECK(eta <= bound + 1e-12);
        }
    }
}

TEST_CASE("mean count over replicates matches the quadrature of the intensity") {
    TriMesh mesh = small_square(0.2);
    SpdeModel model = make_spde(mesh, 2);
    Hyper hyper{-2.3, std::log(8.0)};
    FieldSample field = sample_field(model, hyper, 11);
    double mu = std::log(80.0);

    // Degree-2 quadrature of exp(eta) as the reference expectation.
    IntegrationScheme g2 = triangle_gauss_scheme(mesh, 2);
    double lambda = 0;
    for (std::size_t i = 0; i < g2.nodes.size(); ++i) {
        double eta = mu;
        for (const auto& [vid, w] : g2.node_basis.entries[i]) eta += w * field.z[vid];
        lambda += g2.weights[i] * std::exp(eta);
    }

    const int R = 300;
    double total = 0;
    for (int r = 0; r < R; ++r)
        total += static_cast<double>(simulate_lgcp(mesh, field, mu, 5000 + r).n());
    CHECK(std::abs(total / R - lambda) <= 4.0 * std::sqrt(lambda / R));
}

TEST_CASE("runaway intensities are refused") {
    TriMesh mesh = small_square(0.3);
    FieldSample flat;
    flat.z = Eigen::VectorXd::Zero(mesh.n_vertices());
    CHECK_THROWS_AS(simulate_lgcp(mesh, flat, 30.0, 1), TooIntense);

    FieldSample wrong;
    wrong.z = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(simulate_lgcp(mesh, wrong, 0.0, 1), BuildError);
}

TEST_CASE("patterns are reproducible and land inside the domain") {
    DomainSpec spec;
    spec.outer = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    spec.holes.push_back({{0.4, 0.4}, {0.7, 0.4}, {0.7, 0.7}, {0.4, 0.7}});
    spec.max_edge_global = 0.2;
    TriMesh mesh = build_planar_mesh(spec);
    SpdeModel model = make_spde(mesh, 2);
    FieldSample field = sample_field(model, {-2.3, std::log(8.0)}, 3);

    PointPattern p1 = simulate_lgcp(mesh, field, std::log(300.0), 9);
    PointPattern p2 = simulate_lgcp(mesh, field, std::log(300.0), 9);
    CHECK(p1.points == p2.points);
    CHECK(p1.n() > 50);

    // Every point locates; none falls into the mesh hole.
    CHECK_NOTHROW(locate_points(mesh, p1.points));
    for (const auto& pt : p1.points)
        CHECK_FALSE(point_in_polygon(pt, spec.holes[0]));
}

TEST_CASE("spherical patterns come back in lon/lat and locate") {
    TriMesh ico = build_icosphere_masked(1.0, 2, {});
    SpdeModel model = make_spde(ico, 2);
    FieldSample field = sample_field(model, {-1.5, std::log(4.0)}, 21);
    PointPattern p = simulate_lgcp(ico, field, std::log(20.0), 22);
    CHECK(p.n() > 30);
    for (const auto& pt : p.points) {
        CHECK(pt[0] >= -180.0);
        CHECK(pt[0] <= 180.0);
        CHECK(pt[1] >= -90.0);
        CHECK(pt[1] <= 90.0);
    }
    CHECK_NOTHROW(locate_points(ico, p.points));
}

TEST_CASE("censoring thins by the effort field") {
    TriMesh mesh = small_square(0.25);
    FieldSample flat;
    flat.z = Eigen::VectorXd::Zero(mesh.n_vertices());
    PointPattern pattern = simulate_lgcp(mesh, flat, std::log(2000.0), 31);
    REQUIRE(pattern.n() > 1000);

    EffortField keep_all;
    keep_all.kind = EffortField::Kind::constant;
    keep_all.constant = 1.0;
    PointPattern same = censor_pattern(pattern, keep_all, 5);
    CHECK(same.points == pattern.points);

    Loop hole = {{0.2, 0.2}, {0.8, 0.2}, {0.8, 0.8}, {0.2, 0.8}};
    EffortField holed;
    holed.kind = EffortField::Kind::polygon_zero;
    holed.polygons = {hole};
    PointPattern outside = censor_pattern(pattern, holed, 5);
    CHECK(outside.n() < pattern.n());
    for (const auto& pt : outside.points) CHECK_FALSE(point_in_polygon(pt, hole));

    EffortField half;
    half.kind = EffortField::Kind::constant;
    half.constant = 0.5;
    PointPattern kept = censor_pattern(pattern, half, 5);
    double frac = static_cast<double>(kept.n()) / static_cast<double>(pattern.n());
    CHECK(std::abs(frac - 0.5) <=
          4.0 * std::sqrt(0.25 / static_cast<double>(pattern.n())));
    // Same seed, same survivors.
    PointPattern again = censor_pattern(pattern, half, 5);
    CHECK(again.points == kept.points);

    EffortField over;
    over.kind = EffortField::Kind::constant;
    over.constant = 1.5;
    CHECK_THROWS_AS(censor_pattern(pattern, over, 5), InvalidEffort);

    EffortField per;
    per.kind = EffortField::Kind::per_node;
    per.node_values.assign(mesh.n_vertices(), 0.5);
    CHECK_THROWS_AS(censor_pattern(pattern, per, 5), InvalidEffort);
}
