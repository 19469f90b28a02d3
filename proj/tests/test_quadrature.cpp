#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "coxmesh/errors.hpp"
#include "coxmesh/fem.hpp"
#include "coxmesh/quadrature.hpp"
#include "support.hpp"

using namespace coxmesh;

namespace {

double integrate(const IntegrationScheme& s, double (*f)(double, double)) {
    double acc = 0;
    for (std::size_t i = 0; i < s.nodes.size(); ++i)
        acc += s.weights[i] * f(s.nodes[i][0], s.nodes[i][1]);
    return acc;
}

double exp_xy(double x, double y) { return std::exp(x + y); }

} // namespace

TEST_CASE("midpoint scheme reuses the lumped mass weights bit for bit") {
    DomainSpec spec;
    spec.outer = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    spec.max_edge_global = 0.15;
    TriMesh mesh = build_planar_mesh(spec);

    IntegrationScheme s = midpoint_scheme(mesh);
    std::vector<double> C = assemble_mass_lumped(mesh);
    REQUIRE(s.weights.size() == C.size());
    for (std::size_t i = 0; i < C.size(); ++i) CHECK(s.weights[i] == C[i]);

    REQUIRE(s.nodes.size() == mesh.n_vertices());
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        CHECK(s.nodes[i] == mesh.vertices[i]);
        REQUIRE(s.node_basis.entries[i].size() == 1);
        CHECK(s.node_basis.entries[i][0].first == static_cast<int>(i));
        CHECK(s.node_basis.entries[i][0].second == 1.0);
    }

    double total = 0;
    for (double w : s.weights) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vertex rule is second order for a smooth integrand") {
    // Uniform lattices halve cleanly, so the error ratio sits at the
    // asymptotic 4.
    double exact = (std::exp(1.0) - 1.0) * (std::exp(1.0) - 1.0);
    auto err = [&](int n) {
        TriMesh mesh = testutil::build_lattice(n, n, 1.0 / n);
        return std::abs(integrate(midpoint_scheme(mesh), exp_xy) - exact);
    };
    double ratio = err(8) / err(16);
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);

    auto gerr = [&](int n) {
        TriMesh mesh = testutil::build_lattice(n, n, 1.0 / n);
        return std::abs(integrate(triangle_gauss_scheme(mesh, 1), exp_xy) - exact);
    };
    double gratio = gerr(8) / gerr(16);
    CHECK(gratio >= 3.5);
    CHECK(gratio <= 4.5);
}

TEST_CASE("gauss rules hit their advertised degree on one triangle") {
    TriMesh single;
    single.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    single.triangles = {{0, 1, 2}};
    single.finalize();

    IntegrationScheme g1 = triangle_gauss_scheme(single, 1);
    REQUIRE(g1.nodes.size() == 1);
    CHECK(g1.weights[0] == doctest::Approx(0.5).epsilon(1e-15));
    // Exact for linears: integral of x over the unit right triangle.
    CHECK(integrate(g1, [](double x, double) { return x; }) ==
          doctest::Approx(1.0 / 6.0).epsilon(1e-14));

    IntegrationScheme g2 = triangle_gauss_scheme(single, 2);
    REQUIRE(g2.nodes.size() == 3);
    // Exact for quadratics: x*y integrates to 1/24, x^2 to 1/12.
    CHECK(integrate(g2, [](double x, double y) { return x * y; }) ==
          doctest::Approx(1.0 / 24.0).epsilon(1e-14));
    CHECK(integrate(g2, [](double x, double) { return x * x; }) ==
          doctest::Approx(1.0 / 12.0).epsilon(1e-14));
    CHECK(integrate(g2, [](double, double) { return 1.0; }) ==
          doctest::Approx(0.5).epsilon(1e-14));

    CHECK_THROWS_AS(triangle_gauss_scheme(single, 3), UnsupportedDegree);
    CHECK_THROWS_AS(triangle_gauss_scheme(single, 0), UnsupportedDegree);
}

TEST_CASE("gauss nodes come out triangle major with unit partition rows") {
    TriMesh mesh = testutil::build_lattice(2, 2, 0.5);
    IntegrationScheme g2 = triangle_gauss_scheme(mesh, 2);
    REQUIRE(g2.nodes.size() == 3 * mesh.n_triangles());
    double total = 0;
    for (std::size_t r = 0; r < g2.nodes.size(); ++r) {
        CHECK(g2.node_basis.triangle[r] == static_cast<int>(r / 3));
        double s = 0;
        for (const auto& [vid, w] : g2.node_basis.entries[r]) s += w;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
        total += g2.weights[r];
    }
    CHECK(total == doctest::Approx(mesh.total_area()).epsilon(1e-12));
}

TEST_CASE("constant and per-node effort scale the weights exactly") {
    TriMesh mesh = testutil::build_lattice(3, 3, 1.0 / 3.0);
    IntegrationScheme s = midpoint_scheme(mesh);

    EffortField two;
    two.kind = EffortField::Kind::constant;
    two.constant = 2.0;
    two.scale = 1.5;
    std::vector<double> exp2 = apply_effort(s, two);
    for (std::size_t i = 0; i < s.weights.size(); ++i)
        CHECK(exp2[i] == s.weights[i] * (2.0 * 1.5));

    EffortField zero;
    zero.kind = EffortField::Kind::constant;
    zero.constant = 0.0;
    for (double e : apply_effort(s, zero)) CHECK(e == 0.0);

    EffortField per;
    per.kind = EffortField::Kind::per_node;
    per.node_values.assign(s.nodes.size(), 0.0);
    for (std::size_t i = 0; i < s.nodes.size(); ++i)
        per.node_values[i] = 0.25 * static_cast<double>(i % 4);
    std::vector<double> expp = apply_effort(s, per);
    for (std::size_t i = 0; i < s.weights.size(); ++i)
        CHECK(expp[i] == s.weights[i] * per.node_values[i]);
    CHECK_THROWS_AS(per.at_location({0.1, 0.1}), InvalidEffort);

    EffortField shortvals;
    shortvals.kind = EffortField::Kind::per_node;
    shortvals.node_values.assign(s.nodes.size() - 1, 1.0);
    CHECK_THROWS_AS(apply_effort(s, shortvals), InvalidEffort);

    EffortField negative;
    negative.kind = EffortField::Kind::constant;
    negative.constant = -1.0;
    CHECK_THROWS_AS(apply_effort(s, negative), InvalidEffort);
}

TEST_CASE("zero-effort hole removes close to its exact area") {
    // Survey hole over [-0.5, 0.4] x [-0.1, 0.4] inside [-1, 1]^2. The
    // pointwise indicator only errs in cells straddling the hole edge, so
    // one such cell bounds the total discrepancy.
    Loop hole = {{-0.5, -0.1}, {0.4, -0.1}, {0.4, 0.4}, {-0.5, 0.4}};
    DomainSpec spec;
    spec.outer = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
    spec.max_edge_global = 0.25;
    TriMesh mesh = build_planar_mesh(spec);
    IntegrationScheme s = midpoint_scheme(mesh);

    EffortField effort;
    effort.kind = EffortField::Kind::polygon_zero;
    effort.polygons = {hole};
    std::vector<double> exposures = apply_effort(s, effort);

    double total = 0;
    for (double e : exposures) {
        CHECK(e >= 0.0);
        total += e;
    }

    // Largest dual cell among vertices whose cell straddles the hole edge.
    std::vector<double> dual = dual_cell_areas(mesh);
    double tol = 0;
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        int inside = 0;
        for (int k = 0; k < 3; ++k)
            if (point_in_polygon({mesh.vertices[tri[k]][0], mesh.vertices[tri[k]][1]},
                                 hole))
                ++inside;
        if (inside == 0 || inside == 3) continue;
        for (int k = 0; k < 3; ++k) tol = std::max(tol, dual[tri[k]]);
    }
    REQUIRE(tol > 0);
    CHECK(std::abs(total - 3.55) <= tol);
}

TEST_CASE("polygon effort censors points by location") {
    Loop hole = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    EffortField effort;
    effort.kind = EffortField::Kind::polygon_zero;
    effort.polygons = {hole};
    CHECK(effort.at_location({0.5, 0.5}) == 0.0);
    CHECK(effort.at_location({1.5, 0.5}) == 1.0);
    effort.scale = 0.25;
    CHECK(effort.at_location({1.5, 0.5}) == 0.25);
}
