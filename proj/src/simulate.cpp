#include "coxmesh/simulate.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>

#include "coxmesh/errors.hpp"
#include "coxmesh/rng.hpp"

namespace coxmesh {

FieldSample sample_field(const SpdeModel& model, const Hyper& hyper,
                         std::uint64_t seed) {
    SpdeModel m = model;
    m.log_tau = hyper.log_tau;
    m.log_kappa2 = hyper.log_kappa2;
    Eigen::SparseMatrix<double> Q = precision(m).full();

    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(Q);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("precision factorization failed");

    Rng rng(seed);
    Eigen::VectorXd eps(Q.rows());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.next_normal();

    // Q = P^T L L^T P, so z = P^T L^{-T} eps has covariance Q^{-1}.
    Eigen::VectorXd zp = llt.matrixU().solve(eps);
    FieldSample out;
    out.z = llt.permutationPinv() * zp;
    out.seed = seed;
    out.hyper = hyper;
    return out;
}

PointPattern simulate_lgcp(const TriMesh& mesh, const FieldSample& field,
                           double intercept, std::uint64_t seed) {
    if (static_cast<std::size_t>(field.z.size()) != mesh.n_vertices())
        throw BuildError("field sample does not match the mesh");

    // Expected-count guard uses the per-triangle bounds, which dominate
    // the true expectation.
    double bound_total = 0.0;
    std::vector<double> log_bound(mesh.n_triangles());
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        double zmax = std::max({field.z[tri[0]], field.z[tri[1]], field.z[tri[2]]});
        log_bound[t] = intercept + zmax;
        bound_total += std::exp(log_bound[t]) * mesh.triangle_area(t);
    }
    if (!(bound_total <= 1e7))
        throw TooIntense("expected point count exceeds 1e7");

    PointPattern pattern;
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        Rng rng = Rng::substream(seed, t);
        std::uint64_t count = rng.next_poisson(std::exp(log_bound[t]) * mesh.triangle_area(t));
        for (std::uint64_t k = 0; k < count; ++k) {
            // Uniform barycentric draw on the flat triangle.
            double r1 = std::sqrt(rng.next_uniform());
            double r2 = rng.next_uniform();
            double w0 = 1.0 - r1, w1 = r1 * (1.0 - r2), w2 = r1 * r2;
            // The exponent is linear on the triangle, so exp(eta) / bound
            // is a valid acceptance probability.
            double eta = intercept + w0 * field.z[tri[0]] + w1 * field.z[tri[1]] +
                         w2 * field.z[tri[2]];
            if (rng.next_uniform() >= std::exp(eta - log_bound[t])) continue;
            Vec3 p{w0 * a[0] + w1 * b[0] + w2 * c[0],
                   w0 * a[1] + w1 * b[1] + w2 * c[1],
                   w0 * a[2] + w1 * b[2] + w2 * c[2]};
            if (mesh.mode == MeshMode::planar)
                pattern.points.push_back({p[0], p[1]});
            else
                pattern.points.push_back(xyz_to_lonlat(p));
        }
    }
    return pattern;
}

PointPattern censor_pattern(const PointPattern& pattern, const EffortField& effort,
                            std::uint64_t seed) {
    if (effort.kind == EffortField::Kind::per_node)
        throw InvalidEffort("per-node effort cannot censor arbitrary locations");
    Rng rng(seed);
    PointPattern kept;
    for (const auto& p : pattern.points) {
        double s = effort.at_location(p);
        if (s < 0 || s > 1)
            throw InvalidEffort("censoring effort must lie in [0, 1]");
        if (rng.next_uniform() < s) kept.points.push_back(p);
    }
    return kept;
}

} // namespace coxmesh
