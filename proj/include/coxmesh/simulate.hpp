#ifndef COXMESH_SIMULATE_HPP
#define COXMESH_SIMULATE_HPP

#include <cstdint>

#include "coxmesh/inference.hpp"
#include "coxmesh/quadrature.hpp"

namespace coxmesh {

struct FieldSample {
    Eigen::VectorXd z;
    std::uint64_t seed = 0;
    Hyper hyper;
};

/// Point pattern in native coordinates: (x, y) planar, (lon, lat) degrees
/// spherical.
struct PointPattern {
    std::vector<Vec2> points;
    std::size_t n() const { return points.size(); }
};

/// z = L^{-T} eps with Q(hyper) = L L^T and eps from the seeded generator.
FieldSample sample_field(const SpdeModel& model, const Hyper& hyper,
                         std::uint64_t seed);

/// Exact LGCP sampler: per triangle, bound the intensity by its value at
/// the maximizing vertex (the exponent is linear on the triangle), draw
/// Poisson(bound * area) uniform candidates, thin by exp(eta)/bound.
/// Throws TooIntense when the expected total exceeds 1e7.
PointPattern simulate_lgcp(const TriMesh& mesh, const FieldSample& field,
                           double intercept, std::uint64_t seed);

/// Independent thinning: keep each point with probability S(point).
/// Efforts must lie in [0,1]; per-node effort fields are not evaluable at
/// arbitrary locations and are rejected.
PointPattern censor_pattern(const PointPattern& pattern,
                            const EffortField& effort, std::uint64_t seed);

} // namespace coxmesh

#endif
