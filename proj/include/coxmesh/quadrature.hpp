#ifndef COXMESH_QUADRATURE_HPP
#define COXMESH_QUADRATURE_HPP

#include <vector>

#include "coxmesh/geometry.hpp"

namespace coxmesh {

/// Deterministic integration rule over the mesh: nodes, weights (area
/// units), and the basis evaluation matrix at the nodes.
struct IntegrationScheme {
    std::vector<Vec3> nodes; // embedded coordinates
    std::vector<double> weights;
    BasisEval node_basis;
    MeshMode mode = MeshMode::planar;
};

/// Known sampling effort S(s) >= 0. Polygon kind is the indicator that is
/// 0 inside any listed loop and 1 outside; `scale` multiplies every value.
struct EffortField {
    enum class Kind { constant, polygon_zero, per_node };
    Kind kind = Kind::constant;
    double constant = 1.0;
    std::vector<Loop> polygons;         // native coordinates
    std::vector<double> node_values;    // indexed like scheme nodes
    double scale = 1.0;

    /// Effort at an arbitrary native-coordinate location. per_node fields
    /// are only defined at scheme nodes and throw InvalidEffort here.
    double at_location(const Vec2& p) const;

    /// Effort at scheme node i with embedded coordinates `node`.
    double at_node(std::size_t i, const Vec3& node, MeshMode mode) const;
};

/// Vertex midpoint rule: nodes are the mesh vertices, weights the dual
/// cell areas (identical to the lumped mass diagonal).
IntegrationScheme midpoint_scheme(const TriMesh& mesh);

/// Per-triangle Gauss rules: degree 1 (centroid, weight area) or degree 2
/// (edge midpoints, weights area/3). Nodes in triangle-major order.
IntegrationScheme triangle_gauss_scheme(const TriMesh& mesh, int degree);

/// exposures[i] = weights[i] * S(node_i).
std::vector<double> apply_effort(const IntegrationScheme& scheme,
                                 const EffortField& effort);

} // namespace coxmesh

#endif
