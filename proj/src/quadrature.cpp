#include "coxmesh/quadrature.hpp"

#include <cmath>

#include "coxmesh/errors.hpp"
#include "coxmesh/fem.hpp"

namespace coxmesh {

double EffortField::at_location(const Vec2& p) const {
    switch (kind) {
    case Kind::constant:
        return constant * scale;
    case Kind::polygon_zero:
        return (point_in_loops(p, polygons) ? 0.0 : 1.0) * scale;
    case Kind::per_node:
        throw InvalidEffort("per-node effort is only defined at integration nodes");
    }
    return 0.0;
}

double EffortField::at_node(std::size_t i, const Vec3& node, MeshMode mode) const {
    if (kind == Kind::per_node) {
        if (i >= node_values.size())
            throw InvalidEffort("per-node effort shorter than the node list");
        return node_values[i] * scale;
    }
    if (mode == MeshMode::planar) return at_location({node[0], node[1]});
    return at_location(xyz_to_lonlat(node));
}

IntegrationScheme midpoint_scheme(const TriMesh& mesh) {
    IntegrationScheme s;
    s.mode = mesh.mode;
    s.nodes = mesh.vertices;
    s.weights = assemble_mass_lumped(mesh);
    s.node_basis.rows = mesh.n_vertices();
    s.node_basis.cols = mesh.n_vertices();
    s.node_basis.entries.resize(mesh.n_vertices());
    s.node_basis.triangle.assign(mesh.n_vertices(), -1);
    for (std::size_t i = 0; i < mesh.n_vertices(); ++i)
        s.node_basis.entries[i].emplace_back(static_cast<int>(i), 1.0);
    return s;
}

IntegrationScheme triangle_gauss_scheme(const TriMesh& mesh, int degree) {
    if (degree != 1 && degree != 2)
        throw UnsupportedDegree("triangle Gauss rule supports degree 1 or 2");

    // Barycentric nodes and weight fractions, exact to the given total
    // degree on each flat triangle.
    std::vector<std::array<double, 3>> bary;
    double wfrac;
    if (degree == 1) {
        bary = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
        wfrac = 1.0;
    } else {
        bary = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
        wfrac = 1.0 / 3.0;
    }

    IntegrationScheme s;
    s.mode = mesh.mode;
    s.node_basis.cols = mesh.n_vertices();
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        double area = mesh.triangle_area(t);
        for (const auto& b : bary) {
            Vec3 node{0, 0, 0};
            for (int k = 0; k < 3; ++k) {
                const Vec3& v = mesh.vertices[tri[k]];
                node[0] += b[k] * v[0];
                node[1] += b[k] * v[1];
                node[2] += b[k] * v[2];
            }
            s.nodes.push_back(node);
            s.weights.push_back(area * wfrac);
            std::vector<std::pair<int, double>> row;
            for (int k = 0; k < 3; ++k)
                if (b[k] > 0) row.emplace_back(tri[k], b[k]);
            s.node_basis.entries.push_back(std::move(row));
            s.node_basis.triangle.push_back(static_cast<int>(t));
        }
    }
    s.node_basis.rows = s.nodes.size();
    return s;
}

std::vector<double> apply_effort(const IntegrationScheme& scheme,
                                 const EffortField& effort) {
    std::vector<double> exposures(scheme.nodes.size());
    for (std::size_t i = 0; i < scheme.nodes.size(); ++i) {
        double e = effort.at_node(i, scheme.nodes[i], scheme.mode);
        if (e < 0 || !std::isfinite(e))
            throw InvalidEffort("effort value at node " + std::to_string(i) +
                                " is negative or not finite");
        exposures[i] = scheme.weights[i] * e;
    }
    return exposures;
}

} // namespace coxmesh
