#ifndef COXMESH_GEOMETRY_HPP
#define COXMESH_GEOMETRY_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace coxmesh {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
using Loop = std::vector<Vec2>;

enum class MeshMode { planar, spherical };

/// Triangle mesh over a planar polygonal domain or an embedded sphere.
/// Immutable once built; all queries are const.
struct TriMesh {
    MeshMode mode = MeshMode::planar;
    double radius = 0.0;                           // spherical only
    std::vector<Vec3> vertices;                    // z = 0 in planar mode
    std::vector<std::array<int, 3>> triangles;     // CCW in planar mode
    std::vector<std::array<int, 2>> boundary_edges;

    std::size_t n_vertices() const { return vertices.size(); }
    std::size_t n_triangles() const { return triangles.size(); }

    /// Flat (embedded) area of triangle t. Spherical triangles get no
    /// geodesic correction, consistent with the flat-element assembly.
    double triangle_area(std::size_t t) const;
    double total_area() const;

    /// Longest edge over all triangles.
    double max_edge() const;

    /// Checks positivity of areas, conformity (edge incidence in {1,2}),
    /// boundary list correctness, and the spherical radius constraint.
    /// Throws InvalidDomain on violation. Also rebuilds boundary_edges
    /// when the list is empty.
    void finalize();
};

struct DomainSpec {
    Loop outer;
    std::vector<Loop> holes;
    double max_edge_global = 0.0;
    struct Region {
        Loop polygon;
        double max_edge;
    };
    std::vector<Region> regions;
};

/// Sparse point-to-vertex evaluation rows: row i holds the barycentric
/// weights of query point i in its containing triangle.
struct BasisEval {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::vector<std::pair<int, double>>> entries;
    std::vector<int> triangle; // containing triangle per row
};

// Polygon helpers (planar, used for domains and effort regions).
double polygon_signed_area(const Loop& loop);
bool polygon_is_simple(const Loop& loop);
bool point_in_polygon(const Vec2& p, const Loop& loop);
bool point_in_loops(const Vec2& p, const std::vector<Loop>& loops);

// Mesh construction.
TriMesh build_planar_mesh(const DomainSpec& spec);
TriMesh build_icosphere_masked(double radius, int subdivisions,
                               const std::vector<Loop>& land_polygons);

/// Points in native coordinates: (x, y) planar, (lon, lat) degrees
/// spherical. Spherical queries locate via gnomonic projection.
BasisEval locate_points(const TriMesh& mesh, const std::vector<Vec2>& points);

/// Per-vertex dual cell areas under the one-third rule: each triangle
/// contributes area/3 to each of its vertices. Matches the lumped mass
/// diagonal bit for bit.
std::vector<double> dual_cell_areas(const TriMesh& mesh);

// Native <-> embedded coordinate conversion for spherical meshes.
Vec3 lonlat_to_xyz(const Vec2& lonlat_deg, double radius);
Vec2 xyz_to_lonlat(const Vec3& p);

} // namespace coxmesh

#endif
