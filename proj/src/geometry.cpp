#include "coxmesh/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "coxmesh/errors.hpp"

namespace coxmesh {

namespace {

const double kPi = 3.14159265358979323846;

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

Vec3 sub3(const Vec3& a, const Vec3& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

Vec3 cross3(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0]};
}

double norm3(const Vec3& a) {
    return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

int seg_orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    double v = cross2(a, b, c);
    if (v > 0) return 1;
    if (v < 0) return -1;
    return 0;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a[0], b[0]) <= p[0] && p[0] <= std::max(a[0], b[0]) &&
           std::min(a[1], b[1]) <= p[1] && p[1] <= std::max(a[1], b[1]);
}

// Closed-segment intersection test.
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    int o1 = seg_orient(a, b, c);
    int o2 = seg_orient(a, b, d);
    int o3 = seg_orient(c, d, a);
    int o4 = seg_orient(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

} // namespace

double TriMesh::triangle_area(std::size_t t) const {
    const auto& tri = triangles[t];
    Vec3 u = sub3(vertices[tri[1]], vertices[tri[0]]);
    Vec3 v = sub3(vertices[tri[2]], vertices[tri[0]]);
    return 0.5 * norm3(cross3(u, v));
}

double TriMesh::total_area() const {
    double s = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t) s += triangle_area(t);
    return s;
}

double TriMesh::max_edge() const {
    double m = 0.0;
    for (const auto& tri : triangles) {
        for (int e = 0; e < 3; ++e) {
            double len = norm3(sub3(vertices[tri[e]], vertices[tri[(e + 1) % 3]]));
            m = std::max(m, len);
        }
    }
    return m;
}

void TriMesh::finalize() {
    const std::size_t nv = vertices.size();
    if (nv < 3 || triangles.empty())
        throw InvalidDomain("mesh has too few vertices or no triangles");

    if (mode == MeshMode::spherical) {
        if (radius <= 0) throw InvalidDomain("spherical mesh needs radius > 0");
        for (const auto& v : vertices) {
            if (std::abs(norm3(v) - radius) > 1e-10 * radius)
                throw InvalidDomain("spherical vertex off the sphere surface");
        }
    }

    for (const auto& tri : triangles) {
        for (int k = 0; k < 3; ++k) {
            if (tri[k] < 0 || static_cast<std::size_t>(tri[k]) >= nv)
                throw InvalidDomain("triangle vertex index out of range");
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw InvalidDomain("triangle with repeated vertex");
    }

    for (std::size_t t = 0; t < triangles.size(); ++t) {
        if (mode == MeshMode::planar) {
            const auto& tri = triangles[t];
            Vec2 a{vertices[tri[0]][0], vertices[tri[0]][1]};
            Vec2 b{vertices[tri[1]][0], vertices[tri[1]][1]};
            Vec2 c{vertices[tri[2]][0], vertices[tri[2]][1]};
            if (cross2(a, b, c) <= 0)
                throw InvalidDomain("planar triangle not counter-clockwise");
        } else if (triangle_area(t) <= 0) {
            throw InvalidDomain("degenerate spherical triangle");
        }
    }

    // Edge incidence must be 1 (boundary) or 2 (interior).
    std::map<std::pair<int, int>, int> incidence;
    for (const auto& tri : triangles) {
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            ++incidence[{std::min(a, b), std::max(a, b)}];
        }
    }
    std::vector<std::array<int, 2>> boundary;
    for (const auto& [edge, count] : incidence) {
        if (count > 2) throw InvalidDomain("non-conforming edge shared by >2 triangles");
        if (count == 1) boundary.push_back({edge.first, edge.second});
    }

    if (boundary_edges.empty()) {
        boundary_edges = std::move(boundary);
    } else {
        auto norm_sort = [](std::vector<std::array<int, 2>> v) {
            for (auto& e : v)
                if (e[0] > e[1]) std::swap(e[0], e[1]);
            std::sort(v.begin(), v.end());
            return v;
        };
        if (norm_sort(boundary_edges) != norm_sort(boundary))
            throw InvalidDomain("boundary edge list does not match triangle incidence");
    }
}

double polygon_signed_area(const Loop& loop) {
    double s = 0.0;
    for (std::size_t i = 0, n = loop.size(); i < n; ++i) {
        const Vec2& a = loop[i];
        const Vec2& b = loop[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    return 0.5 * s;
}

bool polygon_is_simple(const Loop& loop) {
    const std::size_t n = loop.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i)
        if (loop[i] == loop[(i + 1) % n]) return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Vec2& a = loop[i];
            const Vec2& b = loop[(i + 1) % n];
            const Vec2& c = loop[j];
            const Vec2& d = loop[(j + 1) % n];
            bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) {
                // Segments share one endpoint; reject a zero interior angle
                // (the far endpoints fold back along the same ray).
                Vec2 s = (j == i + 1) ? b : a;
                Vec2 u = (j == i + 1) ? a : b;
                Vec2 v = (j == i + 1) ? d : c;
                double dot = (u[0] - s[0]) * (v[0] - s[0]) + (u[1] - s[1]) * (v[1] - s[1]);
                if (seg_orient(s, u, v) == 0 && dot > 0) return false;
                continue;
            }
            if (segments_intersect(a, b, c, d)) return false;
        }
    }
    return true;
}

bool point_in_polygon(const Vec2& p, const Loop& loop) {
    // Crossing count; boundary points count as inside for our uses.
    bool inside = false;
    const std::size_t n = loop.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = loop[i];
        const Vec2& b = loop[j];
        if (seg_orient(a, b, p) == 0 && on_segment(a, b, p)) return true;
        if ((a[1] > p[1]) != (b[1] > p[1])) {
            double xc = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if (p[0] < xc) inside = !inside;
        }
    }
    return inside;
}

bool point_in_loops(const Vec2& p, const std::vector<Loop>& loops) {
    for (const auto& loop : loops)
        if (point_in_polygon(p, loop)) return true;
    return false;
}

Vec3 lonlat_to_xyz(const Vec2& lonlat_deg, double radius) {
    double lon = lonlat_deg[0] * kPi / 180.0;
    double lat = lonlat_deg[1] * kPi / 180.0;
    return {radius * std::cos(lat) * std::cos(lon),
            radius * std::cos(lat) * std::sin(lon),
            radius * std::sin(lat)};
}

Vec2 xyz_to_lonlat(const Vec3& p) {
    double r = norm3(p);
    double lat = std::asin(std::clamp(p[2] / r, -1.0, 1.0));
    double lon = std::atan2(p[1], p[0]);
    return {lon * 180.0 / kPi, lat * 180.0 / kPi};
}

TriMesh build_icosphere_masked(double radius, int subdivisions,
                               const std::vector<Loop>& land_polygons) {
    if (radius <= 0) throw InvalidDomain("icosphere radius must be positive");
    if (subdivisions < 0) throw InvalidDomain("subdivisions must be >= 0");

    // Icosahedron from golden-ratio rectangles, faces oriented outward.
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1},
    };
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };

    auto project = [radius](Vec3 v) {
        double s = radius / norm3(v);
        return Vec3{v[0] * s, v[1] * s, v[2] * s};
    };
    for (auto& v : verts) v = project(v);

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m{(verts[a][0] + verts[b][0]) / 2, (verts[a][1] + verts[b][1]) / 2,
                   (verts[a][2] + verts[b][2]) / 2};
            verts.push_back(project(m));
            int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    // Drop triangles whose centroid falls on land.
    if (!land_polygons.empty()) {
        std::vector<std::array<int, 3>> kept;
        for (const auto& f : faces) {
            Vec3 c{(verts[f[0]][0] + verts[f[1]][0] + verts[f[2]][0]) / 3,
                   (verts[f[0]][1] + verts[f[1]][1] + verts[f[2]][1]) / 3,
                   (verts[f[0]][2] + verts[f[1]][2] + verts[f[2]][2]) / 3};
            if (!point_in_loops(xyz_to_lonlat(c), land_polygons)) kept.push_back(f);
        }
        faces = std::move(kept);
    }
    if (faces.empty()) throw InvalidDomain("mask removed every triangle");

    // Compact away unreferenced vertices.
    std::vector<int> remap(verts.size(), -1);
    TriMesh mesh;
    mesh.mode = MeshMode::spherical;
    mesh.radius = radius;
    for (const auto& f : faces) {
        std::array<int, 3> tri;
        for (int k = 0; k < 3; ++k) {
            if (remap[f[k]] < 0) {
                remap[f[k]] = static_cast<int>(mesh.vertices.size());
                mesh.vertices.push_back(verts[f[k]]);
            }
            tri[k] = remap[f[k]];
        }
        mesh.triangles.push_back(tri);
    }
    mesh.finalize();
    return mesh;
}

std::vector<double> dual_cell_areas(const TriMesh& mesh) {
    std::vector<double> areas(mesh.n_vertices(), 0.0);
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        double third = mesh.triangle_area(t) / 3.0;
        for (int k = 0; k < 3; ++k) areas[mesh.triangles[t][k]] += third;
    }
    return areas;
}

namespace {

// Uniform bucket index over triangle bounding boxes for planar location.
struct BucketGrid {
    double x0, y0, cell;
    int nx, ny;
    std::vector<std::vector<int>> buckets;

    BucketGrid(const TriMesh& mesh, double pad) {
        double xmin = std::numeric_limits<double>::max(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& v : mesh.vertices) {
            xmin = std::min(xmin, v[0]);
            xmax = std::max(xmax, v[0]);
            ymin = std::min(ymin, v[1]);
            ymax = std::max(ymax, v[1]);
        }
        int target = static_cast<int>(std::sqrt(static_cast<double>(mesh.n_triangles()))) + 1;
        nx = ny = std::max(1, target);
        x0 = xmin;
        y0 = ymin;
        cell = std::max((xmax - xmin) / nx, (ymax - ymin) / ny);
        if (cell <= 0) cell = 1.0;
        buckets.resize(static_cast<std::size_t>(nx) * ny);
        for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
            double bx0 = std::numeric_limits<double>::max(), bx1 = -bx0;
            double by0 = bx0, by1 = -bx0;
            for (int k = 0; k < 3; ++k) {
                const auto& v = mesh.vertices[mesh.triangles[t][k]];
                bx0 = std::min(bx0, v[0]);
                bx1 = std::max(bx1, v[0]);
                by0 = std::min(by0, v[1]);
                by1 = std::max(by1, v[1]);
            }
            for (int ix = cell_x(bx0 - pad); ix <= cell_x(bx1 + pad); ++ix)
                for (int iy = cell_y(by0 - pad); iy <= cell_y(by1 + pad); ++iy)
                    bucket_at(ix, iy).push_back(static_cast<int>(t));
        }
    }

    int cell_x(double v) const {
        return std::clamp(static_cast<int>(std::floor((v - x0) / cell)), 0, nx - 1);
    }
    int cell_y(double v) const {
        return std::clamp(static_cast<int>(std::floor((v - y0) / cell)), 0, ny - 1);
    }

    std::vector<int>& bucket_at(int ix, int iy) {
        return buckets[static_cast<std::size_t>(iy) * nx + ix];
    }

    // Bucket contents are in ascending triangle order by construction.
    const std::vector<int>& query(const Vec2& p) const {
        return buckets[static_cast<std::size_t>(cell_y(p[1])) * nx + cell_x(p[0])];
    }
};

// Barycentric coordinates of p in planar triangle (a, b, c).
bool barycentric_planar(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p,
                        double tol, std::array<double, 3>& w) {
    double det = cross2(a, b, c);
    if (det <= 0) return false;
    w[0] = cross2(p, b, c) / det;
    w[1] = cross2(a, p, c) / det;
    w[2] = cross2(a, b, p) / det;
    return w[0] >= -tol && w[1] >= -tol && w[2] >= -tol;
}

// Gnomonic barycentric: scale factors lambda with p ~ lambda0 a + lambda1 b
// + lambda2 c, lambda >= 0 iff the ray from the origin through p pierces
// the flat triangle.
bool barycentric_sphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p,
                        double tol, std::array<double, 3>& w) {
    double m[3][3] = {{a[0], b[0], c[0]}, {a[1], b[1], c[1]}, {a[2], b[2], c[2]}};
    double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                 m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                 m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if (std::abs(det) < 1e-300) return false;
    double inv[3][3] = {
        {(m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det,
         (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
         (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det},
        {(m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det,
         (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
         (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det},
        {(m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det,
         (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
         (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det},
    };
    double lam[3];
    for (int i = 0; i < 3; ++i)
        lam[i] = inv[i][0] * p[0] + inv[i][1] * p[1] + inv[i][2] * p[2];
    double s = lam[0] + lam[1] + lam[2];
    if (s <= 0) return false; // antipodal side
    for (int i = 0; i < 3; ++i) w[i] = lam[i] / s;
    return w[0] >= -tol && w[1] >= -tol && w[2] >= -tol;
}

void push_row(BasisEval& eval, std::size_t row, const std::array<int, 3>& tri,
              std::array<double, 3> w, int tri_index) {
    // Clamp tolerance negatives, renormalize, drop exact zeros.
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
        if (w[k] < 0) w[k] = 0;
        s += w[k];
    }
    auto& row_entries = eval.entries[row];
    for (int k = 0; k < 3; ++k) {
        double v = w[k] / s;
        if (v > 0) row_entries.emplace_back(tri[k], v);
    }
    eval.triangle[row] = tri_index;
}

} // namespace

BasisEval locate_points(const TriMesh& mesh, const std::vector<Vec2>& points) {
    BasisEval eval;
    eval.rows = points.size();
    eval.cols = mesh.n_vertices();
    eval.entries.resize(points.size());
    eval.triangle.assign(points.size(), -1);

    if (mesh.mode == MeshMode::planar) {
        // Tolerance is relative to the domain bounding-box diagonal.
        double xmin = std::numeric_limits<double>::max(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& v : mesh.vertices) {
            xmin = std::min(xmin, v[0]);
            xmax = std::max(xmax, v[0]);
            ymin = std::min(ymin, v[1]);
            ymax = std::max(ymax, v[1]);
        }
        double scale = std::hypot(xmax - xmin, ymax - ymin);
        double tol = 1e-9 * (scale > 0 ? scale : 1.0);

        BucketGrid grid(mesh, tol);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& candidates = grid.query(points[i]);
            bool found = false;
            for (int t : candidates) {
                const auto& tri = mesh.triangles[t];
                Vec2 a{mesh.vertices[tri[0]][0], mesh.vertices[tri[0]][1]};
                Vec2 b{mesh.vertices[tri[1]][0], mesh.vertices[tri[1]][1]};
                Vec2 c{mesh.vertices[tri[2]][0], mesh.vertices[tri[2]][1]};
                std::array<double, 3> w;
                if (barycentric_planar(a, b, c, points[i], tol, w)) {
                    push_row(eval, i, tri, w, t);
                    found = true;
                    break;
                }
            }
            if (!found)
                throw PointOutsideDomain("point " + std::to_string(i) + " outside mesh", i);
        }
    } else {
        double tol = 1e-9;
        for (std::size_t i = 0; i < points.size(); ++i) {
            Vec3 p = lonlat_to_xyz(points[i], mesh.radius);
            bool found = false;
            for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
                const auto& tri = mesh.triangles[t];
                std::array<double, 3> w;
                if (barycentric_sphere(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                       mesh.vertices[tri[2]], p, tol, w)) {
                    push_row(eval, i, tri, w, static_cast<int>(t));
                    found = true;
                    break;
                }
            }
            if (!found)
                throw PointOutsideDomain("point " + std::to_string(i) + " outside mesh", i);
        }
    }
    return eval;
}

} // namespace coxmesh
