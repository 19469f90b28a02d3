#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "coxmesh/errors.hpp"
#include "coxmesh/geometry.hpp"

// Planar meshing: Bowyer-Watson Delaunay insertion, conforming constraint
// recovery by midpoint splitting, then Ruppert-style refinement driven by
// a 20 degree angle bound and per-region edge-length limits.

namespace coxmesh {

namespace {

// 1 / (2 sin 20deg): circumradius-to-shortest-edge bound for the angle test.
const double kRadiusEdgeBound = 1.4619022000815427;
const int kMaxInsertions = 500000;
const int kMaxQueueRounds = 4000000;

long double orient2dl(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (static_cast<long double>(b[0]) - a[0]) * (static_cast<long double>(c[1]) - a[1]) -
           (static_cast<long double>(b[1]) - a[1]) * (static_cast<long double>(c[0]) - a[0]);
}

// > 0 iff p lies strictly inside the circumcircle of CCW triangle (a,b,c).
long double incirclel(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
    long double ax = static_cast<long double>(a[0]) - p[0];
    long double ay = static_cast<long double>(a[1]) - p[1];
    long double bx = static_cast<long double>(b[0]) - p[0];
    long double by = static_cast<long double>(b[1]) - p[1];
    long double cx = static_cast<long double>(c[0]) - p[0];
    long double cy = static_cast<long double>(c[1]) - p[1];
    long double a2 = ax * ax + ay * ay;
    long double b2 = bx * bx + by * by;
    long double c2 = cx * cx + cy * cy;
    return ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx);
}

struct DTri {
    std::array<int, 3> v;
    std::array<int, 3> nbr; // nbr[k] across the edge opposite vertex k
    bool alive = true;
};

using EdgeKey = std::pair<int, int>;

EdgeKey edge_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

struct InsertOutcome {
    bool ok = false;
    EdgeKey blocker{-1, -1}; // constrained edge that stopped the insertion
    std::size_t first_new = 0, last_new = 0;
};

class Mesher {
public:
    explicit Mesher(const DomainSpec& spec) : spec_(spec) {}

    TriMesh run();

private:
    const DomainSpec& spec_;
    Loop outer_ccw_;
    std::vector<Loop> holes_ccw_;
    std::vector<Vec2> pts_;
    std::vector<DTri> tris_;
    std::vector<int> vert_tri_; // an alive triangle touching each vertex
    std::set<EdgeKey> constrained_;
    std::map<std::pair<double, double>, int> point_index_;
    double scale_ = 1.0;
    int hint_ = 0;
    int insertions_ = 0;
    std::deque<EdgeKey> segq_;
    std::deque<int> triq_;
    std::vector<char> skip_;

    void validate_inputs();
    int add_point(const Vec2& p);
    double segment_limit(const Vec2& mid, const void* own_region) const;
    double triangle_limit(const Vec2& centroid) const;
    bool inside_domain(const Vec2& p) const;

    void build_super_triangle();
    int locate(const Vec2& p) const;
    bool try_cavity(int pi, int t0, bool full_bfs, InsertOutcome& out);
    InsertOutcome insert_vertex(int pi);
    InsertOutcome insert_resolving(int pi, int depth);
    void queue_new_triangles(const InsertOutcome& out);

    std::vector<int> incident_triangles(int v) const;
    bool edge_exists(int a, int b) const;
    void ensure_segment(int a, int b, int depth);
    bool segment_encroached(int a, int b) const;
    void split_constrained(int a, int b, int depth);

    Vec2 centroid(const DTri& t) const;
    bool is_real(const DTri& t) const;
    bool bad_triangle(int ti) const;
    void refine();
    TriMesh extract() const;
};

void Mesher::validate_inputs() {
    if (spec_.outer.size() < 3) throw InvalidDomain("outer polygon needs >= 3 vertices");
    if (!(spec_.max_edge_global > 0)) throw InvalidDomain("max_edge_global must be positive");
    if (!polygon_is_simple(spec_.outer)) throw InvalidDomain("outer polygon self-intersects");
    for (const auto& h : spec_.holes)
        if (!polygon_is_simple(h)) throw InvalidDomain("hole polygon self-intersects");
    for (const auto& r : spec_.regions) {
        if (!polygon_is_simple(r.polygon)) throw InvalidDomain("region polygon self-intersects");
        if (!(r.max_edge > 0)) throw InvalidDomain("region max_edge must be positive");
    }

    // Distinct loops must not cross (touching at shared vertices is fine).
    std::vector<const Loop*> all{&spec_.outer};
    for (const auto& h : spec_.holes) all.push_back(&h);
    for (const auto& r : spec_.regions) all.push_back(&r.polygon);
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            const Loop& u = *all[i];
            const Loop& w = *all[j];
            for (std::size_t a = 0; a < u.size(); ++a) {
                const Vec2& a0 = u[a];
                const Vec2& a1 = u[(a + 1) % u.size()];
                for (std::size_t b = 0; b < w.size(); ++b) {
                    const Vec2& b0 = w[b];
                    const Vec2& b1 = w[(b + 1) % w.size()];
                    bool share = a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1;
                    if (share) continue;
                    double o1 = static_cast<double>(orient2dl(a0, a1, b0));
                    double o2 = static_cast<double>(orient2dl(a0, a1, b1));
                    double o3 = static_cast<double>(orient2dl(b0, b1, a0));
                    double o4 = static_cast<double>(orient2dl(b0, b1, a1));
                    if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) &&
                        o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0)
                        throw InvalidDomain("polygon loops cross each other");
                }
            }
        }
    }

    auto ccw = [](Loop loop) {
        if (polygon_signed_area(loop) < 0) std::reverse(loop.begin(), loop.end());
        return loop;
    };
    outer_ccw_ = ccw(spec_.outer);
    for (const auto& h : spec_.holes) holes_ccw_.push_back(ccw(h));

    double xmin = std::numeric_limits<double>::max(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& p : spec_.outer) {
        xmin = std::min(xmin, p[0]);
        xmax = std::max(xmax, p[0]);
        ymin = std::min(ymin, p[1]);
        ymax = std::max(ymax, p[1]);
    }
    scale_ = std::hypot(xmax - xmin, ymax - ymin);
    if (!(scale_ > 0)) throw InvalidDomain("outer polygon is degenerate");
}

int Mesher::add_point(const Vec2& p) {
    auto key = std::make_pair(p[0], p[1]);
    auto it = point_index_.find(key);
    if (it != point_index_.end()) return it->second;
    int idx = static_cast<int>(pts_.size());
    pts_.push_back(p);
    vert_tri_.push_back(-1);
    point_index_.emplace(key, idx);
    return idx;
}

double Mesher::segment_limit(const Vec2& mid, const void* own_region) const {
    // Regions override the global limit where they strictly contain the
    // segment; a region's own boundary additionally obeys its own limit so
    // that locally refined interfaces stay fine on both sides.
    double limit = spec_.max_edge_global;
    bool overridden = false;
    double best = std::numeric_limits<double>::max();
    for (const auto& r : spec_.regions) {
        if (&r == own_region) continue;
        if (point_in_polygon(mid, r.polygon)) {
            overridden = true;
            best = std::min(best, r.max_edge);
        }
    }
    if (overridden) limit = best;
    for (const auto& r : spec_.regions)
        if (&r == own_region) limit = std::min(limit, r.max_edge);
    return limit;
}

double Mesher::triangle_limit(const Vec2& c) const {
    double best = std::numeric_limits<double>::max();
    for (const auto& r : spec_.regions)
        if (point_in_polygon(c, r.polygon)) best = std::min(best, r.max_edge);
    return best == std::numeric_limits<double>::max() ? spec_.max_edge_global : best;
}

bool Mesher::inside_domain(const Vec2& p) const {
    return point_in_polygon(p, outer_ccw_) && !point_in_loops(p, holes_ccw_);
}

void Mesher::build_super_triangle() {
    double xmin = std::numeric_limits<double>::max(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& p : pts_) {
        xmin = std::min(xmin, p[0]);
        xmax = std::max(xmax, p[0]);
        ymin = std::min(ymin, p[1]);
        ymax = std::max(ymax, p[1]);
    }
    double cx = (xmin + xmax) / 2, cy = (ymin + ymax) / 2;
    double r = 32.0 * std::max(scale_, 1e-12);
    // Prepend three far corners so indices 0..2 mark super vertices.
    std::vector<Vec2> shifted;
    shifted.reserve(pts_.size() + 3);
    shifted.push_back({cx - 2.0 * r, cy - r});
    shifted.push_back({cx + 2.0 * r, cy - r});
    shifted.push_back({cx, cy + 2.0 * r});
    for (const auto& p : pts_) shifted.push_back(p);
    pts_ = std::move(shifted);
    point_index_.clear();
    for (std::size_t i = 3; i < pts_.size(); ++i)
        point_index_.emplace(std::make_pair(pts_[i][0], pts_[i][1]), static_cast<int>(i));
    vert_tri_.assign(pts_.size(), 0);
    tris_.clear();
    tris_.push_back(DTri{{0, 1, 2}, {-1, -1, -1}, true});
    skip_.assign(1, 0);
    hint_ = 0;
}

int Mesher::locate(const Vec2& p) const {
    int t = hint_;
    if (t < 0 || static_cast<std::size_t>(t) >= tris_.size() || !tris_[t].alive) {
        t = -1;
        for (std::size_t i = 0; i < tris_.size(); ++i)
            if (tris_[i].alive) { t = static_cast<int>(i); break; }
    }
    std::size_t cap = 4 * tris_.size() + 64;
    for (std::size_t step = 0; step < cap && t >= 0; ++step) {
        const DTri& tri = tris_[t];
        int next = -1;
        for (int k = 0; k < 3; ++k) {
            const Vec2& a = pts_[tri.v[(k + 1) % 3]];
            const Vec2& b = pts_[tri.v[(k + 2) % 3]];
            if (orient2dl(a, b, p) < 0) { next = tri.nbr[k]; break; }
        }
        if (next == -1) return t;
        t = next;
    }
    // Walk cycled on degenerate geometry; fall back to a scan.
    for (std::size_t i = 0; i < tris_.size(); ++i) {
        if (!tris_[i].alive) continue;
        const DTri& tri = tris_[i];
        bool inside = true;
        for (int k = 0; k < 3 && inside; ++k) {
            const Vec2& a = pts_[tri.v[(k + 1) % 3]];
            const Vec2& b = pts_[tri.v[(k + 2) % 3]];
            if (orient2dl(a, b, p) < 0) inside = false;
        }
        if (inside) return static_cast<int>(i);
    }
    throw RefinementFailure("point location failed");
}

// Builds and commits the insertion cavity for point pi starting from its
// containing triangle t0. Returns false when the cavity boundary pinches
// (caller retries with a minimal cavity); fills out.blocker when a
// constrained edge stops the insertion.
bool Mesher::try_cavity(int pi, int t0, bool full_bfs, InsertOutcome& out) {
    const Vec2& p = pts_[pi];
    std::set<int> cavity{t0};
    std::vector<int> stack{t0};

    auto grow = [&] {
        while (!stack.empty()) {
            int t = stack.back();
            stack.pop_back();
            const DTri& tri = tris_[t];
            for (int k = 0; k < 3; ++k) {
                int n = tri.nbr[k];
                if (n < 0 || cavity.count(n)) continue;
                if (constrained_.count(edge_key(tri.v[(k + 1) % 3], tri.v[(k + 2) % 3])))
                    continue;
                const DTri& nb = tris_[n];
                if (incirclel(pts_[nb.v[0]], pts_[nb.v[1]], pts_[nb.v[2]], p) > 0) {
                    cavity.insert(n);
                    stack.push_back(n);
                }
            }
        }
    };
    if (full_bfs) grow();

    // Cavity boundary as directed edges with the cavity on the left;
    // expand until p is strictly inside the boundary polygon.
    struct BEdge {
        int a, b, outside;
    };
    std::vector<BEdge> boundary;
    for (bool again = true; again;) {
        again = false;
        boundary.clear();
        for (int t : cavity) {
            const DTri& tri = tris_[t];
            for (int k = 0; k < 3; ++k) {
                int n = tri.nbr[k];
                if (n >= 0 && cavity.count(n)) continue;
                boundary.push_back({tri.v[(k + 1) % 3], tri.v[(k + 2) % 3], n});
            }
        }
        for (const BEdge& e : boundary) {
            if (orient2dl(pts_[e.a], pts_[e.b], p) <= 0) {
                if (e.outside < 0 || constrained_.count(edge_key(e.a, e.b))) {
                    out.ok = false;
                    out.blocker = edge_key(e.a, e.b);
                    return true; // decided: blocked
                }
                cavity.insert(e.outside);
                stack.push_back(e.outside);
                again = true;
                break;
            }
        }
        if (again && full_bfs) grow();
        if (again && !full_bfs) stack.clear();
    }

    // A constrained edge interior to the cavity would be destroyed.
    for (int t : cavity) {
        const DTri& tri = tris_[t];
        for (int k = 0; k < 3; ++k) {
            int n = tri.nbr[k];
            if (n < 0 || !cavity.count(n)) continue;
            EdgeKey ek = edge_key(tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
            if (constrained_.count(ek)) {
                out.ok = false;
                out.blocker = ek;
                return true;
            }
        }
    }

    // The boundary must stitch into one simple loop around p.
    std::map<int, std::pair<int, int>> next; // a -> (b, outside)
    for (const BEdge& e : boundary)
        if (!next.emplace(e.a, std::make_pair(e.b, e.outside)).second) return false;
    std::size_t loop_len = 0;
    int start = boundary.front().a;
    for (int cur = start;;) {
        auto it = next.find(cur);
        if (it == next.end()) return false;
        ++loop_len;
        cur = it->second.first;
        if (cur == start) break;
        if (loop_len > boundary.size()) return false;
    }
    if (loop_len != boundary.size()) return false;

    // Commit: replace the cavity by the fan around p.
    out.ok = true;
    out.first_new = tris_.size();
    std::map<int, int> tri_of_src;
    for (int cur = start;;) {
        auto [b, outside] = next[cur];
        int idx = static_cast<int>(tris_.size());
        tris_.push_back(DTri{{cur, b, pi}, {-1, -1, outside}, true});
        skip_.push_back(0);
        tri_of_src[cur] = idx;
        if (outside >= 0) {
            DTri& o = tris_[outside];
            for (int k = 0; k < 3; ++k) {
                if (edge_key(o.v[(k + 1) % 3], o.v[(k + 2) % 3]) == edge_key(cur, b)) {
                    o.nbr[k] = idx;
                    break;
                }
            }
        }
        cur = b;
        if (cur == start) break;
    }
    for (int cur = start;;) {
        int b = next[cur].first;
        int idx = tri_of_src[cur];
        tris_[idx].nbr[0] = tri_of_src[b]; // across edge (b, pi)
        tris_[tri_of_src[b]].nbr[1] = idx; // across edge (pi, b)
        vert_tri_[cur] = idx;
        cur = b;
        if (cur == start) break;
    }
    vert_tri_[pi] = tri_of_src[start];
    for (int t : cavity) tris_[t].alive = false;
    out.last_new = tris_.size();
    hint_ = tri_of_src[start];
    return true;
}

InsertOutcome Mesher::insert_vertex(int pi) {
    if (++insertions_ > kMaxInsertions)
        throw RefinementFailure("refinement exceeded the insertion cap");
    int t0 = locate(pts_[pi]);
    InsertOutcome out;
    if (try_cavity(pi, t0, true, out)) return out;
    if (try_cavity(pi, t0, false, out)) return out;
    throw RefinementFailure("cavity retriangulation failed");
}

// Inserts a vertex, splitting any constrained edge that blocks it.
InsertOutcome Mesher::insert_resolving(int pi, int depth) {
    if (depth > 32) throw RefinementFailure("blocked insertion recursion too deep");
    for (int attempt = 0; attempt < 32; ++attempt) {
        InsertOutcome out = insert_vertex(pi);
        if (out.ok) return out;
        if (!constrained_.count(out.blocker))
            throw RefinementFailure("insertion blocked by the triangulation hull");
        split_constrained(out.blocker.first, out.blocker.second, depth + 1);
    }
    throw RefinementFailure("insertion kept hitting constrained edges");
}

void Mesher::queue_new_triangles(const InsertOutcome& out) {
    for (std::size_t t = out.first_new; t < out.last_new; ++t)
        triq_.push_back(static_cast<int>(t));
}

std::vector<int> Mesher::incident_triangles(int v) const {
    std::vector<int> found;
    int t0 = vert_tri_[v];
    bool rescan = t0 < 0 || !tris_[t0].alive;
    if (!rescan) {
        // The super triangle keeps every real vertex interior, so the fan
        // around v is a closed cycle.
        int t = t0;
        std::size_t cap = tris_.size() + 8;
        do {
            found.push_back(t);
            const DTri& tri = tris_[t];
            int i = tri.v[0] == v ? 0 : (tri.v[1] == v ? 1 : 2);
            t = tri.nbr[(i + 2) % 3];
            if (t < 0) { rescan = true; break; }
        } while (t != t0 && found.size() < cap);
        if (!rescan && found.size() >= cap) rescan = true;
    }
    if (rescan) {
        found.clear();
        for (std::size_t i = 0; i < tris_.size(); ++i) {
            if (!tris_[i].alive) continue;
            const auto& tv = tris_[i].v;
            if (tv[0] == v || tv[1] == v || tv[2] == v) found.push_back(static_cast<int>(i));
        }
    }
    return found;
}

bool Mesher::edge_exists(int a, int b) const {
    for (int t : incident_triangles(a)) {
        const auto& tv = tris_[t].v;
        if (tv[0] == b || tv[1] == b || tv[2] == b) return true;
    }
    return false;
}

void Mesher::ensure_segment(int a, int b, int depth) {
    if (depth > 64) throw RefinementFailure("constraint recovery recursion too deep");
    if (edge_exists(a, b)) {
        constrained_.insert(edge_key(a, b));
        return;
    }
    Vec2 m{(pts_[a][0] + pts_[b][0]) / 2, (pts_[a][1] + pts_[b][1]) / 2};
    int mi = add_point(m);
    if (mi == static_cast<int>(pts_.size()) - 1)
        queue_new_triangles(insert_resolving(mi, 0));
    ensure_segment(a, mi, depth + 1);
    ensure_segment(mi, b, depth + 1);
}

bool Mesher::segment_encroached(int a, int b) const {
    // Apexes of the triangles flanking (a,b), tested against the open
    // diametral disk; the strict test keeps right-angle lattices stable.
    for (int t : incident_triangles(a)) {
        const auto& tv = tris_[t].v;
        int ai = -1, bi = -1;
        for (int k = 0; k < 3; ++k) {
            if (tv[k] == a) ai = k;
            if (tv[k] == b) bi = k;
        }
        if (bi < 0) continue;
        int apex = tv[3 - ai - bi];
        double dx1 = pts_[a][0] - pts_[apex][0], dy1 = pts_[a][1] - pts_[apex][1];
        double dx2 = pts_[b][0] - pts_[apex][0], dy2 = pts_[b][1] - pts_[apex][1];
        if (dx1 * dx2 + dy1 * dy2 < 0) return true;
    }
    return false;
}

void Mesher::split_constrained(int a, int b, int depth) {
    if (depth > 48) throw RefinementFailure("segment splitting recursion too deep");
    constrained_.erase(edge_key(a, b));
    Vec2 m{(pts_[a][0] + pts_[b][0]) / 2, (pts_[a][1] + pts_[b][1]) / 2};
    int mi = add_point(m);
    if (mi == static_cast<int>(pts_.size()) - 1)
        queue_new_triangles(insert_resolving(mi, depth));
    ensure_segment(a, mi, 0);
    ensure_segment(mi, b, 0);
    segq_.push_back(edge_key(a, mi));
    segq_.push_back(edge_key(mi, b));
}

Vec2 Mesher::centroid(const DTri& t) const {
    return {(pts_[t.v[0]][0] + pts_[t.v[1]][0] + pts_[t.v[2]][0]) / 3,
            (pts_[t.v[0]][1] + pts_[t.v[1]][1] + pts_[t.v[2]][1]) / 3};
}

bool Mesher::is_real(const DTri& t) const {
    return t.v[0] >= 3 && t.v[1] >= 3 && t.v[2] >= 3;
}

bool Mesher::bad_triangle(int ti) const {
    const DTri& t = tris_[ti];
    if (!t.alive || !is_real(t) || skip_[ti]) return false;
    Vec2 c = centroid(t);
    if (!inside_domain(c)) return false;
    const Vec2& a = pts_[t.v[0]];
    const Vec2& b = pts_[t.v[1]];
    const Vec2& d = pts_[t.v[2]];
    double e0 = std::hypot(b[0] - a[0], b[1] - a[1]);
    double e1 = std::hypot(d[0] - b[0], d[1] - b[1]);
    double e2 = std::hypot(a[0] - d[0], a[1] - d[1]);
    double emax = std::max({e0, e1, e2});
    double emin = std::min({e0, e1, e2});
    if (emax > triangle_limit(c)) return true;
    double area2 = std::abs((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]));
    if (area2 <= 0) return true;
    double R = e0 * e1 * e2 / (2.0 * area2); // circumradius = abc / (4 area)
    return R / emin > kRadiusEdgeBound;
}

void Mesher::refine() {
    for (const auto& e : constrained_) segq_.push_back(e);
    for (std::size_t t = 0; t < tris_.size(); ++t) triq_.push_back(static_cast<int>(t));

    int rounds = 0;
    auto drain_segments = [&] {
        while (!segq_.empty()) {
            if (++rounds > kMaxQueueRounds)
                throw RefinementFailure("refinement queue exceeded its cap");
            EdgeKey e = segq_.front();
            segq_.pop_front();
            if (!constrained_.count(e)) continue;
            if (segment_encroached(e.first, e.second))
                split_constrained(e.first, e.second, 0);
        }
    };

    drain_segments();
    while (!triq_.empty()) {
        if (++rounds > kMaxQueueRounds)
            throw RefinementFailure("refinement queue exceeded its cap");
        int ti = triq_.front();
        triq_.pop_front();
        if (!bad_triangle(ti)) continue;

        const DTri& t = tris_[ti];
        const Vec2& a = pts_[t.v[0]];
        const Vec2& b = pts_[t.v[1]];
        const Vec2& d = pts_[t.v[2]];
        // Circumcenter relative to a for stability.
        double bx = b[0] - a[0], by = b[1] - a[1];
        double dx = d[0] - a[0], dy = d[1] - a[1];
        double den = 2.0 * (bx * dy - by * dx);
        if (den == 0) { skip_[ti] = 1; continue; }
        double b2 = bx * bx + by * by, d2 = dx * dx + dy * dy;
        Vec2 cc{a[0] + (dy * b2 - by * d2) / den, a[1] + (bx * d2 - dx * b2) / den};

        // A circumcenter inside a diametral circle splits those segments
        // instead of being inserted.
        std::vector<EdgeKey> hit;
        for (const auto& e : constrained_) {
            double ex1 = pts_[e.first][0] - cc[0], ey1 = pts_[e.first][1] - cc[1];
            double ex2 = pts_[e.second][0] - cc[0], ey2 = pts_[e.second][1] - cc[1];
            if (ex1 * ex2 + ey1 * ey2 < 0) hit.push_back(e);
        }
        if (!hit.empty()) {
            for (const auto& e : hit)
                if (constrained_.count(e)) split_constrained(e.first, e.second, 0);
            drain_segments();
            triq_.push_back(ti);
            continue;
        }

        if (!inside_domain(cc)) {
            // Doesn't encroach anything yet lies outside; split the longest
            // edge instead so progress is still made.
            double e0 = std::hypot(b[0] - a[0], b[1] - a[1]);
            double e1 = std::hypot(d[0] - b[0], d[1] - b[1]);
            double e2 = std::hypot(a[0] - d[0], a[1] - d[1]);
            int k = e0 >= e1 && e0 >= e2 ? 2 : (e1 >= e2 ? 0 : 1); // longest edge opposite k
            const Vec2& u = pts_[t.v[(k + 1) % 3]];
            const Vec2& w = pts_[t.v[(k + 2) % 3]];
            cc = {(u[0] + w[0]) / 2, (u[1] + w[1]) / 2};
        }

        int before = static_cast<int>(pts_.size());
        int ci = add_point(cc);
        if (ci != before) { skip_[ti] = 1; continue; } // landed on an existing vertex
        InsertOutcome out = insert_vertex(ci);
        if (!out.ok) {
            pts_.pop_back();
            vert_tri_.pop_back();
            point_index_.erase(std::make_pair(cc[0], cc[1]));
            if (constrained_.count(out.blocker))
                split_constrained(out.blocker.first, out.blocker.second, 0);
            drain_segments();
            triq_.push_back(ti);
            continue;
        }
        queue_new_triangles(out);
        drain_segments();
    }

    for (std::size_t t = 0; t < tris_.size(); ++t) {
        if (tris_[t].alive && !skip_[t] && bad_triangle(static_cast<int>(t)))
            throw RefinementFailure("refinement stalled with bad triangles left");
    }
}

TriMesh Mesher::extract() const {
    TriMesh mesh;
    mesh.mode = MeshMode::planar;
    std::vector<int> remap(pts_.size(), -1);
    for (const auto& t : tris_) {
        if (!t.alive || !is_real(t)) continue;
        if (!inside_domain(centroid(t))) continue;
        std::array<int, 3> tri;
        for (int k = 0; k < 3; ++k) {
            int v = t.v[k];
            if (remap[v] < 0) {
                remap[v] = static_cast<int>(mesh.vertices.size());
                mesh.vertices.push_back({pts_[v][0], pts_[v][1], 0.0});
            }
            tri[k] = remap[v];
        }
        mesh.triangles.push_back(tri);
    }
    if (mesh.triangles.empty()) throw InvalidDomain("domain is empty after meshing");
    mesh.finalize();
    return mesh;
}

TriMesh Mesher::run() {
    validate_inputs();

    // Register polygon vertices and pre-split every polygon edge to its
    // local length limit; the pieces become the constraint segments.
    struct Seg {
        int a, b;
    };
    std::vector<Seg> required;
    auto add_loop = [&](const Loop& loop, const void* own_region) {
        std::vector<int> idx;
        for (const auto& p : loop) idx.push_back(add_point(p));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::vector<std::pair<int, int>> work{{idx[i], idx[(i + 1) % idx.size()]}};
            int guard = 0;
            while (!work.empty()) {
                if (++guard > (1 << 22))
                    throw RefinementFailure("segment pre-split diverged");
                auto [u, w] = work.back();
                work.pop_back();
                Vec2 mid{(pts_[u][0] + pts_[w][0]) / 2, (pts_[u][1] + pts_[w][1]) / 2};
                double len = std::hypot(pts_[u][0] - pts_[w][0], pts_[u][1] - pts_[w][1]);
                if (len <= segment_limit(mid, own_region)) {
                    required.push_back({u, w});
                } else {
                    int m = add_point(mid);
                    work.push_back({m, w});
                    work.push_back({u, m});
                }
            }
        }
    };
    add_loop(spec_.outer, nullptr);
    for (const auto& h : spec_.holes) add_loop(h, nullptr);
    for (const auto& r : spec_.regions) add_loop(r.polygon, &r);

    build_super_triangle();
    for (auto& s : required) {
        s.a += 3;
        s.b += 3;
    }

    for (std::size_t i = 3; i < pts_.size(); ++i) {
        InsertOutcome out = insert_vertex(static_cast<int>(i));
        if (!out.ok) throw RefinementFailure("initial insertion failed");
    }
    for (const auto& s : required) ensure_segment(s.a, s.b, 0);

    refine();
    return extract();
}

} // namespace

TriMesh build_planar_mesh(const DomainSpec& spec) { return Mesher(spec).run(); }

} // namespace coxmesh
