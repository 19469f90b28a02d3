#include "coxmesh/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "coxmesh/errors.hpp"

namespace coxmesh {
namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw BuildError("cannot open for writing: " + path);
    return f;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw BuildError("cannot open for reading: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_double(const std::string& tok, const std::string& path,
                    std::size_t lineno) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    while (first != last && *first == ' ') ++first;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last)
        throw BuildError(path + ":" + std::to_string(lineno) +
                         ": bad number '" + tok + "'");
    return v;
}

long parse_int(const std::string& tok, const std::string& path,
               std::size_t lineno) {
    long v = 0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    while (first != last && *first == ' ') ++first;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last)
        throw BuildError(path + ":" + std::to_string(lineno) +
                         ": bad integer '" + tok + "'");
    return v;
}

void expect_header(const std::vector<std::string>& lines, const std::string& path,
                   std::initializer_list<const char*> accepted) {
    if (lines.empty()) throw BuildError(path + ": empty file");
    for (const char* h : accepted)
        if (lines[0] == h) return;
    throw BuildError(path + ": unexpected header '" + lines[0] + "'");
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw BuildError("number formatting failed");
    return std::string(buf, p);
}

void save_mesh(const std::string& path, const TriMesh& mesh) {
    std::ofstream f = open_out(path);
    if (mesh.mode == MeshMode::planar)
        f << "mesh planar ";
    else
        f << "mesh sphere " << format_double(mesh.radius) << ' ';
    f << mesh.n_vertices() << ' ' << mesh.n_triangles() << ' '
      << mesh.boundary_edges.size() << '\n';
    for (const auto& v : mesh.vertices) {
        f << format_double(v[0]) << ' ' << format_double(v[1]);
        if (mesh.mode == MeshMode::spherical) f << ' ' << format_double(v[2]);
        f << '\n';
    }
    for (const auto& t : mesh.triangles)
        f << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    for (const auto& e : mesh.boundary_edges) f << e[0] << ' ' << e[1] << '\n';
    if (!f) throw BuildError("write failed: " + path);
}

TriMesh load_mesh(const std::string& path) {
    std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) throw BuildError(path + ": empty file");
    std::istringstream head(lines[0]);
    std::string tag, mode;
    head >> tag >> mode;
    TriMesh mesh;
    double radius = 0.0;
    if (tag != "mesh" || (mode != "planar" && mode != "sphere"))
        throw BuildError(path + ": not a mesh file");
    if (mode == "sphere") {
        head >> radius;
        mesh.mode = MeshMode::spherical;
        mesh.radius = radius;
    }
    std::size_t nv = 0, nt = 0, nb = 0;
    head >> nv >> nt >> nb;
    if (!head) throw BuildError(path + ": malformed mesh header");
    if (lines.size() != 1 + nv + nt + nb)
        throw BuildError(path + ": line count does not match header");
    std::size_t lineno = 1;
    const bool sphere = mesh.mode == MeshMode::spherical;
    mesh.vertices.reserve(nv);
    for (std::size_t i = 0; i < nv; ++i, ++lineno) {
        std::istringstream ls(lines[lineno]);
        Vec3 v{0, 0, 0};
        ls >> v[0] >> v[1];
        if (sphere) ls >> v[2];
        if (!ls) throw BuildError(path + ":" + std::to_string(lineno + 1) +
                                  ": bad vertex line");
        mesh.vertices.push_back(v);
    }
    mesh.triangles.reserve(nt);
    for (std::size_t i = 0; i < nt; ++i, ++lineno) {
        std::istringstream ls(lines[lineno]);
        std::array<int, 3> t{};
        ls >> t[0] >> t[1] >> t[2];
        if (!ls) throw BuildError(path + ":" + std::to_string(lineno + 1) +
                                  ": bad triangle line");
        mesh.triangles.push_back(t);
    }
    mesh.boundary_edges.reserve(nb);
    for (std::size_t i = 0; i < nb; ++i, ++lineno) {
        std::istringstream ls(lines[lineno]);
        std::array<int, 2> e{};
        ls >> e[0] >> e[1];
        if (!ls) throw BuildError(path + ":" + std::to_string(lineno + 1) +
                                  ": bad boundary edge line");
        mesh.boundary_edges.push_back(e);
    }
    mesh.finalize();
    return mesh;
}

void save_points_csv(const std::string& path, const PointPattern& pattern,
                     MeshMode mode) {
    std::ofstream f = open_out(path);
    f << (mode == MeshMode::planar ? "x,y" : "lon,lat") << '\n';
    for (const auto& p : pattern.points)
        f << format_double(p[0]) << ',' << format_double(p[1]) << '\n';
    if (!f) throw BuildError("write failed: " + path);
}

std::vector<Vec2> load_points_csv(const std::string& path) {
    std::vector<std::string> lines = read_lines(path);
    expect_header(lines, path, {"x,y", "lon,lat"});
    std::vector<Vec2> pts;
    pts.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty())
            throw BuildError(path + ":" + std::to_string(i + 1) + ": blank row");
        auto toks = split_csv(lines[i]);
        if (toks.size() != 2)
            throw BuildError(path + ":" + std::to_string(i + 1) +
                             ": expected two columns");
        pts.push_back({parse_double(toks[0], path, i + 1),
                       parse_double(toks[1], path, i + 1)});
    }
    return pts;
}

std::vector<Loop> load_loops_csv(const std::string& path) {
    std::vector<std::string> lines = read_lines(path);
    expect_header(lines, path, {"x,y", "lon,lat"});
    std::vector<Loop> loops;
    Loop cur;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            if (!cur.empty()) loops.push_back(std::move(cur));
            cur.clear();
            continue;
        }
        auto toks = split_csv(lines[i]);
        if (toks.size() != 2)
            throw BuildError(path + ":" + std::to_string(i + 1) +
                             ": expected two columns");
        cur.push_back({parse_double(toks[0], path, i + 1),
                       parse_double(toks[1], path, i + 1)});
    }
    if (!cur.empty()) loops.push_back(std::move(cur));
    for (const auto& loop : loops)
        if (loop.size() < 3)
            throw BuildError(path + ": loop with fewer than three vertices");
    return loops;
}

std::vector<double> load_indexed_values_csv(const std::string& path,
                                            std::size_t n,
                                            const std::string& index_name,
                                            bool fill_missing) {
    std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) throw BuildError(path + ": empty file");
    if (lines[0] != index_name + ",value")
        throw BuildError(path + ": expected header '" + index_name + ",value'");
    std::vector<double> values(n, 0.0);
    std::vector<bool> seen(n, false);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto toks = split_csv(lines[i]);
        if (toks.size() != 2)
            throw BuildError(path + ":" + std::to_string(i + 1) +
                             ": expected two columns");
        long idx = parse_int(toks[0], path, i + 1);
        if (idx < 0 || static_cast<std::size_t>(idx) >= n)
            throw BuildError(path + ":" + std::to_string(i + 1) +
                             ": index out of range");
        if (seen[idx])
            throw BuildError(path + ":" + std::to_string(i + 1) +
                             ": duplicate index " + toks[0]);
        seen[idx] = true;
        values[idx] = parse_double(toks[1], path, i + 1);
    }
    if (!fill_missing)
        for (std::size_t i = 0; i < n; ++i)
            if (!seen[i])
                throw BuildError(path + ": missing index " + std::to_string(i));
    return values;
}

void save_field_csv(const std::string& path, const Eigen::VectorXd& values) {
    std::ofstream f = open_out(path);
    f << "vertex,value\n";
    for (Eigen::Index i = 0; i < values.size(); ++i)
        f << i << ',' << format_double(values[i]) << '\n';
    if (!f) throw BuildError("write failed: " + path);
}

void save_posterior_csv(const std::string& path, const TriMesh& mesh,
                        const PosteriorResult& result,
                        const Eigen::VectorXd* exceed) {
    if (static_cast<std::size_t>(result.field_mean.size()) != mesh.n_vertices())
        throw BuildError("posterior does not match the mesh");
    std::ofstream f = open_out(path);
    const bool sphere = mesh.mode == MeshMode::spherical;
    f << (sphere ? "vertex,x,y,z,mean,sd" : "vertex,x,y,mean,sd");
    if (exceed) f << ",exceed_p";
    f << '\n';
    for (std::size_t i = 0; i < mesh.n_vertices(); ++i) {
        const Vec3& v = mesh.vertices[i];
        f << i << ',' << format_double(v[0]) << ',' << format_double(v[1]);
        if (sphere) f << ',' << format_double(v[2]);
        f << ',' << format_double(result.field_mean[i]) << ','
          << format_double(result.field_sd[i]);
        if (exceed) f << ',' << format_double((*exceed)[i]);
        f << '\n';
    }
    if (!f) throw BuildError("write failed: " + path);
}

void save_hyper_marginals_csv(const std::string& path,
                              const PosteriorResult& result) {
    std::ofstream f = open_out(path);
    f << "param,value,density\n";
    for (const auto& [v, d] : result.marg_log_tau)
        f << "log_tau," << format_double(v) << ',' << format_double(d) << '\n';
    for (const auto& [v, d] : result.marg_log_kappa2)
        f << "log_kappa2," << format_double(v) << ',' << format_double(d) << '\n';
    if (!f) throw BuildError("write failed: " + path);
}

void save_fixed_effects_csv(const std::string& path,
                            const std::vector<FixedEffectSummary>& effects) {
    std::ofstream f = open_out(path);
    f << "effect,mean,sd,q025,q50,q975\n";
    for (std::size_t j = 0; j < effects.size(); ++j) {
        const auto& e = effects[j];
        f << j << ',' << format_double(e.mean) << ',' << format_double(e.sd)
          << ',' << format_double(e.q025) << ',' << format_double(e.q50) << ','
          << format_double(e.q975) << '\n';
    }
    if (!f) throw BuildError("write failed: " + path);
}

void save_density_csv(const std::string& path, const DensityCurve& curve) {
    std::ofstream f = open_out(path);
    f << "value,density\n";
    for (const auto& [v, d] : curve)
        f << format_double(v) << ',' << format_double(d) << '\n';
    if (!f) throw BuildError("write failed: " + path);
}

void save_exceedance_csv(const std::string& path, const Eigen::VectorXd& p) {
    std::ofstream f = open_out(path);
    f << "vertex,exceed_p\n";
    for (Eigen::Index i = 0; i < p.size(); ++i)
        f << i << ',' << format_double(p[i]) << '\n';
    if (!f) throw BuildError("write failed: " + path);
}

void save_matrix(const std::string& path, const SparseSym& m) {
    std::ofstream f = open_out(path);
    for (int j = 0; j < m.upper.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(m.upper, j); it; ++it)
            f << it.row() << ' ' << it.col() << ' ' << format_double(it.value())
              << '\n';
    if (!f) throw BuildError("write failed: " + path);
}

} // namespace coxmesh
