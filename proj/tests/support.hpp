#ifndef COXMESH_TESTS_SUPPORT_HPP
#define COXMESH_TESTS_SUPPORT_HPP

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coxmesh/geometry.hpp"

namespace testutil {

// Uniform right-triangle lattice on [0, nx*h] x [0, ny*h], squares split
// along the lower-left to upper-right diagonal.
inline coxmesh::TriMesh build_lattice(int nx, int ny, double h) {
    coxmesh::TriMesh mesh;
    auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            mesh.vertices.push_back({i * h, j * h, 0.0});
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            mesh.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
            mesh.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    mesh.finalize();
    return mesh;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    std::filesystem::path dir =
        std::filesystem::temp_directory_path() / ("coxmesh_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs the CLI binary with the given arguments, capturing exit code and
// both streams via temporary files.
inline CliResult run_cli(const std::string& args,
                         const std::filesystem::path& workdir) {
    std::filesystem::path out = workdir / "_stdout.txt";
    std::filesystem::path err = workdir / "_stderr.txt";
#ifdef COXMESH_CLI_PATH
    std::string cmd = "cd '" + workdir.string() + "' && '" + COXMESH_CLI_PATH +
                      "' " + args + " > '" + out.string() + "' 2> '" +
                      err.string() + "'";
#else
    std::string cmd = "false";
#endif
    int rc = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = (rc == -1) ? -1 : WEXITSTATUS(rc);
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

} // namespace testutil

#endif
