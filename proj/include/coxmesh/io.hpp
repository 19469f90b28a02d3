#ifndef COXMESH_IO_HPP
#define COXMESH_IO_HPP

#include <string>
#include <vector>

#include "coxmesh/inference.hpp"
#include "coxmesh/simulate.hpp"

namespace coxmesh {

// Mesh text format, line 1: `mesh <planar|sphere R> <nv> <nt> <nb>`,
// then nv vertex lines, nt triangle lines, nb boundary edge lines.
void save_mesh(const std::string& path, const TriMesh& mesh);
TriMesh load_mesh(const std::string& path);

// Points CSV, header `x,y` (planar) or `lon,lat` (spherical, degrees).
void save_points_csv(const std::string& path, const PointPattern& pattern,
                     MeshMode mode);
std::vector<Vec2> load_points_csv(const std::string& path);

// Polygon loops: CSV with header `x,y`, one vertex per line, blank line
// between loops; each loop closes implicitly.
std::vector<Loop> load_loops_csv(const std::string& path);

// Per-index value column, header `<index_name>,value`; missing indices
// default to 0 when fill_missing, otherwise every index must appear.
std::vector<double> load_indexed_values_csv(const std::string& path,
                                            std::size_t n,
                                            const std::string& index_name,
                                            bool fill_missing);

// `vertex,value` rows, used for simulated truth fields.
void save_field_csv(const std::string& path, const Eigen::VectorXd& values);

// `vertex,x,y[,z],mean,sd[,exceed_p]`.
void save_posterior_csv(const std::string& path, const TriMesh& mesh,
                        const PosteriorResult& result,
                        const Eigen::VectorXd* exceed);

// `param,value,density` rows, param in {log_tau, log_kappa2}.
void save_hyper_marginals_csv(const std::string& path,
                              const PosteriorResult& result);

// Summary table plus one density curve per effect.
void save_fixed_effects_csv(const std::string& path,
                            const std::vector<FixedEffectSummary>& effects);
void save_density_csv(const std::string& path, const DensityCurve& curve);

// `vertex,exceed_p` rows.
void save_exceedance_csv(const std::string& path, const Eigen::VectorXd& p);

/// Shortest-round-trip float formatting shared by all writers so that
/// reruns are byte identical.
std::string format_double(double v);

} // namespace coxmesh

#endif
