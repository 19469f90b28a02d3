#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "coxmesh/errors.hpp"
#include "coxmesh/inference.hpp"
#include "coxmesh/io.hpp"
#include "coxmesh/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace coxmesh;

namespace {

int exit_code_for(const Error& e) {
    if (dynamic_cast<const TooIntense*>(&e)) return 3;
    if (dynamic_cast<const RefinementFailure*>(&e) ||
        dynamic_cast<const DegenerateTriangle*>(&e) ||
        dynamic_cast<const AssemblyError*>(&e) ||
        dynamic_cast<const EtaOverflow*>(&e) ||
        dynamic_cast<const NoConvergence*>(&e) ||
        dynamic_cast<const NotPositiveDefinite*>(&e) ||
        dynamic_cast<const HyperOptFailure*>(&e))
        return 4;
    return 2;
}

void check_keys(const json& obj, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw BuildError(ctx + ": expected a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw BuildError(ctx + ": unknown key '" + it.key() + "'");
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& ctx) {
    if (!v.is_number()) throw BuildError(ctx + ": expected a number");
    return v.get<double>();
}

long as_integer(const json& v, const std::string& ctx) {
    if (!v.is_number_integer()) throw BuildError(ctx + ": expected an integer");
    return v.get<long>();
}

std::string as_string(const json& v, const std::string& ctx) {
    if (!v.is_string()) throw BuildError(ctx + ": expected a string");
    return v.get<std::string>();
}

double number_or(const json& obj, const char* key, double fallback,
                 const std::string& ctx) {
    const json* v = find(obj, key);
    return v ? as_number(*v, ctx + "." + key) : fallback;
}

double need_number(const json& obj, const char* key, const std::string& ctx) {
    const json* v = find(obj, key);
    if (!v) throw BuildError(ctx + ": missing key '" + key + "'");
    return as_number(*v, ctx + "." + key);
}

std::string need_string(const json& obj, const char* key, const std::string& ctx) {
    const json* v = find(obj, key);
    if (!v) throw BuildError(ctx + ": missing key '" + key + "'");
    return as_string(*v, ctx + "." + key);
}

std::string string_or(const json& obj, const char* key,
                      const std::string& fallback, const std::string& ctx) {
    const json* v = find(obj, key);
    return v ? as_string(*v, ctx + "." + key) : fallback;
}

Loop loop_from_json(const json& arr, const std::string& ctx) {
    if (!arr.is_array() || arr.size() < 3)
        throw BuildError(ctx + ": expected an array of at least three [x,y] pairs");
    Loop loop;
    loop.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_array() || v.size() != 2)
            throw BuildError(ctx + ": vertex must be an [x,y] pair");
        loop.push_back({as_number(v[0], ctx), as_number(v[1], ctx)});
    }
    return loop;
}

std::vector<Loop> loops_from_json(const json& arr, const std::string& ctx) {
    if (!arr.is_array()) throw BuildError(ctx + ": expected an array of loops");
    std::vector<Loop> loops;
    for (std::size_t i = 0; i < arr.size(); ++i)
        loops.push_back(loop_from_json(arr[i], ctx + "[" + std::to_string(i) + "]"));
    return loops;
}

// Relative input paths resolve against the config file's directory so a
// config plus its data files form a relocatable bundle.
std::string resolve_input(const fs::path& cfg_dir, const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q.string() : (cfg_dir / q).string();
}

std::string resolve_output(const fs::path& out_dir, const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q.string() : (out_dir / q).string();
}

json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw BuildError("cannot open config: " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw BuildError(path + ": " + e.what());
    }
}

void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw BuildError("cannot open for writing: " + path);
    f << j.dump(2) << '\n';
    if (!f) throw BuildError("write failed: " + path);
}

std::uint64_t need_seed(const json& cfg, const std::string& ctx) {
    const json* v = find(cfg, "seed");
    if (!v) throw BuildError(ctx + ": missing key 'seed'");
    if (!v->is_number_integer() || (v->is_number_integer() && v->get<long long>() < 0))
        throw BuildError(ctx + ".seed: expected a nonnegative integer");
    return v->get<std::uint64_t>();
}

// Effort spec shared by fit and censoring. n_nodes < 0 forbids per-node
// kind (censoring needs values at arbitrary locations).
EffortField parse_effort(const json& j, const fs::path& cfg_dir, long n_nodes,
                         const std::string& ctx) {
    check_keys(j, ctx,
               {"constant", "zero_polygons", "zero_polygons_csv",
                "node_values_csv", "scale"});
    int kinds = 0;
    EffortField e;
    if (const json* v = find(j, "constant")) {
        e.kind = EffortField::Kind::constant;
        e.constant = as_number(*v, ctx + ".constant");
        ++kinds;
    }
    if (find(j, "zero_polygons") || find(j, "zero_polygons_csv")) {
        e.kind = EffortField::Kind::polygon_zero;
        if (const json* v = find(j, "zero_polygons"))
            e.polygons = loops_from_json(*v, ctx + ".zero_polygons");
        if (const json* v = find(j, "zero_polygons_csv")) {
            auto more = load_loops_csv(
                resolve_input(cfg_dir, as_string(*v, ctx + ".zero_polygons_csv")));
            e.polygons.insert(e.polygons.end(), more.begin(), more.end());
        }
        ++kinds;
    }
    if (const json* v = find(j, "node_values_csv")) {
        if (n_nodes < 0)
            throw BuildError(ctx + ": per-node effort is not usable here");
        e.kind = EffortField::Kind::per_node;
        e.node_values = load_indexed_values_csv(
            resolve_input(cfg_dir, as_string(*v, ctx + ".node_values_csv")),
            static_cast<std::size_t>(n_nodes), "node_index", false);
        ++kinds;
    }
    if (kinds > 1) throw BuildError(ctx + ": choose a single effort kind");
    e.scale = number_or(j, "scale", 1.0, ctx);
    return e;
}

std::vector<Loop> loops_from_key_pair(const json& obj, const char* inline_key,
                                      const char* csv_key, const fs::path& cfg_dir,
                                      const std::string& ctx) {
    std::vector<Loop> loops;
    if (const json* v = find(obj, inline_key))
        loops = loops_from_json(*v, ctx + "." + inline_key);
    if (const json* v = find(obj, csv_key)) {
        auto more =
            load_loops_csv(resolve_input(cfg_dir, as_string(*v, ctx + "." + csv_key)));
        loops.insert(loops.end(), more.begin(), more.end());
    }
    return loops;
}

int cmd_mesh(const json& cfg, const fs::path& cfg_dir, const fs::path& out_dir) {
    check_keys(cfg, "config", {"domain", "sphere", "out_mesh", "out_dir"});
    const json* domain = find(cfg, "domain");
    const json* sphere = find(cfg, "sphere");
    if (!!domain == !!sphere)
        throw BuildError("config: exactly one of 'domain' or 'sphere' required");

    TriMesh mesh;
    if (domain) {
        check_keys(*domain, "domain",
                   {"outer", "outer_csv", "holes", "holes_csv", "max_edge",
                    "regions"});
        DomainSpec spec;
        if (const json* v = find(*domain, "outer"))
            spec.outer = loop_from_json(*v, "domain.outer");
        if (const json* v = find(*domain, "outer_csv")) {
            auto loops = load_loops_csv(
                resolve_input(cfg_dir, as_string(*v, "domain.outer_csv")));
            if (loops.size() != 1)
                throw BuildError("domain.outer_csv: expected exactly one loop");
            spec.outer = loops[0];
        }
        if (spec.outer.empty())
            throw BuildError("domain: missing outer polygon");
        spec.holes = loops_from_key_pair(*domain, "holes", "holes_csv", cfg_dir,
                                         "domain");
        spec.max_edge_global = need_number(*domain, "max_edge", "domain");
        if (const json* regions = find(*domain, "regions")) {
            if (!regions->is_array())
                throw BuildError("domain.regions: expected an array");
            for (std::size_t i = 0; i < regions->size(); ++i) {
                std::string ctx = "domain.regions[" + std::to_string(i) + "]";
                const json& r = (*regions)[i];
                check_keys(r, ctx, {"polygon", "polygon_csv", "max_edge"});
                DomainSpec::Region reg;
                if (const json* v = find(r, "polygon"))
                    reg.polygon = loop_from_json(*v, ctx + ".polygon");
                if (const json* v = find(r, "polygon_csv")) {
                    auto loops = load_loops_csv(
                        resolve_input(cfg_dir, as_string(*v, ctx + ".polygon_csv")));
                    if (loops.size() != 1)
                        throw BuildError(ctx + ".polygon_csv: expected one loop");
                    reg.polygon = loops[0];
                }
                if (reg.polygon.empty())
                    throw BuildError(ctx + ": missing polygon");
                reg.max_edge = need_number(r, "max_edge", ctx);
                spec.regions.push_back(std::move(reg));
            }
        }
        mesh = build_planar_mesh(spec);
    } else {
        check_keys(*sphere, "sphere", {"radius", "subdivisions", "land", "land_csv"});
        double radius = number_or(*sphere, "radius", 1.0, "sphere");
        const json* v = find(*sphere, "subdivisions");
        if (!v) throw BuildError("sphere: missing key 'subdivisions'");
        long sub = as_integer(*v, "sphere.subdivisions");
        if (sub < 0 || sub > 8)
            throw BuildError("sphere.subdivisions: expected 0..8");
        auto land = loops_from_key_pair(*sphere, "land", "land_csv", cfg_dir,
                                        "sphere");
        mesh = build_icosphere_masked(radius, static_cast<int>(sub), land);
    }

    std::string out_mesh =
        resolve_output(out_dir, string_or(cfg, "out_mesh", "mesh.txt", "config"));
    save_mesh(out_mesh, mesh);
    std::cout << "vertices=" << mesh.n_vertices() << " triangles="
              << mesh.n_triangles() << " area=" << format_double(mesh.total_area())
              << '\n';
    return 0;
}

int cmd_simulate(const json& cfg, const fs::path& cfg_dir, const fs::path& out_dir) {
    check_keys(cfg, "config",
               {"mesh", "alpha", "hyper", "intercept", "seed", "censor",
                "out_points", "out_truth", "out_manifest", "out_dir"});
    TriMesh mesh = load_mesh(resolve_input(cfg_dir, need_string(cfg, "mesh", "config")));
    long alpha = 2;
    if (const json* v = find(cfg, "alpha")) alpha = as_integer(*v, "config.alpha");
    const json* hj = find(cfg, "hyper");
    if (!hj) throw BuildError("config: missing key 'hyper'");
    check_keys(*hj, "hyper", {"log_tau", "log_kappa2"});
    Hyper hyper{need_number(*hj, "log_tau", "hyper"),
                need_number(*hj, "log_kappa2", "hyper")};
    double intercept = number_or(cfg, "intercept", 0.0, "config");
    std::uint64_t seed = need_seed(cfg, "config");

    SpdeModel model = make_spde(mesh, static_cast<int>(alpha));
    FieldSample field = sample_field(model, hyper, seed);
    PointPattern pattern = simulate_lgcp(mesh, field, intercept, seed + 1);
    if (const json* cj = find(cfg, "censor")) {
        EffortField eff = parse_effort(*cj, cfg_dir, -1, "censor");
        pattern = censor_pattern(pattern, eff, seed + 2);
    }

    save_points_csv(
        resolve_output(out_dir, string_or(cfg, "out_points", "points.csv", "config")),
        pattern, mesh.mode);
    save_field_csv(
        resolve_output(out_dir, string_or(cfg, "out_truth", "truth.csv", "config")),
        field.z);
    json manifest;
    manifest["command"] = "simulate";
    manifest["seed"] = seed;
    manifest["hyper"] = {{"log_tau", hyper.log_tau}, {"log_kappa2", hyper.log_kappa2}};
    manifest["intercept"] = intercept;
    manifest["alpha"] = alpha;
    manifest["n_points"] = pattern.n();
    manifest["mesh"] = need_string(cfg, "mesh", "config");
    write_json(
        resolve_output(out_dir,
                       string_or(cfg, "out_manifest", "manifest.json", "config")),
        manifest);
    std::cout << "points=" << pattern.n() << '\n';
    return 0;
}

void save_mixture_csv(const std::string& path, const PosteriorResult& post) {
    std::ofstream f(path);
    if (!f) throw BuildError("cannot open for writing: " + path);
    f << "vertex,component,mean,sd,weight\n";
    for (Eigen::Index g = 0; g < post.comp_mean.cols(); ++g)
        for (Eigen::Index v = 0; v < post.comp_mean.rows(); ++v)
            f << v << ',' << g << ',' << format_double(post.comp_mean(v, g)) << ','
              << format_double(post.comp_sd(v, g)) << ','
              << format_double(post.comp_weight(g)) << '\n';
    if (!f) throw BuildError("write failed: " + path);
}

// Reads back exactly what save_mixture_csv wrote; the riskmap command
// carries only the mixture fields of PosteriorResult.
PosteriorResult load_mixture_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw BuildError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(f, line) ||
        (line != "vertex,component,mean,sd,weight" &&
         line != "vertex,component,mean,sd,weight\r"))
        throw BuildError(path + ": not a mixture file");
    struct Row {
        long v, g;
        double mean, sd, w;
    };
    std::vector<Row> rows;
    long nv = 0, ng = 0;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Row r;
        char c1, c2, c3, c4;
        std::istringstream ls(line);
        ls >> r.v >> c1 >> r.g >> c2 >> r.mean >> c3 >> r.sd >> c4 >> r.w;
        if (!ls || c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',')
            throw BuildError(path + ":" + std::to_string(lineno) + ": bad row");
        nv = std::max(nv, r.v + 1);
        ng = std::max(ng, r.g + 1);
        rows.push_back(r);
    }
    if (rows.empty()) throw BuildError(path + ": empty mixture");
    if (static_cast<long>(rows.size()) != nv * ng)
        throw BuildError(path + ": incomplete mixture table");
    PosteriorResult post;
    post.comp_mean.resize(nv, ng);
    post.comp_sd.resize(nv, ng);
    post.comp_weight = Eigen::VectorXd::Zero(ng);
    for (const Row& r : rows) {
        post.comp_mean(r.v, r.g) = r.mean;
        post.comp_sd(r.v, r.g) = r.sd;
        post.comp_weight(r.g) = r.w;
    }
    return post;
}

int cmd_fit(const json& cfg, const fs::path& cfg_dir, const fs::path& out_dir,
            std::optional<int> threads_flag) {
    check_keys(cfg, "config",
               {"mesh", "points", "alpha", "quadrature", "effort", "covariates",
                "hyper_prior", "grid", "fixed_prior_prec", "threads", "threshold",
                "out_posterior", "out_hyper", "out_fixed",
                "out_fixed_density_prefix", "out_mixture", "out_report",
                "out_timing", "out_dir"});
    auto t0 = std::chrono::steady_clock::now();

    TriMesh mesh = load_mesh(resolve_input(cfg_dir, need_string(cfg, "mesh", "config")));
    std::vector<Vec2> raw_points =
        load_points_csv(resolve_input(cfg_dir, need_string(cfg, "points", "config")));
    BasisEval located = locate_points(mesh, raw_points);

    long alpha = 2;
    if (const json* v = find(cfg, "alpha")) alpha = as_integer(*v, "config.alpha");
    std::string quad = string_or(cfg, "quadrature", "midpoint", "config");
    IntegrationScheme scheme;
    if (quad == "midpoint")
        scheme = midpoint_scheme(mesh);
    else if (quad == "gauss1")
        scheme = triangle_gauss_scheme(mesh, 1);
    else if (quad == "gauss2")
        scheme = triangle_gauss_scheme(mesh, 2);
    else
        throw BuildError("config.quadrature: expected midpoint, gauss1 or gauss2");

    EffortField effort;
    if (const json* v = find(cfg, "effort"))
        effort = parse_effort(*v, cfg_dir, static_cast<long>(scheme.nodes.size()),
                              "effort");

    const std::size_t nv = mesh.n_vertices();
    std::vector<std::vector<double>> covariates;
    if (const json* v = find(cfg, "covariates")) {
        if (!v->is_array())
            throw BuildError("config.covariates: expected an array of CSV paths");
        for (const auto& item : *v)
            covariates.push_back(load_indexed_values_csv(
                resolve_input(cfg_dir, as_string(item, "config.covariates")), nv,
                "vertex_index", false));
    }

    const Eigen::Index n_fixed = 1 + static_cast<Eigen::Index>(covariates.size());
    LinearPredictorMap predictor;
    predictor.n_field = static_cast<Eigen::Index>(nv);
    predictor.n_fixed = n_fixed;
    auto basis_value = [&](const BasisEval& be, std::size_t row,
                           const std::vector<double>& vals) {
        double s = 0.0;
        for (const auto& [vtx, w] : be.entries[row]) s += w * vals[vtx];
        return s;
    };
    predictor.covariate_at_nodes.resize(scheme.nodes.size(), n_fixed);
    predictor.covariate_at_nodes.col(0).setOnes();
    for (std::size_t k = 0; k < covariates.size(); ++k)
        for (std::size_t i = 0; i < scheme.nodes.size(); ++i)
            predictor.covariate_at_nodes(i, 1 + k) =
                basis_value(scheme.node_basis, i, covariates[k]);
    predictor.covariate_at_points.resize(raw_points.size(), n_fixed);
    predictor.covariate_at_points.col(0).setOnes();
    for (std::size_t k = 0; k < covariates.size(); ++k)
        for (std::size_t i = 0; i < raw_points.size(); ++i)
            predictor.covariate_at_points(i, 1 + k) =
                basis_value(located, i, covariates[k]);

    PseudoPoisson pp = build_pseudo(scheme, effort, located, predictor);
    SpdeModel model = make_spde(mesh, static_cast<int>(alpha));

    HyperPrior prior;
    if (const json* v = find(cfg, "hyper_prior")) {
        check_keys(*v, "hyper_prior",
                   {"mean_log_tau", "sd_log_tau", "mean_log_kappa2",
                    "sd_log_kappa2"});
        prior.mean_log_tau = number_or(*v, "mean_log_tau", 0.0, "hyper_prior");
        prior.sd_log_tau = number_or(*v, "sd_log_tau", 3.0, "hyper_prior");
        prior.mean_log_kappa2 = number_or(*v, "mean_log_kappa2", 0.0, "hyper_prior");
        prior.sd_log_kappa2 = number_or(*v, "sd_log_kappa2", 3.0, "hyper_prior");
    }
    GridSpec gspec;
    if (const json* v = find(cfg, "grid")) {
        check_keys(*v, "grid", {"step", "log_drop", "max_points"});
        gspec.step = number_or(*v, "step", gspec.step, "grid");
        gspec.log_drop = number_or(*v, "log_drop", gspec.log_drop, "grid");
        if (const json* mp = find(*v, "max_points"))
            gspec.max_points = static_cast<int>(as_integer(*mp, "grid.max_points"));
    }
    double fprec = number_or(cfg, "fixed_prior_prec", 1e-6, "config");
    int threads = 1;
    if (const json* v = find(cfg, "threads"))
        threads = static_cast<int>(as_integer(*v, "config.threads"));
    if (const char* env = std::getenv("COXMESH_THREADS")) {
        try {
            threads = std::stoi(env);
        } catch (const std::exception&) {
            throw BuildError("COXMESH_THREADS: expected an integer");
        }
    }
    if (threads_flag) threads = *threads_flag;

    GridFit gridfit = explore_grid(pp, model, prior, gspec, fprec, threads);

    Eigen::MatrixXd X(nv, n_fixed);
    X.col(0).setOnes();
    for (std::size_t k = 0; k < covariates.size(); ++k)
        for (std::size_t i = 0; i < nv; ++i) X(i, 1 + k) = covariates[k][i];
    PosteriorResult post = marginals(gridfit.grid, gridfit.approxs, X);

    const Eigen::VectorXd* exceed_ptr = nullptr;
    Eigen::VectorXd exceed;
    if (const json* v = find(cfg, "threshold")) {
        exceed = exceedance_map(post, as_number(*v, "config.threshold"));
        exceed_ptr = &exceed;
    }

    save_posterior_csv(
        resolve_output(out_dir,
                       string_or(cfg, "out_posterior", "field_posterior.csv",
                                 "config")),
        mesh, post, exceed_ptr);
    save_hyper_marginals_csv(
        resolve_output(out_dir,
                       string_or(cfg, "out_hyper", "hyper_marginals.csv", "config")),
        post);
    save_fixed_effects_csv(
        resolve_output(out_dir,
                       string_or(cfg, "out_fixed", "fixed_effects.csv", "config")),
        post.fixed_effects);
    std::string prefix =
        string_or(cfg, "out_fixed_density_prefix", "fixed_effect_", "config");
    for (std::size_t j = 0; j < post.fixed_effects.size(); ++j)
        save_density_csv(resolve_output(out_dir, prefix + std::to_string(j) +
                                                     "_density.csv"),
                         post.fixed_effects[j].density);
    save_mixture_csv(
        resolve_output(out_dir, string_or(cfg, "out_mixture", "mixture.csv",
                                          "config")),
        post);

    int iters_total = 0, iters_max = 0;
    for (const auto& ga : gridfit.approxs) {
        iters_total += ga.newton_iters;
        iters_max = std::max(iters_max, ga.newton_iters);
    }
    double best_lp = gridfit.grid.points.front().log_post;
    for (const auto& gp : gridfit.grid.points)
        best_lp = std::max(best_lp, gp.log_post);
    json report;
    report["command"] = "fit";
    report["n_vertices"] = nv;
    report["n_points"] = raw_points.size();
    report["n_fixed"] = n_fixed;
    report["grid_size"] = gridfit.grid.points.size();
    report["grid_step"] = gridfit.grid.step;
    report["hyper_mode"] = {{"log_tau", gridfit.grid.mode.log_tau},
                            {"log_kappa2", gridfit.grid.mode.log_kappa2}};
    report["newton_iters_total"] = iters_total;
    report["newton_iters_max"] = iters_max;
    report["log_post_best"] = best_lp;
    write_json(resolve_output(out_dir,
                              string_or(cfg, "out_report", "report.json", "config")),
               report);

    // Wall time lives in its own file so every other output is byte
    // reproducible across reruns.
    auto t1 = std::chrono::steady_clock::now();
    json timing;
    timing["command"] = "fit";
    timing["threads"] = threads;
    timing["wall_time_seconds"] =
        std::chrono::duration<double>(t1 - t0).count();
    write_json(resolve_output(out_dir,
                              string_or(cfg, "out_timing", "timing.json", "config")),
               timing);

    std::cout << "grid=" << gridfit.grid.points.size()
              << " log_tau=" << format_double(gridfit.grid.mode.log_tau)
              << " log_kappa2=" << format_double(gridfit.grid.mode.log_kappa2)
              << " intercept=" << format_double(post.fixed_effects[0].mean) << '\n';
    return 0;
}

int cmd_riskmap(const json& cfg, const fs::path& cfg_dir, const fs::path& out_dir) {
    check_keys(cfg, "config", {"mixture", "threshold", "out_riskmap", "out_dir"});
    PosteriorResult post =
        load_mixture_csv(resolve_input(cfg_dir, need_string(cfg, "mixture", "config")));
    double threshold = need_number(cfg, "threshold", "config");
    Eigen::VectorXd p = exceedance_map(post, threshold);
    save_exceedance_csv(
        resolve_output(out_dir,
                       string_or(cfg, "out_riskmap", "riskmap.csv", "config")),
        p);
    std::cout << "vertices=" << p.size() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Log-Gaussian Cox process toolkit: mesh, simulate, fit, riskmap"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<long long> seed_flag;
    std::optional<std::string> out_flag, mesh_flag, points_flag;
    std::optional<int> threads_flag;
    std::optional<double> threshold_flag;

    std::vector<CLI::App*> subs;
    for (const char* name : {"mesh", "simulate", "fit", "riskmap"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON run configuration")
            ->required();
        sub->add_option("--seed", seed_flag, "override the config seed");
        sub->add_option("--out", out_flag, "output directory");
        sub->add_option("--threads", threads_flag, "worker threads, 0 = auto");
        sub->add_option("--mesh", mesh_flag, "override the mesh path");
        sub->add_option("--points", points_flag, "override the points path");
        sub->add_option("--threshold", threshold_flag,
                        "override the exceedance threshold");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        json cfg = load_config(config_path);
        if (!cfg.is_object()) throw BuildError("config: expected a JSON object");
        fs::path cfg_dir = fs::path(config_path).parent_path();

        // Flag overrides land in the config object itself, so one
        // validation and resolution path serves both sources.
        if (seed_flag) {
            if (*seed_flag < 0) throw BuildError("--seed: expected nonnegative");
            cfg["seed"] = *seed_flag;
        }
        if (mesh_flag) {
            std::string key = subs[0]->parsed() ? "out_mesh" : "mesh";
            cfg[key] = fs::absolute(*mesh_flag).string();
        }
        if (points_flag) cfg["points"] = fs::absolute(*points_flag).string();
        if (threshold_flag) cfg["threshold"] = *threshold_flag;

        fs::path out_dir = string_or(cfg, "out_dir", ".", "config");
        if (out_flag) out_dir = *out_flag;
        if (!out_dir.empty()) fs::create_directories(out_dir);

        if (subs[0]->parsed()) return cmd_mesh(cfg, cfg_dir, out_dir);
        if (subs[1]->parsed()) return cmd_simulate(cfg, cfg_dir, out_dir);
        if (subs[2]->parsed()) return cmd_fit(cfg, cfg_dir, out_dir, threads_flag);
        return cmd_riskmap(cfg, cfg_dir, out_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
