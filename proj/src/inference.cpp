#include "coxmesh/inference.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <thread>

#include "coxmesh/errors.hpp"
#include "coxmesh/selected_inverse.hpp"

namespace coxmesh {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_logpdf(double x, double mean, double sd) {
    double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.9189385332046727; // log sqrt(2 pi)
}

// Log determinant from the lower Cholesky factor; compressed column j
// starts at its diagonal entry.
double logdet_from_llt(const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& llt) {
    Eigen::SparseMatrix<double> L = llt.matrixL();
    L.makeCompressed();
    double acc = 0.0;
    for (int j = 0; j < L.outerSize(); ++j)
        acc += std::log(L.valuePtr()[L.outerIndexPtr()[j]]);
    return 2.0 * acc;
}

Eigen::SparseMatrix<double> extended_prior(const Eigen::SparseMatrix<double>& Q_field,
                                           Eigen::Index n_fixed, double ridge) {
    Eigen::Index n = Q_field.rows();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(Q_field.nonZeros()) + n_fixed);
    for (int j = 0; j < Q_field.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(Q_field, j); it; ++it)
            trips.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index k = 0; k < n_fixed; ++k)
        trips.emplace_back(n + k, n + k, ridge);
    Eigen::SparseMatrix<double> Q(n + n_fixed, n + n_fixed);
    Q.setFromTriplets(trips.begin(), trips.end());
    Q.makeCompressed();
    return Q;
}

} // namespace

double HyperPrior::logpdf(const Hyper& h) const {
    return normal_logpdf(h.log_tau, mean_log_tau, sd_log_tau) +
           normal_logpdf(h.log_kappa2, mean_log_kappa2, sd_log_kappa2);
}

GaussianApprox fit_mode(const PseudoPoisson& pp, const SpdeModel& model,
                        const Hyper& hyper, double fixed_prior_prec) {
    const Eigen::Index n = pp.n_field;
    const Eigen::Index nf = pp.n_fixed;
    const Eigen::Index m = n + nf;
    if (pp.A.cols() != m)
        throw BuildError("pseudo data does not match the latent dimension");
    if (static_cast<Eigen::Index>(model.C_diag.size()) != n)
        throw BuildError("SPDE model dimension does not match the pseudo data");
    if (!(fixed_prior_prec > 0))
        throw BuildError("fixed-effect prior precision must be positive");

    SpdeModel mm = model;
    mm.log_tau = hyper.log_tau;
    mm.log_kappa2 = hyper.log_kappa2;
    Eigen::SparseMatrix<double> Q_field = precision(mm).full();

    double logdet_prior;
    {
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_f(Q_field);
        if (llt_f.info() != Eigen::Success)
            throw NotPositiveDefinite("prior precision is not positive definite");
        logdet_prior = logdet_from_llt(llt_f) + nf * std::log(fixed_prior_prec);
    }
    Eigen::SparseMatrix<double> Q_prior = extended_prior(Q_field, nf, fixed_prior_prec);

    auto objective = [&](const Eigen::VectorXd& x) {
        return loglik(pp, x) - 0.5 * x.dot(Q_prior * x);
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    double obj = objective(x);
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
    bool converged = false;
    int iters = 0;
    for (; iters < 100; ++iters) {
        GradHess gh = grad_hess(pp, x);
        Eigen::VectorXd grad = gh.gradient - Q_prior * x;
        Eigen::SparseMatrix<double> Q_post =
            Q_prior + Eigen::SparseMatrix<double>(
                          pp.A.transpose() * gh.hess_weights.asDiagonal() * pp.A);
        llt.compute(Q_post);
        if (llt.info() != Eigen::Success)
            throw NotPositiveDefinite("negative Hessian lost positive definiteness");
        if (grad.norm() <= 1e-8 * (1.0 + std::abs(obj))) {
            converged = true;
            break;
        }
        Eigen::VectorXd dx = llt.solve(grad);
        // Backtrack on any objective decrease; an overflowing step counts
        // as a decrease.
        bool moved = false;
        double step = 1.0;
        for (int h = 0; h < 40; ++h, step *= 0.5) {
            Eigen::VectorXd cand = x + step * dx;
            double cobj;
            try {
                cobj = objective(cand);
            } catch (const EtaOverflow&) {
                continue;
            }
            if (cobj > obj - 1e-13 * (1.0 + std::abs(obj))) {
                x = std::move(cand);
                obj = cobj;
                moved = true;
                break;
            }
        }
        if (!moved) throw NoConvergence("backtracking found no ascent step");
    }
    if (!converged) throw NoConvergence("mode search exceeded 100 Newton steps");

    GaussianApprox out;
    out.mode = x;
    out.newton_iters = iters;
    out.log_evidence = obj + 0.5 * logdet_prior - 0.5 * logdet_from_llt(llt);
    out.marginal_sd = selected_inverse_diagonal(llt).cwiseMax(0.0).cwiseSqrt();
    out.fixed_cov_cols.resize(m, nf);
    for (Eigen::Index j = 0; j < nf; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
        e[n + j] = 1.0;
        out.fixed_cov_cols.col(j) = llt.solve(e);
    }
    return out;
}

namespace {

struct LatticeKey {
    long i = 0; // log_tau / step
    long j = 0; // log_kappa2 / step
    bool operator<(const LatticeKey& o) const {
        return i != o.i ? i < o.i : j < o.j;
    }
    bool operator==(const LatticeKey& o) const { return i == o.i && j == o.j; }
};

struct EvalResult {
    double log_post = -std::numeric_limits<double>::infinity();
    GaussianApprox approx;
    bool ok = false;
};

} // namespace

GridFit explore_grid(const PseudoPoisson& pp, const SpdeModel& model,
                     const HyperPrior& prior, const GridSpec& spec,
                     double fixed_prior_prec, int threads) {
    if (!(spec.step > 0)) throw BuildError("grid step must be positive");
    if (!(spec.log_drop > 0)) throw BuildError("grid log drop must be positive");
    if (spec.max_points < 1) throw BuildError("grid point cap must be positive");
    int nthreads = threads > 0 ? threads
                               : std::max(1u, std::thread::hardware_concurrency());

    const double step = spec.step;
    auto hyper_of = [&](LatticeKey k) {
        return Hyper{k.i * step, k.j * step};
    };

    std::map<LatticeKey, EvalResult> cache;
    // Evaluates the batch concurrently; each fit is deterministic in its
    // hyperparameters alone, so thread count cannot change any value.
    auto eval_batch = [&](const std::vector<LatticeKey>& keys) {
        std::vector<LatticeKey> todo;
        for (const auto& k : keys)
            if (!cache.count(k)) todo.push_back(k);
        std::sort(todo.begin(), todo.end());
        todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
        if (todo.empty()) return;
        std::vector<EvalResult> slots(todo.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                std::size_t idx = next.fetch_add(1);
                if (idx >= todo.size()) return;
                Hyper h = hyper_of(todo[idx]);
                try {
                    GaussianApprox ga = fit_mode(pp, model, h, fixed_prior_prec);
                    slots[idx].log_post = ga.log_evidence + prior.logpdf(h);
                    slots[idx].approx = std::move(ga);
                    slots[idx].ok = true;
                } catch (const Error&) {
                    // numerically hopeless corner of the lattice, treated
                    // as zero posterior mass
                }
            }
        };
        int spawn = static_cast<int>(
            std::min<std::size_t>(static_cast<std::size_t>(nthreads), todo.size()));
        if (spawn <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        for (std::size_t idx = 0; idx < todo.size(); ++idx)
            cache.emplace(todo[idx], std::move(slots[idx]));
    };
    auto log_post_of = [&](LatticeKey k) { return cache.at(k).log_post; };
    auto neighbors = [](LatticeKey k) {
        return std::vector<LatticeKey>{
            {k.i + 1, k.j}, {k.i - 1, k.j}, {k.i, k.j + 1}, {k.i, k.j - 1}};
    };

    // Phase 1: pattern search for the lattice mode, anchored at the prior
    // mean so grids from different runs share the same lattice.
    LatticeKey cur{std::lround(prior.mean_log_tau / step),
                   std::lround(prior.mean_log_kappa2 / step)};
    eval_batch({cur});
    if (!cache.at(cur).ok)
        throw HyperOptFailure("mode search failed at the starting hyperparameters");
    for (int move = 0;; ++move) {
        if (move >= 200)
            throw HyperOptFailure("hyperparameter mode search did not settle");
        auto nbrs = neighbors(cur);
        eval_batch(nbrs);
        LatticeKey best = cur;
        double best_lp = log_post_of(cur);
        for (const auto& nb : nbrs) {
            if (log_post_of(nb) > best_lp) {
                best = nb;
                best_lp = log_post_of(nb);
            }
        }
        if (best == cur) break;
        cur = best;
    }

    // Phase 2: breadth-first expansion until the posterior has dropped
    // log_drop below the best point seen.
    std::map<LatticeKey, bool> included;
    included[cur] = true;
    double lp_max = log_post_of(cur);
    std::vector<LatticeKey> frontier{cur};
    while (!frontier.empty()) {
        std::vector<LatticeKey> candidates;
        for (const auto& k : frontier)
            for (const auto& nb : neighbors(k))
                if (!included.count(nb)) candidates.push_back(nb);
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()),
                         candidates.end());
        eval_batch(candidates);
        for (const auto& k : candidates)
            lp_max = std::max(lp_max, log_post_of(k));
        std::vector<LatticeKey> next;
        for (const auto& k : candidates) {
            if (log_post_of(k) >= lp_max - spec.log_drop) {
                included[k] = true;
                next.push_back(k);
            } else {
                included[k] = false;
            }
        }
        if (static_cast<int>(cache.size()) > 8 * spec.max_points)
            throw HyperOptFailure("hyperparameter grid exploration ran away");
        int kept = 0;
        for (const auto& kv : included) kept += kv.second ? 1 : 0;
        if (kept > spec.max_points)
            throw HyperOptFailure("hyperparameter grid exceeded its point cap");
        frontier = std::move(next);
    }

    GridFit fit;
    fit.grid.step = step;
    double wsum = 0.0;
    LatticeKey best = cur;
    for (const auto& kv : included) {
        if (!kv.second) continue;
        if (log_post_of(kv.first) > log_post_of(best)) best = kv.first;
    }
    fit.grid.mode = hyper_of(best);
    for (const auto& kv : included) {
        if (!kv.second) continue;
        EvalResult& r = cache.at(kv.first);
        GridPoint gp;
        gp.hyper = hyper_of(kv.first);
        gp.log_post = r.log_post;
        gp.weight = std::exp(r.log_post - log_post_of(best));
        wsum += gp.weight;
        fit.grid.points.push_back(gp);
        fit.approxs.push_back(std::move(r.approx));
    }
    for (auto& gp : fit.grid.points) gp.weight /= wsum;
    return fit;
}

PosteriorResult marginals(const HyperGrid& grid,
                          const std::vector<GaussianApprox>& approxs,
                          const Eigen::MatrixXd& covariate_at_vertices) {
    const std::size_t G = grid.points.size();
    if (G == 0 || approxs.size() != G)
        throw BuildError("grid and approximations do not align");
    const Eigen::Index m = approxs[0].mode.size();
    const Eigen::Index nf = covariate_at_vertices.cols();
    const Eigen::Index n = m - nf;
    if (n < 1 || covariate_at_vertices.rows() != n)
        throw BuildError("vertex covariates do not match the latent dimension");

    PosteriorResult out;
    out.grid = grid;
    out.comp_weight.resize(G);
    for (std::size_t g = 0; g < G; ++g) out.comp_weight[g] = grid.points[g].weight;

    out.comp_mean.resize(n, G);
    out.comp_sd.resize(n, G);
    for (std::size_t g = 0; g < G; ++g) {
        const GaussianApprox& ga = approxs[g];
        if (ga.mode.size() != m)
            throw BuildError("grid approximations have mixed dimensions");
        Eigen::VectorXd mean = ga.mode.head(n);
        Eigen::VectorXd var =
            ga.marginal_sd.head(n).array().square().matrix();
        if (nf > 0) {
            const Eigen::VectorXd beta = ga.mode.tail(nf);
            mean += covariate_at_vertices * beta;
            // var(z_v + x_v' beta) needs the fixed block and the
            // field-fixed cross covariances.
            Eigen::MatrixXd F = ga.fixed_cov_cols.bottomRows(nf);
            Eigen::MatrixXd C = ga.fixed_cov_cols.topRows(n);
            Eigen::MatrixXd XC = covariate_at_vertices; // n x nf
            var += ((XC * F).cwiseProduct(XC)).rowwise().sum();
            var += 2.0 * (C.cwiseProduct(XC)).rowwise().sum();
        }
        out.comp_mean.col(g) = mean;
        out.comp_sd.col(g) = var.cwiseMax(0.0).cwiseSqrt();
    }

    auto mixture_moments = [&](auto mean_at, auto sd_at, Eigen::VectorXd& mu,
                               Eigen::VectorXd& sd) {
        mu = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n);
        for (std::size_t g = 0; g < G; ++g) {
            double w = out.comp_weight[g];
            mu += w * mean_at(g);
            m2 += w * (sd_at(g).array().square() + mean_at(g).array().square())
                          .matrix();
        }
        sd = (m2 - mu.cwiseProduct(mu)).cwiseMax(0.0).cwiseSqrt();
    };
    mixture_moments([&](std::size_t g) { return approxs[g].mode.head(n); },
                    [&](std::size_t g) { return approxs[g].marginal_sd.head(n); },
                    out.field_mean, out.field_sd);
    mixture_moments([&](std::size_t g) { return out.comp_mean.col(g); },
                    [&](std::size_t g) { return out.comp_sd.col(g); },
                    out.predictor_mean, out.predictor_sd);

    for (Eigen::Index j = 0; j < nf; ++j) {
        FixedEffectSummary fe;
        std::vector<double> mus(G), sds(G);
        double mix_mean = 0.0, mix_m2 = 0.0;
        for (std::size_t g = 0; g < G; ++g) {
            mus[g] = approxs[g].mode[n + j];
            sds[g] = approxs[g].marginal_sd[n + j];
            mix_mean += out.comp_weight[g] * mus[g];
            mix_m2 += out.comp_weight[g] * (sds[g] * sds[g] + mus[g] * mus[g]);
        }
        fe.mean = mix_mean;
        fe.sd = std::sqrt(std::max(0.0, mix_m2 - mix_mean * mix_mean));
        double lo = mus[0] - 6 * sds[0], hi = mus[0] + 6 * sds[0];
        for (std::size_t g = 1; g < G; ++g) {
            lo = std::min(lo, mus[g] - 6 * sds[g]);
            hi = std::max(hi, mus[g] + 6 * sds[g]);
        }
        const int npts = 401;
        fe.density.reserve(npts);
        for (int k = 0; k < npts; ++k) {
            double x = lo + (hi - lo) * k / (npts - 1);
            double d = 0.0;
            for (std::size_t g = 0; g < G; ++g)
                d += out.comp_weight[g] * std::exp(normal_logpdf(x, mus[g], sds[g]));
            fe.density.emplace_back(x, d);
        }
        auto cdf = [&](double x) {
            double c = 0.0;
            for (std::size_t g = 0; g < G; ++g)
                c += out.comp_weight[g] * normal_cdf((x - mus[g]) / sds[g]);
            return c;
        };
        auto quantile = [&](double q) {
            double a = lo - 1.0, b = hi + 1.0;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (a + b);
                (cdf(mid) < q ? a : b) = mid;
            }
            return 0.5 * (a + b);
        };
        fe.q025 = quantile(0.025);
        fe.q50 = quantile(0.5);
        fe.q975 = quantile(0.975);
        out.fixed_effects.push_back(std::move(fe));
    }

    // Hyper marginals: weights collapsed onto each lattice coordinate,
    // rectangle-rule densities so step * sum(density) = 1.
    auto hyper_marginal = [&](auto coord) {
        std::map<long, double> acc;
        for (const auto& gp : grid.points)
            acc[std::lround(coord(gp.hyper) / grid.step)] += gp.weight;
        DensityCurve curve;
        for (const auto& kv : acc)
            curve.emplace_back(kv.first * grid.step, kv.second / grid.step);
        return curve;
    };
    out.marg_log_tau = hyper_marginal([](const Hyper& h) { return h.log_tau; });
    out.marg_log_kappa2 =
        hyper_marginal([](const Hyper& h) { return h.log_kappa2; });
    return out;
}

Eigen::VectorXd exceedance_map(const PosteriorResult& result, double threshold) {
    const Eigen::Index n = result.comp_mean.rows();
    const Eigen::Index G = result.comp_mean.cols();
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    for (Eigen::Index g = 0; g < G; ++g) {
        double w = result.comp_weight[g];
        for (Eigen::Index v = 0; v < n; ++v) {
            double sd = result.comp_sd(v, g);
            double mean = result.comp_mean(v, g);
            if (sd > 0)
                p[v] += w * normal_cdf((mean - threshold) / sd);
            else if (mean > threshold)
                p[v] += w;
        }
    }
    return p;
}

} // namespace coxmesh
