#include "coxmesh/fem.hpp"

#include <cmath>
#include <vector>

#include "coxmesh/errors.hpp"

namespace coxmesh {

Eigen::SparseMatrix<double> SparseSym::full() const {
    Eigen::SparseMatrix<double> f = upper.selfadjointView<Eigen::Upper>();
    return f;
}

Eigen::VectorXd SparseSym::multiply(const Eigen::VectorXd& x) const {
    return upper.selfadjointView<Eigen::Upper>() * x;
}

std::vector<double> assemble_mass_lumped(const TriMesh& mesh) {
    // Shares the dual-cell computation so the two are equal bit for bit.
    return dual_cell_areas(mesh);
}

SparseSym assemble_stiffness(const TriMesh& mesh) {
    double ext = 0.0;
    for (const auto& v : mesh.vertices)
        for (int k = 0; k < 3; ++k) ext = std::max(ext, std::abs(v[k]));
    double area_floor = 1e-14 * (2.0 * ext) * (2.0 * ext);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.n_triangles() * 6);
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        double area = mesh.triangle_area(t);
        if (area < area_floor)
            throw DegenerateTriangle("triangle " + std::to_string(t) + " is degenerate");
        // Edge vectors opposite each vertex; for linear elements
        // G_local[i][j] = (e_i . e_j) / (4 area), valid in the triangle's
        // own plane for both planar and embedded spherical meshes.
        Vec3 e[3];
        for (int i = 0; i < 3; ++i) {
            const Vec3& a = mesh.vertices[tri[(i + 2) % 3]];
            const Vec3& b = mesh.vertices[tri[(i + 1) % 3]];
            e[i] = {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
        }
        for (int i = 0; i < 3; ++i) {
            for (int j = i; j < 3; ++j) {
                double dot = e[i][0] * e[j][0] + e[i][1] * e[j][1] + e[i][2] * e[j][2];
                double g = dot / (4.0 * area);
                int vi = tri[i], vj = tri[j];
                if (vi <= vj)
                    trips.emplace_back(vi, vj, g);
                else
                    trips.emplace_back(vj, vi, g);
            }
        }
    }
    SparseSym G;
    G.upper.resize(static_cast<Eigen::Index>(mesh.n_vertices()),
                   static_cast<Eigen::Index>(mesh.n_vertices()));
    G.upper.setFromTriplets(trips.begin(), trips.end());
    return G;
}

SpdeModel make_spde(const TriMesh& mesh, int alpha) {
    if (alpha != 1 && alpha != 2)
        throw UnsupportedSmoothness("alpha must be 1 or 2");
    SpdeModel model;
    model.alpha = alpha;
    model.C_diag = assemble_mass_lumped(mesh);
    model.G = assemble_stiffness(mesh);
    return model;
}

SparseSym precision(const SpdeModel& model) {
    const Eigen::Index n = model.G.n();
    if (static_cast<Eigen::Index>(model.C_diag.size()) != n)
        throw AssemblyError("C and G dimension mismatch");
    for (double c : model.C_diag)
        if (!(c > 0)) throw AssemblyError("non-positive lumped mass entry");

    double tau2 = std::exp(2.0 * model.log_tau);
    double kappa2 = std::exp(model.log_kappa2);

    Eigen::SparseMatrix<double> K = model.G.full();
    for (Eigen::Index i = 0; i < n; ++i) K.coeffRef(i, i) += kappa2 * model.C_diag[i];

    SparseSym Q;
    if (model.alpha == 1) {
        Q.upper = (tau2 * K).triangularView<Eigen::Upper>();
    } else {
        Eigen::VectorXd cinv(n);
        for (Eigen::Index i = 0; i < n; ++i) cinv[i] = 1.0 / model.C_diag[i];
        Eigen::SparseMatrix<double> KCK = K * cinv.asDiagonal() * K;
        Q.upper = (tau2 * KCK).triangularView<Eigen::Upper>();
    }
    Q.upper.makeCompressed();
    return Q;
}

std::vector<double> matern_correlation_oracle(const MaternParams& params,
                                              const std::vector<double>& distances) {
    if (!(params.kappa > 0) || !(params.sigma2 > 0) || !(params.nu > 0))
        throw UnsupportedSmoothness("Matern parameters must be positive");
    std::vector<double> out;
    out.reserve(distances.size());
    for (double h : distances) {
        if (h < 0) throw UnsupportedSmoothness("negative distance");
        double x = params.kappa * h;
        double c;
        if (params.nu == 0.5) {
            c = std::exp(-x);
        } else if (params.nu == 1.0) {
            c = x == 0 ? 1.0 : x * std::cyl_bessel_k(1.0, x);
        } else if (params.nu == 1.5) {
            c = std::exp(-x) * (1.0 + x);
        } else {
            throw UnsupportedSmoothness("only nu in {1/2, 1, 3/2} is supported");
        }
        out.push_back(c);
    }
    return out;
}

namespace {

// Free-space covariance of the 1D alpha = 3/2 model (nu = 1), normalized
// to unit marginal variance.
double r_nu1(double kappa, double h) {
    double x = kappa * std::abs(h);
    if (x == 0) return 1.0;
    if (x > 700) return 0.0;
    return x * std::cyl_bessel_k(1.0, x);
}

} // namespace

std::vector<double> neumann_variance_1d_oracle(double kappa,
                                               const std::vector<double>& points) {
    if (!(kappa > 0)) throw UnsupportedSmoothness("kappa must be positive");

    // First sum: 2 sum'_{k>=0} r(2k), k = 0 halved. Terms decay like
    // exp(-2 kappa k); stop once the tail is negligible.
    double first = r_nu1(kappa, 0.0); // the halved k=0 term, doubled
    for (int k = 1; k < 1000000; ++k) {
        double term = 2.0 * r_nu1(kappa, 2.0 * k);
        first += term;
        if (term < 1e-13 && k > 2) break;
    }

    std::vector<double> out;
    out.reserve(points.size());
    for (double s : points) {
        double second = r_nu1(kappa, 2.0 * std::abs(s)); // k = 0
        for (int k = 1; k < 1000000; ++k) {
            double tp = r_nu1(kappa, 2.0 * std::abs(s - k));
            double tm = r_nu1(kappa, 2.0 * std::abs(s + k));
            second += tp + tm;
            if (tp < 1e-13 && tm < 1e-13 && k > 2) break;
        }
        out.push_back(first + second);
    }
    return out;
}

} // namespace coxmesh
