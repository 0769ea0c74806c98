#include "hydrolimit/collision.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace hydrolimit::collision {

using velocity::VelocityBasis;

std::string to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::BGK: return "bgk";
        case BackendKind::MaxwellCutoff: return "maxwell";
        case BackendKind::SyntheticGamma: return "synthetic";
    }
    return "unknown";
}

CollisionBackend::CollisionBackend(BackendKind kind, std::shared_ptr<const VelocityBasis> basis,
                                   RealMatrix l_matrix, RealMatrix input_map,
                                   RealMatrix output_tensor, std::string fingerprint)
    : kind_(kind),
      basis_(std::move(basis)),
      l_(std::move(l_matrix)),
      input_map_(std::move(input_map)),
      output_tensor_(std::move(output_tensor)),
      fingerprint_(std::move(fingerprint)) {
    const auto dim = Eigen::Index(basis_->dim());
    const Eigen::Index r = input_map_.rows();
    if (l_.rows() != dim || l_.cols() != dim || input_map_.cols() != dim ||
        output_tensor_.rows() != dim || output_tensor_.cols() != r * r) {
        throw ConfigError("CollisionBackend: inconsistent operator shapes");
    }
}

ComplexMatrix CollisionBackend::symmetric_pairs(const ComplexVector& f1,
                                                const ComplexVector& f2) const {
    const ComplexVector a1 = input_map_.cast<Complex>() * f1;
    const ComplexVector a2 = input_map_.cast<Complex>() * f2;
    const Eigen::Index r = a1.size();
    ComplexMatrix s(r, r);
    for (Eigen::Index j = 0; j < r; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) s(i, j) = 0.5 * (a1(i) * a2(j) + a2(i) * a1(j));
    }
    return s;
}

ComplexVector CollisionBackend::gamma_from_pairs(const ComplexMatrix& pairs) const {
    const Eigen::Map<const ComplexVector> flat(pairs.data(), pairs.size());
    return output_tensor_ * flat;
}

ComplexVector CollisionBackend::gamma(const ComplexVector& f1, const ComplexVector& f2) const {
    if (static_cast<std::size_t>(f1.size()) != basis_->dim() ||
        static_cast<std::size_t>(f2.size()) != basis_->dim()) {
        throw ConfigError("gamma: coefficient length does not match the basis");
    }
    return gamma_from_pairs(symmetric_pairs(f1, f2));
}

ComplexVector gamma_sym(const CollisionBackend& backend, const ComplexVector& f1,
                        const ComplexVector& f2) {
    return backend.gamma(f1, f2);
}

namespace {

// Symmetrize the pair index of a dim x r^2 tensor.
RealMatrix symmetrize_pairs(const RealMatrix& w, Eigen::Index r) {
    RealMatrix out = w;
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = i + 1; j < r; ++j) {
            const RealVector avg = 0.5 * (w.col(i + r * j) + w.col(j + r * i));
            out.col(i + r * j) = avg;
            out.col(j + r * i) = avg;
        }
    }
    return out;
}

// Polynomials p_i with kernel_basis column i = p_i mu^{1/2}.
std::array<std::function<double(const Vec3&)>, 5> kernel_polynomials() {
    return {[](const Vec3&) { return 1.0; }, [](const Vec3& v) { return v(0); },
            [](const Vec3& v) { return v(1); }, [](const Vec3& v) { return v(2); },
            [](const Vec3& v) { return (v.squaredNorm() - 3.0) / std::sqrt(6.0); }};
}

// Columns (i,j): coefficients of p_i p_j mu^{1/2}, exact for max_degree >= 4.
RealMatrix kernel_products(const VelocityBasis& basis) {
    const auto polys = kernel_polynomials();
    RealMatrix out(Eigen::Index(basis.dim()), 25);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            out.col(i + 5 * j) =
                basis.project([&](const Vec3& v) { return polys[i](v) * polys[j](v); });
        }
    }
    return out;
}

std::string fingerprint_of(const std::string& stem, const VelocityBasis& basis) {
    std::ostringstream s;
    s << stem << ";deg=" << basis.max_degree();
    return s.str();
}

}  // namespace

CollisionBackend bgk_backend(std::shared_ptr<const VelocityBasis> basis, double nu) {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw ConfigError("bgk_backend: nu must be positive");
    const auto dim = Eigen::Index(basis->dim());
    const RealMatrix& p0 = basis->p0_matrix();
    const RealMatrix id = RealMatrix::Identity(dim, dim);
    RealMatrix l = nu * (p0 - id);
    // The second-order term of the local Maxwellian is (Id - P0)[h^2/2 mu^{1/2}]
    // with h = P0 f / mu^{1/2}; the model collision frequency multiplies it.
    RealMatrix w = 0.5 * nu * (id - p0) * kernel_products(*basis);
    RealMatrix a = basis->kernel_basis().transpose();
    std::ostringstream fp;
    fp.precision(17);
    fp << "bgk;nu=" << nu;
    CollisionBackend b(BackendKind::BGK, basis, std::move(l), std::move(a),
                       symmetrize_pairs(w, 5), fingerprint_of(fp.str(), *basis));
    b.params["nu"] = nu;
    b.set_continuity_constant(estimate_bilinear_norm(b, 1));
    return b;
}

namespace {

double legendre(int l, double x) {
    if (l == 0) return 1.0;
    double p0 = 1.0, p1 = x;
    for (int n = 1; n < l; ++n) {
        const double p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

// Gauss-Legendre nodes/weights on [-1, 1] by Golub-Welsch.
std::pair<RealVector, RealVector> gauss_legendre(int order) {
    RealMatrix jacobi = RealMatrix::Zero(order, order);
    for (int i = 1; i < order; ++i) {
        const double beta = i / std::sqrt(4.0 * i * i - 1.0);
        jacobi(i, i - 1) = jacobi(i - 1, i) = beta;
    }
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(jacobi);
    RealVector w = 2.0 * solver.eigenvectors().row(0).transpose().array().square();
    return {solver.eigenvalues(), w};
}

}  // namespace

double maxwell_eigenvalue(int r, int l, int quad_order) {
    if (r < 0 || l < 0) throw ConfigError("maxwell_eigenvalue: indices must be nonnegative");
    const auto [x, w] = gauss_legendre(quad_order);
    const double b = 1.0 / (2.0 * std::numbers::pi);
    const int p = 2 * r + l;
    double sum = 0.0;
    for (int q = 0; q < quad_order; ++q) {
        const double theta = 0.5 * std::numbers::pi * (x(q) + 1.0);
        const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
        const double bracket_term = std::pow(c, p) * legendre(l, c) + std::pow(s, p) * legendre(l, s) -
                                    1.0 - (r == 0 && l == 0 ? 1.0 : 0.0);
        sum += w(q) * std::sin(theta) * b * bracket_term;
    }
    return 2.0 * std::numbers::pi * sum * 0.5 * std::numbers::pi;
}

CollisionBackend maxwell_cutoff_backend(std::shared_ptr<const VelocityBasis> basis,
                                        int angular_quad_order) {
    if (angular_quad_order < 16) throw ConfigError("maxwell_cutoff_backend: quadrature order < 16");
    const auto dim = Eigen::Index(basis->dim());
    const int n = basis->max_degree();
    std::map<std::pair<int, int>, double> table;
    for (int l = 0; l <= n; ++l) {
        for (int r = 0; 2 * r + l <= n; ++r) {
            const double coarse = maxwell_eigenvalue(r, l, angular_quad_order);
            const double fine = maxwell_eigenvalue(r, l, 2 * angular_quad_order);
            if (std::abs(coarse - fine) > 1e-6) {
                std::ostringstream msg;
                msg << "maxwell_cutoff_backend: angular quadrature not converged for (r,l)=(" << r
                    << "," << l << "): " << coarse << " vs " << fine;
                throw NumericalError(msg.str());
            }
            table[{r, l}] = fine;
        }
    }
    // J^2 = sum_a J_a^2 has eigenvalue -l(l+1) on the Burnett functions of order l.
    RealMatrix j2 = RealMatrix::Zero(dim, dim);
    for (int a = 0; a < 3; ++a) j2 += basis->angular_momentum(a) * basis->angular_momentum(a);
    RealMatrix l_matrix = RealMatrix::Zero(dim, dim);
    for (int d = 0; d <= n; ++d) {
        std::vector<Eigen::Index> block;
        for (std::size_t i = 0; i < basis->dim(); ++i) {
            if (basis->indices()[i].degree() == d) block.push_back(Eigen::Index(i));
        }
        const auto m = Eigen::Index(block.size());
        RealMatrix sub(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j) sub(i, j) = j2(block[i], block[j]);
        Eigen::SelfAdjointEigenSolver<RealMatrix> solver(0.5 * (sub + sub.transpose()));
        RealMatrix local = RealMatrix::Zero(m, m);
        for (Eigen::Index e = 0; e < m; ++e) {
            const double ll = -solver.eigenvalues()(e);
            const int l = int(std::lround((-1.0 + std::sqrt(1.0 + 4.0 * ll)) / 2.0));
            if (std::abs(l * (l + 1.0) - ll) > 1e-8 || (d - l) % 2 != 0) {
                throw NumericalError("maxwell_cutoff_backend: angular momentum spectrum not integral");
            }
            const RealVector v = solver.eigenvectors().col(e);
            local += table.at({(d - l) / 2, l}) * v * v.transpose();
        }
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j) l_matrix(block[i], block[j]) = local(i, j);
    }
    l_matrix = 0.5 * (l_matrix + l_matrix.transpose()).eval();
    // Model quadratic term: -(1/2) L applied to the product of the hydrodynamic profiles.
    RealMatrix w = -0.5 * l_matrix * kernel_products(*basis);
    RealMatrix a = basis->kernel_basis().transpose();
    std::ostringstream fp;
    fp << "maxwell;q=" << angular_quad_order;
    CollisionBackend b(BackendKind::MaxwellCutoff, basis, std::move(l_matrix), std::move(a),
                       symmetrize_pairs(w, 5), fingerprint_of(fp.str(), *basis));
    b.params["angular_quad_order"] = angular_quad_order;
    for (const auto& [rl, value] : table) {
        b.params["lambda_" + std::to_string(rl.first) + "_" + std::to_string(rl.second)] = value;
    }
    b.set_continuity_constant(estimate_bilinear_norm(b, 1));
    return b;
}

CollisionBackend synthetic_gamma_backend(std::shared_ptr<const VelocityBasis> basis,
                                         std::uint64_t seed, double scale, double nu) {
    if (!(nu > 0.0)) throw ConfigError("synthetic_gamma_backend: nu must be positive");
    const auto dim = Eigen::Index(basis->dim());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale / double(dim));
    RealMatrix w(dim, dim * dim);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < dim; ++i) w(i, j) = g(rng);
    const RealMatrix id = RealMatrix::Identity(dim, dim);
    w = (id - basis->p0_matrix()) * w;
    RealMatrix l = nu * (basis->p0_matrix() - id);
    std::ostringstream fp;
    fp.precision(17);
    fp << "synthetic;seed=" << seed << ";scale=" << scale << ";nu=" << nu;
    CollisionBackend b(BackendKind::SyntheticGamma, basis, std::move(l), id,
                       symmetrize_pairs(w, dim), fingerprint_of(fp.str(), *basis));
    b.params["seed"] = double(seed);
    b.params["scale"] = scale;
    b.params["nu"] = nu;
    b.set_continuity_constant(estimate_bilinear_norm(b, seed + 1));
    return b;
}

double estimate_bilinear_norm(const CollisionBackend& backend, std::uint64_t seed, int restarts,
                              int iterations) {
    const RealMatrix& a = backend.input_map();
    const RealMatrix& w = backend.output_tensor();
    const Eigen::Index r = a.rows();
    const auto dim = a.cols();
    // Gamma(., f2) = (sum_j (A f2)_j W_j) A, W_j the j-th block of r columns.
    auto partial = [&](const RealVector& f2) {
        const RealVector a2 = a * f2;
        RealMatrix m = RealMatrix::Zero(dim, r);
        for (Eigen::Index j = 0; j < r; ++j) m += a2(j) * w.middleCols(r * j, r);
        return RealMatrix(m * a);
    };
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    double best = 0.0;
    for (int attempt = 0; attempt < restarts; ++attempt) {
        RealVector f2(dim);
        for (auto& x : f2) x = g(rng);
        f2.normalize();
        double sigma = 0.0;
        for (int it = 0; it < iterations; ++it) {
            Eigen::JacobiSVD<RealMatrix> svd(partial(f2), Eigen::ComputeThinV);
            const RealVector f1 = svd.matrixV().col(0);
            const double next = svd.singularValues()(0);
            f2 = f1;
            if (std::abs(next - sigma) <= 1e-12 * std::max(1.0, next)) {
                sigma = next;
                break;
            }
            sigma = next;
        }
        best = std::max(best, sigma);
    }
    return best;
}

RealMatrix microscopic_basis(const VelocityBasis& basis) {
    const auto dim = Eigen::Index(basis.dim());
    RealMatrix q = RealMatrix::Zero(dim, dim - 5);
    Eigen::Index col = 0;
    std::array<Eigen::Index, 3> diag{};
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const auto& n = basis.indices()[i].n;
        const int deg = basis.indices()[i].degree();
        if (deg <= 1) continue;
        if (deg == 2 && (n[0] == 2 || n[1] == 2 || n[2] == 2)) {
            diag[n[0] == 2 ? 0 : (n[1] == 2 ? 1 : 2)] = Eigen::Index(i);
            continue;
        }
        q(Eigen::Index(i), col++) = 1.0;
    }
    q(diag[0], col) = 1.0 / std::sqrt(2.0);
    q(diag[1], col++) = -1.0 / std::sqrt(2.0);
    q(diag[0], col) = 1.0 / std::sqrt(6.0);
    q(diag[1], col) = 1.0 / std::sqrt(6.0);
    q(diag[2], col++) = -2.0 / std::sqrt(6.0);
    return q;
}

FluxFunctions solve_flux_functions(const CollisionBackend& backend) {
    const auto& basis = backend.basis();
    const RealMatrix q = microscopic_basis(basis);
    const RealMatrix restricted = q.transpose() * backend.L() * q;
    Eigen::FullPivLU<RealMatrix> lu(restricted);
    if (!lu.isInvertible()) {
        throw NumericalError("solve_flux_functions: L is singular on (Ker L)^perp");
    }
    FluxFunctions out;
    auto solve = [&](const RealVector& rhs) {
        RealVector c = q * lu.solve(q.transpose() * rhs);
        out.residual = std::max(out.residual, (backend.L() * c - rhs).norm());
        return c;
    };
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const RealVector rhs = basis.project([i, j](const Vec3& v) {
                return (i == j ? v.squaredNorm() / 3.0 : 0.0) - v(i) * v(j);
            });
            out.phi[3 * i + j] = solve(rhs);
        }
        const RealVector rhs =
            basis.project([i](const Vec3& v) { return v(i) * (2.5 - 0.5 * v.squaredNorm()); });
        out.psi[i] = solve(rhs);
    }
    if (out.residual > 1e-10) {
        std::ostringstream msg;
        msg << "solve_flux_functions: residual " << out.residual << " exceeds 1e-10";
        throw NumericalError(msg.str());
    }
    return out;
}

Viscosities viscosities(const CollisionBackend& backend, const FluxFunctions& flux) {
    Viscosities v;
    for (const auto& phi : flux.phi) v.nu_ns -= phi.dot(backend.L() * phi);
    for (const auto& psi : flux.psi) v.nu_heat -= psi.dot(backend.L() * psi);
    v.nu_ns /= 10.0;
    v.nu_heat *= 2.0 / 15.0;
    if (!(v.nu_ns > 0.0) || !(v.nu_heat > 0.0)) {
        throw NumericalError("viscosities: nonpositive transport coefficient");
    }
    return v;
}

Viscosities viscosities(const CollisionBackend& backend) {
    return viscosities(backend, solve_flux_functions(backend));
}

ConservationReport check_conservation(const CollisionBackend& backend, std::size_t sample_count,
                                      std::uint64_t seed, double threshold) {
    const auto& basis = backend.basis();
    RealMatrix rows(5, Eigen::Index(basis.dim()));
    rows.row(0) = basis.moment_row([](const Vec3&) { return 1.0; }).transpose();
    for (int j = 0; j < 3; ++j)
        rows.row(j + 1) = basis.moment_row([j](const Vec3& v) { return v(j); }).transpose();
    rows.row(4) = basis.moment_row([](const Vec3& v) { return v.squaredNorm(); }).transpose();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    ConservationReport report;
    report.samples = sample_count;
    for (std::size_t s = 0; s < sample_count; ++s) {
        ComplexVector f(Eigen::Index(basis.dim()));
        for (auto& c : f) c = {g(rng), g(rng)};
        const ComplexVector out = backend.gamma(f, f);
        const double residual = (rows.cast<Complex>() * out).cwiseAbs().maxCoeff();
        if (residual > report.max_residual) {
            report.max_residual = residual;
            report.worst_sample = s;
        }
    }
    report.passed = report.max_residual <= threshold;
    return report;
}

RealVector l_eigenvalues(const CollisionBackend& backend) {
    const RealMatrix sym = 0.5 * (backend.L() + backend.L().transpose());
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

int kernel_dimension(const CollisionBackend& backend, double tol) {
    const RealVector ev = l_eigenvalues(backend);
    return int((ev.array().abs() < tol).count());
}

double coercivity_constant(const CollisionBackend& backend, int s, double gamma) {
    const auto& basis = backend.basis();
    const RealMatrix q = microscopic_basis(basis);
    const RealMatrix sym = 0.5 * (backend.L() + backend.L().transpose());
    const RealMatrix a = -(q.transpose() * sym * q);
    double lambda2 = 0.0;
    if (s == 0 && gamma == 0.0) {
        Eigen::SelfAdjointEigenSolver<RealMatrix> solver(a, Eigen::EigenvaluesOnly);
        lambda2 = solver.eigenvalues()(0);
    } else {
        const RealMatrix g = q.transpose() * basis.hstar_gram(s, gamma) * q;
        Eigen::GeneralizedSelfAdjointEigenSolver<RealMatrix> solver(a, g, Eigen::EigenvaluesOnly);
        lambda2 = solver.eigenvalues()(0);
    }
    if (!(lambda2 > 0.0)) throw NumericalError("coercivity_constant: nonpositive spectral gap");
    return lambda2;
}

}  // namespace hydrolimit::collision
