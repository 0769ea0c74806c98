#include "hydrolimit/hypocoercivity.hpp"

#include "hydrolimit/mode_spectral.hpp"
#include "hydrolimit/semigroup.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace hydrolimit::hypo {

namespace {

void check_eps(double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("hypocoercivity: eps must lie in (0, 1]");
}

double bracket_sq(const Vec3& k) { return 1.0 + k.squaredNorm(); }

/// Real antisymmetric a^T b - b^T a for row vectors a, b.
RealMatrix wedge(const RealMatrix& a, const RealMatrix& b) {
    return a.transpose() * b - b.transpose() * a;
}

const RealMatrix& velocity_gram(const velocity::VelocityBasis& basis, const analysis::VelocityNorm& v) {
    return basis.hstar_gram(v.s, v.gamma);
}

ComplexMatrix mode_operator(const collision::CollisionBackend& backend, double eps, const Vec3& k) {
    return (1.0 / (eps * eps)) * spectral::unit_mode_operator(backend, eps * k);
}

ComplexMatrix hermitian_part(const ComplexMatrix& a) { return 0.5 * (a + a.adjoint()); }

/// Smallest lambda with A x = lambda D x, D positive definite.
double min_generalized(const ComplexMatrix& a, const ComplexMatrix& d) {
    Eigen::LLT<ComplexMatrix> llt(d);
    if (llt.info() != Eigen::Success) throw NumericalError("hypocoercivity: denominator form is not positive");
    const ComplexMatrix l = llt.matrixL();
    const ComplexMatrix x = l.triangularView<Eigen::Lower>().solve(a);
    const ComplexMatrix c = l.triangularView<Eigen::Lower>().solve(ComplexMatrix(x.adjoint()));
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(c), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Equivalence extreme_eigenvalues(const ComplexMatrix& h) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

ComplexVector gaussian(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> nd;
    ComplexVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(nd(rng), nd(rng));
    return v;
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t n = 1; n < t.size(); ++n) s += 0.5 * (t[n] - t[n - 1]) * (y[n] + y[n - 1]);
    return s;
}

}  // namespace

void Deltas::validate() const {
    for (double d : {d1, d2, d3}) {
        if (!(std::isfinite(d) && d > 0.0))
            throw ConfigError("hypocoercivity: deltas must be positive (all-zero deltas give no macroscopic control)");
    }
}

Complex psi_functional(const velocity::VelocityBasis& basis, const Deltas& deltas,
                       const ComplexVector& f1, const ComplexVector& f2, const Vec3& k) {
    const ComplexVector m1 = f1 - velocity::project_p0(basis, f1);
    const ComplexVector m2 = f2 - velocity::project_p0(basis, f2);
    const auto h1 = velocity::moments(basis, f1);
    const auto h2 = velocity::moments(basis, f2);
    const ComplexVec3 M1 = velocity::moment_M(basis, m1);
    const ComplexVec3 M2 = velocity::moment_M(basis, m2);
    const ComplexMat3 T1 = velocity::moment_Theta(basis, m1) + h1.theta * ComplexMat3::Identity();
    const ComplexMat3 T2 = velocity::moment_Theta(basis, m2) + h2.theta * ComplexMat3::Identity();
    const ComplexVec3 kc = k.cast<Complex>();

    ComplexMat3 s1, s2;
    for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l) {
            s1(j, l) = 0.5 * (kc(j) * h1.u(l) + kc(l) * h1.u(j));
            s2(j, l) = 0.5 * (kc(j) * std::conj(h2.u(l)) + kc(l) * std::conj(h2.u(j)));
        }
    Complex c1 = 0.0, c2 = 0.0, c3 = 0.0;
    for (int j = 0; j < 3; ++j) {
        c1 += kc(j) * (h1.theta * std::conj(M2(j)) - M1(j) * std::conj(h2.theta));
        c3 += kc(j) * (h1.rho * std::conj(h2.u(j)) - h1.u(j) * std::conj(h2.rho));
        for (int l = 0; l < 3; ++l) c2 += s1(j, l) * std::conj(T2(j, l)) - s2(j, l) * T1(j, l);
    }
    return kI / bracket_sq(k) * (deltas.d1 * c1 + deltas.d2 * c2 + deltas.d3 * c3);
}

HypoForm::HypoForm(std::shared_ptr<const velocity::VelocityBasis> basis, Deltas deltas, double eps)
    : basis_(std::move(basis)), deltas_(deltas), eps_(eps) {
    deltas_.validate();
    check_eps(eps_);
    const auto n = Eigen::Index(basis_->dim());
    micro_ = RealMatrix::Identity(n, n) - basis_->p0_matrix();
}

ComplexMatrix HypoForm::psi_matrix(const Vec3& k) const {
    const RealMatrix& hydro = basis_->hydro_rows();
    const RealMatrix rho = hydro.row(0);
    const RealMatrix u = hydro.middleRows(1, 3);
    const RealMatrix theta = hydro.row(4);
    const RealMatrix m = basis_->heat_flux_rows() * micro_;
    const RealMatrix stress = basis_->stress_rows() * micro_;

    // Rows of (Theta[P0^perp f] + theta Id) k.
    RealMatrix sk = RealMatrix::Zero(3, micro_.cols());
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) sk.row(j) += k(i) * stress.row(3 * j + i);
        sk.row(j) += k(j) * theta;
    }
    const RealMatrix rm = k.transpose() * m;
    const RealMatrix ru = k.transpose() * u;
    const RealMatrix core = deltas_.d1 * wedge(rm, theta) + deltas_.d2 * wedge(sk, u) +
                            deltas_.d3 * wedge(ru, rho);
    return (kI / bracket_sq(k)) * core.cast<Complex>();
}

ComplexMatrix HypoForm::gram(const Vec3& k) const {
    const auto n = Eigen::Index(basis_->dim());
    return ComplexMatrix::Identity(n, n) + eps_ * psi_matrix(k);
}

Complex HypoForm::inner(const ComplexVector& f1, const ComplexVector& f2, const Vec3& k) const {
    return f2.dot(f1) + eps_ * psi_functional(*basis_, deltas_, f1, f2, k);
}

double HypoForm::norm_squared(const ComplexVector& f, const Vec3& k) const {
    return inner(f, f, k).real();
}

Equivalence equivalence_bounds(const HypoForm& form, const Vec3& k) {
    return extreme_eigenvalues(form.gram(k));
}

std::vector<Wavevector> canonical_wavevectors(int dim_x, double radius) {
    if (dim_x != 2 && dim_x != 3) throw ConfigError("canonical_wavevectors: dim_x must be 2 or 3");
    if (!(radius >= 0.0)) throw ConfigError("canonical_wavevectors: negative radius");
    const int r = int(std::floor(radius));
    const double r2 = radius * radius * (1 + 1e-12);
    std::vector<Wavevector> out;
    for (int a = 0; a <= r; ++a)
        for (int b = 0; b <= a; ++b)
            for (int c = 0; c <= (dim_x == 3 ? b : 0); ++c)
                if (double(a * a + b * b + c * c) <= r2) out.push_back(Wavevector{{a, b, c}});
    std::stable_sort(out.begin(), out.end(), [](const Wavevector& x, const Wavevector& y) {
        return x.norm_squared() < y.norm_squared();
    });
    return out;
}

bool CoercivityReport::passed(double c) const {
    return lambda3 > 0.0 && lambda3_exact > 0.0 && equivalence.lower >= 1.0 - c &&
           equivalence.upper <= 1.0 + c;
}

CoercivityReport verify_coercivity(const collision::CollisionBackend& backend, const Deltas& deltas,
                                   const CoercivityOptions& options) {
    deltas.validate();
    if (options.eps_list.empty()) throw ConfigError("verify_coercivity: empty eps list");
    for (double e : options.eps_list) check_eps(e);
    const auto& basis = backend.basis();
    const auto n = Eigen::Index(basis.dim());
    const RealMatrix p0 = basis.p0_matrix();
    const RealMatrix micro = RealMatrix::Identity(n, n) - p0;
    const RealMatrix q = collision::microscopic_basis(basis);
    const RealMatrix g = micro * velocity_gram(basis, options.vnorm) * micro;
    const auto ks = canonical_wavevectors(options.dim_x, options.k_radius);

    CoercivityReport report;
    report.deltas = deltas;
    report.sample_count = options.samples;
    std::vector<std::vector<double>> cell_ratios(ks.size() * options.eps_list.size());
    report.cells.resize(cell_ratios.size());

    parallel_for(report.cells.size(), [&](std::size_t idx) {
        const double eps = options.eps_list[idx / ks.size()];
        const Wavevector& kw = ks[idx % ks.size()];
        const Vec3 k = kw.as_real();
        const HypoForm form(backend.basis_ptr(), deltas, eps);
        const ComplexMatrix h = form.gram(k);
        const ComplexMatrix a = -hermitian_part(h * mode_operator(backend, eps, k));
        const ComplexMatrix d = (g / (eps * eps) + p0).cast<Complex>();

        CoercivityCell cell;
        cell.k = kw;
        cell.eps = eps;
        cell.exact_equivalence = extreme_eigenvalues(h);
        if (kw.is_zero()) {
            const ComplexMatrix qc = q.cast<Complex>();
            cell.lambda_exact = min_generalized(qc.adjoint() * a * qc, qc.adjoint() * d * qc);
        } else {
            cell.lambda_exact = min_generalized(a, d);
        }

        std::seed_seq seq{std::uint64_t(options.seed), std::uint64_t(idx)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> decade(-2.0, 2.0);
        auto& ratios = cell_ratios[idx];
        ratios.reserve(options.samples);
        cell.lambda_sampled = std::numeric_limits<double>::infinity();
        cell.sampled_equivalence = {std::numeric_limits<double>::infinity(), 0.0};
        for (std::size_t s = 0; s < options.samples; ++s) {
            // Balance the two parts of the denominator: ||P0^perp f|| ~ eps ||P0 f|| up to 10^{+-2}.
            ComplexVector f = micro.cast<Complex>() * gaussian(rng, n);
            f *= eps * std::pow(10.0, decade(rng)) / f.norm();
            if (!kw.is_zero()) {
                const ComplexVector m0 = p0.cast<Complex>() * gaussian(rng, n);
                f += m0 / m0.norm();
            }
            const double num = f.dot(a * f).real();
            const double den = f.dot(d * f).real();
            const double ratio = num / den;
            ratios.push_back(ratio);
            cell.lambda_sampled = std::min(cell.lambda_sampled, ratio);
            const double eq = f.dot(h * f).real() / f.squaredNorm();
            cell.sampled_equivalence.lower = std::min(cell.sampled_equivalence.lower, eq);
            cell.sampled_equivalence.upper = std::max(cell.sampled_equivalence.upper, eq);
        }
        if (options.samples == 0) {
            cell.lambda_sampled = cell.lambda_exact;
            cell.sampled_equivalence = cell.exact_equivalence;
        }
        report.cells[idx] = cell;
    });

    report.lambda3 = std::numeric_limits<double>::infinity();
    report.lambda3_exact = std::numeric_limits<double>::infinity();
    report.equivalence = {std::numeric_limits<double>::infinity(), 0.0};
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        const auto& c = report.cells[i];
        report.lambda3 = std::min(report.lambda3, c.lambda_sampled);
        report.lambda3_exact = std::min(report.lambda3_exact, c.lambda_exact);
        report.equivalence.lower = std::min(report.equivalence.lower, c.exact_equivalence.lower);
        report.equivalence.upper = std::max(report.equivalence.upper, c.exact_equivalence.upper);
        report.ratios.insert(report.ratios.end(), cell_ratios[i].begin(), cell_ratios[i].end());
    }
    return report;
}

TuneResult tune_deltas(const collision::CollisionBackend& backend, const CoercivityOptions& options,
                       double max_c) {
    const std::array<double, 4> grid{1e-1, 1e-2, 1e-3, 1e-4};
    CoercivityOptions exact = options;
    exact.samples = 0;

    TuneResult out;
    const TuneCandidate* best = nullptr;
    for (double d1 : grid)
        for (double d2 : grid)
            for (double d3 : grid) {
                const Deltas d{d1, d2, d3};
                if (!d.ordered()) continue;
                const auto r = verify_coercivity(backend, d, exact);
                TuneCandidate c;
                c.deltas = d;
                c.lambda3 = r.lambda3_exact;
                c.c = std::max(1.0 - r.equivalence.lower, r.equivalence.upper - 1.0);
                c.feasible = c.lambda3 > 0.0 && c.c <= max_c;
                out.candidates.push_back(c);
            }
    for (const auto& c : out.candidates)
        if (c.feasible && (!best || c.lambda3 > best->lambda3)) best = &c;
    if (!best) throw NumericalError("tune_deltas: no ordered delta triple gives lambda_3 > 0 with c <= max_c");
    out.best = best->deltas;
    out.report = verify_coercivity(backend, out.best, options);
    return out;
}

namespace {

struct ModeSeries {
    std::vector<double> t;
    std::vector<double> full, macro, micro;  ///< squared norms
};

/// Times of the two-segment grid.
std::vector<std::pair<double, std::size_t>> segments(double eps, const EstimateOptions& o) {
    if (!(o.T > 0.0) || o.fine_steps == 0 || o.coarse_steps == 0 || !(o.fine_span > 0.0))
        throw ConfigError("estimate: T, fine_span and step counts must be positive");
    const double t1 = std::min(o.T, o.fine_span * eps * eps);
    std::vector<std::pair<double, std::size_t>> out{{t1 / double(o.fine_steps), o.fine_steps}};
    if (t1 < o.T) out.push_back({(o.T - t1) / double(o.coarse_steps), o.coarse_steps});
    return out;
}

/// Squared norms of h along h_{n+1} = E h_n + dt phi_1(dt Lambda) S from h_0.
ModeSeries run_mode(const collision::CollisionBackend& backend, double eps, const Wavevector& k,
                    const ComplexVector& h0, const ComplexVector* source, const RealMatrix& g,
                    const EstimateOptions& o) {
    const auto& basis = backend.basis();
    const ComplexMatrix p0 = basis.p0_matrix().cast<Complex>();
    const ComplexMatrix lambda = mode_operator(backend, eps, k.as_real());
    ModeSeries s;
    ComplexVector h = h0;
    double t = 0.0;
    auto record = [&] {
        const ComplexVector a = p0 * h;
        const ComplexVector b = h - a;
        s.t.push_back(t);
        s.full.push_back(h.squaredNorm());
        s.macro.push_back(a.squaredNorm());
        s.micro.push_back(b.dot(g.cast<Complex>() * b).real());
    };
    record();
    for (const auto& [dt, steps] : segments(eps, o)) {
        const auto phi = semigroup::phi_matrices(dt * lambda);
        ComplexVector kick;
        if (source) kick = dt * (phi.phi1 * *source);
        for (std::size_t n = 0; n < steps; ++n) {
            h = phi.exp * h;
            if (source) h += kick;
            t += dt;
            record();
        }
    }
    return s;
}

EstimateReport accumulate(const std::vector<ModeSeries>& series, const ModeData& modes, double m,
                          double eps) {
    EstimateReport r;
    r.eps = eps;
    double linf = 0.0, macro = 0.0, micro = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double w = std::pow(bracket_sq(modes[i].first.as_real()), m);
        const auto& s = series[i];
        linf += w * *std::max_element(s.full.begin(), s.full.end());
        macro += w * trapezoid(s.t, s.macro);
        micro += w * trapezoid(s.t, s.micro);
    }
    r.linf = std::sqrt(linf);
    r.macro = std::sqrt(macro);
    r.micro = std::sqrt(micro) / eps;
    return r;
}

void check_modes(const velocity::VelocityBasis& basis, const ModeData& modes) {
    if (modes.empty()) throw ConfigError("estimate: no modes");
    for (const auto& [k, f] : modes)
        if (std::size_t(f.size()) != basis.dim()) throw ConfigError("estimate: coefficient length mismatch");
}

}  // namespace

EstimateReport data_estimate(const collision::CollisionBackend& backend, double eps,
                             const ModeData& data, double m, const EstimateOptions& options) {
    check_eps(eps);
    const auto& basis = backend.basis();
    check_modes(basis, data);
    const RealMatrix& g = velocity_gram(basis, options.vnorm);
    std::vector<ModeSeries> series(data.size());
    double input = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& [k, f] = data[i];
        if (k.is_zero() && velocity::project_p0(basis, f).norm() > 1e-12 * std::max(1.0, f.norm()))
            throw ConfigError("data_estimate: k = 0 data must be microscopic");
        input += std::pow(bracket_sq(k.as_real()), m) * f.squaredNorm();
    }
    parallel_for(data.size(), [&](std::size_t i) {
        series[i] = run_mode(backend, eps, data[i].first, data[i].second, nullptr, g, options);
    });
    EstimateReport r = accumulate(series, data, m, eps);
    r.input = std::sqrt(input);
    return r;
}

EstimateReport source_estimate(const collision::CollisionBackend& backend, double eps,
                               const ModeData& source, double m, const EstimateOptions& options) {
    check_eps(eps);
    const auto& basis = backend.basis();
    check_modes(basis, source);
    const RealMatrix& g = velocity_gram(basis, options.vnorm);
    const RealMatrix g_inv = g.inverse();
    std::vector<ModeSeries> series(source.size());
    double input = 0.0;
    for (const auto& [k, s] : source) {
        if (velocity::project_p0(basis, s).norm() > 1e-12 * std::max(1.0, s.norm()))
            throw ConfigError("source_estimate: the source must satisfy P0 S = 0");
        // Dual norm of (H^{s,*})'.
        input += std::pow(bracket_sq(k.as_real()), m) * s.dot(g_inv.cast<Complex>() * s).real();
    }
    parallel_for(source.size(), [&](std::size_t i) {
        const ComplexVector zero = ComplexVector::Zero(source[i].second.size());
        series[i] = run_mode(backend, eps, source[i].first, zero, &source[i].second, g, options);
    });
    EstimateReport r = accumulate(series, source, m, eps);
    r.input = std::sqrt(options.T * input);
    return r;
}

std::vector<double> flow_norm_profile(const collision::CollisionBackend& backend,
                                      const HypoForm& form, const Wavevector& k,
                                      const ComplexVector& f, double dt, std::size_t steps) {
    if (!(dt > 0.0)) throw ConfigError("flow_norm_profile: dt must be positive");
    const Vec3 kr = k.as_real();
    const ComplexMatrix e = semigroup::expm(dt * mode_operator(backend, form.eps(), kr));
    const ComplexMatrix h = form.gram(kr);
    std::vector<double> out;
    out.reserve(steps + 1);
    ComplexVector x = f;
    for (std::size_t n = 0; n <= steps; ++n) {
        out.push_back(std::sqrt(x.dot(h * x).real()));
        x = e * x;
    }
    return out;
}

}  // namespace hydrolimit::hypo
