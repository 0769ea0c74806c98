#include "hydrolimit/mode_spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace hydrolimit::spectral {

using collision::CollisionBackend;
using velocity::VelocityBasis;

std::string to_string(Branch b) {
    switch (b) {
        case Branch::NS: return "NS";
        case Branch::Heat: return "heat";
        case Branch::WavePlus: return "wave+";
        case Branch::WaveMinus: return "wave-";
    }
    return "?";
}

ComplexMatrix unit_mode_operator(const CollisionBackend& backend, const Vec3& xi) {
    const auto& basis = backend.basis();
    RealMatrix vk = RealMatrix::Zero(backend.L().rows(), backend.L().cols());
    for (int j = 0; j < 3; ++j) {
        if (xi(j) != 0.0) vk += xi(j) * basis.multiply_by_v(j);
    }
    ComplexMatrix out(vk.rows(), vk.cols());
    out.real() = backend.L();
    out.imag() = -vk;
    return out;
}

ComplexMatrix assemble_mode_operator(const CollisionBackend& backend, const Wavevector& k,
                                     double eps) {
    if (!(eps > 0.0)) throw ConfigError("assemble_mode_operator: eps must be positive");
    // Built literally as eps^{-2} (L - i V.(eps k)).
    return (1.0 / (eps * eps)) * unit_mode_operator(backend, eps * k.as_real());
}

ComplexMatrix HydroDecomposition::projector(Branch b) const {
    ComplexMatrix out;
    for (const auto& c : components) {
        if (c.branch != b) continue;
        if (out.size() == 0) {
            out = c.projector;
        } else {
            out += c.projector;
        }
    }
    return out;
}

Complex HydroDecomposition::lambda(Branch b) const {
    Complex sum{};
    int count = 0;
    for (const auto& c : components) {
        if (c.branch == b) {
            sum += c.lambda;
            ++count;
        }
    }
    return count ? sum / double(count) : Complex{};
}

namespace {

struct Sectors {
    std::map<int, ComplexMatrix> bases;  // m -> orthonormal columns
};

Sectors angular_sectors(const VelocityBasis& basis, const Vec3& e) {
    const auto dim = Eigen::Index(basis.dim());
    ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
    for (int a = 0; a < 3; ++a) {
        if (e(a) != 0.0) h += kI * e(a) * basis.angular_momentum(a).cast<Complex>();
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
    Sectors out;
    std::map<int, std::vector<Eigen::Index>> cols;
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double m = solver.eigenvalues()(i);
        const long rounded = std::lround(m);
        if (std::abs(m - double(rounded)) > 1e-8) {
            throw NumericalError("hydro_decomposition: angular momentum spectrum not integral");
        }
        cols[int(rounded)].push_back(i);
    }
    for (const auto& [m, idx] : cols) {
        ComplexMatrix q(dim, Eigen::Index(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) q.col(Eigen::Index(c)) = solver.eigenvectors().col(idx[c]);
        out.bases[m] = std::move(q);
    }
    return out;
}

struct BlockEigen {
    ComplexVector values;
    ComplexMatrix vectors;
};

}  // namespace

HydroDecomposition hydro_decomposition(const CollisionBackend& backend, const Vec3& xi) {
    const double r = xi.norm();
    if (!(r > 0.0)) throw ConfigError("hydro_decomposition: xi must be nonzero");
    const auto& basis = backend.basis();
    const Vec3 e = xi / r;
    const Sectors sectors = angular_sectors(basis, e);
    const ComplexMatrix op = unit_mode_operator(backend, xi);
    const ComplexMatrix p0 = basis.p0_matrix().cast<Complex>();

    HydroDecomposition out;
    out.xi = xi;
    double max_rest = -1e300;
    double min_hydro = 1e300;
    for (const auto& [m, q] : sectors.bases) {
        const ComplexMatrix block = q.adjoint() * op * q;
        const bool hydro_sector = std::abs(m) <= 1;
        Eigen::ComplexEigenSolver<ComplexMatrix> solver(block, hydro_sector);
        const ComplexVector& vals = solver.eigenvalues();
        const int wanted = m == 0 ? 3 : (std::abs(m) == 1 ? 1 : 0);
        std::vector<Eigen::Index> chosen;
        if (wanted > 0) {
            // Continuation from k = 0: hydrodynamic eigenvectors are the ones
            // carried by Ker L (largest overlap with P0).
            std::vector<std::pair<double, Eigen::Index>> overlap;
            for (Eigen::Index i = 0; i < vals.size(); ++i) {
                const ComplexVector x = q * solver.eigenvectors().col(i);
                overlap.emplace_back((p0 * x).norm() / x.norm(), i);
            }
            std::sort(overlap.begin(), overlap.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
            for (int c = 0; c < wanted; ++c) {
                if (overlap[std::size_t(c)].first < 0.5) {
                    std::ostringstream msg;
                    msg << "hydro_decomposition: branch lost at |xi| = " << r << " (sector " << m
                        << ", kernel overlap " << overlap[std::size_t(c)].first << ")";
                    throw NumericalError(msg.str());
                }
                chosen.push_back(overlap[std::size_t(c)].second);
            }
        }
        for (Eigen::Index i = 0; i < vals.size(); ++i) {
            if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) {
                min_hydro = std::min(min_hydro, vals(i).real());
            } else {
                max_rest = std::max(max_rest, vals(i).real());
            }
        }
        if (chosen.empty()) continue;
        Eigen::ComplexEigenSolver<ComplexMatrix> left(block.adjoint(), true);
        std::vector<HydroComponent> found;
        for (Eigen::Index i : chosen) {
            const Complex lam = vals(i);
            Eigen::Index best = 0;
            double best_dist = 1e300;
            for (Eigen::Index j = 0; j < left.eigenvalues().size(); ++j) {
                const double d = std::abs(left.eigenvalues()(j) - std::conj(lam));
                if (d < best_dist) {
                    best_dist = d;
                    best = j;
                }
            }
            const ComplexVector x = q * solver.eigenvectors().col(i);
            const ComplexVector y = q * left.eigenvectors().col(best);
            const Complex denom = y.dot(x);  // y^H x
            if (std::abs(denom) < 1e-12 * x.norm() * y.norm()) {
                throw NumericalError("hydro_decomposition: defective hydrodynamic eigenvalue");
            }
            HydroComponent c;
            c.sector = m;
            c.lambda = lam;
            c.projector = x * y.adjoint() / denom;
            c.branch = Branch::NS;
            found.push_back(std::move(c));
        }
        if (m == 0) {
            // Heat is the real eigenvalue, the waves carry +-i c|xi|.
            std::sort(found.begin(), found.end(),
                      [](const auto& a, const auto& b) { return a.lambda.imag() < b.lambda.imag(); });
            found[0].branch = Branch::WaveMinus;
            found[1].branch = Branch::Heat;
            found[2].branch = Branch::WavePlus;
        }
        for (auto& c : found) out.components.push_back(std::move(c));
    }
    out.max_re_rest = max_rest;
    out.gap = min_hydro - max_rest;
    return out;
}

BranchSpectrum eigen_branches(const CollisionBackend& backend, const std::vector<double>& radii,
                              const std::vector<Vec3>& directions) {
    BranchSpectrum spec;
    for (const auto& d : directions) spec.directions.push_back(d.normalized());
    for (std::size_t di = 0; di < spec.directions.size(); ++di) {
        for (double r : radii) {
            if (r < 0.0) throw ConfigError("eigen_branches: radii must be nonnegative");
            BranchSample s;
            s.direction = di;
            s.radius = r;
            if (r > 0.0) {
                const auto dec = hydro_decomposition(backend, r * spec.directions[di]);
                for (Branch b : kBranches) s.lambda[std::size_t(b)] = dec.lambda(b);
                s.gap = dec.gap;
            }
            spec.samples.push_back(s);
        }
    }
    return spec;
}

namespace {

// Least squares y ~ sum_j c_j x^{p_j}.
RealVector power_fit(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<int>& powers, double* residual) {
    RealMatrix a(Eigen::Index(x.size()), Eigen::Index(powers.size()));
    RealVector b(Eigen::Index(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < powers.size(); ++j) a(Eigen::Index(i), Eigen::Index(j)) = std::pow(x[i], powers[j]);
        b(Eigen::Index(i)) = y[i];
    }
    RealVector c = a.colPivHouseholderQr().solve(b);
    if (residual) *residual = std::max(*residual, (a * c - b).cwiseAbs().maxCoeff());
    return c;
}

}  // namespace

TransportFit fit_transport_coefficients(const BranchSpectrum& spectrum) {
    std::vector<double> r;
    std::array<std::vector<double>, 4> re;
    std::vector<double> im_plus;
    for (const auto& s : spectrum.samples) {
        if (s.radius <= 0.0) continue;
        r.push_back(s.radius);
        for (std::size_t b = 0; b < 4; ++b) re[b].push_back(-s.lambda[b].real());
        im_plus.push_back(s.lambda[std::size_t(Branch::WavePlus)].imag());
    }
    if (r.size() < 6) throw ConfigError("fit_transport_coefficients: need at least 6 nonzero radii");
    TransportFit fit;
    const std::vector<int> even{2, 4, 6};
    const std::vector<int> odd{1, 3, 5};
    fit.nu_ns = power_fit(r, re[0], even, &fit.fit_residual)(0);
    fit.nu_heat = power_fit(r, re[1], even, &fit.fit_residual)(0);
    const double nu_wp = power_fit(r, re[2], even, &fit.fit_residual)(0);
    const double nu_wm = power_fit(r, re[3], even, &fit.fit_residual)(0);
    fit.nu_wave = 0.5 * (nu_wp + nu_wm);
    fit.sound_speed = power_fit(r, im_plus, odd, &fit.fit_residual)(0);
    for (const auto& s : spectrum.samples) {
        if (s.radius <= 0.0) continue;
        const double r2 = s.radius * s.radius;
        const std::array<Complex, 4> leading{
            Complex(-fit.nu_ns * r2, 0.0), Complex(-fit.nu_heat * r2, 0.0),
            Complex(-fit.nu_wave * r2, fit.sound_speed * s.radius),
            Complex(-fit.nu_wave * r2, -fit.sound_speed * s.radius)};
        const std::array<double, 4> nus{fit.nu_ns, fit.nu_heat, fit.nu_wave, fit.nu_wave};
        for (std::size_t b = 0; b < 4; ++b) {
            const double g = std::abs(s.lambda[b] - leading[b]);
            fit.gamma_bound_ratio = std::max(fit.gamma_bound_ratio, g / (0.5 * nus[b] * r2));
        }
    }
    return fit;
}

ProjectorExpansion expand_projectors(const CollisionBackend& backend, const Vec3& direction,
                                     const ExpansionOptions& options) {
    const auto& radii = options.radii;
    if (radii.size() < 3) throw ConfigError("expand_projectors: need at least 3 radii");
    if (options.degree < 2 || std::size_t(options.degree) >= radii.size()) {
        throw ConfigError("expand_projectors: degree must be in [2, #radii)");
    }
    const Vec3 e = direction.normalized();
    const auto dim = Eigen::Index(backend.basis().dim());
    const double rmax = *std::max_element(radii.begin(), radii.end());
    const auto n = Eigen::Index(radii.size());
    const int deg = options.degree;
    RealMatrix a(n, deg + 1);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j <= deg; ++j) a(i, j) = std::pow(radii[std::size_t(i)] / rmax, j);
    const auto qr = a.colPivHouseholderQr();

    std::array<ComplexMatrix, 4> samples_flat;
    for (auto& s : samples_flat) s.resize(n, dim * dim);
    std::vector<std::array<ComplexMatrix, 4>> projectors(radii.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto dec = hydro_decomposition(backend, radii[std::size_t(i)] * e);
        for (Branch b : kBranches) {
            const ComplexMatrix p = dec.projector(b);
            projectors[std::size_t(i)][std::size_t(b)] = p;
            samples_flat[std::size_t(b)].row(i) = Eigen::Map<const ComplexVector>(p.data(), p.size()).transpose();
        }
    }
    ProjectorExpansion out;
    out.direction = e;
    for (Branch b : kBranches) {
        const auto bi = std::size_t(b);
        ComplexMatrix coef(deg + 1, dim * dim);
        for (Eigen::Index c = 0; c < dim * dim; ++c) {
            const RealVector re = qr.solve(samples_flat[bi].col(c).real());
            const RealVector im = qr.solve(samples_flat[bi].col(c).imag());
            coef.col(c) = re.cast<Complex>() + kI * im.cast<Complex>();
        }
        auto term = [&](int j) {
            const ComplexVector row = coef.row(j).transpose() / std::pow(rmax, j);
            return ComplexMatrix(Eigen::Map<const ComplexMatrix>(row.data(), dim, dim));
        };
        out.p0[bi] = term(0);
        out.p1[bi] = term(1);
        out.p2[bi] = term(2);
        for (std::size_t i = 0; i < radii.size(); ++i) {
            const double r = radii[i];
            ComplexMatrix model = out.p0[bi] + r * out.p1[bi] + r * r * out.p2[bi];
            const double scale = projectors[i][bi].norm();
            out.quadratic_residual =
                std::max(out.quadratic_residual, (projectors[i][bi] - model).norm() / scale);
            for (int j = 3; j <= deg; ++j) model += std::pow(r, j) * term(j);
            out.fit_residual = std::max(out.fit_residual, (projectors[i][bi] - model).norm() / scale);
        }
    }
    return out;
}

ComplexMatrix p0_ns_formula(const VelocityBasis& basis, const Vec3& e) {
    const Vec3 n = e.normalized();
    // Orthonormal pair spanning the plane orthogonal to e.
    Vec3 t1 = std::abs(n(0)) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    t1 = (t1 - t1.dot(n) * n).normalized();
    const Vec3 t2 = n.cross(t1);
    ComplexMatrix out = ComplexMatrix::Zero(Eigen::Index(basis.dim()), Eigen::Index(basis.dim()));
    for (const Vec3& t : {t1, t2}) {
        const ComplexVector x = basis.hydro_profile(0.0, t.cast<Complex>(), 0.0);
        out += x * x.adjoint();
    }
    return out;
}

ComplexMatrix p0_heat_formula(const VelocityBasis& basis) {
    // (2/5) |a><a| with a = (-1 + (|v|^2-3)/2) mu^{1/2}.
    const ComplexVector a = basis.hydro_profile(-1.0, ComplexVec3::Zero(), 1.0);
    return 0.4 * a * a.adjoint();
}

ComplexMatrix p0_wave_formula(const VelocityBasis& basis, const Vec3& e, int s) {
    const double c = std::sqrt(5.0 / 3.0);
    const Vec3 n = e.normalized();
    // theta coefficient 2/3 gives (|v|^2-3)/3.
    const ComplexVector a =
        basis.hydro_profile(1.0, (double(s) * c * n).cast<Complex>(), 2.0 / 3.0);
    return 0.3 * a * a.adjoint();
}

KappaReport determine_kappa(const CollisionBackend& backend, const KappaOptions& options) {
    KappaReport rep;
    rep.lambda2 = collision::coercivity_constant(backend);
    std::vector<ProjectorExpansion> expansions;
    for (const auto& d : options.directions) expansions.push_back(expand_projectors(backend, d));

    auto evaluate = [&](double r, double& gap, double& residual) {
        gap = 1e300;
        residual = 0.0;
        for (std::size_t di = 0; di < options.directions.size(); ++di) {
            const Vec3 e = options.directions[di].normalized();
            const auto dec = hydro_decomposition(backend, r * e);
            gap = std::min(gap, dec.gap);
            const auto& ex = expansions[di];
            for (Branch b : kBranches) {
                const auto bi = std::size_t(b);
                const ComplexMatrix p = dec.projector(b);
                const ComplexMatrix model = ex.p0[bi] + r * ex.p1[bi] + r * r * ex.p2[bi];
                residual = std::max(residual, (p - model).norm() / p.norm());
            }
        }
    };
    const int steps = int(std::floor(options.radius_max / options.radius_step + 1e-9));
    for (int i = 1; i <= steps; ++i) {
        const double r = i * options.radius_step;
        double gap = 0.0, residual = 0.0;
        try {
            evaluate(r, gap, residual);
        } catch (const NumericalError&) {
            break;
        }
        if (gap < rep.lambda2 / 4.0 || residual > options.expansion_tolerance) break;
        rep.certified_radius = r;
    }
    if (rep.certified_radius <= 0.0) {
        rep.kappa = options.fallback;
        rep.fallback_used = true;
    } else {
        rep.kappa = 0.5 * rep.certified_radius;
    }
    try {
        evaluate(rep.kappa, rep.gap_at_kappa, rep.expansion_residual_at_kappa);
    } catch (const NumericalError&) {
        rep.gap_at_kappa = 0.0;
        rep.expansion_residual_at_kappa = 1e300;
    }
    return rep;
}

// ---- expansion table ------------------------------------------------------------

ExpansionTable::ExpansionTable(std::shared_ptr<const CollisionBackend> backend, int dim_x,
                               ExpansionOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
    group_ = lattice_symmetries(dim_x);
    for (const auto& g : group_) maps_.push_back(velocity_representation(backend_->basis(), g));
}

std::shared_ptr<const ProjectorExpansion> ExpansionTable::at(const Wavevector& k) const {
    if (k.is_zero()) throw ConfigError("ExpansionTable: direction of the zero mode is undefined");
    int g = 0;
    for (int c = 0; c < 3; ++c) g = std::gcd(g, std::abs(k.k[c]));
    Wavevector prim{{k.k[0] / g, k.k[1] / g, k.k[2] / g}};
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(prim.k); it != cache_.end()) return it->second;
    const Wavevector best = canonical_direction(prim);
    auto cit = canonical_.find(best.k);
    if (cit == canonical_.end()) {
        auto ex = std::make_shared<ProjectorExpansion>(
            expand_projectors(*backend_, best.as_real(), options_));
        cit = canonical_.emplace(best.k, std::move(ex)).first;
    }
    std::size_t elem = 0;
    for (; elem < group_.size(); ++elem) {
        if (group_[elem].apply(best) == prim) break;
    }
    const auto& src = *cit->second;
    std::shared_ptr<const ProjectorExpansion> result;
    if (best == prim) {
        result = cit->second;
    } else {
        auto ex = std::make_shared<ProjectorExpansion>();
        const ComplexMatrix r = maps_[elem].cast<Complex>();
        ex->direction = group_[elem].matrix() * src.direction;
        ex->fit_residual = src.fit_residual;
        ex->quadratic_residual = src.quadratic_residual;
        for (std::size_t b = 0; b < 4; ++b) {
            ex->p0[b] = r * src.p0[b] * r.transpose();
            ex->p1[b] = r * src.p1[b] * r.transpose();
            ex->p2[b] = r * src.p2[b] * r.transpose();
        }
        result = ex;
    }
    cache_.emplace(prim.k, result);
    return result;
}

Wavevector ExpansionTable::canonical_direction(const Wavevector& k) const {
    int g = 0;
    for (int c = 0; c < 3; ++c) g = std::gcd(g, std::abs(k.k[c]));
    const Wavevector prim{{k.k[0] / g, k.k[1] / g, k.k[2] / g}};
    Wavevector best = prim;
    for (const auto& s : group_) {
        const Wavevector gk = s.apply(prim);
        if (gk.k > best.k) best = gk;
    }
    return best;
}

void ExpansionTable::prefetch(const SpatialGrid& grid) const {
    std::vector<Wavevector> todo;
    {
        std::lock_guard lock(mutex_);
        std::set<std::array<int, 3>> seen;
        for (const auto& k : grid.modes()) {
            if (k.is_zero()) continue;
            const Wavevector c = canonical_direction(k);
            if (canonical_.count(c.k) == 0 && seen.insert(c.k).second) todo.push_back(c);
        }
    }
    std::vector<std::shared_ptr<const ProjectorExpansion>> done(todo.size());
    parallel_for(todo.size(), [&](std::size_t i) {
        done[i] = std::make_shared<ProjectorExpansion>(
            expand_projectors(*backend_, todo[i].as_real(), options_));
    });
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < todo.size(); ++i) canonical_.emplace(todo[i].k, done[i]);
}

std::size_t ExpansionTable::computed_directions() const {
    std::lock_guard lock(mutex_);
    return canonical_.size();
}

}  // namespace hydrolimit::spectral
