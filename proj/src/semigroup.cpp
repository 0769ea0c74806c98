#include "hydrolimit/semigroup.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace hydrolimit::semigroup {

using collision::CollisionBackend;
using spectral::Branch;

// ---- cutoff ---------------------------------------------------------------------

namespace {

constexpr double kBumpMass = 0.4439938161680793;  // int_{-1}^{1} exp(-1/(1-s^2)) ds

double bump(double s) { return std::abs(s) >= 1.0 ? 0.0 : std::exp(-1.0 / (1.0 - s * s)); }

struct Legendre {
    RealVector nodes, weights;
};

const Legendre& legendre64() {
    static const Legendre rule = [] {
        const int n = 64;
        RealMatrix j = RealMatrix::Zero(n, n);
        for (int i = 1; i < n; ++i) {
            const double b = i / std::sqrt(4.0 * i * i - 1.0);
            j(i, i - 1) = j(i - 1, i) = b;
        }
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(j);
        Legendre out;
        out.nodes = es.eigenvalues();
        out.weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
        return out;
    }();
    return rule;
}

}  // namespace

double chi(double x) {
    const double a = std::abs(x);
    if (a <= 0.5) return 1.0;
    if (a >= 1.0) return 0.0;
    // 1 - (int_{-1}^{y} bump) / mass with y = 4a - 3 in (-1, 1).
    const double y = 4.0 * a - 3.0;
    const auto& gl = legendre64();
    const double half = 0.5 * (y + 1.0);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < gl.nodes.size(); ++i) {
        acc += gl.weights(i) * bump(-1.0 + half * (gl.nodes(i) + 1.0));
    }
    return std::clamp(1.0 - half * acc / kBumpMass, 0.0, 1.0);
}

// ---- matrix functions -----------------------------------------------------------

PhiMatrices phi_matrices(const ComplexMatrix& a) {
    if (a.rows() != a.cols()) throw ConfigError("phi_matrices: square matrix required");
    const Eigen::Index n = a.rows();
    const double norm1 = n == 0 ? 0.0 : a.cwiseAbs().colwise().sum().maxCoeff();
    int s = 0;
    if (norm1 > 0.5) s = int(std::ceil(std::log2(norm1 / 0.5)));
    const ComplexMatrix x = a / std::ldexp(1.0, s);
    const ComplexMatrix id = ComplexMatrix::Identity(n, n);

    // phi_2(X) = sum_k X^k / (k+2)! by Horner; phi_1 = I + X phi_2; e = I + X phi_1.
    constexpr int kTerms = 18;
    std::array<double, kTerms + 3> inv_fact{};
    inv_fact[0] = 1.0;
    for (int i = 1; i < kTerms + 3; ++i) inv_fact[i] = inv_fact[i - 1] / i;
    ComplexMatrix p2 = inv_fact[kTerms + 2] * id;
    for (int k = kTerms - 1; k >= 0; --k) {
        p2 = x * p2;
        p2.diagonal().array() += inv_fact[k + 2];
    }
    ComplexMatrix p1 = x * p2;
    p1.diagonal().array() += 1.0;
    ComplexMatrix e = x * p1;
    e.diagonal().array() += 1.0;

    // phi_2(2z) = (phi_1(z)^2 + 2 phi_2(z)) / 4, phi_1(2z) = (e^z + 1) phi_1(z) / 2.
    for (int i = 0; i < s; ++i) {
        ComplexMatrix np2 = 0.25 * (p1 * p1 + 2.0 * p2);
        ComplexMatrix np1 = 0.5 * (e * p1 + p1);
        ComplexMatrix ne = e * e;
        p2 = std::move(np2);
        p1 = std::move(np1);
        e = std::move(ne);
    }
    return {std::move(e), std::move(p1), std::move(p2)};
}

ComplexMatrix expm(const ComplexMatrix& a) { return phi_matrices(a).exp; }

std::array<Complex, 3> phi_scalars(Complex z) {
    if (std::abs(z) < 0.5) {
        // Series for phi_2, then the recurrences phi_1 = 1 + z phi_2, e = 1 + z phi_1.
        Complex p2 = 0.0;
        double fact = 1.0;
        for (int k = 0; k < 22; ++k) fact *= (k == 0 ? 2.0 : double(k + 2));
        for (int k = 21; k >= 0; --k) {
            p2 = p2 * z + 1.0 / fact;
            fact /= double(k + 2);
        }
        const Complex p1 = 1.0 + z * p2;
        return {1.0 + z * p1, p1, p2};
    }
    const Complex e = std::exp(z);
    const Complex p1 = (e - 1.0) / z;
    return {e, p1, (p1 - 1.0) / z};
}

ComplexMatrix mode_propagator(const CollisionBackend& backend, double eps, const Wavevector& k,
                              double t) {
    if (t < 0.0) throw ConfigError("mode_propagator: t must be nonnegative");
    return expm(t * spectral::assemble_mode_operator(backend, k, eps));
}

ComplexVector propagate(const CollisionBackend& backend, double eps, const Wavevector& k,
                        double t, const ComplexVector& f) {
    if (static_cast<std::size_t>(f.size()) != backend.basis().dim()) {
        throw ConfigError("propagate: coefficient length does not match the basis");
    }
    if (t == 0.0) return f;
    return mode_propagator(backend, eps, k, t) * f;
}

// ---- propagator set -------------------------------------------------------------

namespace {

SymmetryReduction identity_reduction(const SpatialGrid& grid, std::size_t vdim) {
    SymmetryReduction red;
    red.group.push_back(LatticeSymmetry{});
    red.velocity_maps.push_back(RealMatrix::Identity(Eigen::Index(vdim), Eigen::Index(vdim)));
    red.velocity_perms.push_back(SignedPermutation::from_matrix(red.velocity_maps.back()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        red.canonical_modes.push_back(i);
        red.representative.push_back(i);
        red.element.push_back(0);
    }
    return red;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

constexpr char kCacheMagic[8] = {'H', 'L', 'P', 'R', 'O', 'P', '1', '\n'};

}  // namespace

PropagatorSet::PropagatorSet(std::shared_ptr<const CollisionBackend> backend,
                             std::shared_ptr<const SpatialGrid> grid, double eps, double h)
    : PropagatorSet(std::move(backend), std::move(grid), eps, h, Deferred{}) {
    build();
}

PropagatorSet::PropagatorSet(std::shared_ptr<const CollisionBackend> backend,
                             std::shared_ptr<const SpatialGrid> grid, double eps, double h,
                             Deferred)
    : backend_(std::move(backend)), grid_(std::move(grid)), eps_(eps), h_(h) {
    if (!(eps_ > 0.0)) throw ConfigError("PropagatorSet: eps must be positive");
    if (!(h_ > 0.0)) throw ConfigError("PropagatorSet: step must be positive");
    symmetry_ = reduce_by_symmetry(*grid_, backend_->basis());
    const RealMatrix& l = backend_->L();
    for (const auto& r : symmetry_.velocity_maps) {
        if ((r * l * r.transpose() - l).cwiseAbs().maxCoeff() > 1e-12) {
            use_symmetry_ = false;
            break;
        }
    }
    if (!use_symmetry_) symmetry_ = identity_reduction(*grid_, backend_->basis().dim());
}

void PropagatorSet::build() {
    canonical_.assign(symmetry_.canonical_modes.size(), Canonical{});
    parallel_for(canonical_.size(), [&](std::size_t c) {
        const Wavevector& k = grid_->mode(symmetry_.canonical_modes[c]);
        const PhiMatrices p =
            phi_matrices(h_ * spectral::assemble_mode_operator(*backend_, k, eps_));
        canonical_[c].e = p.exp;
        canonical_[c].w0 = h_ * (p.phi1 - p.phi2);
        canonical_[c].w1 = h_ * p.phi2;
    });
}

std::string PropagatorSet::cache_key() const {
    std::ostringstream os;
    os << std::setprecision(17) << backend_->fingerprint() << "|eps=" << eps_
       << "|d=" << grid_->dim_x() << "|K=" << grid_->max_mode() << "|h=" << h_
       << "|sym=" << use_symmetry_;
    return os.str();
}

const ComplexMatrix& PropagatorSet::pick(const Canonical& c, Op op, ComplexMatrix& scratch) const {
    switch (op) {
        case Op::Exp: return c.e;
        case Op::W0: return c.w0;
        case Op::W1: return c.w1;
        case Op::Phi1: scratch = c.w0 + c.w1; return scratch;
    }
    return c.e;
}

ComplexVector PropagatorSet::apply(Op op, std::size_t mode, const ComplexVector& x) const {
    const auto& c = canonical_[symmetry_.representative.at(mode)];
    const auto& perm = symmetry_.velocity_perms[symmetry_.element[mode]];
    ComplexMatrix scratch;
    const ComplexMatrix& m = pick(c, op, scratch);
    ComplexVector a, b;
    perm.apply_transpose(x, a);
    b.noalias() = m * a;
    perm.apply(b, a);
    return a;
}

ComplexMatrix PropagatorSet::apply_all(Op op, const ComplexMatrix& f) const {
    if (f.cols() != Eigen::Index(grid_->size())) {
        throw ConfigError("PropagatorSet: field does not match the grid");
    }
    ComplexMatrix out(f.rows(), f.cols());
    parallel_for(grid_->size(), [&](std::size_t i) {
        out.col(Eigen::Index(i)) = apply(op, i, f.col(Eigen::Index(i)));
    });
    return out;
}

ComplexMatrix PropagatorSet::matrix(Op op, std::size_t mode) const {
    const auto& c = canonical_[symmetry_.representative.at(mode)];
    const ComplexMatrix r = symmetry_.velocity_maps[symmetry_.element[mode]].cast<Complex>();
    ComplexMatrix scratch;
    return r * pick(c, op, scratch) * r.transpose();
}

void PropagatorSet::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("PropagatorSet: cannot write " + path);
    const std::string key = cache_key();
    const std::uint64_t key_len = key.size();
    const std::uint64_t count = canonical_.size();
    const std::uint64_t dim = backend_->basis().dim();
    out.write(kCacheMagic, sizeof kCacheMagic);
    out.write(reinterpret_cast<const char*>(&key_len), sizeof key_len);
    out.write(key.data(), std::streamsize(key.size()));
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    const auto bytes = std::streamsize(dim * dim * sizeof(Complex));
    for (const auto& c : canonical_) {
        out.write(reinterpret_cast<const char*>(c.e.data()), bytes);
        out.write(reinterpret_cast<const char*>(c.w0.data()), bytes);
        out.write(reinterpret_cast<const char*>(c.w1.data()), bytes);
    }
}

bool PropagatorSet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    char magic[sizeof kCacheMagic];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + sizeof magic, kCacheMagic)) return false;
    std::uint64_t key_len = 0, count = 0, dim = 0;
    in.read(reinterpret_cast<char*>(&key_len), sizeof key_len);
    if (!in || key_len > (1u << 20)) return false;
    std::string key(key_len, '\0');
    in.read(key.data(), std::streamsize(key_len));
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    if (!in || key != cache_key() || count != symmetry_.canonical_modes.size() ||
        dim != backend_->basis().dim()) {
        return false;
    }
    std::vector<Canonical> loaded(count);
    const auto n = Eigen::Index(dim);
    const auto bytes = std::streamsize(dim * dim * sizeof(Complex));
    for (auto& c : loaded) {
        c.e.resize(n, n);
        c.w0.resize(n, n);
        c.w1.resize(n, n);
        in.read(reinterpret_cast<char*>(c.e.data()), bytes);
        in.read(reinterpret_cast<char*>(c.w0.data()), bytes);
        in.read(reinterpret_cast<char*>(c.w1.data()), bytes);
    }
    if (!in) return false;
    canonical_ = std::move(loaded);
    return true;
}

std::shared_ptr<const PropagatorSet> PropagatorSet::load_or_build(
    std::shared_ptr<const CollisionBackend> backend, std::shared_ptr<const SpatialGrid> grid,
    double eps, double h, const std::string& cache_dir) {
    std::shared_ptr<PropagatorSet> set(
        new PropagatorSet(std::move(backend), std::move(grid), eps, h, Deferred{}));
    if (cache_dir.empty()) {
        set->build();
        return set;
    }
    std::filesystem::create_directories(cache_dir);
    std::ostringstream name;
    name << "prop_" << std::hex << std::setw(16) << std::setfill('0') << fnv1a(set->cache_key())
         << ".bin";
    const std::string path = (std::filesystem::path(cache_dir) / name.str()).string();
    if (set->load(path)) return set;
    set->build();
    set->save(path);
    return set;
}

FieldTrajectory free_flow(const PropagatorSet& props, const ComplexMatrix& f0, std::size_t steps) {
    FieldTrajectory out;
    out.grid = props.grid_ptr();
    out.dt = props.step();
    out.states.reserve(steps + 1);
    out.states.push_back(f0);
    for (std::size_t n = 0; n < steps; ++n) {
        out.states.push_back(props.apply_all(PropagatorSet::Op::Exp, out.states.back()));
    }
    return out;
}

FieldTrajectory duhamel(const PropagatorSet& props, const FieldTrajectory& source,
                        double prefactor, std::size_t start, const DuhamelOptions& options) {
    if (std::abs(source.dt - props.step()) > 1e-14 * props.step()) {
        throw ConfigError("duhamel: source time step differs from the propagator step");
    }
    const std::size_t n_steps = source.steps();
    if (source.states.empty()) throw ConfigError("duhamel: empty source");
    const Eigen::Index vdim = source.states.front().rows();
    const Eigen::Index modes = source.states.front().cols();

    double smax = 0.0;
    for (const auto& s : source.states) smax = std::max(smax, s.norm());
    if (smax > 0.0 && n_steps >= 2) {
        double curv = 0.0;
        for (std::size_t n = std::max<std::size_t>(start, 1); n + 1 <= n_steps; ++n) {
            curv = std::max(curv,
                            (source.states[n + 1] - 2.0 * source.states[n] + source.states[n - 1])
                                    .norm() / smax);
        }
        if (curv > options.max_relative_curvature) {
            const int substeps = int(std::ceil(std::sqrt(curv / options.max_relative_curvature)));
            throw ConfigError("duhamel: source under-resolved on this time grid; use at least " +
                              std::to_string(substeps) + " substeps per step");
        }
    }

    FieldTrajectory out;
    out.grid = source.grid;
    out.dt = source.dt;
    out.states.assign(n_steps + 1, ComplexMatrix::Zero(vdim, modes));
    parallel_for(std::size_t(modes), [&](std::size_t i) {
        const auto col = Eigen::Index(i);
        const ComplexMatrix e = props.matrix(PropagatorSet::Op::Exp, i);
        const ComplexMatrix w0 = prefactor * props.matrix(PropagatorSet::Op::W0, i);
        const ComplexMatrix w1 = prefactor * props.matrix(PropagatorSet::Op::W1, i);
        ComplexVector acc = ComplexVector::Zero(vdim);
        for (std::size_t n = start; n < n_steps; ++n) {
            acc = e * acc + w0 * source.states[n].col(col) + w1 * source.states[n + 1].col(col);
            out.states[n + 1].col(col) = acc;
        }
    });
    return out;
}

// ---- decomposition --------------------------------------------------------------

namespace {

bool is_wave(Branch b) { return b == Branch::WavePlus || b == Branch::WaveMinus; }

struct FlatData {
    double cutoff = 0.0;
    std::optional<spectral::HydroDecomposition> dec;
};

FlatData flat_data(const CollisionBackend& backend, double kappa, double eps, const Wavevector& k) {
    FlatData d;
    if (k.is_zero()) {
        d.cutoff = 1.0;
        return d;
    }
    d.cutoff = chi(eps * k.norm() / kappa);
    if (d.cutoff > 0.0) d.dec = spectral::hydro_decomposition(backend, eps * k.as_real());
    return d;
}

}  // namespace

SemigroupDecomposition::SemigroupDecomposition(
    std::shared_ptr<const CollisionBackend> backend,
    std::shared_ptr<const spectral::ExpansionTable> expansions, double kappa,
    collision::Viscosities viscosities)
    : backend_(std::move(backend)),
      expansions_(std::move(expansions)),
      kappa_(kappa),
      visc_(viscosities) {
    if (!(kappa_ > 0.0)) throw ConfigError("SemigroupDecomposition: kappa must be positive");
}

ComplexMatrix SemigroupDecomposition::u_nsf(const Wavevector& k, double t) const {
    const auto n = Eigen::Index(backend_->basis().dim());
    if (k.is_zero()) return ComplexMatrix::Zero(n, n);
    const Vec3 e = k.as_real().normalized();
    const double k2 = k.norm_squared();
    return std::exp(-visc_.nu_ns * k2 * t) * spectral::p0_ns_formula(backend_->basis(), e) +
           std::exp(-visc_.nu_heat * k2 * t) * spectral::p0_heat_formula(backend_->basis());
}

ModeParts SemigroupDecomposition::parts(double eps, const Wavevector& k, double t) const {
    const auto n = Eigen::Index(backend_->basis().dim());
    ModeParts p;
    p.full = mode_propagator(*backend_, eps, k, t);
    p.flat = ComplexMatrix::Zero(n, n);
    p.wave = ComplexMatrix::Zero(n, n);
    const FlatData d = flat_data(*backend_, kappa_, eps, k);
    if (k.is_zero()) {
        p.flat = backend_->basis().p0_matrix().cast<Complex>();
    } else if (d.dec) {
        for (const auto& c : d.dec->components) {
            const ComplexMatrix term = d.cutoff * std::exp(c.lambda * (t / (eps * eps))) * c.projector;
            p.flat += term;
            if (is_wave(c.branch)) p.wave += term;
        }
    }
    p.nsf = u_nsf(k, t);
    p.sharp = p.full - p.flat;
    p.remainder = p.flat - p.nsf - p.wave;
    return p;
}

FieldTrajectory SemigroupDecomposition::u_nsf_flow(std::shared_ptr<const SpatialGrid> grid,
                                                   const ComplexMatrix& f0, double dt,
                                                   std::size_t steps) const {
    FieldTrajectory out;
    out.grid = grid;
    out.dt = dt;
    out.states.assign(steps + 1, ComplexMatrix::Zero(f0.rows(), f0.cols()));
    const auto& basis = backend_->basis();
    const ComplexMatrix heat = spectral::p0_heat_formula(basis);
    parallel_for(grid->size(), [&](std::size_t i) {
        const Wavevector& k = grid->mode(i);
        if (k.is_zero()) return;
        const auto col = Eigen::Index(i);
        const ComplexVector a = spectral::p0_ns_formula(basis, k.as_real().normalized()) * f0.col(col);
        const ComplexVector b = heat * f0.col(col);
        const double k2 = k.norm_squared();
        for (std::size_t n = 0; n <= steps; ++n) {
            const double t = dt * double(n);
            out.states[n].col(col) =
                std::exp(-visc_.nu_ns * k2 * t) * a + std::exp(-visc_.nu_heat * k2 * t) * b;
        }
    });
    return out;
}

namespace {

/// acc_{n+1} = E acc_n + W0 s_n + W1 s_{n+1} for one scalar rate z/h.
struct ScalarWeights {
    Complex e, w0, w1;
};

ScalarWeights scalar_weights(Complex rate, double h) {
    const auto p = phi_scalars(rate * h);
    return {p[0], h * (p[1] - p[2]), h * p[2]};
}

}  // namespace

FieldTrajectory SemigroupDecomposition::psi_nsf(const FieldTrajectory& source,
                                                std::size_t start) const {
    const auto& grid = *source.grid;
    expansions_->prefetch(grid);
    const std::size_t n_steps = source.steps();
    const Eigen::Index vdim = source.states.front().rows();
    FieldTrajectory out;
    out.grid = source.grid;
    out.dt = source.dt;
    out.states.assign(n_steps + 1, ComplexMatrix::Zero(vdim, Eigen::Index(grid.size())));
    parallel_for(grid.size(), [&](std::size_t i) {
        const Wavevector& k = grid.mode(i);
        if (k.is_zero()) return;
        const auto col = Eigen::Index(i);
        const auto ex = expansions_->at(k);
        const double kn = k.norm();
        const std::array<std::pair<Branch, double>, 2> branches{
            std::pair{Branch::NS, visc_.nu_ns}, std::pair{Branch::Heat, visc_.nu_heat}};
        for (const auto& [b, nu] : branches) {
            const ComplexMatrix p1 = kn * ex->p1[std::size_t(b)];
            const ScalarWeights w = scalar_weights(-nu * kn * kn, source.dt);
            ComplexVector acc = ComplexVector::Zero(vdim);
            ComplexVector s_prev = p1 * source.states[start].col(col);
            for (std::size_t n = start; n < n_steps; ++n) {
                ComplexVector s_next = p1 * source.states[n + 1].col(col);
                acc = w.e * acc + w.w0 * s_prev + w.w1 * s_next;
                out.states[n + 1].col(col) += acc;
                s_prev = std::move(s_next);
            }
        }
    });
    return out;
}

PsiParts SemigroupDecomposition::psi_parts(const PropagatorSet& props,
                                           const FieldTrajectory& source) const {
    const double eps = props.eps();
    PsiParts parts;
    parts.full = duhamel(props, source, 1.0 / eps);
    parts.nsf = psi_nsf(source);
    const auto& grid = *source.grid;
    const std::size_t n_steps = source.steps();
    const Eigen::Index vdim = source.states.front().rows();
    const double h = source.dt;
    auto zero_like = [&] {
        FieldTrajectory z;
        z.grid = source.grid;
        z.dt = h;
        z.states.assign(n_steps + 1, ComplexMatrix::Zero(vdim, Eigen::Index(grid.size())));
        return z;
    };
    parts.flat = zero_like();
    parts.wave = zero_like();
    const ComplexMatrix p0 = backend_->basis().p0_matrix().cast<Complex>();
    parallel_for(grid.size(), [&](std::size_t i) {
        const Wavevector& k = grid.mode(i);
        const auto col = Eigen::Index(i);
        const FlatData d = flat_data(*backend_, kappa_, eps, k);
        auto accumulate = [&](const ComplexMatrix& proj, Complex lambda, bool wave) {
            const ScalarWeights w = scalar_weights(lambda / (eps * eps), h);
            const Complex scale = d.cutoff / eps;
            ComplexVector acc = ComplexVector::Zero(vdim);
            for (std::size_t n = 0; n < n_steps; ++n) {
                acc = w.e * acc + w.w0 * (proj * source.states[n].col(col)) +
                      w.w1 * (proj * source.states[n + 1].col(col));
                parts.flat.states[n + 1].col(col) += scale * acc;
                if (wave) parts.wave.states[n + 1].col(col) += scale * acc;
            }
        };
        if (k.is_zero()) {
            accumulate(p0, 0.0, false);
        } else if (d.dec) {
            for (const auto& c : d.dec->components) accumulate(c.projector, c.lambda, is_wave(c.branch));
        }
    });
    parts.sharp = zero_like();
    parts.remainder = zero_like();
    for (std::size_t n = 0; n <= n_steps; ++n) {
        parts.sharp.states[n] = parts.full.states[n] - parts.flat.states[n];
        parts.remainder.states[n] =
            parts.flat.states[n] - parts.nsf.states[n] - parts.wave.states[n];
    }
    return parts;
}

SharpDecayFit sharp_decay_rate(const SemigroupDecomposition& decomposition, double eps,
                               const std::vector<Wavevector>& ks,
                               const std::vector<double>& times) {
    if (ks.empty() || times.size() < 2) {
        throw ConfigError("sharp_decay_rate: need modes and at least two times");
    }
    const auto& backend = decomposition.backend();
    SharpDecayFit fit;
    fit.times = times;
    fit.sup_norms.assign(times.size(), 0.0);
    for (const auto& k : ks) {
        const FlatData d = flat_data(backend, decomposition.kappa(), eps, k);
        const ComplexMatrix lam = spectral::assemble_mode_operator(backend, k, eps);
        for (std::size_t j = 0; j < times.size(); ++j) {
            ComplexMatrix sharp = expm(times[j] * lam);
            if (k.is_zero()) {
                sharp -= backend.basis().p0_matrix().cast<Complex>();
            } else if (d.dec) {
                for (const auto& c : d.dec->components) {
                    sharp -= d.cutoff * std::exp(c.lambda * (times[j] / (eps * eps))) * c.projector;
                }
            }
            const Eigen::JacobiSVD<ComplexMatrix> svd(sharp);
            fit.sup_norms[j] = std::max(fit.sup_norms[j], svd.singularValues()(0));
        }
    }
    const auto n = double(times.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double y = std::log(fit.sup_norms[j]);
        st += times[j];
        sy += y;
        stt += times[j] * times[j];
        sty += times[j] * y;
    }
    const double slope = (n * sty - st * sy) / (n * stt - st * st);
    const double icpt = (sy - slope * st) / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double y = std::log(fit.sup_norms[j]);
        ss_res += std::pow(y - (icpt + slope * times[j]), 2);
        ss_tot += std::pow(y - sy / n, 2);
    }
    fit.rate = -slope;
    fit.lambda0 = fit.rate * eps * eps;
    fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    if (!(fit.rate > 0.0)) throw NumericalError("sharp_decay_rate: nonpositive fitted decay rate");
    return fit;
}

}  // namespace hydrolimit::semigroup
