#include "hydrolimit/spatial.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

namespace hydrolimit {

SpatialGrid::SpatialGrid(int dim_x, int max_mode) : dim_x_(dim_x), max_mode_(max_mode) {
    if (dim_x != 2 && dim_x != 3) throw ConfigError("SpatialGrid: dim_x must be 2 or 3");
    if (max_mode < 0) throw ConfigError("SpatialGrid: max_mode must be nonnegative");
    const int k = max_mode;
    const int k3max = dim_x == 3 ? k : 0;
    for (int a = -k; a <= k; ++a)
        for (int b = -k; b <= k; ++b)
            for (int c = -k3max; c <= k3max; ++c) modes_.push_back({{a, b, c}});
    negated_.resize(modes_.size());
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        negated_[i] = *index_of(-modes_[i]);
        if (modes_[i].is_zero()) zero_ = i;
    }
}

std::optional<std::size_t> SpatialGrid::index_of(const Wavevector& k) const {
    const int n = 2 * max_mode_ + 1;
    std::size_t idx = 0;
    for (int c = 0; c < 3; ++c) {
        if (c >= dim_x_) {
            if (k.k[c] != 0) return std::nullopt;
            continue;
        }
        if (std::abs(k.k[c]) > max_mode_) return std::nullopt;
        idx = idx * std::size_t(n) + std::size_t(k.k[c] + max_mode_);
    }
    return idx;
}

double SpectralField::hm_norm(double m) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        sum += sobolev_weight(grid->mode(i), m) * coeffs.col(Eigen::Index(i)).squaredNorm();
    }
    return std::sqrt(sum);
}

double SpectralField::reality_defect() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const auto j = Eigen::Index(grid->negated(i));
        worst = std::max(worst, (coeffs.col(j) - coeffs.col(Eigen::Index(i)).conjugate())
                                    .cwiseAbs()
                                    .maxCoeff());
    }
    return worst;
}

void SpectralField::symmetrize_reality() {
    ComplexMatrix out = coeffs;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const auto j = Eigen::Index(grid->negated(i));
        out.col(Eigen::Index(i)) = 0.5 * (coeffs.col(Eigen::Index(i)) + coeffs.col(j).conjugate());
    }
    coeffs = std::move(out);
}

// ---- convolution ------------------------------------------------------------

struct Convolver::FftState {
    int m = 0;
    int total = 0;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    std::vector<std::size_t> slot;  // grid mode -> position in the padded array
    mutable std::mutex mutex;
};

namespace {
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

Convolver::Convolver(std::shared_ptr<const SpatialGrid> grid, ConvolutionPath path)
    : grid_(std::move(grid)), path_(path) {
    if (path_ == ConvolutionPath::Auto) {
        path_ = grid_->size() <= 125 ? ConvolutionPath::Direct : ConvolutionPath::Fft;
    }
    if (path_ != ConvolutionPath::Fft) return;
    fft_ = std::make_unique<FftState>();
    const int d = grid_->dim_x();
    fft_->m = 3 * grid_->max_mode() + 1;
    fft_->total = 1;
    for (int c = 0; c < d; ++c) fft_->total *= fft_->m;
    std::vector<int> dims(std::size_t(d), fft_->m);
    {
        std::lock_guard lock(fftw_planner_mutex());
        auto* buf_in = fftw_alloc_complex(std::size_t(fft_->total));
        auto* buf_out = fftw_alloc_complex(std::size_t(fft_->total));
        fft_->forward = fftw_plan_dft(d, dims.data(), buf_in, buf_out, FFTW_FORWARD, FFTW_ESTIMATE);
        fft_->backward =
            fftw_plan_dft(d, dims.data(), buf_in, buf_out, FFTW_BACKWARD, FFTW_ESTIMATE);
        fftw_free(buf_in);
        fftw_free(buf_out);
    }
    fft_->slot.resize(grid_->size());
    for (std::size_t i = 0; i < grid_->size(); ++i) {
        std::size_t pos = 0;
        for (int c = 0; c < d; ++c) {
            const int kc = grid_->mode(i).k[c];
            pos = pos * std::size_t(fft_->m) + std::size_t((kc % fft_->m + fft_->m) % fft_->m);
        }
        fft_->slot[i] = pos;
    }
}

Convolver::~Convolver() {
    if (fft_) {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fft_->forward);
        fftw_destroy_plan(fft_->backward);
    }
}

ComplexMatrix Convolver::products(const ComplexMatrix& a, const ComplexMatrix& b,
                                  const std::vector<std::pair<int, int>>& pairs) const {
    const auto n = Eigen::Index(grid_->size());
    if (a.rows() != n || b.rows() != n) throw ConfigError("Convolver: field/grid size mismatch");
    for (const auto& [i, j] : pairs) {
        if (i < 0 || i >= a.cols() || j < 0 || j >= b.cols()) {
            throw ConfigError("Convolver: pair index out of range");
        }
    }
    return path_ == ConvolutionPath::Fft ? fft(a, b, pairs) : direct(a, b, pairs);
}

ComplexMatrix Convolver::direct(const ComplexMatrix& a, const ComplexMatrix& b,
                                const std::vector<std::pair<int, int>>& pairs) const {
    const auto n = grid_->size();
    const int kmax = grid_->max_mode();
    const auto np = Eigen::Index(pairs.size());
    ComplexMatrix out = ComplexMatrix::Zero(Eigen::Index(n), np);
    // Transposed copies keep the per-mode rows contiguous.
    const ComplexMatrix at = a.transpose();
    const ComplexMatrix bt = b.transpose();
    parallel_for(n, [&](std::size_t i) {
        const Wavevector& k = grid_->mode(i);
        Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(np);
        for (std::size_t j = 0; j < n; ++j) {
            const Wavevector& kp = grid_->mode(j);
            Wavevector diff{{k.k[0] - kp.k[0], k.k[1] - kp.k[1], k.k[2] - kp.k[2]}};
            if (std::abs(diff.k[0]) > kmax || std::abs(diff.k[1]) > kmax ||
                std::abs(diff.k[2]) > kmax) {
                continue;
            }
            const auto di = Eigen::Index(*grid_->index_of(diff));
            for (Eigen::Index p = 0; p < np; ++p) {
                acc(p) += at(pairs[p].first, di) * bt(pairs[p].second, Eigen::Index(j));
            }
        }
        out.row(Eigen::Index(i)) = acc.transpose();
    });
    return out;
}

ComplexMatrix Convolver::fft(const ComplexMatrix& a, const ComplexMatrix& b,
                             const std::vector<std::pair<int, int>>& pairs) const {
    const std::size_t total = std::size_t(fft_->total);
    const auto n = grid_->size();
    auto* work_in = fftw_alloc_complex(total);
    auto* work_out = fftw_alloc_complex(total);
    auto to_physical = [&](const ComplexMatrix& src, Eigen::Index col) {
        std::vector<Complex> phys(total);
        std::fill_n(reinterpret_cast<Complex*>(work_in), total, Complex{});
        for (std::size_t i = 0; i < n; ++i) {
            reinterpret_cast<Complex*>(work_in)[fft_->slot[i]] = src(Eigen::Index(i), col);
        }
        fftw_execute_dft(fft_->backward, work_in, work_out);
        std::copy_n(reinterpret_cast<Complex*>(work_out), total, phys.begin());
        return phys;
    };
    std::map<Eigen::Index, std::vector<Complex>> phys_a, phys_b;
    for (const auto& [i, j] : pairs) {
        if (!phys_a.count(i)) phys_a[i] = to_physical(a, i);
        if (!phys_b.count(j)) phys_b[j] = to_physical(b, j);
    }
    ComplexMatrix out(Eigen::Index(n), Eigen::Index(pairs.size()));
    const double scale = 1.0 / double(total);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto& pa = phys_a[pairs[p].first];
        const auto& pb = phys_b[pairs[p].second];
        auto* in = reinterpret_cast<Complex*>(work_in);
        for (std::size_t q = 0; q < total; ++q) in[q] = pa[q] * pb[q];
        fftw_execute_dft(fft_->forward, work_in, work_out);
        const auto* res = reinterpret_cast<const Complex*>(work_out);
        for (std::size_t i = 0; i < n; ++i) {
            out(Eigen::Index(i), Eigen::Index(p)) = scale * res[fft_->slot[i]];
        }
    }
    fftw_free(work_in);
    fftw_free(work_out);
    return out;
}

// ---- lattice symmetry ---------------------------------------------------------

Wavevector LatticeSymmetry::apply(const Wavevector& k) const {
    Wavevector out;
    for (int i = 0; i < 3; ++i) out.k[i] = sign[i] * k.k[perm[i]];
    return out;
}

Mat3 LatticeSymmetry::matrix() const {
    Mat3 g = Mat3::Zero();
    for (int i = 0; i < 3; ++i) g(i, perm[i]) = sign[i];
    return g;
}

std::vector<LatticeSymmetry> lattice_symmetries(int dim_x) {
    std::vector<LatticeSymmetry> out;
    std::array<int, 3> perm{0, 1, 2};
    do {
        bool fixes_tail = true;
        for (int i = dim_x; i < 3; ++i) fixes_tail = fixes_tail && perm[i] == i;
        if (!fixes_tail) continue;
        const int combos = 1 << dim_x;
        for (int s = 0; s < combos; ++s) {
            LatticeSymmetry g;
            g.perm = perm;
            for (int i = 0; i < dim_x; ++i) g.sign[i] = (s >> i) & 1 ? -1 : 1;
            out.push_back(g);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

SpectralField FieldTrajectory::at(std::size_t n) const {
    SpectralField f;
    f.grid = grid;
    f.coeffs = states.at(n);
    return f;
}

SignedPermutation SignedPermutation::from_matrix(const RealMatrix& r) {
    if (r.rows() != r.cols()) throw ConfigError("SignedPermutation: matrix must be square");
    SignedPermutation p;
    p.target.resize(std::size_t(r.cols()));
    p.sign.resize(std::size_t(r.cols()));
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
        Eigen::Index row = -1;
        for (Eigen::Index i = 0; i < r.rows(); ++i) {
            if (r(i, j) == 0.0) continue;
            if (row >= 0 || std::abs(std::abs(r(i, j)) - 1.0) > 0.0) {
                throw ConfigError("SignedPermutation: not a signed permutation matrix");
            }
            row = i;
        }
        if (row < 0) throw ConfigError("SignedPermutation: empty column");
        p.target[std::size_t(j)] = row;
        p.sign[std::size_t(j)] = r(row, j);
    }
    return p;
}

bool SignedPermutation::is_identity() const {
    for (std::size_t j = 0; j < target.size(); ++j) {
        if (target[j] != Eigen::Index(j) || sign[j] != 1.0) return false;
    }
    return true;
}

void SignedPermutation::apply(const ComplexVector& x, ComplexVector& y) const {
    y.resize(x.size());
    for (std::size_t j = 0; j < target.size(); ++j) y(target[j]) = sign[j] * x(Eigen::Index(j));
}

void SignedPermutation::apply_transpose(const ComplexVector& x, ComplexVector& y) const {
    y.resize(x.size());
    for (std::size_t j = 0; j < target.size(); ++j) y(Eigen::Index(j)) = sign[j] * x(target[j]);
}

RealMatrix velocity_representation(const velocity::VelocityBasis& basis, const LatticeSymmetry& g) {
    const Mat3 gt = g.matrix().transpose();
    const RealMatrix& nodes = basis.nodes();
    const int nmax = basis.max_degree();
    RealMatrix rotated(Eigen::Index(basis.dim()), nodes.cols());
    for (Eigen::Index q = 0; q < nodes.cols(); ++q) {
        const Vec3 w = gt * nodes.col(q);
        const RealVector h0 = velocity::hermite_values(w(0), nmax);
        const RealVector h1 = velocity::hermite_values(w(1), nmax);
        const RealVector h2 = velocity::hermite_values(w(2), nmax);
        for (std::size_t n = 0; n < basis.dim(); ++n) {
            const auto& m = basis.indices()[n].n;
            rotated(Eigen::Index(n), q) = h0(m[0]) * h1(m[1]) * h2(m[2]);
        }
    }
    RealMatrix r = basis.values() * basis.weights().asDiagonal() * rotated.transpose();
    // Entries are exactly 0 or +-1; remove quadrature roundoff.
    return r.unaryExpr([](double x) { return std::round(x); });
}

SymmetryReduction reduce_by_symmetry(const SpatialGrid& grid, const velocity::VelocityBasis& basis) {
    SymmetryReduction red;
    red.group = lattice_symmetries(grid.dim_x());
    for (const auto& g : red.group) {
        red.velocity_maps.push_back(velocity_representation(basis, g));
        red.velocity_perms.push_back(SignedPermutation::from_matrix(red.velocity_maps.back()));
    }
    red.representative.resize(grid.size());
    red.element.resize(grid.size());
    auto key = [](const Wavevector& k) { return k.k; };
    std::map<std::array<int, 3>, std::size_t> position;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Wavevector& k = grid.mode(i);
        // Canonical representative: lexicographically largest orbit element.
        Wavevector best = k;
        for (const auto& g : red.group) {
            const Wavevector gk = g.apply(k);
            if (key(gk) > key(best)) best = gk;
        }
        auto [it, inserted] = position.try_emplace(key(best), red.canonical_modes.size());
        if (inserted) red.canonical_modes.push_back(*grid.index_of(best));
        red.representative[i] = it->second;
        for (std::size_t e = 0; e < red.group.size(); ++e) {
            if (red.group[e].apply(best) == k) {
                red.element[i] = e;
                break;
            }
        }
    }
    return red;
}

}  // namespace hydrolimit
