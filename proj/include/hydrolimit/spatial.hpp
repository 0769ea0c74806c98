#pragma once

// Fourier lattice on the torus [0, 2 pi)^d, fields indexed by (velocity index,
// spatial mode), truncated convolutions, and the signed-permutation symmetry of
// the lattice.

#include "hydrolimit/velocity_basis.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace hydrolimit {

/// Modes k with |k_j| <= K for j < dim_x (remaining components zero), stored in
/// lexicographic order over [-K, K]^dim_x.
class SpatialGrid {
public:
    SpatialGrid(int dim_x, int max_mode);

    [[nodiscard]] int dim_x() const { return dim_x_; }
    [[nodiscard]] int max_mode() const { return max_mode_; }
    [[nodiscard]] std::size_t size() const { return modes_.size(); }
    [[nodiscard]] const std::vector<Wavevector>& modes() const { return modes_; }
    [[nodiscard]] const Wavevector& mode(std::size_t i) const { return modes_[i]; }
    [[nodiscard]] std::optional<std::size_t> index_of(const Wavevector& k) const;
    [[nodiscard]] std::size_t zero_index() const { return zero_; }
    /// Index of -k for the mode stored at i.
    [[nodiscard]] std::size_t negated(std::size_t i) const { return negated_[i]; }

private:
    int dim_x_;
    int max_mode_;
    std::vector<Wavevector> modes_;
    std::vector<std::size_t> negated_;
    std::size_t zero_ = 0;
};

/// Sobolev weight <k>^{2m}.
inline double sobolev_weight(const Wavevector& k, double m) {
    return std::pow(1.0 + k.norm_squared(), m);
}

/// Coefficients f(k, n): column i holds the velocity coefficients of mode i.
struct SpectralField {
    std::shared_ptr<const SpatialGrid> grid;
    ComplexMatrix coeffs;

    SpectralField() = default;
    SpectralField(std::shared_ptr<const SpatialGrid> g, Eigen::Index vdim)
        : grid(std::move(g)), coeffs(ComplexMatrix::Zero(vdim, Eigen::Index(grid->size()))) {}

    [[nodiscard]] Eigen::Index vdim() const { return coeffs.rows(); }
    [[nodiscard]] std::size_t modes() const { return grid->size(); }

    /// (sum_k <k>^{2m} ||f(k)||^2)^{1/2}.
    [[nodiscard]] double hm_norm(double m) const;
    /// max_k |f(-k) - conj f(k)|.
    [[nodiscard]] double reality_defect() const;
    /// Replaces f by (f(k) + conj f(-k))/2.
    void symmetrize_reality();
};

/// Fields sampled on the uniform time grid t_n = n dt, n = 0..steps().
struct FieldTrajectory {
    std::shared_ptr<const SpatialGrid> grid;
    double dt = 0.0;
    std::vector<ComplexMatrix> states;

    [[nodiscard]] std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
    [[nodiscard]] double time(std::size_t n) const { return dt * double(n); }
    [[nodiscard]] SpectralField at(std::size_t n) const;
};

enum class ConvolutionPath { Auto, Direct, Fft };

/// Truncated convolutions on a SpatialGrid: for each requested pair (i, j),
///   out(k) = sum_{k'} a_i(k - k') b_j(k'),  k, k - k', k' all in the grid.
/// The direct path sums over lattice pairs; the FFT path zero-pads to M >= 3K+1
/// points per axis so the result is alias-free and identical up to roundoff.
class Convolver {
public:
    explicit Convolver(std::shared_ptr<const SpatialGrid> grid,
                       ConvolutionPath path = ConvolutionPath::Auto);
    ~Convolver();
    Convolver(const Convolver&) = delete;
    Convolver& operator=(const Convolver&) = delete;

    [[nodiscard]] ConvolutionPath path() const { return path_; }
    [[nodiscard]] const SpatialGrid& grid() const { return *grid_; }

    /// a, b: (modes x r_a), (modes x r_b). Returns (modes x pairs.size()).
    [[nodiscard]] ComplexMatrix products(const ComplexMatrix& a, const ComplexMatrix& b,
                                         const std::vector<std::pair<int, int>>& pairs) const;

private:
    [[nodiscard]] ComplexMatrix direct(const ComplexMatrix& a, const ComplexMatrix& b,
                                       const std::vector<std::pair<int, int>>& pairs) const;
    [[nodiscard]] ComplexMatrix fft(const ComplexMatrix& a, const ComplexMatrix& b,
                                    const std::vector<std::pair<int, int>>& pairs) const;

    std::shared_ptr<const SpatialGrid> grid_;
    ConvolutionPath path_;
    struct FftState;
    std::unique_ptr<FftState> fft_;
};

/// Element of the signed-permutation group acting on lattice vectors:
/// (g k)_i = sign[i] * k_{perm[i]}.
struct LatticeSymmetry {
    std::array<int, 3> perm{0, 1, 2};
    std::array<int, 3> sign{1, 1, 1};

    [[nodiscard]] Wavevector apply(const Wavevector& k) const;
    [[nodiscard]] Mat3 matrix() const;
};

/// A matrix with exactly one +-1 entry per column: (R x)[target[j]] = sign[j] x[j].
struct SignedPermutation {
    std::vector<Eigen::Index> target;
    std::vector<double> sign;

    static SignedPermutation from_matrix(const RealMatrix& r);
    [[nodiscard]] bool is_identity() const;
    /// y = R x
    void apply(const ComplexVector& x, ComplexVector& y) const;
    /// y = R^T x
    void apply_transpose(const ComplexVector& x, ComplexVector& y) const;
};

/// All signed permutations of the first dim_x axes (8 in 2D, 48 in 3D).
std::vector<LatticeSymmetry> lattice_symmetries(int dim_x);

/// Matrix of (R f)(v) = f(g^T v) on the Hermite basis; R (V.k) R^T = V.(g k).
RealMatrix velocity_representation(const velocity::VelocityBasis& basis, const LatticeSymmetry& g);

/// Orbit bookkeeping: every grid mode is g(canonical) for a stored canonical mode.
struct SymmetryReduction {
    std::vector<std::size_t> canonical_modes;     ///< grid indices of representatives
    std::vector<std::size_t> representative;      ///< per mode: position in canonical_modes
    std::vector<std::size_t> element;             ///< per mode: index into group
    std::vector<LatticeSymmetry> group;
    std::vector<RealMatrix> velocity_maps;        ///< R_g per group element
    std::vector<SignedPermutation> velocity_perms; ///< the same maps in sparse form
};

SymmetryReduction reduce_by_symmetry(const SpatialGrid& grid, const velocity::VelocityBasis& basis);

}  // namespace hydrolimit
