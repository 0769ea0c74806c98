#pragma once

// The semigroup U^eps(t) = exp(t Lambda^eps(k)) mode by mode, its flat/sharp and
// fluid/wave splittings, and the Duhamel operator
//   Psi^eps[f1, f2](t) = (1/eps) int_0^t U^eps(t - s) Gamma_sym(f1, f2)(s) ds.

#include "hydrolimit/collision.hpp"
#include "hydrolimit/mode_spectral.hpp"
#include "hydrolimit/spatial.hpp"

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace hydrolimit::semigroup {

/// Smooth even cutoff: 1 on [0, 1/2], 0 on [1, inf), built from the
/// normalized integral of the bump exp(-1/(1 - s^2)).
double chi(double x);

struct PhiMatrices {
    ComplexMatrix exp;
    ComplexMatrix phi1;  ///< (e^A - I) A^{-1}
    ComplexMatrix phi2;  ///< (e^A - I - A) A^{-2}
};

/// e^A, phi_1(A), phi_2(A) by a Taylor series on A / 2^s followed by s doublings.
PhiMatrices phi_matrices(const ComplexMatrix& a);
ComplexMatrix expm(const ComplexMatrix& a);

/// Scalar e^z, phi_1(z), phi_2(z), accurate near z = 0.
std::array<Complex, 3> phi_scalars(Complex z);

/// exp(t Lambda^eps(k)).
ComplexMatrix mode_propagator(const collision::CollisionBackend& backend, double eps,
                              const Wavevector& k, double t);

/// exp(t Lambda^eps(k)) f; t >= 0.
ComplexVector propagate(const collision::CollisionBackend& backend, double eps,
                        const Wavevector& k, double t, const ComplexVector& f);

/// Step operators of one time step h on every grid mode, for fixed eps:
///   E = e^{h Lambda},  W0 = h (phi_1 - phi_2)(h Lambda),  W1 = h phi_2(h Lambda),
/// so that int_0^h e^{(h-s) Lambda} S(s) ds = W0 S(0) + W1 S(h) for linear S.
/// Only canonical modes are computed; the rest follow from R_g M R_g^T.
class PropagatorSet {
public:
    enum class Op { Exp, W0, W1, Phi1 };

    PropagatorSet(std::shared_ptr<const collision::CollisionBackend> backend,
                  std::shared_ptr<const SpatialGrid> grid, double eps, double h);

    /// Loads the set from cache_dir when a matching file exists, otherwise builds
    /// and stores it there. An empty cache_dir disables caching.
    static std::shared_ptr<const PropagatorSet> load_or_build(
        std::shared_ptr<const collision::CollisionBackend> backend,
        std::shared_ptr<const SpatialGrid> grid, double eps, double h,
        const std::string& cache_dir);

    [[nodiscard]] double eps() const { return eps_; }
    [[nodiscard]] double step() const { return h_; }
    [[nodiscard]] const SpatialGrid& grid() const { return *grid_; }
    [[nodiscard]] std::shared_ptr<const SpatialGrid> grid_ptr() const { return grid_; }
    [[nodiscard]] const collision::CollisionBackend& backend() const { return *backend_; }
    [[nodiscard]] std::shared_ptr<const collision::CollisionBackend> backend_ptr() const {
        return backend_;
    }
    [[nodiscard]] std::size_t canonical_count() const { return canonical_.size(); }

    /// Cache key: backend fingerprint, eps, grid and step.
    [[nodiscard]] std::string cache_key() const;

    [[nodiscard]] ComplexVector apply(Op op, std::size_t mode, const ComplexVector& x) const;
    /// Applies op to every column (mode) of f.
    [[nodiscard]] ComplexMatrix apply_all(Op op, const ComplexMatrix& f) const;
    /// Dense matrix of op on one mode.
    [[nodiscard]] ComplexMatrix matrix(Op op, std::size_t mode) const;

    void save(const std::string& path) const;
    /// Returns false when the file is missing or belongs to a different key.
    bool load(const std::string& path);

private:
    struct Canonical {
        ComplexMatrix e, w0, w1;
    };
    struct Deferred {};
    PropagatorSet(std::shared_ptr<const collision::CollisionBackend> backend,
                  std::shared_ptr<const SpatialGrid> grid, double eps, double h, Deferred);
    void build();
    [[nodiscard]] const ComplexMatrix& pick(const Canonical& c, Op op, ComplexMatrix& scratch) const;

    std::shared_ptr<const collision::CollisionBackend> backend_;
    std::shared_ptr<const SpatialGrid> grid_;
    double eps_;
    double h_;
    SymmetryReduction symmetry_;
    bool use_symmetry_ = true;
    std::vector<Canonical> canonical_;
};

/// U^eps(t_n) f0 for n = 0..steps.
FieldTrajectory free_flow(const PropagatorSet& props, const ComplexMatrix& f0, std::size_t steps);

struct DuhamelOptions {
    /// Refuse when max_n ||S_{n+1} - 2 S_n + S_{n-1}|| exceeds this fraction of max ||S||:
    /// the piecewise-linear model of the source is then not resolved.
    double max_relative_curvature = 0.5;
};

/// prefactor * int_{t_start}^{t_n} U^eps(t_n - s) S(s) ds, exact for piecewise-linear S;
/// entries before `start` are zero. Throws ConfigError with a recommended substep
/// count when the source is under-resolved.
FieldTrajectory duhamel(const PropagatorSet& props, const FieldTrajectory& source,
                        double prefactor, std::size_t start = 0,
                        const DuhamelOptions& options = {});

/// Per-mode pieces of U^eps(t, k).
struct ModeParts {
    ComplexMatrix full;
    ComplexMatrix flat;       ///< chi(eps|k|/kappa) sum_* e^{lambda_*(eps k) t/eps^2} P_*(eps k)
    ComplexMatrix sharp;      ///< full - flat
    ComplexMatrix nsf;        ///< eps-free fluid part
    ComplexMatrix wave;       ///< flat acoustic part
    ComplexMatrix remainder;  ///< flat - nsf - wave
};

/// Duhamel counterparts of the pieces in ModeParts.
struct PsiParts {
    FieldTrajectory full, flat, sharp, nsf, wave, remainder;
};

/// Splits of U^eps and Psi^eps built from the hydrodynamic branches.
/// At k = 0 the flat part is P0 and the fluid and wave parts vanish.
class SemigroupDecomposition {
public:
    SemigroupDecomposition(std::shared_ptr<const collision::CollisionBackend> backend,
                           std::shared_ptr<const spectral::ExpansionTable> expansions,
                           double kappa, collision::Viscosities viscosities);

    [[nodiscard]] double kappa() const { return kappa_; }
    [[nodiscard]] const collision::Viscosities& viscosities() const { return visc_; }
    [[nodiscard]] const collision::CollisionBackend& backend() const { return *backend_; }
    [[nodiscard]] std::shared_ptr<const collision::CollisionBackend> backend_ptr() const {
        return backend_;
    }
    [[nodiscard]] const spectral::ExpansionTable& expansions() const { return *expansions_; }

    [[nodiscard]] ModeParts parts(double eps, const Wavevector& k, double t) const;

    /// U_NSF(t, k) = e^{-nu_NS |k|^2 t} P0_NS + e^{-nu_heat |k|^2 t} P0_heat (0 at k = 0).
    [[nodiscard]] ComplexMatrix u_nsf(const Wavevector& k, double t) const;

    /// U_NSF(t_n) f0 on a grid.
    [[nodiscard]] FieldTrajectory u_nsf_flow(std::shared_ptr<const SpatialGrid> grid,
                                             const ComplexMatrix& f0, double dt,
                                             std::size_t steps) const;

    /// Psi_NSF: sum over NS, heat of int e^{-nu |k|^2 (t-s)} |k| P1_*(k/|k|) S(s) ds.
    [[nodiscard]] FieldTrajectory psi_nsf(const FieldTrajectory& source,
                                          std::size_t start = 0) const;

    /// All Duhamel parts for the source S = Gamma_sym(f1, f2) sampled on props' step.
    [[nodiscard]] PsiParts psi_parts(const PropagatorSet& props,
                                     const FieldTrajectory& source) const;

private:
    std::shared_ptr<const collision::CollisionBackend> backend_;
    std::shared_ptr<const spectral::ExpansionTable> expansions_;
    double kappa_;
    collision::Viscosities visc_;
};

struct SharpDecayFit {
    double rate = 0.0;     ///< fitted decay rate of sup_k ||U^sharp(t, k)||
    double lambda0 = 0.0;  ///< rate * eps^2
    double r_squared = 0.0;
    std::vector<double> times;
    std::vector<double> sup_norms;
};

/// Log-linear fit of sup_{k in ks} ||U^{eps,sharp}(t, k)||_{2->2} over the given times.
/// Throws NumericalError when the fitted rate is not positive.
SharpDecayFit sharp_decay_rate(const SemigroupDecomposition& decomposition, double eps,
                               const std::vector<Wavevector>& ks,
                               const std::vector<double>& times);

}  // namespace hydrolimit::semigroup
