#pragma once

// Modified inner product <<f1, f2>> = <f1, f2> + eps psi[f1, f2](k) on velocity
// coefficients, the coercivity constant of Lambda^eps(k) in it, and measured
// constants of the linear semigroup estimates.

#include "hydrolimit/analysis.hpp"
#include "hydrolimit/collision.hpp"

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

namespace hydrolimit::hypo {

struct Deltas {
    double d1 = 0.1;
    double d2 = 0.01;
    double d3 = 0.001;

    /// Throws ConfigError unless all three are positive and finite.
    void validate() const;
    [[nodiscard]] bool ordered() const { return d3 < d2 && d2 < d1 && d1 < 1.0; }
};

/// psi[f1, f2](k), linear in f1 and antilinear in f2, evaluated from the moments
/// rho, u, theta of f_i and M, Theta of P0^perp f_i. Hermitian: psi[f2, f1] = conj psi[f1, f2].
Complex psi_functional(const velocity::VelocityBasis& basis, const Deltas& deltas,
                       const ComplexVector& f1, const ComplexVector& f2, const Vec3& k);

/// The form at fixed eps; matrices act on coefficient vectors with <<f1, f2>> = f2^H H f1.
class HypoForm {
public:
    HypoForm(std::shared_ptr<const velocity::VelocityBasis> basis, Deltas deltas, double eps);

    [[nodiscard]] const Deltas& deltas() const { return deltas_; }
    [[nodiscard]] double eps() const { return eps_; }
    [[nodiscard]] const velocity::VelocityBasis& basis() const { return *basis_; }

    /// Hermitian Psi(k) with psi[f1, f2] = f2^H Psi f1.
    [[nodiscard]] ComplexMatrix psi_matrix(const Vec3& k) const;
    /// H(k) = I + eps Psi(k).
    [[nodiscard]] ComplexMatrix gram(const Vec3& k) const;

    [[nodiscard]] Complex inner(const ComplexVector& f1, const ComplexVector& f2, const Vec3& k) const;
    [[nodiscard]] double norm_squared(const ComplexVector& f, const Vec3& k) const;

private:
    std::shared_ptr<const velocity::VelocityBasis> basis_;
    Deltas deltas_;
    double eps_;
    RealMatrix micro_;  ///< P0^perp
};

/// Extreme eigenvalues of H(k): |||f|||^2 / ||f||^2 ranges over [lower, upper].
struct Equivalence {
    double lower = 0.0;
    double upper = 0.0;
};
Equivalence equivalence_bounds(const HypoForm& form, const Vec3& k);

/// Integer wavevectors with |k| <= radius, one per orbit of coordinate permutations and
/// sign flips (entries sorted descending, nonnegative), k = 0 first.
std::vector<Wavevector> canonical_wavevectors(int dim_x, double radius);

struct CoercivityOptions {
    std::vector<double> eps_list{1.0, 0.1, 0.01};
    int dim_x = 3;
    double k_radius = 8.0;
    /// Random samples per (k, eps) cell; 0 keeps only the exact minimum.
    std::size_t samples = 500;
    std::uint64_t seed = 1;
    analysis::VelocityNorm vnorm;
};

struct CoercivityCell {
    Wavevector k;
    double eps = 0.0;
    double lambda_sampled = 0.0;  ///< min of the ratio over the samples
    double lambda_exact = 0.0;    ///< min over all admissible f
    Equivalence exact_equivalence;
    Equivalence sampled_equivalence;
};

/// lambda_3 is the infimum of
///   -Re <<Lambda f, f>> / (eps^{-2} ||P0^perp f||^2_{H^{s,*}} + ||P0 f||^2);
/// at k = 0 the admissible f are microscopic.
struct CoercivityReport {
    Deltas deltas;
    std::vector<CoercivityCell> cells;
    double lambda3 = 0.0;        ///< sampled infimum (exact when samples = 0)
    double lambda3_exact = 0.0;
    Equivalence equivalence;     ///< over every cell, exact
    std::size_t sample_count = 0;
    /// Every sampled ratio, cell-major.
    std::vector<double> ratios;

    /// lambda_3 > 0 and the norm equivalence constants inside [1 - c, 1 + c].
    [[nodiscard]] bool passed(double c = 0.5) const;
};

/// Throws ConfigError for invalid deltas (all-zero included) or eps outside (0, 1].
CoercivityReport verify_coercivity(const collision::CollisionBackend& backend, const Deltas& deltas,
                                   const CoercivityOptions& options);

struct TuneCandidate {
    Deltas deltas;
    double lambda3 = 0.0;
    double c = 0.0;  ///< max |eig H - 1|
    bool feasible = false;
};

struct TuneResult {
    Deltas best;
    CoercivityReport report;
    std::vector<TuneCandidate> candidates;
};

/// Grid search over {1e-1, ..., 1e-4}^3 with d3 < d2 < d1, maximizing the exact lambda_3
/// subject to c <= max_c; the winner is then verified with samples. Throws NumericalError
/// when no candidate is feasible.
TuneResult tune_deltas(const collision::CollisionBackend& backend, const CoercivityOptions& options,
                       double max_c = 0.5);

/// Time grid: `fine_steps` uniform steps on [0, fine_span eps^2] (capped at T), then
/// `coarse_steps` on the rest.
struct EstimateOptions {
    double T = 1.0;
    double fine_span = 12.0;
    std::size_t fine_steps = 400;
    std::size_t coarse_steps = 400;
    analysis::VelocityNorm vnorm;
};

/// Components of the left side of the linear estimates, summed over modes with <k>^{2m}:
///   linf  = ||h||_{L~inf H^m L^2},
///   macro = ||P0 h||_{L^2 H^m L^2},
///   micro = eps^{-1} ||P0^perp h||_{L^2 H^m H^{s,*}},
/// and `input` the norm of the data (||f||_{H^m L^2}) or source (||S||_{L^2 H^m (H^{s,*})'}).
struct EstimateReport {
    double eps = 0.0;
    double linf = 0.0;
    double macro = 0.0;
    double micro = 0.0;
    double input = 0.0;
    [[nodiscard]] double ratio() const { return (linf + macro + micro) / input; }
};

using ModeData = std::vector<std::pair<Wavevector, ComplexVector>>;

/// h(t) = U^eps(t) f. Throws ConfigError for k = 0 data with a hydrodynamic part.
EstimateReport data_estimate(const collision::CollisionBackend& backend, double eps,
                             const ModeData& data, double m, const EstimateOptions& options = {});

/// h(t) = int_0^t U^eps(t - s) S ds for S constant in time. Throws ConfigError unless P0 S = 0.
EstimateReport source_estimate(const collision::CollisionBackend& backend, double eps,
                               const ModeData& source, double m,
                               const EstimateOptions& options = {});

/// |||U^eps(t_n, k) f||| for t_n = n dt, n = 0..steps.
std::vector<double> flow_norm_profile(const collision::CollisionBackend& backend,
                                      const HypoForm& form, const Wavevector& k,
                                      const ComplexVector& f, double dt, std::size_t steps);

}  // namespace hydrolimit::hypo
