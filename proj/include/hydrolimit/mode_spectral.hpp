#pragma once

// Per-mode operator L - i v.xi, its hydrodynamic eigenvalue branches, their
// spectral projectors and the small-|xi| expansion of those projectors.

#include "hydrolimit/collision.hpp"
#include "hydrolimit/spatial.hpp"

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace hydrolimit::spectral {

enum class Branch { NS = 0, Heat = 1, WavePlus = 2, WaveMinus = 3 };
inline constexpr std::array<Branch, 4> kBranches{Branch::NS, Branch::Heat, Branch::WavePlus,
                                                 Branch::WaveMinus};
std::string to_string(Branch b);

/// L - i V.xi for a real vector xi.
ComplexMatrix unit_mode_operator(const collision::CollisionBackend& backend, const Vec3& xi);

/// eps^{-2} (L - i eps V.k).
ComplexMatrix assemble_mode_operator(const collision::CollisionBackend& backend,
                                     const Wavevector& k, double eps);

/// One simple hydrodynamic eigenvalue with its rank-one spectral projector.
struct HydroComponent {
    Branch branch;
    int sector;  ///< angular momentum about xi/|xi|
    Complex lambda;
    ComplexMatrix projector;
};

/// The five eigenvalues of L - i V.xi continuously connected to 0, for xi != 0.
struct HydroDecomposition {
    Vec3 xi;
    std::vector<HydroComponent> components;  ///< NS (two), heat, wave+, wave-
    /// min Re over the hydrodynamic eigenvalues minus max Re over all others.
    double gap = 0.0;
    /// Largest real part over the non-hydrodynamic eigenvalues.
    double max_re_rest = 0.0;

    [[nodiscard]] ComplexMatrix projector(Branch b) const;
    /// Eigenvalue of branch b (mean over the two NS eigenvalues).
    [[nodiscard]] Complex lambda(Branch b) const;
};

/// Spectral decomposition at xi using angular-momentum sectors about xi:
/// the NS pair lives in sectors +-1, heat and both waves in sector 0.
/// Throws NumericalError when the hydrodynamic group cannot be isolated.
HydroDecomposition hydro_decomposition(const collision::CollisionBackend& backend, const Vec3& xi);

/// Branch eigenvalues sampled along directions and radii.
struct BranchSample {
    std::size_t direction = 0;
    double radius = 0.0;
    std::array<Complex, 4> lambda{};  ///< indexed by Branch
    double gap = 0.0;
};

struct BranchSpectrum {
    std::vector<Vec3> directions;
    std::vector<BranchSample> samples;  ///< ordered by direction, then radius
};

/// Samples the hydrodynamic branches; radius 0 rows are exactly zero.
BranchSpectrum eigen_branches(const collision::CollisionBackend& backend,
                              const std::vector<double>& radii,
                              const std::vector<Vec3>& directions = {Vec3(1, 0, 0)});

struct TransportFit {
    double nu_ns = 0.0;
    double nu_heat = 0.0;
    double nu_wave = 0.0;
    double sound_speed = 0.0;
    /// max over samples of |gamma_*(k)| / (nu_* |k|^2 / 2); at most 1 when the bound holds.
    double gamma_bound_ratio = 0.0;
    double fit_residual = 0.0;
};

/// Least-squares fits over the sampled radii (>= 6 radii in [0.01, 0.2]):
/// -Re lambda even in |k|, Im lambda_wave odd in |k|.
TransportFit fit_transport_coefficients(const BranchSpectrum& spectrum);

/// P_* = P^0 + |k| P^1 + |k|^2 P^2 along one direction.
struct ProjectorExpansion {
    Vec3 direction;
    std::array<ComplexMatrix, 4> p0;
    std::array<ComplexMatrix, 4> p1;
    std::array<ComplexMatrix, 4> p2;
    /// Max relative misfit of the full polynomial model on the fit radii.
    double fit_residual = 0.0;
    /// Max relative misfit of the truncated degree-2 model on the fit radii.
    double quadratic_residual = 0.0;
};

struct ExpansionOptions {
    std::vector<double> radii{0.002, 0.004, 0.006, 0.008, 0.010, 0.012};
    int degree = 4;
};

ProjectorExpansion expand_projectors(const collision::CollisionBackend& backend,
                                     const Vec3& direction, const ExpansionOptions& options = {});

/// Closed-form leading projectors on Ker L for the unit direction e.
ComplexMatrix p0_ns_formula(const velocity::VelocityBasis& basis, const Vec3& e);
ComplexMatrix p0_heat_formula(const velocity::VelocityBasis& basis);
/// Acoustic eigenprofile (1 + s c e.v + (|v|^2-3)/3) mu^{1/2} with prefactor 3/10,
/// c = sqrt(5/3); s = -1 belongs to the eigenvalue +i c|k| (wave+).
ComplexMatrix p0_wave_formula(const velocity::VelocityBasis& basis, const Vec3& e, int s);

struct KappaOptions {
    std::vector<Vec3> directions{Vec3(1, 0, 0), Vec3(1, 1, 0).normalized(),
                                 Vec3(1, 1, 1).normalized()};
    double radius_step = 0.02;
    double radius_max = 1.0;
    double expansion_tolerance = 1e-3;
    double fallback = 0.1;
};

struct KappaReport {
    double kappa = 0.0;
    double certified_radius = 0.0;  ///< largest radius passing both criteria
    double gap_at_kappa = 0.0;
    double expansion_residual_at_kappa = 0.0;
    double lambda2 = 0.0;
    bool fallback_used = false;
};

/// Largest sampled radius with (a) hydro/non-hydro real-part gap >= lambda_2/4 and
/// (b) relative residual of the quadratic projector model <= tolerance, halved once.
KappaReport determine_kappa(const collision::CollisionBackend& backend,
                            const KappaOptions& options = {});

/// Lazily computed projector expansions for lattice directions, reusing the
/// signed-permutation symmetry: P(g e) = R_g P(e) R_g^T.
class ExpansionTable {
public:
    ExpansionTable(std::shared_ptr<const collision::CollisionBackend> backend, int dim_x,
                   ExpansionOptions options = {});

    /// Expansion for direction k/|k| (k != 0).
    [[nodiscard]] std::shared_ptr<const ProjectorExpansion> at(const Wavevector& k) const;
    [[nodiscard]] std::size_t computed_directions() const;

    /// Computes the canonical expansions needed by every nonzero grid mode, in parallel.
    void prefetch(const SpatialGrid& grid) const;

private:
    [[nodiscard]] Wavevector canonical_direction(const Wavevector& k) const;

    std::shared_ptr<const collision::CollisionBackend> backend_;
    ExpansionOptions options_;
    std::vector<LatticeSymmetry> group_;
    std::vector<RealMatrix> maps_;
    mutable std::mutex mutex_;
    mutable std::map<std::array<int, 3>, std::shared_ptr<const ProjectorExpansion>> canonical_;
    mutable std::map<std::array<int, 3>, std::shared_ptr<const ProjectorExpansion>> cache_;
};

}  // namespace hydrolimit::spectral
