#pragma once

// Linearized collision operators L and bilinear collision terms Gamma on
// Hermite velocity coefficients.

#include "hydrolimit/velocity_basis.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace hydrolimit::collision {

enum class BackendKind { BGK, MaxwellCutoff, SyntheticGamma };

std::string to_string(BackendKind kind);

/// A linear operator L plus a bilinear map of the factorized form
///   Gamma(f1, f2) = W vec(a1 a2^T),  a_i = A f_i,
/// with A an r x dim input map and W a dim x r^2 output tensor. W is stored
/// symmetrized in the pair index, so Gamma itself is already symmetric.
class CollisionBackend {
public:
    CollisionBackend(BackendKind kind, std::shared_ptr<const velocity::VelocityBasis> basis,
                     RealMatrix l_matrix, RealMatrix input_map, RealMatrix output_tensor,
                     std::string fingerprint);

    [[nodiscard]] BackendKind kind() const { return kind_; }
    [[nodiscard]] const velocity::VelocityBasis& basis() const { return *basis_; }
    [[nodiscard]] std::shared_ptr<const velocity::VelocityBasis> basis_ptr() const { return basis_; }
    [[nodiscard]] const RealMatrix& L() const { return l_; }
    [[nodiscard]] const RealMatrix& input_map() const { return input_map_; }
    [[nodiscard]] const RealMatrix& output_tensor() const { return output_tensor_; }
    [[nodiscard]] Eigen::Index rank() const { return input_map_.rows(); }
    [[nodiscard]] const std::string& fingerprint() const { return fingerprint_; }

    /// Estimated bilinear norm sup ||Gamma(f1,f2)|| / (||f1|| ||f2||).
    [[nodiscard]] double continuity_constant() const { return continuity_; }
    void set_continuity_constant(double c) { continuity_ = c; }

    /// Backend-specific scalar parameters (BGK frequency, seeds, ...).
    std::map<std::string, double> params;

    [[nodiscard]] ComplexVector gamma(const ComplexVector& f1, const ComplexVector& f2) const;

    /// Gamma applied to an accumulated symmetric pair matrix S (r x r), i.e. W vec(S).
    [[nodiscard]] ComplexVector gamma_from_pairs(const ComplexMatrix& pairs) const;

    /// Symmetric outer product (a1 a2^T + a2 a1^T)/2 of the reduced inputs.
    [[nodiscard]] ComplexMatrix symmetric_pairs(const ComplexVector& f1,
                                                const ComplexVector& f2) const;

private:
    BackendKind kind_;
    std::shared_ptr<const velocity::VelocityBasis> basis_;
    RealMatrix l_;
    RealMatrix input_map_;
    RealMatrix output_tensor_;
    std::string fingerprint_;
    double continuity_ = 0.0;
};

/// BGK model: L = nu (P0 - Id), Gamma the second-order term of the local Maxwellian.
CollisionBackend bgk_backend(std::shared_ptr<const velocity::VelocityBasis> basis, double nu);

/// Classical Maxwell-molecule eigenvalue for the Burnett function of radial
/// index r and angular order l, with the constant kernel b = 1/(2 pi), by
/// Gauss-Legendre quadrature of the given order.
double maxwell_eigenvalue(int r, int l, int quad_order);

/// Maxwell molecules with cutoff: L diagonal in the Burnett re-indexing.
/// Throws ConfigError for quad_order < 16 and NumericalError when doubling the
/// angular order changes an eigenvalue by more than 1e-6.
CollisionBackend maxwell_cutoff_backend(std::shared_ptr<const velocity::VelocityBasis> basis,
                                        int angular_quad_order = 32);

/// BGK linear part with a random bounded bilinear term composed with (Id - P0).
CollisionBackend synthetic_gamma_backend(std::shared_ptr<const velocity::VelocityBasis> basis,
                                         std::uint64_t seed, double scale, double nu = 1.0);

/// (Gamma(f1,f2) + Gamma(f2,f1))/2; bitwise symmetric in its arguments.
ComplexVector gamma_sym(const CollisionBackend& backend, const ComplexVector& f1,
                        const ComplexVector& f2);

/// Power-iteration estimate of the bilinear norm of Gamma.
double estimate_bilinear_norm(const CollisionBackend& backend, std::uint64_t seed,
                              int restarts = 4, int iterations = 60);

struct FluxFunctions {
    /// Coefficients of mu^{1/2} Phi_ij, flattened as 3*i + j.
    std::array<RealVector, 9> phi;
    /// Coefficients of mu^{1/2} Psi_i.
    std::array<RealVector, 3> psi;
    double residual = 0.0;
};

/// Solves L(mu^{1/2} Phi) = (|v|^2/3 Id - v (x) v) mu^{1/2} and
/// L(mu^{1/2} Psi) = v (5/2 - |v|^2/2) mu^{1/2} on (Ker L)^perp.
FluxFunctions solve_flux_functions(const CollisionBackend& backend);

struct Viscosities {
    double nu_ns = 0.0;
    double nu_heat = 0.0;
};

/// nu_NS = -(1/10) sum <Phi, L Phi>, nu_heat = -(2/15) sum <Psi, L Psi>
/// (sign chosen so that both are positive for dissipative L).
Viscosities viscosities(const CollisionBackend& backend);
Viscosities viscosities(const CollisionBackend& backend, const FluxFunctions& flux);

struct ConservationReport {
    double max_residual = 0.0;
    std::size_t worst_sample = 0;
    std::size_t samples = 0;
    bool passed = true;
};

/// Max over random samples f of |<Gamma(f,f), phi mu^{1/2}>| for phi in {1, v, |v|^2}.
ConservationReport check_conservation(const CollisionBackend& backend, std::size_t sample_count,
                                      std::uint64_t seed = 1, double threshold = 1e-10);

/// Number of eigenvalues of the symmetrized L with magnitude below tol.
int kernel_dimension(const CollisionBackend& backend, double tol = 1e-10);

/// Orthonormal basis of the orthogonal complement of Ker L (dim x (dim - 5)).
RealMatrix microscopic_basis(const velocity::VelocityBasis& basis);

/// Spectral gap lambda_2 of -L on (Ker L)^perp measured in the H^{s,*} norm (s in {0,1}).
double coercivity_constant(const CollisionBackend& backend, int s = 0, double gamma = 0.0);

/// Sorted eigenvalues of the symmetrized L (ascending).
RealVector l_eigenvalues(const CollisionBackend& backend);

}  // namespace hydrolimit::collision
