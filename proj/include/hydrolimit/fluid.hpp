#pragma once

// Incompressible Navier-Stokes-Fourier system on the torus,
//   d_t u + u.grad u - nu_NS lap u = -grad p,   d_t theta + u.grad theta - nu_heat lap theta = 0,
//   div u = 0,   grad(rho + theta) = 0,
// its well-prepared data, kinetic lift, and frequency mollifier.

#include "hydrolimit/semigroup.hpp"

#include <memory>
#include <string>

namespace hydrolimit::fluid {

/// Fourier coefficients of (rho, u, theta); u is 3 x modes.
struct HydroField {
    std::shared_ptr<const SpatialGrid> grid;
    ComplexVector rho;
    ComplexMatrix u;
    ComplexVector theta;

    HydroField() = default;
    explicit HydroField(std::shared_ptr<const SpatialGrid> g);

    [[nodiscard]] std::size_t modes() const { return grid->size(); }
    /// Largest |k.u(k)|.
    [[nodiscard]] double divergence_defect() const;
    /// Largest |rho(k) + theta(k)| over k != 0.
    [[nodiscard]] double boussinesq_defect() const;
    /// Largest coefficient of the k = 0 mode.
    [[nodiscard]] double mean_defect() const;
    /// Largest |c(-k) - conj c(k)| over all components.
    [[nodiscard]] double reality_defect() const;
    /// (sum_k <k>^{2m} (|rho|^2 + |u|^2 + 3/2 |theta|^2))^{1/2}: the H^m_x L^2_v norm of the lift.
    [[nodiscard]] double hm_norm(double m) const;
    /// sum_k |u(k)|^2.
    [[nodiscard]] double kinetic_energy() const;

    HydroField& operator+=(const HydroField& o);
    HydroField& operator*=(double s);
};

/// Per mode: u - k (k.u)/|k|^2.
ComplexMatrix leray_project(const SpatialGrid& grid, const ComplexMatrix& u);

enum class WellPreparedConvention {
    Projection,  ///< theta_bar = -rho_bar: the Boussinesq projection
    Literal,     ///< theta_bar = -rho_in: not Boussinesq unless rho_in + theta_in = 0
};

/// rho_bar = 2/5 rho - 3/5 theta, u_bar = P u, and theta_bar per the convention.
/// Throws ConfigError unless the input is mean-free.
HydroField well_prepared(const HydroField& in,
                         WellPreparedConvention convention = WellPreparedConvention::Projection);

/// (rho + u.v + theta (|v|^2 - 3)/2) mu^{1/2} per mode.
SpectralField lift_kinetic(const velocity::VelocityBasis& basis, const HydroField& h);

/// Moments (rho, u, theta) of each mode.
HydroField hydro_moments(const velocity::VelocityBasis& basis, const SpectralField& f);

/// Profile psi(s) = chi(s / radius) of the mollifier psi(eps^alpha |D_x|).
struct Mollifier {
    double alpha = 0.05;
    double radius = 8.0;

    void validate() const;
    [[nodiscard]] double multiplier(double eps, const Wavevector& k) const;
    [[nodiscard]] HydroField apply(const HydroField& h, double eps) const;
    [[nodiscard]] SpectralField apply(const SpectralField& f, double eps) const;
};

struct NsfParams {
    double nu_ns = 1.0;
    double nu_heat = 1.0;
    double T = 1.0;
    double dt = 1e-3;
    std::size_t stride = 1;
    /// Reject dt > cfl * 0.5 / (nu_max K^2) and dt max|u| K > cfl.
    double cfl = 1.0;
    /// Growth of the H^{1/2} norm beyond this factor is reported as blow-up.
    double blowup_factor = 1e3;

    [[nodiscard]] std::size_t steps() const;
    void validate(const SpatialGrid& grid) const;
};

struct NsfTrajectory {
    std::shared_ptr<const SpatialGrid> grid;
    double nu_ns = 0.0;
    double nu_heat = 0.0;
    double dt = 0.0;  ///< spacing of the stored states
    std::vector<HydroField> states;
    /// max_t (||u(t)||^2 + 2 nu_NS int_0^t ||grad u||^2) / ||u_0||^2 - 1 over all steps.
    double energy_excess = 0.0;
    double max_divergence_defect = 0.0;
    double max_boussinesq_defect = 0.0;

    [[nodiscard]] std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
    [[nodiscard]] double time(std::size_t n) const { return dt * double(n); }
};

/// Integrating-factor Heun scheme with exact heat factors and alias-free Galerkin
/// products (the truncated convolution of the grid):
///   u* = E (u_n + dt N(u_n)),  u_{n+1} = E u_n + dt/2 (E N(u_n) + N(u*)).
/// Throws ConfigError on a CFL violation or non-well-prepared data and
/// NumericalError with the time of detection when the norm grows beyond the bound.
NsfTrajectory solve_nsf(const HydroField& init, const NsfParams& params,
                        std::shared_ptr<const Convolver> convolver);

/// Kinetic lift of every stored state.
FieldTrajectory lift_trajectory(const velocity::VelocityBasis& basis, const NsfTrajectory& traj);

/// sup_n || g(t_n) - U_NSF(t_n) g_in - Psi_NSF[g, g](t_n) ||_{H^{1/2}_x L^2_v}, g the lifted
/// trajectory and Gamma the convolution on the trajectory's grid.
double nsf_duhamel_residual(const NsfTrajectory& traj,
                            const semigroup::SemigroupDecomposition& decomposition,
                            std::shared_ptr<const Convolver> convolver);

/// g(t_n) - U_NSF(t_n) g_in - Psi_NSF[g, g](t_n) per stored state.
FieldTrajectory nsf_duhamel_residual_trajectory(
    const NsfTrajectory& traj, const semigroup::SemigroupDecomposition& decomposition,
    std::shared_ptr<const Convolver> convolver);

/// Self-describing JSON: header (grid, viscosities, dt) and per-snapshot (t, rho, u, theta).
void write_trajectory_json(const std::string& path, const NsfTrajectory& traj);

}  // namespace hydrolimit::fluid
