#pragma once

// Chemin-Lerner and X^eps_T norms of trajectories, the data/source/linear terms of
// the equation on delta = f^eps - g^eps, its piecewise Picard solution, and the
// eps-sweep that measures ||f^eps - g||.

#include "hydrolimit/fluid.hpp"
#include "hydrolimit/kinetic.hpp"
#include "hydrolimit/picard.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hydrolimit::analysis {

/// H^{s,*}_v with s in {0, 1}; s = 0, gamma = 0 is plain L^2_v.
struct VelocityNorm {
    int s = 0;
    double gamma = 0.0;
};

enum class Part { All, Macro, Micro };

/// ||P f(t_n, k)||^2 in the velocity norm, as a (times x modes) table.
RealMatrix modal_norms_squared(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                               Part part = Part::All, VelocityNorm vnorm = {});

/// (sum_k <k>^{2m} sup_t ||f(t, k)||^2)^{1/2}. The sup is taken over the stored
/// times, so this is a lower bound for the continuous-time norm.
double chemin_lerner_linf(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                          double m, Part part = Part::All, VelocityNorm vnorm = {});

/// (sum_k <k>^{2m} int_0^T ||f(t, k)||^2 dt)^{1/2}, trapezoidal in t.
double l2_time_norm(const velocity::VelocityBasis& basis, const FieldTrajectory& traj, double m,
                    Part part = Part::All, VelocityNorm vnorm = {});

/// (sum_k <k>^{2m} (int_0^T ||f(t, k)||^4 dt)^{1/2})^{1/2}.
double chemin_lerner_l4(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                        double m, Part part = Part::All, VelocityNorm vnorm = {});

/// sup_t (sum_k <k>^{2m} ||f(t, k)||^2)^{1/2}.
double sup_time_norm(const velocity::VelocityBasis& basis, const FieldTrajectory& traj, double m,
                     Part part = Part::All, VelocityNorm vnorm = {});

/// Parameters of X^eps_T; validate() enforces 0 < alpha < 1/4, 3/2 < ell <= 2,
/// alpha (ell - 1/2) < beta < 1/2 and eps in (0, 1].
struct XNormParams {
    double eps = 0.1;
    double alpha = 0.05;
    double beta = 0.25;
    double ell = 2.0;
    VelocityNorm vnorm;

    void validate() const;
};

struct NormReport {
    double eps = 0.0;
    double beta = 0.0;
    double ell = 0.0;
    double linf_half = 0.0;     ///< L~inf H^{1/2} L^2
    double macro_l2_32 = 0.0;   ///< L^2 H^{3/2} H^{s,*} of P0 f
    double micro_l2_32 = 0.0;   ///< L^2 H^{3/2} H^{s,*} of P0^perp f
    double linf_ell = 0.0;
    double macro_l2_ell = 0.0;
    double micro_l2_ell = 0.0;
    double x_value = 0.0;
    /// L~inf_{[0, t_n]} H^{1/2} L^2 for every stored n.
    std::vector<double> linf_half_profile;

    /// The weighted sum rebuilt from the stored components.
    [[nodiscard]] double composite() const;
};

NormReport x_eps_norm(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                      const XNormParams& params);

/// The X^eps value alone (no profile).
double x_eps_value(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                   const XNormParams& params);

struct InterpolationReport {
    double l4 = 0.0;    ///< L~4 H^n
    double linf = 0.0;  ///< L~inf H^{n-1/2}
    double l2 = 0.0;    ///< L^2 H^{n+1/2}
    double ratio = 0.0; ///< l4 / sqrt(linf l2), 0 for the zero field
    /// Per-mode Cauchy-Schwarz gives ratio <= 1 on any time grid.
    static constexpr double kConstant = 1.0;
};

InterpolationReport interpolation_check(const velocity::VelocityBasis& basis,
                                        const FieldTrajectory& traj, double n);

/// Data, source and nonlinear maps of
///   delta = D + S + L[delta] + B(delta, delta),
/// with L and B Duhamel integrals of pointwise sources:
///   L[delta](t) = int_0^t U(t - s) linear_source(s, delta(s)) ds,
///   B(a, b)(t)  = int_0^t U(t - s) bilinear_source(a(s), b(s)) ds.
struct DeltaTerms {
    std::shared_ptr<const semigroup::PropagatorSet> props;
    FieldTrajectory data;
    FieldTrajectory source;
    /// (time index, delta_n) -> source of L.
    std::function<ComplexMatrix(std::size_t, const ComplexMatrix&)> linear_source;
    /// (a_n, b_n) -> source of B; symmetric and bilinear.
    std::function<ComplexMatrix(const ComplexMatrix&, const ComplexMatrix&)> bilinear_source;

    [[nodiscard]] std::size_t steps() const { return data.steps(); }
    /// L on a slice whose first state sits at time index `offset`; the integral starts there.
    [[nodiscard]] FieldTrajectory linear(const FieldTrajectory& delta, std::size_t offset = 0) const;
    [[nodiscard]] FieldTrajectory bilinear(const FieldTrajectory& a, const FieldTrajectory& b) const;
};

/// D = U f_in - U_NSF P0 f_in, S = Psi[g, g] - Psi_NSF[g, g], L = 2 Psi[g, .], B = Psi.
/// g must be stored on the propagator step and grid.
DeltaTerms assemble_delta_terms(const SpectralField& f_in, const FieldTrajectory& g,
                                std::shared_ptr<const semigroup::PropagatorSet> props,
                                const semigroup::SemigroupDecomposition& decomposition,
                                std::shared_ptr<const kinetic::GammaConvolution> gamma);

struct DeltaOptions {
    double picard_tol = 1e-12;
    /// Largest admissible measured norm of L on a subinterval.
    double contraction = 0.5;
    /// Safety factor applied to the power-iteration norm estimates.
    double safety = 1.2;
    /// Candidate subinterval ends are multiples of this many steps (0: steps / 16).
    std::size_t block = 0;
    std::uint64_t seed = 7;
};

struct Subinterval {
    std::size_t begin = 0;
    std::size_t end = 0;
    double l_norm = 0.0;
    double b_norm = 0.0;
    double data_norm = 0.0;
    double data_bound = 0.0;
    std::size_t iterations = 0;
};

struct DeltaSolution {
    FieldTrajectory delta;
    std::vector<Subinterval> partition;
    double x_norm = 0.0;
};

/// Greedy partition with measured ||L|| <= contraction on each piece, then a
/// Picard solve per piece with data U(t - t_i) [L + B](t_i) carried from the past.
/// Throws NumericalError when a single step already fails to contract or a piece
/// is not admissible.
DeltaSolution delta_fixed_point(const DeltaTerms& terms, const velocity::VelocityBasis& basis,
                                const XNormParams& xnorm, const DeltaOptions& options = {});

/// K(g) = ||g||_{L~4 H^1 L^2} + ||g||_{L^2 H^{3/2} L^2}.
double partition_driver(const velocity::VelocityBasis& basis, const FieldTrajectory& g);

/// Well-prepared, real, mean-free hydrodynamic data on modes with |k|_inf <= max_k,
/// scaled so that its kinetic lift has H^{1/2}_x L^2_v norm `norm`.
fluid::HydroField random_well_prepared(const velocity::VelocityBasis& basis,
                                       std::shared_ptr<const SpatialGrid> grid, int max_k,
                                       double norm, std::uint64_t seed);

/// Real microscopic (P0 f = 0) data on |k|_inf <= max_k with H^{1/2}_x L^2_v norm `norm`.
SpectralField random_microscopic(const velocity::VelocityBasis& basis,
                                 std::shared_ptr<const SpatialGrid> grid, int max_k, double norm,
                                 std::uint64_t seed);

struct SweepConfig {
    int dim_x = 2;
    int max_mode = 16;
    int max_degree = 6;
    double nu = 1.0;
    double data_norm = 0.1;
    /// H^{1/2} norm of the microscopic part of f_in, held fixed along the sweep.
    double micro_norm = 0.0;
    int data_max_k = 2;
    double alpha = 0.05;
    double mollifier_radius = 8.0;
    double T = 0.5;
    double dt = 0.01;
    /// NSF substeps per stored kinetic step.
    std::size_t nsf_substeps = 8;
    VelocityNorm vnorm;
    std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};
    std::uint64_t seed = 1;
    std::string cache_dir;

    void validate() const;
};

struct SweepRow {
    double eps = 0.0;
    double e_linf = 0.0;       ///< ||f - g||_{L~inf H^{1/2} L^2}
    double e_l2 = 0.0;         ///< ||f - g||_{L^2 H^{3/2} H^{s,*}}
    double g_eps_distance = 0.0;  ///< same pair of norms for g^eps - g
    double kinetic_residual = 0.0;
    [[nodiscard]] double error() const { return e_linf + e_l2; }
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double slope = 0.0;        ///< least-squares slope of log e against log eps
    double theoretical = 0.0;  ///< 1/2 - 2 alpha
    bool strictly_decreasing = false;
    /// e(eps_min) / e(eps_max): near 1 when the error plateaus.
    double plateau_ratio = 0.0;
};

/// Kinetic runs from f_in = lift(psi(eps^alpha |D|) g_in) + micro data against the
/// NSF solution g from g_in, for every eps in the list (independent members).
SweepResult convergence_sweep(const SweepConfig& config);

/// Slope of the least-squares line through (log x, log y).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct CrossCheckConfig {
    int dim_x = 2;
    int max_mode = 8;
    int max_degree = 6;
    double nu = 1.0;
    double eps = 0.1;
    double T = 0.5;
    double dt = 0.01;
    std::size_t nsf_substeps = 4;
    double data_norm = 0.1;
    int data_max_k = 2;
    XNormParams xnorm;
    std::uint64_t seed = 1;
    std::string cache_dir;
};

struct CrossCheckResult {
    double distance = 0.0;          ///< ||(g + delta) - f||_{L~inf H^{1/2} L^2}
    double kinetic_residual = 0.0;  ///< L~inf H^{1/2} of the kinetic Duhamel residual
    double nsf_residual = 0.0;      ///< same for the fluid Duhamel residual
    double picard_tol = 0.0;
    double tolerance = 0.0;         ///< sum of the three above
    double delta_norm = 0.0;        ///< ||delta||_{X^eps_T}
    std::size_t subintervals = 0;
    double max_l_norm = 0.0;
    [[nodiscard]] bool passed(double factor = 5.0) const { return distance <= factor * tolerance; }
};

/// Independent-solver check: g^eps from the NSF solver plus delta from the fixed point
/// against f^eps from the kinetic solver.
CrossCheckResult delta_cross_check(const CrossCheckConfig& config);

}  // namespace hydrolimit::analysis
