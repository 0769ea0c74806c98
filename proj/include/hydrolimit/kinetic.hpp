#pragma once

// Time integration of the scaled perturbation equation
//   d_t f = eps^{-2} L f - eps^{-1} v.grad_x f + eps^{-1} Gamma(f, f)
// on the Fourier x Hermite discretization.

#include "hydrolimit/semigroup.hpp"

#include <functional>
#include <memory>

namespace hydrolimit::kinetic {

/// Gamma_sym(f1, f2)^(k) = sum_{k'} Gamma_sym(f1(k - k'), f2(k')) on a grid.
class GammaConvolution {
public:
    GammaConvolution(std::shared_ptr<const collision::CollisionBackend> backend,
                     std::shared_ptr<const Convolver> convolver);

    /// f1, f2: (vdim x modes).
    [[nodiscard]] ComplexMatrix apply(const ComplexMatrix& f1, const ComplexMatrix& f2) const;
    [[nodiscard]] ComplexMatrix apply(const ComplexMatrix& f) const { return apply(f, f); }

    [[nodiscard]] const Convolver& convolver() const { return *convolver_; }
    [[nodiscard]] const collision::CollisionBackend& backend() const { return *backend_; }

private:
    std::shared_ptr<const collision::CollisionBackend> backend_;
    std::shared_ptr<const Convolver> convolver_;
    std::vector<std::pair<int, int>> upper_pairs_;  ///< i <= j
    std::vector<std::pair<int, int>> all_pairs_;
    ComplexMatrix w_upper_;                          ///< W folded onto i <= j
    ComplexMatrix w_all_;
};

SpectralField spatial_convolution_gamma(const GammaConvolution& gamma, const SpectralField& f1,
                                        const SpectralField& f2);

struct KineticRun {
    double eps = 0.1;
    double T = 1.0;
    double dt = 0.01;
    /// Keep every stride-th step in the returned trajectory.
    std::size_t stride = 1;
    bool nonlinear = true;
    /// A step whose H^{1/2} norm more than doubles is reported as unstable.
    double growth_limit = 2.0;

    [[nodiscard]] std::size_t steps() const;
    void validate() const;
};

/// Called after every step with (step index, time, state).
using StepObserver = std::function<void(std::size_t, double, const ComplexMatrix&)>;

/// ETD2RK on the exact linear flow:
///   a       = E f_n + h phi_1 N(f_n),
///   f_{n+1} = E f_n + W0 N(f_n) + W1 N(a),   N(f) = eps^{-1} Gamma_sym(f, f).
/// props must be built for (run.eps, run.dt). gamma may be null when run.nonlinear is false.
FieldTrajectory solve_kinetic(const SpectralField& f_in, const KineticRun& run,
                              const semigroup::PropagatorSet& props, const GammaConvolution* gamma,
                              const StepObserver& observer = {});

/// sup_n || f_n - (U(t_n) f_0 + Psi[f, f](t_n)) ||_{H^{1/2}_x L^2_v}, with Psi built from
/// the trajectory's own collision source. The trajectory must have props' step.
/// f_n - U(t_n) f_0 - Psi[f, f](t_n) per stored state.
FieldTrajectory residual_trajectory(const FieldTrajectory& trajectory,
                                    const semigroup::PropagatorSet& props,
                                    const GammaConvolution* gamma);

double residual_check(const FieldTrajectory& trajectory, const semigroup::PropagatorSet& props,
                      const GammaConvolution* gamma);

}  // namespace hydrolimit::kinetic
