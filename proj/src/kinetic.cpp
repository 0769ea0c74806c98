#include "hydrolimit/kinetic.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace hydrolimit::kinetic {

using collision::CollisionBackend;
using semigroup::PropagatorSet;

GammaConvolution::GammaConvolution(std::shared_ptr<const CollisionBackend> backend,
                                   std::shared_ptr<const Convolver> convolver)
    : backend_(std::move(backend)), convolver_(std::move(convolver)) {
    const int r = int(backend_->rank());
    const RealMatrix& w = backend_->output_tensor();
    w_upper_.resize(w.rows(), r * (r + 1) / 2);
    w_all_ = w.cast<Complex>();
    for (int j = 0; j < r; ++j) {
        for (int i = 0; i < r; ++i) all_pairs_.emplace_back(i, j);
    }
    Eigen::Index c = 0;
    for (int i = 0; i < r; ++i) {
        for (int j = i; j < r; ++j, ++c) {
            upper_pairs_.emplace_back(i, j);
            RealVector col = w.col(i + r * j);
            if (i != j) col += w.col(j + r * i);
            w_upper_.col(c) = col.cast<Complex>();
        }
    }
}

ComplexMatrix GammaConvolution::apply(const ComplexMatrix& f1, const ComplexMatrix& f2) const {
    const auto modes = Eigen::Index(convolver_->grid().size());
    if (f1.cols() != modes || f2.cols() != modes ||
        f1.rows() != Eigen::Index(backend_->basis().dim()) || f2.rows() != f1.rows()) {
        throw ConfigError("GammaConvolution: field shape does not match backend and grid");
    }
    const ComplexMatrix a = (backend_->input_map().cast<Complex>() * f1).transpose();
    if (&f1 == &f2 || f1 == f2) {
        const ComplexMatrix pairs = convolver_->products(a, a, upper_pairs_);
        return w_upper_ * pairs.transpose();
    }
    const ComplexMatrix b = (backend_->input_map().cast<Complex>() * f2).transpose();
    const ComplexMatrix pairs = convolver_->products(a, b, all_pairs_);
    return w_all_ * pairs.transpose();
}

SpectralField spatial_convolution_gamma(const GammaConvolution& gamma, const SpectralField& f1,
                                        const SpectralField& f2) {
    if (f1.grid->size() != gamma.convolver().grid().size() || f2.grid->size() != f1.grid->size()) {
        throw ConfigError("spatial_convolution_gamma: grid mismatch");
    }
    SpectralField out;
    out.grid = f1.grid;
    out.coeffs = gamma.apply(f1.coeffs, f2.coeffs);
    return out;
}

std::size_t KineticRun::steps() const { return std::size_t(std::llround(T / dt)); }

void KineticRun::validate() const {
    if (!(eps > 0.0)) throw ConfigError("kinetic run: eps must be positive");
    if (!(dt > 0.0) || !(T >= 0.0)) throw ConfigError("kinetic run: need dt > 0 and T >= 0");
    if (std::abs(double(steps()) * dt - T) > 1e-9 * std::max(1.0, T)) {
        throw ConfigError("kinetic run: T must be an integer multiple of dt");
    }
    if (stride == 0) throw ConfigError("kinetic run: stride must be positive");
    if (!(growth_limit > 1.0)) throw ConfigError("kinetic run: growth_limit must exceed 1");
}

namespace {

double h_half(const SpatialGrid& grid, const ComplexMatrix& f) {
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        sum += sobolev_weight(grid.mode(i), 0.5) * f.col(Eigen::Index(i)).squaredNorm();
    }
    return std::sqrt(sum);
}

}  // namespace

FieldTrajectory solve_kinetic(const SpectralField& f_in, const KineticRun& run,
                              const PropagatorSet& props, const GammaConvolution* gamma,
                              const StepObserver& observer) {
    run.validate();
    if (std::abs(props.eps() - run.eps) > 1e-15 * run.eps ||
        std::abs(props.step() - run.dt) > 1e-15 * run.dt) {
        throw ConfigError("solve_kinetic: propagators built for a different eps or dt");
    }
    if (f_in.grid->size() != props.grid().size()) throw ConfigError("solve_kinetic: grid mismatch");
    if (run.nonlinear && gamma == nullptr) {
        throw ConfigError("solve_kinetic: nonlinear run needs a collision convolution");
    }
    const auto& grid = props.grid();
    const double inv_eps = 1.0 / run.eps;
    auto source = [&](const ComplexMatrix& f) { return (inv_eps * gamma->apply(f)).eval(); };

    FieldTrajectory out;
    out.grid = props.grid_ptr();
    out.dt = run.dt * double(run.stride);
    out.states.push_back(f_in.coeffs);

    ComplexMatrix f = f_in.coeffs;
    double norm = h_half(grid, f);
    const std::size_t steps = run.steps();
    for (std::size_t n = 0; n < steps; ++n) {
        ComplexMatrix next = props.apply_all(PropagatorSet::Op::Exp, f);
        if (run.nonlinear) {
            const ComplexMatrix s0 = source(f);
            const ComplexMatrix predictor = next + props.apply_all(PropagatorSet::Op::Phi1, s0);
            const ComplexMatrix s1 = source(predictor);
            next += props.apply_all(PropagatorSet::Op::W0, s0) + props.apply_all(PropagatorSet::Op::W1, s1);
        }
        const double next_norm = h_half(grid, next);
        if (!std::isfinite(next_norm) || (norm > 0.0 && next_norm > run.growth_limit * norm)) {
            std::ostringstream os;
            os << "solve_kinetic: unstable step " << n << " at t = " << run.dt * double(n)
               << " (H^1/2 norm " << norm << " -> " << next_norm << ")";
            throw NumericalError(os.str());
        }
        f = std::move(next);
        norm = next_norm;
        if (observer) observer(n + 1, run.dt * double(n + 1), f);
        if ((n + 1) % run.stride == 0) out.states.push_back(f);
    }
    return out;
}

FieldTrajectory residual_trajectory(const FieldTrajectory& trajectory, const PropagatorSet& props,
                                    const GammaConvolution* gamma) {
    FieldTrajectory out;
    out.grid = trajectory.grid;
    out.dt = trajectory.dt;
    if (trajectory.states.empty()) return out;
    if (std::abs(trajectory.dt - props.step()) > 1e-14 * props.step()) {
        throw ConfigError("residual_check: trajectory step differs from the propagator step");
    }
    const std::size_t steps = trajectory.steps();
    ComplexMatrix linear = trajectory.states.front();
    std::optional<FieldTrajectory> psi;
    if (gamma != nullptr) {
        FieldTrajectory source;
        source.grid = trajectory.grid;
        source.dt = trajectory.dt;
        for (const auto& s : trajectory.states) source.states.push_back(gamma->apply(s));
        psi = semigroup::duhamel(props, source, 1.0 / props.eps());
    }
    for (std::size_t n = 0; n <= steps; ++n) {
        if (n > 0) linear = props.apply_all(PropagatorSet::Op::Exp, linear);
        ComplexMatrix diff = trajectory.states[n] - linear;
        if (psi) diff -= psi->states[n];
        out.states.push_back(std::move(diff));
    }
    return out;
}

double residual_check(const FieldTrajectory& trajectory, const PropagatorSet& props,
                      const GammaConvolution* gamma) {
    const FieldTrajectory r = residual_trajectory(trajectory, props, gamma);
    double worst = 0.0;
    for (const auto& s : r.states) worst = std::max(worst, h_half(props.grid(), s));
    return worst;
}

}  // namespace hydrolimit::kinetic
