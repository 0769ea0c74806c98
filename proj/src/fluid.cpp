#include "hydrolimit/fluid.hpp"

#include "hydrolimit/kinetic.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace hydrolimit::fluid {

HydroField::HydroField(std::shared_ptr<const SpatialGrid> g)
    : grid(std::move(g)),
      rho(ComplexVector::Zero(Eigen::Index(grid->size()))),
      u(ComplexMatrix::Zero(3, Eigen::Index(grid->size()))),
      theta(ComplexVector::Zero(Eigen::Index(grid->size()))) {}

double HydroField::divergence_defect() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const Vec3 k = grid->mode(i).as_real();
        worst = std::max(worst, std::abs(k.cast<Complex>().dot(u.col(Eigen::Index(i)))));
    }
    return worst;
}

double HydroField::boussinesq_defect() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        if (i == grid->zero_index()) continue;
        worst = std::max(worst, std::abs(rho(Eigen::Index(i)) + theta(Eigen::Index(i))));
    }
    return worst;
}

double HydroField::mean_defect() const {
    const auto z = Eigen::Index(grid->zero_index());
    return std::max({std::abs(rho(z)), u.col(z).cwiseAbs().maxCoeff(), std::abs(theta(z))});
}

double HydroField::reality_defect() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const auto a = Eigen::Index(i), b = Eigen::Index(grid->negated(i));
        worst = std::max({worst, std::abs(rho(b) - std::conj(rho(a))),
                          std::abs(theta(b) - std::conj(theta(a))),
                          (u.col(b) - u.col(a).conjugate()).cwiseAbs().maxCoeff()});
    }
    return worst;
}

double HydroField::hm_norm(double m) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const auto a = Eigen::Index(i);
        sum += sobolev_weight(grid->mode(i), m) *
               (std::norm(rho(a)) + u.col(a).squaredNorm() + 1.5 * std::norm(theta(a)));
    }
    return std::sqrt(sum);
}

double HydroField::kinetic_energy() const { return u.squaredNorm(); }

HydroField& HydroField::operator+=(const HydroField& o) {
    rho += o.rho;
    u += o.u;
    theta += o.theta;
    return *this;
}

HydroField& HydroField::operator*=(double s) {
    rho *= s;
    u *= s;
    theta *= s;
    return *this;
}

ComplexMatrix leray_project(const SpatialGrid& grid, const ComplexMatrix& u) {
    if (u.rows() != 3 || u.cols() != Eigen::Index(grid.size())) {
        throw ConfigError("leray_project: velocity must be 3 x modes");
    }
    ComplexMatrix out = u;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Wavevector& k = grid.mode(i);
        if (k.is_zero()) continue;
        const ComplexVec3 kc = k.as_real().cast<Complex>();
        const auto c = Eigen::Index(i);
        out.col(c) -= kc * (kc.dot(out.col(c)) / k.norm_squared());
    }
    return out;
}

HydroField well_prepared(const HydroField& in, WellPreparedConvention convention) {
    const double scale = std::max(1.0, in.hm_norm(0.0));
    if (in.mean_defect() > 1e-14 * scale) {
        throw ConfigError("well_prepared: input must be mean-free");
    }
    HydroField out(in.grid);
    out.rho = 0.4 * in.rho - 0.6 * in.theta;
    out.u = leray_project(*in.grid, in.u);
    out.theta = convention == WellPreparedConvention::Projection ? ComplexVector(-out.rho)
                                                                 : ComplexVector(-in.rho);
    return out;
}

SpectralField lift_kinetic(const velocity::VelocityBasis& basis, const HydroField& h) {
    SpectralField f(h.grid, Eigen::Index(basis.dim()));
    for (std::size_t i = 0; i < h.modes(); ++i) {
        const auto c = Eigen::Index(i);
        f.coeffs.col(c) = basis.hydro_profile(h.rho(c), h.u.col(c), h.theta(c));
    }
    return f;
}

HydroField hydro_moments(const velocity::VelocityBasis& basis, const SpectralField& f) {
    HydroField h(f.grid);
    const ComplexMatrix m = basis.hydro_rows().cast<Complex>() * f.coeffs;
    h.rho = m.row(0).transpose();
    h.u = m.middleRows(1, 3);
    h.theta = m.row(4).transpose();
    return h;
}

void Mollifier::validate() const {
    if (!(alpha > 0.0 && alpha < 0.25)) throw ConfigError("mollifier: alpha must lie in (0, 1/4)");
    if (!(radius > 0.0)) throw ConfigError("mollifier: radius must be positive");
}

double Mollifier::multiplier(double eps, const Wavevector& k) const {
    return semigroup::chi(std::pow(eps, alpha) * k.norm() / radius);
}

HydroField Mollifier::apply(const HydroField& h, double eps) const {
    validate();
    HydroField out = h;
    for (std::size_t i = 0; i < h.modes(); ++i) {
        const double m = multiplier(eps, h.grid->mode(i));
        const auto c = Eigen::Index(i);
        out.rho(c) *= m;
        out.u.col(c) *= m;
        out.theta(c) *= m;
    }
    return out;
}

SpectralField Mollifier::apply(const SpectralField& f, double eps) const {
    validate();
    SpectralField out = f;
    for (std::size_t i = 0; i < f.modes(); ++i) {
        out.coeffs.col(Eigen::Index(i)) *= multiplier(eps, f.grid->mode(i));
    }
    return out;
}

std::size_t NsfParams::steps() const { return std::size_t(std::llround(T / dt)); }

void NsfParams::validate(const SpatialGrid& grid) const {
    if (!(nu_ns > 0.0) || !(nu_heat > 0.0)) throw ConfigError("nsf: viscosities must be positive");
    if (!(dt > 0.0) || !(T >= 0.0)) throw ConfigError("nsf: need dt > 0 and T >= 0");
    if (std::abs(double(steps()) * dt - T) > 1e-9 * std::max(1.0, T)) {
        throw ConfigError("nsf: T must be an integer multiple of dt");
    }
    if (stride == 0) throw ConfigError("nsf: stride must be positive");
    const double k = std::max(1, grid.max_mode());
    const double limit = cfl * 0.5 / (std::max(nu_ns, nu_heat) * k * k);
    if (dt > limit * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "nsf: dt = " << dt << " violates the step bound " << limit;
        throw ConfigError(os.str());
    }
}

namespace {

struct NsfState {
    ComplexMatrix u;      // 3 x modes
    ComplexVector theta;  // modes
};

class NsfRhs {
public:
    NsfRhs(std::shared_ptr<const Convolver> conv) : conv_(std::move(conv)) {
        pairs_ = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}, {0, 3}, {1, 3}, {2, 3}};
    }

    /// (-P div(u (x) u), -div(u theta)).
    NsfState operator()(const NsfState& s) const {
        const auto& grid = conv_->grid();
        const auto modes = Eigen::Index(grid.size());
        ComplexMatrix a(modes, 4);
        a.leftCols(3) = s.u.transpose();
        a.col(3) = s.theta;
        const ComplexMatrix p = conv_->products(a, a, pairs_);
        static constexpr int uu[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
        NsfState out{ComplexMatrix::Zero(3, modes), ComplexVector::Zero(modes)};
        for (Eigen::Index c = 0; c < modes; ++c) {
            const Vec3 k = grid.mode(std::size_t(c)).as_real();
            for (int i = 0; i < 3; ++i) {
                Complex div = 0.0;
                for (int j = 0; j < 3; ++j) div += k(j) * p(c, uu[i][j]);
                out.u(i, c) = -kI * div;
            }
            out.theta(c) = -kI * (k(0) * p(c, 6) + k(1) * p(c, 7) + k(2) * p(c, 8));
        }
        out.u = leray_project(grid, out.u);
        return out;
    }

private:
    std::shared_ptr<const Convolver> conv_;
    std::vector<std::pair<int, int>> pairs_;
};

HydroField to_field(std::shared_ptr<const SpatialGrid> grid, const NsfState& s) {
    HydroField h(std::move(grid));
    h.u = s.u;
    h.theta = s.theta;
    h.rho = -s.theta;
    return h;
}

double max_speed(const NsfState& s) {
    // Crude bound sup|u| <= sum_k |u(k)|.
    return s.u.colwise().norm().sum();
}

}  // namespace

NsfTrajectory solve_nsf(const HydroField& init, const NsfParams& params,
                        std::shared_ptr<const Convolver> convolver) {
    const auto& grid = convolver->grid();
    if (init.modes() != grid.size()) throw ConfigError("solve_nsf: grid mismatch");
    params.validate(grid);
    const double scale = std::max(1e-300, init.hm_norm(0.0));
    if (init.mean_defect() > 1e-13 * scale || init.divergence_defect() > 1e-12 * scale ||
        init.boussinesq_defect() > 1e-12 * scale) {
        throw ConfigError("solve_nsf: initial data must be mean-free, divergence-free and Boussinesq");
    }
    const auto modes = Eigen::Index(grid.size());
    const double dt = params.dt;
    RealVector eu(modes), et(modes), k2(modes);
    for (Eigen::Index c = 0; c < modes; ++c) {
        k2(c) = grid.mode(std::size_t(c)).norm_squared();
        eu(c) = std::exp(-params.nu_ns * k2(c) * dt);
        et(c) = std::exp(-params.nu_heat * k2(c) * dt);
    }
    auto factor = [&](NsfState s) {
        for (Eigen::Index c = 0; c < modes; ++c) {
            s.u.col(c) *= eu(c);
            s.theta(c) *= et(c);
        }
        return s;
    };

    const NsfRhs rhs(convolver);
    NsfTrajectory out;
    out.grid = init.grid;
    out.nu_ns = params.nu_ns;
    out.nu_heat = params.nu_heat;
    out.dt = dt * double(params.stride);
    NsfState s{init.u, init.theta};
    out.states.push_back(to_field(init.grid, s));

    const double e0 = s.u.squaredNorm();
    const double n0 = init.hm_norm(0.5);
    double dissipated = 0.0;
    const std::size_t steps = params.steps();
    for (std::size_t n = 0; n < steps; ++n) {
        if (dt * max_speed(s) * std::max(1, grid.max_mode()) > params.cfl) {
            std::ostringstream os;
            os << "solve_nsf: advective step bound violated at t = " << dt * double(n);
            throw ConfigError(os.str());
        }
        const NsfState n0s = rhs(s);
        NsfState star{s.u + dt * n0s.u, s.theta + dt * n0s.theta};
        star = factor(star);
        const NsfState n1 = rhs(star);
        NsfState en = factor(n0s);
        NsfState next = factor(s);
        next.u += 0.5 * dt * (en.u + n1.u);
        next.theta += 0.5 * dt * (en.theta + n1.theta);
        next.u.col(Eigen::Index(grid.zero_index())) = s.u.col(Eigen::Index(grid.zero_index()));
        next.theta(Eigen::Index(grid.zero_index())) = s.theta(Eigen::Index(grid.zero_index()));

        // int |u_k|^2 over the step, exact for per-mode exponential behaviour.
        for (Eigen::Index c = 0; c < modes; ++c) {
            if (k2(c) == 0.0) continue;
            const double a = s.u.col(c).squaredNorm(), b = next.u.col(c).squaredNorm();
            double integral = 0.5 * dt * (a + b);
            if (a > 0.0 && b > 0.0 && std::abs(a - b) > 1e-12 * a) integral = dt * (a - b) / std::log(a / b);
            dissipated += 2.0 * params.nu_ns * k2(c) * integral;
        }
        s = std::move(next);
        if (e0 > 0.0) out.energy_excess = std::max(out.energy_excess, (s.u.squaredNorm() + dissipated) / e0 - 1.0);

        const HydroField h = to_field(init.grid, s);
        const double norm = h.hm_norm(0.5);
        if (!std::isfinite(norm) || norm > params.blowup_factor * std::max(n0, 1e-300)) {
            std::ostringstream os;
            os << "solve_nsf: norm growth beyond bound, approximate blow-up time T* ~ "
               << dt * double(n + 1);
            throw NumericalError(os.str());
        }
        out.max_divergence_defect = std::max(out.max_divergence_defect, h.divergence_defect());
        out.max_boussinesq_defect = std::max(out.max_boussinesq_defect, h.boussinesq_defect());
        if ((n + 1) % params.stride == 0) out.states.push_back(h);
    }
    return out;
}

FieldTrajectory lift_trajectory(const velocity::VelocityBasis& basis, const NsfTrajectory& traj) {
    FieldTrajectory out;
    out.grid = traj.grid;
    out.dt = traj.dt;
    for (const auto& h : traj.states) out.states.push_back(lift_kinetic(basis, h).coeffs);
    return out;
}

FieldTrajectory nsf_duhamel_residual_trajectory(
    const NsfTrajectory& traj, const semigroup::SemigroupDecomposition& decomposition,
    std::shared_ptr<const Convolver> convolver) {
    const auto& basis = decomposition.backend().basis();
    FieldTrajectory g = lift_trajectory(basis, traj);
    if (g.states.empty()) return g;
    const kinetic::GammaConvolution gamma(decomposition.backend_ptr(), std::move(convolver));
    FieldTrajectory source;
    source.grid = g.grid;
    source.dt = g.dt;
    for (const auto& s : g.states) source.states.push_back(gamma.apply(s));
    const FieldTrajectory psi = decomposition.psi_nsf(source);
    const FieldTrajectory lin = decomposition.u_nsf_flow(g.grid, g.states.front(), g.dt, g.steps());
    for (std::size_t n = 0; n <= g.steps(); ++n) g.states[n] -= lin.states[n] + psi.states[n];
    return g;
}

double nsf_duhamel_residual(const NsfTrajectory& traj,
                            const semigroup::SemigroupDecomposition& decomposition,
                            std::shared_ptr<const Convolver> convolver) {
    const FieldTrajectory r = nsf_duhamel_residual_trajectory(traj, decomposition, std::move(convolver));
    double worst = 0.0;
    for (std::size_t n = 0; n < r.states.size(); ++n) worst = std::max(worst, r.at(n).hm_norm(0.5));
    return worst;
}

void write_trajectory_json(const std::string& path, const NsfTrajectory& traj) {
    using nlohmann::json;
    auto cvec = [](auto&& v) {
        json re = json::array(), im = json::array();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            re.push_back(v(i).real());
            im.push_back(v(i).imag());
        }
        return json{{"re", re}, {"im", im}};
    };
    json doc;
    json modes = json::array();
    for (const auto& k : traj.grid->modes()) modes.push_back(k.k);
    doc["grid"] = {{"dim_x", traj.grid->dim_x()}, {"max_mode", traj.grid->max_mode()}, {"modes", modes}};
    doc["nu_ns"] = traj.nu_ns;
    doc["nu_heat"] = traj.nu_heat;
    doc["dt"] = traj.dt;
    json snaps = json::array();
    for (std::size_t n = 0; n < traj.states.size(); ++n) {
        const auto& h = traj.states[n];
        snaps.push_back({{"t", traj.time(n)},
                         {"rho", cvec(h.rho)},
                         {"u", {cvec(h.u.row(0)), cvec(h.u.row(1)), cvec(h.u.row(2))}},
                         {"theta", cvec(h.theta)}});
    }
    doc["snapshots"] = std::move(snaps);
    std::ofstream out(path);
    if (!out) throw ConfigError("write_trajectory_json: cannot write " + path);
    out << doc.dump() << '\n';
}

}  // namespace hydrolimit::fluid
