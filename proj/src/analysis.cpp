#include "hydrolimit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace hydrolimit::analysis {

using semigroup::PropagatorSet;

namespace {

double trapezoid(const RealVector& q, double dt) {
    const Eigen::Index n = q.size();
    if (n < 2) return 0.0;
    return dt * (q.sum() - 0.5 * (q(0) + q(n - 1)));
}

RealVector sobolev_weights(const SpatialGrid& grid, double m) {
    RealVector w(Eigen::Index(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) w(Eigen::Index(i)) = sobolev_weight(grid.mode(i), m);
    return w;
}

/// The discrete Duhamel operator is the object being inverted, so no resolution refusal.
semigroup::DuhamelOptions unrestricted() {
    semigroup::DuhamelOptions o;
    o.max_relative_curvature = std::numeric_limits<double>::infinity();
    return o;
}

FieldTrajectory slice(const FieldTrajectory& t, std::size_t begin, std::size_t end) {
    FieldTrajectory out;
    out.grid = t.grid;
    out.dt = t.dt;
    out.states.assign(t.states.begin() + std::ptrdiff_t(begin), t.states.begin() + std::ptrdiff_t(end + 1));
    return out;
}

ComplexVector flatten(const FieldTrajectory& t) {
    if (t.states.empty()) return {};
    const Eigen::Index block = t.states.front().size();
    ComplexVector v(block * Eigen::Index(t.states.size()));
    for (std::size_t n = 0; n < t.states.size(); ++n) {
        v.segment(Eigen::Index(n) * block, block) = t.states[n].reshaped();
    }
    return v;
}

FieldTrajectory unflatten(const ComplexVector& v, const FieldTrajectory& like) {
    FieldTrajectory out;
    out.grid = like.grid;
    out.dt = like.dt;
    const Eigen::Index rows = like.states.front().rows(), cols = like.states.front().cols();
    const Eigen::Index block = rows * cols;
    for (std::size_t n = 0; n < like.states.size(); ++n) {
        out.states.push_back(v.segment(Eigen::Index(n) * block, block).reshaped(rows, cols));
    }
    return out;
}

FieldTrajectory difference(const FieldTrajectory& a, const FieldTrajectory& b) {
    if (a.states.size() != b.states.size()) throw ConfigError("trajectories differ in length");
    FieldTrajectory out = a;
    for (std::size_t n = 0; n < a.states.size(); ++n) out.states[n] -= b.states[n];
    return out;
}

void symmetrize(fluid::HydroField& h) {
    const fluid::HydroField c = h;
    for (std::size_t i = 0; i < h.modes(); ++i) {
        const auto a = Eigen::Index(i), b = Eigen::Index(h.grid->negated(i));
        h.rho(a) = 0.5 * (c.rho(a) + std::conj(c.rho(b)));
        h.theta(a) = 0.5 * (c.theta(a) + std::conj(c.theta(b)));
        h.u.col(a) = 0.5 * (c.u.col(a) + c.u.col(b).conjugate());
    }
}

bool in_box(const Wavevector& k, int max_k) {
    return std::abs(k.k[0]) <= max_k && std::abs(k.k[1]) <= max_k && std::abs(k.k[2]) <= max_k;
}

std::shared_ptr<const collision::CollisionBackend> make_bgk(int max_degree, double nu) {
    auto basis = std::make_shared<const velocity::VelocityBasis>(velocity::VelocityBasis::build(max_degree));
    return std::make_shared<const collision::CollisionBackend>(collision::bgk_backend(basis, nu));
}

}  // namespace

RealMatrix modal_norms_squared(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                               Part part, VelocityNorm vnorm) {
    const std::size_t times = traj.states.size();
    const Eigen::Index modes = traj.grid ? Eigen::Index(traj.grid->size()) : 0;
    RealMatrix out(Eigen::Index(times), modes);
    const bool plain = vnorm.s == 0 && vnorm.gamma == 0.0;
    const RealMatrix* gram = plain ? nullptr : &basis.hstar_gram(vnorm.s, vnorm.gamma);
    const ComplexMatrix p0 = basis.p0_matrix().cast<Complex>();
    for (std::size_t n = 0; n < times; ++n) {
        ComplexMatrix f;
        switch (part) {
            case Part::All: f = traj.states[n]; break;
            case Part::Macro: f = p0 * traj.states[n]; break;
            case Part::Micro: f = traj.states[n] - p0 * traj.states[n]; break;
        }
        if (plain) {
            out.row(Eigen::Index(n)) = f.colwise().squaredNorm();
        } else {
            const ComplexMatrix gf = gram->cast<Complex>() * f;
            out.row(Eigen::Index(n)) = (f.conjugate().cwiseProduct(gf)).colwise().sum().real().cwiseMax(0.0);
        }
    }
    return out;
}

double chemin_lerner_linf(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                          double m, Part part, VelocityNorm vnorm) {
    if (traj.states.empty()) return 0.0;
    const RealMatrix q = modal_norms_squared(basis, traj, part, vnorm);
    const RealVector w = sobolev_weights(*traj.grid, m);
    return std::sqrt(w.dot(q.colwise().maxCoeff().transpose()));
}

double l2_time_norm(const velocity::VelocityBasis& basis, const FieldTrajectory& traj, double m,
                    Part part, VelocityNorm vnorm) {
    if (traj.states.size() < 2) return 0.0;
    const RealMatrix q = modal_norms_squared(basis, traj, part, vnorm);
    const RealVector w = sobolev_weights(*traj.grid, m);
    double total = 0.0;
    for (Eigen::Index i = 0; i < q.cols(); ++i) total += w(i) * trapezoid(q.col(i), traj.dt);
    return std::sqrt(total);
}

double chemin_lerner_l4(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                        double m, Part part, VelocityNorm vnorm) {
    if (traj.states.size() < 2) return 0.0;
    const RealMatrix q = modal_norms_squared(basis, traj, part, vnorm);
    const RealVector w = sobolev_weights(*traj.grid, m);
    double total = 0.0;
    for (Eigen::Index i = 0; i < q.cols(); ++i) {
        total += w(i) * std::sqrt(trapezoid(q.col(i).cwiseAbs2(), traj.dt));
    }
    return std::sqrt(total);
}

double sup_time_norm(const velocity::VelocityBasis& basis, const FieldTrajectory& traj, double m,
                     Part part, VelocityNorm vnorm) {
    if (traj.states.empty()) return 0.0;
    const RealMatrix q = modal_norms_squared(basis, traj, part, vnorm);
    const RealVector w = sobolev_weights(*traj.grid, m);
    return std::sqrt((q * w).maxCoeff());
}

void XNormParams::validate() const {
    if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("x-norm: eps must lie in (0, 1]");
    if (!(alpha > 0.0 && alpha < 0.25)) throw ConfigError("x-norm: alpha must lie in (0, 1/4)");
    if (!(ell > 1.5 && ell <= 2.0)) throw ConfigError("x-norm: ell must lie in (3/2, 2]");
    const double lo = alpha * (ell - 0.5);
    if (!(beta > lo && beta < 0.5)) {
        std::ostringstream os;
        os << "x-norm: beta must lie in (" << lo << ", 1/2)";
        throw ConfigError(os.str());
    }
    if (vnorm.s != 0 && vnorm.s != 1) throw ConfigError("x-norm: s must be 0 or 1");
}

double NormReport::composite() const {
    const double w = 1.0 / std::sqrt(eps);
    return linf_half + macro_l2_32 + w * micro_l2_32 +
           std::pow(eps, beta) * (linf_ell + macro_l2_ell + w * micro_l2_ell);
}

namespace {

/// All six components from one pass over the modal tables.
NormReport components(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                      const XNormParams& p, bool profile) {
    p.validate();
    NormReport r;
    r.eps = p.eps;
    r.beta = p.beta;
    r.ell = p.ell;
    if (traj.states.empty()) return r;
    const RealMatrix all = modal_norms_squared(basis, traj, Part::All);
    const RealMatrix macro = modal_norms_squared(basis, traj, Part::Macro, p.vnorm);
    const RealMatrix micro = modal_norms_squared(basis, traj, Part::Micro, p.vnorm);
    const RealVector w_half = sobolev_weights(*traj.grid, 0.5);
    const RealVector w_32 = sobolev_weights(*traj.grid, 1.5);
    const RealVector w_ell = sobolev_weights(*traj.grid, p.ell);
    const RealVector sup = all.colwise().maxCoeff().transpose();
    r.linf_half = std::sqrt(w_half.dot(sup));
    r.linf_ell = std::sqrt(w_ell.dot(sup));
    RealVector int_macro(macro.cols()), int_micro(micro.cols());
    for (Eigen::Index i = 0; i < macro.cols(); ++i) {
        int_macro(i) = trapezoid(macro.col(i), traj.dt);
        int_micro(i) = trapezoid(micro.col(i), traj.dt);
    }
    r.macro_l2_32 = std::sqrt(w_32.dot(int_macro));
    r.micro_l2_32 = std::sqrt(w_32.dot(int_micro));
    r.macro_l2_ell = std::sqrt(w_ell.dot(int_macro));
    r.micro_l2_ell = std::sqrt(w_ell.dot(int_micro));
    r.x_value = r.composite();
    if (profile) {
        RealVector running = RealVector::Zero(all.cols());
        for (Eigen::Index n = 0; n < all.rows(); ++n) {
            running = running.cwiseMax(all.row(n).transpose());
            r.linf_half_profile.push_back(std::sqrt(w_half.dot(running)));
        }
    }
    return r;
}

}  // namespace

NormReport x_eps_norm(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                      const XNormParams& params) {
    return components(basis, traj, params, true);
}

double x_eps_value(const velocity::VelocityBasis& basis, const FieldTrajectory& traj,
                   const XNormParams& params) {
    return components(basis, traj, params, false).x_value;
}

InterpolationReport interpolation_check(const velocity::VelocityBasis& basis,
                                        const FieldTrajectory& traj, double n) {
    if (n < 0.5) throw ConfigError("interpolation_check: n must be at least 1/2");
    InterpolationReport r;
    r.l4 = chemin_lerner_l4(basis, traj, n);
    r.linf = chemin_lerner_linf(basis, traj, n - 0.5);
    r.l2 = l2_time_norm(basis, traj, n + 0.5);
    const double denom = std::sqrt(r.linf * r.l2);
    r.ratio = denom > 0.0 ? r.l4 / denom : 0.0;
    return r;
}

FieldTrajectory DeltaTerms::linear(const FieldTrajectory& delta, std::size_t offset) const {
    FieldTrajectory src;
    src.grid = delta.grid;
    src.dt = delta.dt;
    for (std::size_t n = 0; n < delta.states.size(); ++n) {
        src.states.push_back(linear_source(offset + n, delta.states[n]));
    }
    return semigroup::duhamel(*props, src, 1.0, 0, unrestricted());
}

FieldTrajectory DeltaTerms::bilinear(const FieldTrajectory& a, const FieldTrajectory& b) const {
    FieldTrajectory src;
    src.grid = a.grid;
    src.dt = a.dt;
    for (std::size_t n = 0; n < a.states.size(); ++n) {
        src.states.push_back(bilinear_source(a.states[n], b.states[n]));
    }
    return semigroup::duhamel(*props, src, 1.0, 0, unrestricted());
}

DeltaTerms assemble_delta_terms(const SpectralField& f_in, const FieldTrajectory& g,
                                std::shared_ptr<const PropagatorSet> props,
                                const semigroup::SemigroupDecomposition& decomposition,
                                std::shared_ptr<const kinetic::GammaConvolution> gamma) {
    if (g.states.empty()) throw ConfigError("assemble_delta_terms: empty fluid trajectory");
    if (f_in.grid->size() != props->grid().size() || g.grid->size() != props->grid().size() ||
        g.states.front().cols() != f_in.coeffs.cols()) {
        throw ConfigError("assemble_delta_terms: grid mismatch");
    }
    if (std::abs(g.dt - props->step()) > 1e-12 * props->step()) {
        throw ConfigError("assemble_delta_terms: fluid trajectory is not on the propagator step");
    }
    const std::size_t steps = g.steps();
    const auto& basis = props->backend().basis();
    const double eps = props->eps();

    DeltaTerms t;
    t.props = props;
    const ComplexMatrix p0_in = basis.p0_matrix().cast<Complex>() * f_in.coeffs;
    t.data = semigroup::free_flow(*props, f_in.coeffs, steps);
    const FieldTrajectory nsf_flow = decomposition.u_nsf_flow(g.grid, p0_in, g.dt, steps);
    for (std::size_t n = 0; n <= steps; ++n) t.data.states[n] -= nsf_flow.states[n];

    FieldTrajectory gg;
    gg.grid = g.grid;
    gg.dt = g.dt;
    for (const auto& s : g.states) gg.states.push_back(gamma->apply(s));
    t.source = semigroup::duhamel(*props, gg, 1.0 / eps, 0, unrestricted());
    const FieldTrajectory psi_nsf = decomposition.psi_nsf(gg);
    for (std::size_t n = 0; n <= steps; ++n) t.source.states[n] -= psi_nsf.states[n];

    auto g_states = std::make_shared<const std::vector<ComplexMatrix>>(g.states);
    t.linear_source = [gamma, g_states, eps](std::size_t n, const ComplexMatrix& d) {
        return ComplexMatrix((2.0 / eps) * gamma->apply((*g_states)[n], d));
    };
    t.bilinear_source = [gamma, eps](const ComplexMatrix& a, const ComplexMatrix& b) {
        return ComplexMatrix((1.0 / eps) * gamma->apply(a, b));
    };
    return t;
}

namespace {

FieldTrajectory random_trajectory(const FieldTrajectory& like, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    FieldTrajectory out;
    out.grid = like.grid;
    out.dt = like.dt;
    for (const auto& s : like.states) {
        ComplexMatrix m(s.rows(), s.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = Complex(nd(rng), nd(rng));
        out.states.push_back(std::move(m));
    }
    return out;
}

struct SliceOps {
    const DeltaTerms* terms;
    const velocity::VelocityBasis* basis;
    XNormParams xnorm;
    FieldTrajectory like;
    std::size_t offset;

    [[nodiscard]] double norm(const ComplexVector& v) const {
        return x_eps_value(*basis, unflatten(v, like), xnorm);
    }
    [[nodiscard]] ComplexVector linear(const ComplexVector& v) const {
        return flatten(terms->linear(unflatten(v, like), offset));
    }
    [[nodiscard]] ComplexVector bilinear(const ComplexVector& a, const ComplexVector& b) const {
        return flatten(terms->bilinear(unflatten(a, like), unflatten(b, like)));
    }
    [[nodiscard]] ComplexVector sample(std::mt19937_64& rng) const {
        return flatten(random_trajectory(like, rng));
    }
};

double measure_linear(const SliceOps& ops, double safety, std::uint64_t seed) {
    return estimate_operator_norm<ComplexVector>(
        [&](const ComplexVector& v) { return ops.linear(v); },
        [&](const ComplexVector& v) { return ops.norm(v); },
        [&](std::mt19937_64& r) { return ops.sample(r); }, seed, 2, 6, safety);
}

double measure_bilinear(const SliceOps& ops, double safety, std::uint64_t seed) {
    return estimate_bilinear_norm<ComplexVector>(
        [&](const ComplexVector& a, const ComplexVector& b) { return ops.bilinear(a, b); },
        [&](const ComplexVector& v) { return ops.norm(v); },
        [&](std::mt19937_64& r) { return ops.sample(r); }, seed, 2, 4, safety);
}

}  // namespace

DeltaSolution delta_fixed_point(const DeltaTerms& terms, const velocity::VelocityBasis& basis,
                                const XNormParams& xnorm, const DeltaOptions& options) {
    xnorm.validate();
    const std::size_t steps = terms.steps();
    if (terms.source.steps() != steps) throw ConfigError("delta_fixed_point: data/source length mismatch");
    const std::size_t block = options.block > 0 ? options.block : std::max<std::size_t>(1, steps / 16);

    FieldTrajectory rhs = terms.data;
    for (std::size_t n = 0; n <= steps; ++n) rhs.states[n] += terms.source.states[n];

    DeltaSolution sol;
    sol.delta.grid = rhs.grid;
    sol.delta.dt = rhs.dt;
    if (steps == 0) {
        sol.delta.states = rhs.states;
        sol.x_norm = x_eps_value(basis, sol.delta, xnorm);
        return sol;
    }

    auto ops_for = [&](std::size_t begin, std::size_t end) {
        return SliceOps{&terms, &basis, xnorm, slice(rhs, begin, end), begin};
    };
    std::uint64_t seed = options.seed;
    auto contracts = [&](std::size_t begin, std::size_t end, double& l) {
        l = measure_linear(ops_for(begin, end), options.safety, seed++);
        return l <= options.contraction;
    };

    ComplexMatrix carry = ComplexMatrix::Zero(rhs.states.front().rows(), rhs.states.front().cols());
    std::size_t begin = 0;
    while (begin < steps) {
        double l = 0.0;
        std::size_t end = steps;
        if (!contracts(begin, end, l)) {
            // Grow from one block until the measured norm exceeds the target.
            std::size_t b = std::min(block, steps - begin);
            while (!contracts(begin, begin + b, l)) {
                if (b == 1) {
                    std::ostringstream os;
                    os << "delta_fixed_point: ||L|| = " << l << " > " << options.contraction
                       << " on a single step at t = " << rhs.time(begin)
                       << "; a finer time grid is required";
                    throw NumericalError(os.str());
                }
                b = std::max<std::size_t>(1, b / 2);
            }
            end = begin + b;
            double l_next = 0.0;
            while (end < steps && contracts(begin, std::min(steps, end + b), l_next)) {
                end = std::min(steps, end + b);
                l = l_next;
            }
        }

        SliceOps ops = ops_for(begin, end);
        const FieldTrajectory carried = semigroup::free_flow(*terms.props, carry, end - begin);
        for (std::size_t n = 0; n <= end - begin; ++n) ops.like.states[n] += carried.states[n];

        PicardProblem<ComplexVector> prob;
        prob.x0 = flatten(ops.like);
        prob.linear = [&](const ComplexVector& v) { return ops.linear(v); };
        prob.bilinear = [&](const ComplexVector& a, const ComplexVector& b) { return ops.bilinear(a, b); };
        prob.norm = [&](const ComplexVector& v) { return ops.norm(v); };
        prob.l_norm = l;
        prob.b_norm = measure_bilinear(ops, options.safety, seed++);

        Subinterval piece;
        piece.begin = begin;
        piece.end = end;
        piece.l_norm = l;
        piece.b_norm = prob.b_norm;
        piece.data_norm = prob.norm(prob.x0);
        piece.data_bound = prob.data_bound();
        if (!(piece.data_norm < piece.data_bound)) {
            std::ostringstream os;
            os << "delta_fixed_point: data norm " << piece.data_norm << " exceeds the Picard bound "
               << piece.data_bound << " on [" << rhs.time(begin) << ", " << rhs.time(end) << "]";
            throw NumericalError(os.str());
        }
        PicardOptions popt;
        popt.tol = options.picard_tol;
        const auto res = picard_solve(prob, popt);
        piece.iterations = res.iterations;
        sol.partition.push_back(piece);

        const FieldTrajectory d = unflatten(res.x, ops.like);
        const std::size_t first = sol.delta.states.empty() ? 0 : 1;
        for (std::size_t n = first; n < d.states.size(); ++n) sol.delta.states.push_back(d.states[n]);

        // Duhamel state at t_end of everything integrated so far.
        const FieldTrajectory lin = terms.linear(d, begin);
        const FieldTrajectory bil = terms.bilinear(d, d);
        carry = carried.states.back() + lin.states.back() + bil.states.back();
        begin = end;
    }
    sol.x_norm = x_eps_value(basis, sol.delta, xnorm);
    return sol;
}

double partition_driver(const velocity::VelocityBasis& basis, const FieldTrajectory& g) {
    return chemin_lerner_l4(basis, g, 1.0) + l2_time_norm(basis, g, 1.5);
}

fluid::HydroField random_well_prepared(const velocity::VelocityBasis& basis,
                                       std::shared_ptr<const SpatialGrid> grid, int max_k,
                                       double norm, std::uint64_t seed) {
    (void)basis;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    fluid::HydroField h(grid);
    for (std::size_t i = 0; i < h.modes(); ++i) {
        const Wavevector& k = grid->mode(i);
        if (k.is_zero() || !in_box(k, max_k)) continue;
        const double a = 1.0 / (1.0 + k.norm_squared());
        const auto c = Eigen::Index(i);
        h.rho(c) = a * Complex(nd(rng), nd(rng));
        h.theta(c) = a * Complex(nd(rng), nd(rng));
        for (int j = 0; j < grid->dim_x(); ++j) h.u(j, c) = a * Complex(nd(rng), nd(rng));
    }
    symmetrize(h);
    fluid::HydroField w = fluid::well_prepared(h);
    const double n0 = w.hm_norm(0.5);
    if (n0 == 0.0) throw ConfigError("random_well_prepared: no admissible modes");
    w *= norm / n0;
    return w;
}

SpectralField random_microscopic(const velocity::VelocityBasis& basis,
                                 std::shared_ptr<const SpatialGrid> grid, int max_k, double norm,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const auto vdim = Eigen::Index(basis.dim());
    SpectralField f(grid, vdim);
    const ComplexMatrix q = (RealMatrix::Identity(vdim, vdim) - basis.p0_matrix()).cast<Complex>();
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const Wavevector& k = grid->mode(i);
        if (!in_box(k, max_k)) continue;
        ComplexVector c(vdim);
        for (Eigen::Index j = 0; j < vdim; ++j) {
            // Low Hermite degrees carry most of the mass.
            const double a = std::pow(0.5, basis.indices()[std::size_t(j)].degree());
            c(j) = a * Complex(nd(rng), nd(rng));
        }
        f.coeffs.col(Eigen::Index(i)) = q * c / (1.0 + k.norm_squared());
    }
    f.symmetrize_reality();
    const double n0 = f.hm_norm(0.5);
    if (n0 == 0.0) throw ConfigError("random_microscopic: no admissible modes");
    f.coeffs *= norm / n0;
    return f;
}

void SweepConfig::validate() const {
    if (dim_x < 1 || dim_x > 3 || max_mode < 1) throw ConfigError("sweep: bad spatial grid");
    if (eps_list.size() < 3) throw ConfigError("sweep: at least three eps values are required");
    for (double e : eps_list)
        if (!(e > 0.0 && e <= 1.0)) throw ConfigError("sweep: eps values must lie in (0, 1]");
    if (!(alpha > 0.0 && alpha < 0.25)) throw ConfigError("sweep: alpha must lie in (0, 1/4)");
    if (!(data_norm >= 0.0) || !(micro_norm >= 0.0)) throw ConfigError("sweep: negative data norm");
    if (!(T > 0.0) || !(dt > 0.0) || nsf_substeps == 0) throw ConfigError("sweep: bad time grid");
    if (data_max_k < 1 || data_max_k > max_mode) throw ConfigError("sweep: data_max_k out of range");
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("loglog_slope: need matching samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

fluid::NsfTrajectory fluid_run(const fluid::HydroField& init, double T, double dt,
                               std::size_t substeps, const collision::Viscosities& v,
                               std::shared_ptr<const Convolver> conv) {
    fluid::NsfParams p;
    p.nu_ns = v.nu_ns;
    p.nu_heat = v.nu_heat;
    p.T = T;
    p.dt = dt / double(substeps);
    p.stride = substeps;
    return fluid::solve_nsf(init, p, std::move(conv));
}

double pair_distance(const velocity::VelocityBasis& basis, const FieldTrajectory& d, VelocityNorm v) {
    return chemin_lerner_linf(basis, d, 0.5) + l2_time_norm(basis, d, 1.5, Part::All, v);
}

}  // namespace

SweepResult convergence_sweep(const SweepConfig& config) {
    config.validate();
    auto backend = make_bgk(config.max_degree, config.nu);
    const auto& basis = backend->basis();
    auto grid = std::make_shared<const SpatialGrid>(config.dim_x, config.max_mode);
    auto conv = std::make_shared<const Convolver>(grid);
    auto gamma = std::make_shared<const kinetic::GammaConvolution>(backend, conv);
    const auto visc = collision::viscosities(*backend);

    const fluid::HydroField g_in =
        random_well_prepared(basis, grid, config.data_max_k, config.data_norm, config.seed);
    const FieldTrajectory g =
        fluid::lift_trajectory(basis, fluid_run(g_in, config.T, config.dt, config.nsf_substeps, visc, conv));
    std::optional<SpectralField> micro;
    if (config.micro_norm > 0.0) {
        micro = random_microscopic(basis, grid, config.data_max_k, config.micro_norm, config.seed + 1);
    }
    fluid::Mollifier moll;
    moll.alpha = config.alpha;
    moll.radius = config.mollifier_radius;

    SweepResult out;
    out.theoretical = 0.5 - 2.0 * config.alpha;
    out.rows.resize(config.eps_list.size());
    // Members are independent; each builds its own propagators.
    for (std::size_t idx = 0; idx < config.eps_list.size(); ++idx) {
        const double eps = config.eps_list[idx];
        SweepRow& row = out.rows[idx];
        row.eps = eps;
        const fluid::HydroField g_in_eps = moll.apply(g_in, eps);
        FieldTrajectory g_eps = g;
        fluid::HydroField change = g_in_eps;
        change *= -1.0;
        change += g_in;
        if (change.hm_norm(0.5) > 0.0) {
            g_eps = fluid::lift_trajectory(
                basis, fluid_run(g_in_eps, config.T, config.dt, config.nsf_substeps, visc, conv));
        }
        row.g_eps_distance = pair_distance(basis, difference(g_eps, g), config.vnorm);

        SpectralField f_in = fluid::lift_kinetic(basis, g_in_eps);
        if (micro) f_in.coeffs += micro->coeffs;
        auto props = PropagatorSet::load_or_build(backend, grid, eps, config.dt, config.cache_dir);
        kinetic::KineticRun run;
        run.eps = eps;
        run.T = config.T;
        run.dt = config.dt;
        const FieldTrajectory f = kinetic::solve_kinetic(f_in, run, *props, gamma.get());
        const FieldTrajectory d = difference(f, g);
        row.e_linf = chemin_lerner_linf(basis, d, 0.5);
        row.e_l2 = l2_time_norm(basis, d, 1.5, Part::All, config.vnorm);
        row.kinetic_residual = kinetic::residual_check(f, *props, gamma.get());
    }

    std::vector<SweepRow> sorted = out.rows;
    std::sort(sorted.begin(), sorted.end(), [](const SweepRow& a, const SweepRow& b) { return a.eps > b.eps; });
    std::vector<double> xs, ys;
    out.strictly_decreasing = true;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        xs.push_back(sorted[i].eps);
        ys.push_back(sorted[i].error());
        if (i > 0 && !(sorted[i].error() < sorted[i - 1].error())) out.strictly_decreasing = false;
    }
    out.slope = loglog_slope(xs, ys);
    out.plateau_ratio = ys.front() > 0.0 ? ys.back() / ys.front() : 0.0;
    return out;
}

CrossCheckResult delta_cross_check(const CrossCheckConfig& config) {
    config.xnorm.validate();
    if (std::abs(config.xnorm.eps - config.eps) > 0.0) throw ConfigError("cross-check: x-norm eps differs from eps");
    auto backend = make_bgk(config.max_degree, config.nu);
    const auto& basis = backend->basis();
    auto grid = std::make_shared<const SpatialGrid>(config.dim_x, config.max_mode);
    auto conv = std::make_shared<const Convolver>(grid);
    auto gamma = std::make_shared<const kinetic::GammaConvolution>(backend, conv);
    const auto visc = collision::viscosities(*backend);
    const double kappa = spectral::determine_kappa(*backend).kappa;
    const semigroup::SemigroupDecomposition decomposition(
        backend, std::make_shared<const spectral::ExpansionTable>(backend, config.dim_x), kappa, visc);

    fluid::Mollifier moll;
    moll.alpha = config.xnorm.alpha;
    const fluid::HydroField g_in = moll.apply(
        random_well_prepared(basis, grid, config.data_max_k, config.data_norm, config.seed), config.eps);
    const fluid::NsfTrajectory nsf = fluid_run(g_in, config.T, config.dt, config.nsf_substeps, visc, conv);
    const FieldTrajectory g = fluid::lift_trajectory(basis, nsf);
    const SpectralField f_in = fluid::lift_kinetic(basis, g_in);

    auto props = PropagatorSet::load_or_build(backend, grid, config.eps, config.dt, config.cache_dir);
    kinetic::KineticRun run;
    run.eps = config.eps;
    run.T = config.T;
    run.dt = config.dt;
    const FieldTrajectory f = kinetic::solve_kinetic(f_in, run, *props, gamma.get());

    const DeltaTerms terms = assemble_delta_terms(f_in, g, props, decomposition, gamma);
    DeltaOptions opt;
    opt.seed = config.seed;
    const DeltaSolution sol = delta_fixed_point(terms, basis, config.xnorm, opt);

    CrossCheckResult r;
    FieldTrajectory sum = g;
    for (std::size_t n = 0; n < sum.states.size(); ++n) sum.states[n] += sol.delta.states[n];
    r.distance = chemin_lerner_linf(basis, difference(sum, f), 0.5);
    r.kinetic_residual = x_eps_value(basis, kinetic::residual_trajectory(f, *props, gamma.get()), config.xnorm);
    r.nsf_residual = x_eps_value(basis, fluid::nsf_duhamel_residual_trajectory(nsf, decomposition, conv),
                                 config.xnorm);
    r.picard_tol = opt.picard_tol * std::max(1.0, sol.x_norm);
    r.tolerance = r.kinetic_residual + r.nsf_residual + r.picard_tol;
    r.delta_norm = sol.x_norm;
    r.subintervals = sol.partition.size();
    for (const auto& p : sol.partition) r.max_l_norm = std::max(r.max_l_norm, p.l_norm);
    return r;
}

}  // namespace hydrolimit::analysis
