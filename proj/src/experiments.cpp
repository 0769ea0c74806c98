#include "hydrolimit/experiments.hpp"

#include "hydrolimit/fluid.hpp"
#include "hydrolimit/kinetic.hpp"
#include "hydrolimit/mode_spectral.hpp"
#include "hydrolimit/picard.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace hydrolimit::experiments {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string short_fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

Verdict at_most(std::string name, double measured, double threshold, double seconds,
                std::string detail = {}) {
    return {std::move(name), measured <= threshold, measured, threshold, std::move(detail), seconds};
}

Verdict at_least(std::string name, double measured, double threshold, double seconds,
                 std::string detail = {}) {
    return {std::move(name), measured >= threshold, measured, threshold, std::move(detail), seconds};
}

ComplexVector unit_random(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> nd;
    ComplexVector v(n);
    for (auto& x : v) x = Complex(nd(rng), nd(rng));
    return v / v.norm();
}

}  // namespace

void Table::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << fmt(row[j]);
        out << '\n';
    }
}

bool Outcome::passed() const {
    for (const auto& v : verdicts)
        if (!v.passed) return false;
    return true;
}

void Outcome::merge(Outcome other) {
    for (auto& v : other.verdicts) verdicts.push_back(std::move(v));
    for (auto& t : other.tables) tables.push_back(std::move(t));
    for (auto& [key, value] : other.summary.items()) summary[key] = value;
}

nlohmann::json to_json(const Verdict& v) {
    return {{"name", v.name},       {"passed", v.passed},   {"measured", v.measured},
            {"threshold", v.threshold}, {"detail", v.detail}, {"seconds", v.seconds}};
}

void BackendSpec::validate() const {
    if (kind != "bgk" && kind != "maxwell" && kind != "synthetic")
        throw ConfigError("backend.kind must be bgk, maxwell or synthetic (got '" + kind + "')");
    if (!(nu > 0.0)) throw ConfigError("backend.nu must be positive");
    if (max_degree < velocity::VelocityBasis::kMinDegree)
        throw ConfigError("basis.max_degree must be at least 4");
}

std::shared_ptr<const collision::CollisionBackend> make_backend(const BackendSpec& spec) {
    spec.validate();
    auto basis = std::make_shared<const velocity::VelocityBasis>(velocity::VelocityBasis::build(spec.max_degree));
    if (spec.kind == "bgk")
        return std::make_shared<const collision::CollisionBackend>(collision::bgk_backend(basis, spec.nu));
    if (spec.kind == "maxwell")
        return std::make_shared<const collision::CollisionBackend>(
            collision::maxwell_cutoff_backend(basis, spec.angular_quad_order));
    return std::make_shared<const collision::CollisionBackend>(
        collision::synthetic_gamma_backend(basis, spec.synthetic_seed, spec.synthetic_scale, spec.nu));
}

Outcome conservation_and_kernel(const ConservationConfig& config) {
    Outcome out;
    auto backend = make_backend(config.backend);
    const auto& basis = backend->basis();
    const auto n = Eigen::Index(basis.dim());

    auto t0 = Clock::now();
    const RealVector eig = collision::l_eigenvalues(*backend);
    int zeros = 0;
    double worst_zero = 0.0, nearest_nonzero = 1e300;
    for (double e : eig) {
        if (std::abs(e) <= config.kernel_tol) {
            ++zeros;
            worst_zero = std::max(worst_zero, std::abs(e));
        } else {
            nearest_nonzero = std::min(nearest_nonzero, std::abs(e));
        }
    }
    out.verdicts.push_back({"kernel: five zero eigenvalues of L", zeros == 5, double(zeros), 5.0,
                            "max |lambda| on the kernel " + short_fmt(worst_zero) + ", gap " +
                                short_fmt(nearest_nonzero),
                            since(t0)});

    t0 = Clock::now();
    std::mt19937_64 rng(config.seed);
    const RealMatrix p0 = basis.p0_matrix();
    double worst = 0.0;
    for (std::size_t i = 0; i < config.pairs; ++i) {
        const ComplexVector f1 = unit_random(rng, n);
        const ComplexVector f2 = unit_random(rng, n);
        worst = std::max(worst, (p0.cast<Complex>() * collision::gamma_sym(*backend, f1, f2)).norm());
    }
    out.verdicts.push_back(at_most("conservation: ||P0 Gamma_sym(f1, f2)|| over " +
                                       std::to_string(config.pairs) + " unit pairs",
                                   worst, config.gamma_tol, since(t0)));

    t0 = Clock::now();
    auto grid = std::make_shared<const SpatialGrid>(config.dim_x, config.max_mode);
    auto conv = std::make_shared<const Convolver>(grid);
    const kinetic::GammaConvolution gamma(backend, conv);
    auto props = semigroup::PropagatorSet::load_or_build(backend, grid, config.eps, config.dt, config.cache_dir);
    SpectralField f = fluid::lift_kinetic(
        basis, analysis::random_well_prepared(basis, grid, 2, config.data_norm, config.seed));
    f.coeffs += analysis::random_microscopic(basis, grid, 2, 0.5 * config.data_norm, config.seed + 1).coeffs;
    const auto z = Eigen::Index(grid->zero_index());
    f.coeffs.col(z) += basis.hydro_profile(0.2 * config.data_norm,
                                           ComplexVec3(0.1 * config.data_norm, -0.1 * config.data_norm, 0.0),
                                           0.05 * config.data_norm);
    kinetic::KineticRun run;
    run.eps = config.eps;
    run.T = config.T;
    run.dt = config.dt;
    const ComplexMatrix rows = basis.hydro_rows().cast<Complex>();
    const ComplexVector m0 = rows * f.coeffs.col(z);
    double drift = 0.0;
    Table table{"conservation", {"t", "drift"}, {}};
    (void)kinetic::solve_kinetic(f, run, *props, &gamma, [&](std::size_t, double t, const ComplexMatrix& s) {
        const double d = (rows * s.col(z) - m0).norm();
        drift = std::max(drift, d);
        table.rows.push_back({t, d});
    });
    out.verdicts.push_back(at_most("conservation: drift of the five invariants over T = " + short_fmt(config.T),
                                   drift, config.drift_tol, since(t0)));
    out.tables.push_back(std::move(table));
    out.summary["kernel_dimension"] = zeros;
    out.summary["gamma_moment_max"] = worst;
    out.summary["invariant_drift"] = drift;
    t0 = Clock::now();
    const double gap0 = collision::coercivity_constant(*backend, 0);
    const double gap1 = collision::coercivity_constant(*backend, 1);
    out.verdicts.push_back({"coercivity: lambda2 > 0 in L^2 and H^{1,*}", gap0 > 0.0 && gap1 > 0.0,
                            std::min(gap0, gap1), 0.0,
                            "L^2 " + short_fmt(gap0) + ", H^{1,*} " + short_fmt(gap1), since(t0)});
    out.summary["coercivity_constant"] = {gap0, gap1};
    return out;
}

Outcome spectral_structure(const SpectralConfig& config) {
    Outcome out;
    auto backend = make_backend(config.backend);
    const auto& basis = backend->basis();
    const double lambda2 = collision::coercivity_constant(*backend);

    auto t0 = Clock::now();
    bool ok = true;
    int worst_count = 5;
    double worst_gap = -1e300;
    for (const Vec3& d : config.directions) {
        for (double r : config.vanishing_radii) {
            const Eigen::ComplexEigenSolver<ComplexMatrix> es(
                spectral::unit_mode_operator(*backend, r * d.normalized()), false);
            int small = 0;
            for (const Complex& z : es.eigenvalues()) {
                if (std::abs(z) < 5.0 * r) {
                    ++small;
                } else {
                    worst_gap = std::max(worst_gap, z.real());
                }
            }
            if (small != 5) {
                ok = false;
                worst_count = small;
            }
        }
    }
    ok = ok && worst_gap <= -lambda2 / 2.0;
    out.verdicts.push_back({"spectrum: five eigenvalues vanish, the rest gapped by lambda2/2", ok,
                            worst_gap, -lambda2 / 2.0,
                            "small-eigenvalue count " + std::to_string(worst_count) +
                                ", max Re of the others " + short_fmt(worst_gap),
                            since(t0)});

    t0 = Clock::now();
    double remark = 0.0, formulas = 0.0;
    for (const Vec3& d : config.directions) {
        const auto ex = spectral::expand_projectors(*backend, d);
        const Vec3 e = d.normalized();
        ComplexMatrix sum = ComplexMatrix::Zero(ex.p0[0].rows(), ex.p0[0].cols());
        for (const auto& p : ex.p0) sum += p;
        remark = std::max(remark, (sum - basis.p0_matrix().cast<Complex>()).norm());
        formulas = std::max({formulas, (ex.p0[0] - spectral::p0_ns_formula(basis, e)).norm(),
                             (ex.p0[1] - spectral::p0_heat_formula(basis)).norm(),
                             (ex.p0[2] - spectral::p0_wave_formula(basis, e, -1)).norm(),
                             (ex.p0[3] - spectral::p0_wave_formula(basis, e, +1)).norm()});
    }
    const double tp = since(t0);
    out.verdicts.push_back(at_most("spectrum: ||P0 - sum of leading projectors||", remark, config.projector_tol, tp));
    out.verdicts.push_back(at_most("spectrum: leading projectors vs closed forms", formulas, config.projector_tol, tp));

    out.summary["projector_sum_defect"] = remark;
    out.summary["projector_formula_defect"] = formulas;
    out.summary["lambda2"] = lambda2;
    if (!config.fits) return out;

    t0 = Clock::now();
    std::vector<double> radii;
    for (std::size_t i = 0; i < config.fit_radius_count; ++i)
        radii.push_back(0.01 + double(i) * 0.19 / double(config.fit_radius_count - 1));
    radii.insert(radii.begin(), 0.0);
    const auto spectrum = spectral::eigen_branches(*backend, radii, {Vec3(1, 0, 0), Vec3(1, 1, 0)});
    std::vector<double> fit_radii(radii.begin() + 1, radii.end());
    const auto fit = spectral::fit_transport_coefficients(
        spectral::eigen_branches(*backend, fit_radii, {Vec3(1, 0, 0), Vec3(1, 1, 0)}));
    const auto visc = collision::viscosities(*backend);
    const double tf = since(t0);
    const double dev_ns = std::abs(fit.nu_ns / visc.nu_ns - 1.0);
    const double dev_heat = std::abs(fit.nu_heat / visc.nu_heat - 1.0);
    const double dev_c = std::abs(fit.sound_speed / std::sqrt(5.0 / 3.0) - 1.0);
    out.verdicts.push_back(at_most("spectrum: fitted nu_NS vs flux-function value (relative)", dev_ns,
                                   config.viscosity_tol, tf,
                                   "fit " + short_fmt(fit.nu_ns) + ", formula " + short_fmt(visc.nu_ns)));
    out.verdicts.push_back(at_most("spectrum: fitted nu_heat vs flux-function value (relative)", dev_heat,
                                   config.viscosity_tol, tf,
                                   "fit " + short_fmt(fit.nu_heat) + ", formula " + short_fmt(visc.nu_heat)));
    out.verdicts.push_back(at_most("spectrum: fitted sound speed vs sqrt(5/3) (relative)", dev_c, config.sound_tol,
                                   tf, "fit " + short_fmt(fit.sound_speed)));

    Table branches{"branches",
                   {"direction", "radius", "re_ns", "im_ns", "re_heat", "im_heat", "re_wave_plus",
                    "im_wave_plus", "re_wave_minus", "im_wave_minus", "gap"},
                   {}};
    for (const auto& s : spectrum.samples) {
        std::vector<double> row{double(s.direction), s.radius};
        for (const auto& l : s.lambda) {
            row.push_back(l.real());
            row.push_back(l.imag());
        }
        row.push_back(s.gap);
        branches.rows.push_back(std::move(row));
    }
    out.tables.push_back(std::move(branches));

    const auto kappa = spectral::determine_kappa(*backend);
    out.summary["kappa"] = {{"kappa", kappa.kappa},
                            {"certified_radius", kappa.certified_radius},
                            {"gap_at_kappa", kappa.gap_at_kappa},
                            {"expansion_residual_at_kappa", kappa.expansion_residual_at_kappa},
                            {"fallback_used", kappa.fallback_used}};
    out.summary["transport"] = {{"nu_ns", fit.nu_ns},           {"nu_heat", fit.nu_heat},
                                {"nu_wave", fit.nu_wave},       {"sound_speed", fit.sound_speed},
                                {"nu_ns_formula", visc.nu_ns},  {"nu_heat_formula", visc.nu_heat},
                                {"gamma_bound_ratio", fit.gamma_bound_ratio},
                                {"fit_residual", fit.fit_residual}};
    return out;
}

Outcome scaling_identity(const ScalingConfig& config) {
    Outcome out;
    auto backend = make_backend(config.backend);
    const auto t0 = Clock::now();
    double worst = 0.0;
    Table table{"scaling", {"eps", "k1", "k2", "k3", "t", "defect"}, {}};
    for (double eps : config.eps_list)
        for (const auto& k : config.ks)
            for (double t : config.times) {
                const ComplexMatrix lhs = semigroup::mode_propagator(*backend, eps, k, t);
                const ComplexMatrix rhs =
                    semigroup::expm((t / (eps * eps)) * spectral::unit_mode_operator(*backend, eps * k.as_real()));
                const double d = (lhs - rhs).norm();
                worst = std::max(worst, d);
                table.rows.push_back({eps, double(k.k[0]), double(k.k[1]), double(k.k[2]), t, d});
            }
    out.verdicts.push_back(at_most("scaling: ||U^eps(t,k) - U^1(t/eps^2, eps k)||", worst, config.tol, since(t0)));
    out.tables.push_back(std::move(table));
    out.summary["scaling_defect"] = worst;
    return out;
}

Outcome sharp_decay(const SharpDecayConfig& config) {
    Outcome out;
    if (!(config.eps > 0.0 && config.eps <= 1.0)) throw ConfigError("sharp_decay: eps must lie in (0, 1]");
    auto backend = make_backend(config.backend);
    const auto t0 = Clock::now();
    const double kappa = spectral::determine_kappa(*backend).kappa;
    const semigroup::SemigroupDecomposition dec(
        backend, std::make_shared<const spectral::ExpansionTable>(backend, config.dim_x), kappa,
        collision::viscosities(*backend));
    const double radius = kappa / (2.0 * config.eps);
    std::vector<Wavevector> ks;
    for (const auto& k : hypo::canonical_wavevectors(config.dim_x, radius)) ks.push_back(k);

    Table table{"sharp_decay", {"eps", "t", "sup_norm"}, {}};
    std::vector<semigroup::SharpDecayFit> fits;
    for (double eps : {config.eps, config.eps / 2.0}) {
        std::vector<double> times;
        for (int j = 1; j <= 5; ++j) times.push_back(0.5 * j * eps * eps);
        fits.push_back(semigroup::sharp_decay_rate(dec, eps, ks, times));
        for (std::size_t j = 0; j < times.size(); ++j)
            table.rows.push_back({eps, times[j], fits.back().sup_norms[j]});
    }
    const double rel = std::abs(fits[1].lambda0 / fits[0].lambda0 - 1.0);
    out.verdicts.push_back(at_most("sharp decay: rate * eps^2 stable under eps -> eps/2 (relative)", rel,
                                   config.tol, since(t0),
                                   "lambda0 " + short_fmt(fits[0].lambda0) + " -> " + short_fmt(fits[1].lambda0) +
                                       " on " + std::to_string(ks.size()) + " modes"));
    out.tables.push_back(std::move(table));
    out.summary["sharp_decay"] = {{"kappa", kappa},
                                  {"lambda0", {fits[0].lambda0, fits[1].lambda0}},
                                  {"rate", {fits[0].rate, fits[1].rate}},
                                  {"r_squared", {fits[0].r_squared, fits[1].r_squared}}};
    return out;
}

Outcome hypocoercivity(const HypoConfig& config) {
    Outcome out;
    auto backend = make_backend(config.backend);
    const auto t0 = Clock::now();
    hypo::CoercivityReport report;
    nlohmann::json candidates = nlohmann::json::array();
    if (config.tune) {
        const auto tuned = hypo::tune_deltas(*backend, config.options, config.max_c);
        report = tuned.report;
        for (const auto& c : tuned.candidates)
            candidates.push_back({{"deltas", {c.deltas.d1, c.deltas.d2, c.deltas.d3}},
                                  {"lambda3", c.lambda3},
                                  {"c", c.c},
                                  {"feasible", c.feasible}});
    } else {
        report = hypo::verify_coercivity(*backend, config.deltas, config.options);
    }
    const double seconds = since(t0);
    const auto& d = report.deltas;
    const std::string deltas = "deltas (" + short_fmt(d.d1) + ", " + short_fmt(d.d2) + ", " + short_fmt(d.d3) + ")";
    out.verdicts.push_back({"hypocoercivity: lambda3 > 0 (sampled and exact)",
                            report.lambda3 > 0.0 && report.lambda3_exact > 0.0,
                            std::min(report.lambda3, report.lambda3_exact), 0.0,
                            deltas + ", sampled " + short_fmt(report.lambda3) + ", exact " +
                                short_fmt(report.lambda3_exact),
                            seconds});
    const double c = std::max(1.0 - report.equivalence.lower, report.equivalence.upper - 1.0);
    out.verdicts.push_back(at_most("hypocoercivity: norm equivalence constants within [1/2, 3/2]", c, config.max_c,
                                   seconds,
                                   "eig H in [" + short_fmt(report.equivalence.lower) + ", " +
                                       short_fmt(report.equivalence.upper) + "]"));

    Table cells{"hypo_cells",
                {"eps", "k1", "k2", "k3", "lambda_sampled", "lambda_exact", "eq_lower", "eq_upper"},
                {}};
    for (const auto& cell : report.cells)
        cells.rows.push_back({cell.eps, double(cell.k.k[0]), double(cell.k.k[1]), double(cell.k.k[2]),
                              cell.lambda_sampled, cell.lambda_exact, cell.exact_equivalence.lower,
                              cell.exact_equivalence.upper});
    out.tables.push_back(std::move(cells));
    Table ratios{"hypo_ratios", {"cell", "ratio"}, {}};
    const std::size_t per = std::max<std::size_t>(1, report.sample_count);
    for (std::size_t i = 0; i < report.ratios.size(); ++i) ratios.rows.push_back({double(i / per), report.ratios[i]});
    out.tables.push_back(std::move(ratios));

    out.summary["hypocoercivity"] = {{"deltas", {d.d1, d.d2, d.d3}},
                                     {"lambda3", report.lambda3},
                                     {"lambda3_exact", report.lambda3_exact},
                                     {"equivalence", {report.equivalence.lower, report.equivalence.upper}},
                                     {"samples_per_cell", report.sample_count},
                                     {"cells", report.cells.size()},
                                     {"candidates", candidates}};
    return out;
}

Outcome fluid_duhamel(const FluidConfig& config) {
    Outcome out;
    if (config.dt_list.size() < 2) throw ConfigError("fluid_duhamel: need at least two time steps");
    auto backend = make_backend(config.backend);
    const auto& basis = backend->basis();
    const auto t0 = Clock::now();
    auto grid = std::make_shared<const SpatialGrid>(config.dim_x, config.max_mode);
    auto conv = std::make_shared<const Convolver>(grid);
    const auto visc = collision::viscosities(*backend);
    // The fluid Duhamel operator only uses the first-order projector terms, not kappa.
    const semigroup::SemigroupDecomposition dec(
        backend, std::make_shared<const spectral::ExpansionTable>(backend, config.dim_x), 0.02, visc);
    const auto init = analysis::random_well_prepared(basis, grid, config.data_max_k, config.data_norm, config.seed);

    Table table{"fluid_residual", {"dt", "residual", "energy_excess", "divergence_defect"}, {}};
    std::vector<double> res;
    for (double dt : config.dt_list) {
        fluid::NsfParams p;
        p.nu_ns = visc.nu_ns;
        p.nu_heat = visc.nu_heat;
        p.dt = dt;
        p.T = config.T;
        const auto traj = fluid::solve_nsf(init, p, conv);
        res.push_back(fluid::nsf_duhamel_residual(traj, dec, conv));
        table.rows.push_back({dt, res.back(), traj.energy_excess, traj.max_divergence_defect});
    }
    double order = 1e300;
    for (std::size_t i = 1; i < res.size(); ++i)
        order = std::min(order, std::log2(res[i - 1] / res[i]) / std::log2(config.dt_list[i - 1] / config.dt_list[i]));
    const double seconds = since(t0);
    out.verdicts.push_back(at_most("fluid Duhamel: residual at the finest step", res.back(), config.tol, seconds));
    out.verdicts.push_back(at_least("fluid Duhamel: observed order under dt refinement", order, config.min_order,
                                    seconds));
    out.tables.push_back(std::move(table));
    out.summary["fluid_residuals"] = res;
    out.summary["fluid_order"] = order;
    return out;
}

Outcome kinetic_run(const KineticConfig& config) {
    Outcome out;
    auto backend = make_backend(config.backend);
    const auto& basis = backend->basis();
    const auto t0 = Clock::now();
    auto grid = std::make_shared<const SpatialGrid>(config.dim_x, config.max_mode);
    auto conv = std::make_shared<const Convolver>(grid);
    const kinetic::GammaConvolution gamma(backend, conv);
    auto props = semigroup::PropagatorSet::load_or_build(backend, grid, config.eps, config.dt, config.cache_dir);
    SpectralField f = fluid::lift_kinetic(
        basis, analysis::random_well_prepared(basis, grid, config.data_max_k, config.data_norm, config.seed));
    if (config.micro_norm > 0.0)
        f.coeffs += analysis::random_microscopic(basis, grid, config.data_max_k, config.micro_norm, config.seed + 1).coeffs;

    kinetic::KineticRun run;
    run.eps = config.eps;
    run.T = config.T;
    run.dt = config.dt;
    const auto traj = kinetic::solve_kinetic(f, run, *props, &gamma);
    const double residual = kinetic::residual_check(traj, *props, &gamma);

    Table table{"kinetic_norms", {"t", "h_half", "macro_h_half", "micro_h_half"}, {}};
    const ComplexMatrix p0 = basis.p0_matrix().cast<Complex>();
    const auto z = Eigen::Index(grid->zero_index());
    const ComplexMatrix rows = basis.hydro_rows().cast<Complex>();
    double drift = 0.0;
    for (std::size_t n = 0; n <= traj.steps(); ++n) {
        const SpectralField s = traj.at(n);
        SpectralField macro = s;
        macro.coeffs = p0 * s.coeffs;
        SpectralField micro = s;
        micro.coeffs -= macro.coeffs;
        table.rows.push_back({traj.time(n), s.hm_norm(0.5), macro.hm_norm(0.5), micro.hm_norm(0.5)});
        drift = std::max(drift, (rows * (s.coeffs.col(z) - f.coeffs.col(z))).norm());
    }
    const double seconds = since(t0);
    out.verdicts.push_back(at_most("kinetic: Duhamel residual (H^{1/2} L^2, sup in time)", residual,
                                   config.residual_tol, seconds));
    out.verdicts.push_back(at_most("kinetic: drift of the conserved moments", drift, 1e-8, seconds));
    out.tables.push_back(std::move(table));
    out.summary["kinetic"] = {{"residual", residual}, {"drift", drift}, {"steps", traj.steps()}};
    return out;
}

Outcome cross_check(const analysis::CrossCheckConfig& config, double factor) {
    Outcome out;
    const auto t0 = Clock::now();
    const auto r = analysis::delta_cross_check(config);
    out.verdicts.push_back(at_most("cross-check: ||(g + delta) - f||_{L~inf H^1/2 L^2} / tolerance", r.distance / r.tolerance,
                                   factor, since(t0),
                                   "distance " + short_fmt(r.distance) + ", tolerance " + short_fmt(r.tolerance) +
                                       " (kinetic " + short_fmt(r.kinetic_residual) + ", fluid " +
                                       short_fmt(r.nsf_residual) + ")"));
    out.summary["cross_check"] = {{"distance", r.distance},
                                  {"kinetic_residual", r.kinetic_residual},
                                  {"nsf_residual", r.nsf_residual},
                                  {"picard_tol", r.picard_tol},
                                  {"tolerance", r.tolerance},
                                  {"delta_norm", r.delta_norm},
                                  {"subintervals", r.subintervals},
                                  {"max_l_norm", r.max_l_norm}};
    return out;
}

Table sweep_table(const std::string& name, const analysis::SweepResult& sweep) {
    Table t{name, {"eps", "e_linf", "e_l2", "error", "g_eps_distance", "kinetic_residual"}, {}};
    for (const auto& r : sweep.rows)
        t.rows.push_back({r.eps, r.e_linf, r.e_l2, r.error(), r.g_eps_distance, r.kinetic_residual});
    return t;
}

Outcome convergence(const analysis::SweepResult& compliant, double min_slope) {
    Outcome out;
    std::string errors;
    for (const auto& r : compliant.rows) errors += (errors.empty() ? "" : ", ") + short_fmt(r.error());
    out.verdicts.push_back({"convergence: e(eps) strictly decreasing and slope >= " + short_fmt(min_slope),
                            compliant.strictly_decreasing && compliant.slope >= min_slope, compliant.slope,
                            min_slope,
                            "e = " + errors + "; theoretical " + short_fmt(compliant.theoretical), 0.0});
    out.tables.push_back(sweep_table("sweep", compliant));
    out.summary["sweep"] = {{"slope", compliant.slope},
                            {"theoretical", compliant.theoretical},
                            {"strictly_decreasing", compliant.strictly_decreasing},
                            {"plateau_ratio", compliant.plateau_ratio}};
    return out;
}

Outcome sensitivity(const analysis::SweepResult& compliant, const analysis::SweepResult& micro, double floor,
                    double min_slope) {
    Outcome out;
    double smallest = 1e300;
    for (const auto& r : micro.rows) smallest = std::min(smallest, r.error());
    const bool compliant_ok = compliant.strictly_decreasing && compliant.slope >= min_slope;
    out.verdicts.push_back({"sensitivity: microscopic data keeps e(eps) >= " + short_fmt(floor) +
                                " while the compliant run converges",
                            smallest >= floor && compliant_ok, smallest, floor,
                            "micro slope " + short_fmt(micro.slope) + ", plateau ratio " +
                                short_fmt(micro.plateau_ratio) + "; compliant slope " + short_fmt(compliant.slope),
                            0.0});
    out.tables.push_back(sweep_table("sweep_micro", micro));
    out.summary["sweep_micro"] = {{"slope", micro.slope},
                                  {"min_error", smallest},
                                  {"plateau_ratio", micro.plateau_ratio}};
    return out;
}

Outcome picard_lemma(std::uint64_t seed) {
    using namespace analysis;
    Outcome out;
    const auto t0 = Clock::now();
    PicardOptions opt;
    opt.tol = 1e-15;

    // Scalar: x = x0 + x/2 + x^2.
    PicardProblem<RealVector> s;
    s.l_norm = 0.5;
    s.b_norm = 1.0;
    s.x0 = RealVector::Constant(1, 0.9 * s.data_bound());
    s.linear = [](const RealVector& x) { return RealVector(0.5 * x); };
    s.bilinear = [](const RealVector& x, const RealVector& y) { return RealVector(x.cwiseProduct(y)); };
    s.norm = [](const RealVector& x) { return x.norm(); };
    const auto rs = picard_solve(s, opt);
    const double exact = (0.5 - std::sqrt(0.25 - 4.0 * s.x0(0))) / 2.0;
    const auto rs2 = picard_solve(s, RealVector(RealVector::Constant(1, 0.9 * s.ball_radius())), opt);
    const double scalar_err = std::max(std::abs(rs.x(0) - exact), std::abs(rs2.x(0) - exact));

    // 100 dimensions: L = Q / 2 with Q orthogonal, B(x, y) = 3 x .* y, so ||L|| = 1/2 and ||B|| = 3.
    const Eigen::Index n = 100;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    RealMatrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = nd(rng);
    const RealMatrix q = Eigen::HouseholderQR<RealMatrix>(g).householderQ();
    PicardProblem<RealVector> p;
    p.l_norm = 0.5;
    p.b_norm = 3.0;
    p.linear = [&](const RealVector& x) { return RealVector(0.5 * (q * x)); };
    p.bilinear = [](const RealVector& x, const RealVector& y) { return RealVector(3.0 * x.cwiseProduct(y)); };
    p.norm = [](const RealVector& x) { return x.norm(); };
    RealVector x0(n);
    for (auto& v : x0) v = nd(rng);
    p.x0 = 0.9 * p.data_bound() * x0 / x0.norm();
    const auto r1 = picard_solve(p, opt);
    RealVector start(n);
    for (auto& v : start) v = nd(rng);
    start *= 0.9 * p.ball_radius() / start.norm();
    const auto r2 = picard_solve(p, start, opt);
    const double diff = (r1.x - r2.x).norm();
    const double seconds = since(t0);

    const bool ok = rs.inside_ball() && rs.within_c0() && r1.inside_ball() && r1.within_c0() && r2.inside_ball() &&
                    p.c0() <= 4.0 && s.c0() <= 4.0 && scalar_err <= 1e-12 && diff <= 1e-10;
    std::ostringstream detail;
    detail << "scalar error " << short_fmt(scalar_err) << "; ||x|| / ||x0|| = "
           << short_fmt(r1.solution_norm / r1.data_norm) << " (C0 = " << short_fmt(p.c0()) << "), radius "
           << short_fmt(r1.radius) << ", ||x|| " << short_fmt(r1.solution_norm) << ", second start "
           << short_fmt(diff);
    out.verdicts.push_back({"picard: ball, C0 <= 4 and start independence (scalar and 100-dim)", ok, diff, 1e-10,
                            detail.str(), seconds});
    out.summary["picard"] = {{"scalar_error", scalar_err},
                             {"c0", p.c0()},
                             {"solution_ratio", r1.solution_norm / r1.data_norm},
                             {"second_start_difference", diff},
                             {"iterations", r1.iterations}};
    return out;
}

}  // namespace hydrolimit::experiments
