#include "hydrolimit/fluid.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

using namespace hydrolimit;
using namespace hydrolimit::fluid;
using velocity::VelocityBasis;

namespace {

std::shared_ptr<const VelocityBasis> basis6() {
    static const auto b = std::make_shared<const VelocityBasis>(VelocityBasis::build(6));
    return b;
}

std::shared_ptr<const collision::CollisionBackend> bgk1() {
    static const auto b = std::make_shared<const collision::CollisionBackend>(collision::bgk_backend(basis6(), 1.0));
    return b;
}

const semigroup::SemigroupDecomposition& decomposition() {
    static const semigroup::SemigroupDecomposition d(
        bgk1(), std::make_shared<const spectral::ExpansionTable>(bgk1(), 2), 0.02,
        collision::viscosities(*bgk1()));
    return d;
}

void symmetrize(HydroField& h) {
    HydroField c = h;
    for (std::size_t i = 0; i < h.modes(); ++i) {
        const auto a = Eigen::Index(i), b = Eigen::Index(h.grid->negated(i));
        h.rho(a) = 0.5 * (c.rho(a) + std::conj(c.rho(b)));
        h.theta(a) = 0.5 * (c.theta(a) + std::conj(c.theta(b)));
        h.u.col(a) = 0.5 * (c.u.col(a) + c.u.col(b).conjugate());
    }
}

/// Mean-free, reality-symmetric field with |k|^{-power} spectrum up to |k| <= kmax.
HydroField random_hydro(std::shared_ptr<const SpatialGrid> grid, unsigned seed, double power = 2.0,
                        double kmax = 1e9) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    HydroField h(grid);
    for (std::size_t i = 0; i < h.modes(); ++i) {
        const Wavevector& k = grid->mode(i);
        if (k.is_zero() || k.norm() > kmax) continue;
        const double a = std::pow(k.norm(), -power);
        const auto c = Eigen::Index(i);
        h.rho(c) = a * Complex(g(rng), g(rng));
        h.theta(c) = a * Complex(g(rng), g(rng));
        for (int j = 0; j < 3; ++j) h.u(j, c) = a * Complex(g(rng), g(rng));
        if (grid->dim_x() == 2) h.u(2, c) *= 0.0;
    }
    symmetrize(h);
    return h;
}

HydroField scaled_to(HydroField h, double target) {
    h *= target / h.hm_norm(0.5);
    return h;
}

HydroField shear(std::shared_ptr<const SpatialGrid> grid, double amp) {
    // u = amp (sin x_2, 0, 0).
    HydroField h(grid);
    h.u(0, Eigen::Index(*grid->index_of({{0, 1, 0}}))) = Complex(0, -0.5 * amp);
    h.u(0, Eigen::Index(*grid->index_of({{0, -1, 0}}))) = Complex(0, 0.5 * amp);
    return h;
}

}  // namespace

TEST(Leray, RangeKernelAndIdempotence) {
    auto grid = std::make_shared<const SpatialGrid>(3, 3);
    const auto h = random_hydro(grid, 1);
    ComplexMatrix grad(3, Eigen::Index(grid->size()));
    for (std::size_t i = 0; i < grid->size(); ++i) {
        grad.col(Eigen::Index(i)) = kI * grid->mode(i).as_real().cast<Complex>() * h.rho(Eigen::Index(i));
    }
    EXPECT_LE(leray_project(*grid, grad).norm(), 1e-14 * grad.norm());
    const ComplexMatrix pu = leray_project(*grid, h.u);
    HydroField hp = h;
    hp.u = pu;
    EXPECT_LE(hp.divergence_defect(), 1e-14);
    EXPECT_LE((leray_project(*grid, pu) - pu).norm(), 1e-15 * pu.norm());
}

TEST(WellPrepared, CoefficientsAndLiteralConventionConflict) {
    auto grid = std::make_shared<const SpatialGrid>(2, 2);
    HydroField h(grid);
    const auto k = Eigen::Index(*grid->index_of({{1, 0, 0}})), mk = Eigen::Index(*grid->index_of({{-1, 0, 0}}));
    h.rho(k) = h.rho(mk) = 1.0;
    const auto lit = well_prepared(h, WellPreparedConvention::Literal);
    EXPECT_DOUBLE_EQ(lit.rho(k).real(), 0.4);
    EXPECT_DOUBLE_EQ(lit.theta(k).real(), -1.0);
    // The literal temperature is not Boussinesq-compatible.
    EXPECT_NEAR(lit.boussinesq_defect(), 0.6, 1e-15);
    const auto proj = well_prepared(h);
    EXPECT_DOUBLE_EQ(proj.rho(k).real(), 0.4);
    EXPECT_DOUBLE_EQ(proj.theta(k).real(), -0.4);
    EXPECT_EQ(proj.boussinesq_defect(), 0.0);

    h.rho(Eigen::Index(grid->zero_index())) = 0.1;
    EXPECT_THROW(well_prepared(h), ConfigError);
}

TEST(WellPrepared, GradientsVanishAndWellPreparedDataIsFixed) {
    auto grid = std::make_shared<const SpatialGrid>(2, 3);
    HydroField h = random_hydro(grid, 2);
    for (std::size_t i = 0; i < h.modes(); ++i) {
        h.u.col(Eigen::Index(i)) = kI * grid->mode(i).as_real().cast<Complex>() * h.rho(Eigen::Index(i));
    }
    EXPECT_LE(well_prepared(h).u.norm(), 1e-14);

    const auto once = well_prepared(random_hydro(grid, 3));
    for (auto conv : {WellPreparedConvention::Projection, WellPreparedConvention::Literal}) {
        const auto twice = well_prepared(once, conv);
        EXPECT_LE((twice.rho - once.rho).norm(), 1e-15);
        EXPECT_LE((twice.theta - once.theta).norm(), 1e-15);
        EXPECT_LE((twice.u - once.u).norm(), 1e-15);
    }
}

TEST(Lift, MomentsRoundTripAndHydrodynamicSpan) {
    auto grid = std::make_shared<const SpatialGrid>(2, 3);
    EXPECT_EQ(lift_kinetic(*basis6(), HydroField(grid)).coeffs.norm(), 0.0);
    const auto h = random_hydro(grid, 4);
    const auto f = lift_kinetic(*basis6(), h);
    const auto back = hydro_moments(*basis6(), f);
    EXPECT_LE((back.rho - h.rho).norm(), 1e-12);
    EXPECT_LE((back.theta - h.theta).norm(), 1e-12);
    EXPECT_LE((back.u - h.u).norm(), 1e-12);
    EXPECT_LE((basis6()->p0_matrix().cast<Complex>() * f.coeffs - f.coeffs).norm(), 1e-12);
    for (std::size_t n = 0; n < basis6()->dim(); ++n) {
        if (basis6()->indices()[n].degree() > 2) EXPECT_EQ(f.coeffs.row(Eigen::Index(n)).norm(), 0.0);
    }
    EXPECT_NEAR(f.hm_norm(0.5), h.hm_norm(0.5), 1e-12);
}

TEST(Mollifier, SupportLimitAndNormInflation) {
    auto grid = std::make_shared<const SpatialGrid>(2, 16);
    Mollifier m{0.2, 2.0};
    const double eps = 0.01;
    const auto h = random_hydro(grid, 5, 1.0);
    const auto g = m.apply(h, eps);
    for (std::size_t i = 0; i < h.modes(); ++i) {
        if (std::pow(eps, m.alpha) * grid->mode(i).norm() >= m.radius) {
            EXPECT_EQ(g.u.col(Eigen::Index(i)).norm(), 0.0);
        }
    }
    EXPECT_DOUBLE_EQ(m.multiplier(1e-40, {{16, 16, 0}}), 1.0);
    for (double ell : {1.6, 2.0}) {
        // <k>^{ell - 1/2} <= (1 + radius^2 eps^{-2 alpha})^{(ell - 1/2)/2} on the support.
        const double bound = std::pow(1.0 + m.radius * m.radius * std::pow(eps, -2 * m.alpha), (ell - 0.5) / 2);
        EXPECT_LE(g.hm_norm(ell), bound * h.hm_norm(0.5));
        EXPECT_GT(g.hm_norm(ell), 0.1 * bound * g.hm_norm(0.5) / std::pow(eps, -m.alpha * (ell - 0.5)));
    }
    EXPECT_THROW(Mollifier({0.25, 1.0}).apply(h, eps), ConfigError);
    EXPECT_THROW(Mollifier({0.0, 1.0}).apply(h, eps), ConfigError);
}

TEST(NsfSolver, ShearModeDecaysExactly) {
    auto grid = std::make_shared<const SpatialGrid>(2, 4);
    auto conv = std::make_shared<const Convolver>(grid);
    NsfParams p;
    p.nu_ns = 0.7;
    p.nu_heat = 1.3;
    p.dt = 0.01;
    p.T = 0.5;
    const auto traj = solve_nsf(shear(grid, 1.0), p, conv);
    const auto ref = shear(grid, std::exp(-0.7 * 0.5));
    EXPECT_LE((traj.states.back().u - ref.u).norm(), 1e-13);
    EXPECT_LE(traj.energy_excess, 1e-13);
}

TEST(NsfSolver, TemperatureWithoutFlowFollowsHeatEquation) {
    auto grid = std::make_shared<const SpatialGrid>(2, 4);
    auto conv = std::make_shared<const Convolver>(grid);
    HydroField h = random_hydro(grid, 6);
    h.u.setZero();
    h.rho = -h.theta;
    NsfParams p;
    p.nu_heat = 0.5;
    p.dt = 0.01;
    p.T = 0.3;
    const auto traj = solve_nsf(h, p, conv);
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const Complex ref = h.theta(Eigen::Index(i)) * std::exp(-0.5 * grid->mode(i).norm_squared() * 0.3);
        EXPECT_LE(std::abs(traj.states.back().theta(Eigen::Index(i)) - ref), 1e-13);
    }
}

TEST(NsfSolver, InvariantsAndEnergyBalanceAtK16) {
    auto grid = std::make_shared<const SpatialGrid>(2, 16);
    auto conv = std::make_shared<const Convolver>(grid);
    const auto init = scaled_to(well_prepared(random_hydro(grid, 7)), 0.5);
    NsfParams p;
    p.dt = 1.0 / 1024;
    p.T = 1.0;
    p.stride = 64;
    const auto traj = solve_nsf(init, p, conv);
    EXPECT_EQ(traj.steps(), 16u);
    EXPECT_LE(traj.max_divergence_defect, 1e-10);
    EXPECT_LE(traj.max_boussinesq_defect, 1e-10);
    EXPECT_LE(traj.energy_excess, 1e-6);
    for (const auto& s : traj.states) {
        EXPECT_EQ(s.mean_defect(), 0.0);
        EXPECT_LE(s.reality_defect(), 1e-14);
    }
    EXPECT_LT(traj.states.back().kinetic_energy(), init.kinetic_energy());
}

TEST(NsfSolver, RejectsBadStepsAndReportsGrowth) {
    auto grid = std::make_shared<const SpatialGrid>(2, 8);
    auto conv = std::make_shared<const Convolver>(grid);
    const auto init = scaled_to(well_prepared(random_hydro(grid, 8)), 0.1);
    NsfParams p;
    p.dt = 0.01;
    p.T = 0.1;
    EXPECT_THROW(solve_nsf(init, p, conv), ConfigError);
    p.dt = 0.005;
    EXPECT_THROW(solve_nsf(random_hydro(grid, 9), p, conv), ConfigError);
    p.blowup_factor = 0.5;
    try {
        (void)solve_nsf(init, p, conv);
        FAIL() << "expected growth report";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("T*"), std::string::npos);
    }
}

TEST(NsfDuhamel, ZeroAndShearData) {
    auto grid = std::make_shared<const SpatialGrid>(2, 4);
    auto conv = std::make_shared<const Convolver>(grid);
    NsfParams p;
    p.dt = 0.01;
    p.T = 0.2;
    const auto zero = solve_nsf(HydroField(grid), p, conv);
    EXPECT_EQ(nsf_duhamel_residual(zero, decomposition(), conv), 0.0);
    const auto sh = solve_nsf(shear(grid, 0.3), p, conv);
    EXPECT_LE(nsf_duhamel_residual(sh, decomposition(), conv), 1e-8);
}

TEST(NsfDuhamel, SmallDataResidualIsSecondOrder) {
    auto grid = std::make_shared<const SpatialGrid>(2, 8);
    auto conv = std::make_shared<const Convolver>(grid);
    const auto init = scaled_to(well_prepared(random_hydro(grid, 10, 2.0, 4.0)), 0.1);
    std::vector<double> res;
    for (double dt : {1.0 / 128, 1.0 / 256, 1.0 / 512}) {
        NsfParams p;
        p.dt = dt;
        p.T = 0.25;
        res.push_back(nsf_duhamel_residual(solve_nsf(init, p, conv), decomposition(), conv));
    }
    EXPECT_LE(res.back(), 1e-6);
    for (std::size_t i = 1; i < res.size(); ++i) EXPECT_NEAR(res[i - 1] / res[i], 4.0, 0.8) << i;
}

TEST(NsfTrajectoryJson, SelfDescribing) {
    auto grid = std::make_shared<const SpatialGrid>(2, 2);
    auto conv = std::make_shared<const Convolver>(grid);
    NsfParams p;
    p.dt = 0.05;
    p.T = 0.1;
    const auto traj = solve_nsf(shear(grid, 0.2), p, conv);
    const auto path = std::filesystem::temp_directory_path() / "hydrolimit_nsf_traj.json";
    write_trajectory_json(path.string(), traj);
    std::ifstream in(path);
    const auto doc = nlohmann::json::parse(in);
    EXPECT_EQ(doc["grid"]["max_mode"], 2);
    EXPECT_EQ(doc["snapshots"].size(), 3u);
    EXPECT_DOUBLE_EQ(doc["snapshots"][2]["t"].get<double>(), 0.1);
    EXPECT_EQ(doc["snapshots"][0]["u"][0]["im"].size(), grid->size());
    std::filesystem::remove(path);
}
