#include "hydrolimit/kinetic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hydrolimit;
using namespace hydrolimit::kinetic;
using collision::CollisionBackend;
using semigroup::PropagatorSet;
using velocity::VelocityBasis;

namespace {

std::shared_ptr<const VelocityBasis> basis6() {
    static const auto b = std::make_shared<const VelocityBasis>(VelocityBasis::build(6));
    return b;
}

std::shared_ptr<const CollisionBackend> bgk1() {
    static const auto b = std::make_shared<const CollisionBackend>(collision::bgk_backend(basis6(), 1.0));
    return b;
}

std::shared_ptr<const SpatialGrid> grid2(int k) { return std::make_shared<const SpatialGrid>(2, k); }

/// Reality-symmetric random field, zero hydrodynamic moments at k = 0, amplitude ~ scale.
SpectralField random_field(std::shared_ptr<const SpatialGrid> grid, double scale, unsigned seed,
                           bool hydro_only = false) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    const auto n = Eigen::Index(basis6()->dim());
    SpectralField f(grid, n);
    for (Eigen::Index j = 0; j < f.coeffs.cols(); ++j) {
        const double decay = 1.0 / (1.0 + grid->mode(std::size_t(j)).norm_squared());
        for (Eigen::Index i = 0; i < n; ++i) f.coeffs(i, j) = scale * decay * Complex(g(rng), g(rng));
    }
    const ComplexMatrix p0 = basis6()->p0_matrix().cast<Complex>();
    if (hydro_only) f.coeffs = p0 * f.coeffs;
    const auto z = Eigen::Index(grid->zero_index());
    f.coeffs.col(z) -= p0 * f.coeffs.col(z);
    f.symmetrize_reality();
    return f;
}

ComplexMatrix direct_oracle(const CollisionBackend& be, const SpatialGrid& grid,
                            const ComplexMatrix& f1, const ComplexMatrix& f2) {
    ComplexMatrix out = ComplexMatrix::Zero(f1.rows(), f1.cols());
    for (std::size_t a = 0; a < grid.size(); ++a) {
        for (std::size_t b = 0; b < grid.size(); ++b) {
            const auto& ka = grid.mode(a);
            const auto& kb = grid.mode(b);
            const Wavevector sum{{ka.k[0] + kb.k[0], ka.k[1] + kb.k[1], ka.k[2] + kb.k[2]}};
            const auto idx = grid.index_of(sum);
            if (!idx) continue;
            out.col(Eigen::Index(*idx)) +=
                collision::gamma_sym(be, f1.col(Eigen::Index(a)), f2.col(Eigen::Index(b)));
        }
    }
    return out;
}

}  // namespace

TEST(GammaConvolution, MatchesDirectLatticeSum) {
    auto grid = grid2(2);
    const GammaConvolution gamma(bgk1(), std::make_shared<const Convolver>(grid));
    const auto f1 = random_field(grid, 1.0, 1);
    const auto f2 = random_field(grid, 1.0, 2);
    const ComplexMatrix oracle = direct_oracle(*bgk1(), *grid, f1.coeffs, f2.coeffs);
    EXPECT_LE((gamma.apply(f1.coeffs, f2.coeffs) - oracle).norm(), 1e-12 * oracle.norm());
    const ComplexMatrix self = direct_oracle(*bgk1(), *grid, f1.coeffs, f1.coeffs);
    EXPECT_LE((gamma.apply(f1.coeffs) - self).norm(), 1e-12 * self.norm());
}

TEST(GammaConvolution, DeltaAtZeroModeActsModewise) {
    auto grid = grid2(3);
    const GammaConvolution gamma(bgk1(), std::make_shared<const Convolver>(grid));
    const auto f1 = random_field(grid, 1.0, 3);
    SpectralField f2(grid, f1.vdim());
    const auto z = Eigen::Index(grid->zero_index());
    f2.coeffs.col(z) = random_field(grid, 1.0, 4).coeffs.col(grid->negated(0)).real().cast<Complex>();
    const ComplexMatrix out = gamma.apply(f1.coeffs, f2.coeffs);
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const ComplexVector expected = collision::gamma_sym(*bgk1(), f1.coeffs.col(j), f2.coeffs.col(z));
        EXPECT_LE((out.col(j) - expected).norm(), 1e-13 * (1 + expected.norm()));
    }
}

TEST(GammaConvolution, ConservesMomentsSymmetricAndReal) {
    auto grid = grid2(3);
    const GammaConvolution gamma(bgk1(), std::make_shared<const Convolver>(grid));
    const auto f = random_field(grid, 1.0, 5);
    const auto g = random_field(grid, 1.0, 6);
    const auto out = spatial_convolution_gamma(gamma, f, g);
    const RealMatrix& rows = basis6()->hydro_rows();
    EXPECT_LE((rows.cast<Complex>() * out.coeffs).norm(), 1e-12 * out.coeffs.norm());
    EXPECT_LE(out.reality_defect(), 1e-13 * out.coeffs.norm());
    EXPECT_LE((gamma.apply(g.coeffs, f.coeffs) - out.coeffs).norm(), 1e-13 * out.coeffs.norm());
    // Polarization ties the pair-folded diagonal path to the general one.
    const ComplexMatrix sum = f.coeffs + g.coeffs, diff = f.coeffs - g.coeffs;
    const ComplexMatrix polar = 0.25 * (gamma.apply(sum) - gamma.apply(diff));
    EXPECT_LE((polar - out.coeffs).norm(), 1e-12 * out.coeffs.norm());
}

TEST(GammaConvolution, DirectAndFftPathsAgreeAtK8) {
    auto grid = grid2(8);
    const GammaConvolution direct(bgk1(), std::make_shared<const Convolver>(grid, ConvolutionPath::Direct));
    const GammaConvolution fft(bgk1(), std::make_shared<const Convolver>(grid, ConvolutionPath::Fft));
    const auto f = random_field(grid, 1.0, 7);
    const ComplexMatrix a = direct.apply(f.coeffs);
    const ComplexMatrix b = fft.apply(f.coeffs);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10 * a.cwiseAbs().maxCoeff());
}

TEST(KineticSolver, LinearFlowMatchesSemigroup) {
    auto grid = grid2(2);
    const double eps = 0.2, dt = 0.01;
    const PropagatorSet props(bgk1(), grid, eps, dt);
    const auto f0 = random_field(grid, 1.0, 8);
    KineticRun run;
    run.eps = eps;
    run.dt = dt;
    run.T = 0.1;
    run.nonlinear = false;
    const auto traj = solve_kinetic(f0, run, props, nullptr);
    ASSERT_EQ(traj.steps(), 10u);
    for (std::size_t j = 0; j < grid->size(); ++j) {
        const ComplexVector ref = semigroup::propagate(*bgk1(), eps, grid->mode(j), 0.1, f0.coeffs.col(Eigen::Index(j)));
        EXPECT_LE((traj.states.back().col(Eigen::Index(j)) - ref).norm(), 1e-12 * (1 + ref.norm()));
    }
    EXPECT_LE(residual_check(traj, props, nullptr), 1e-10);
}

TEST(KineticSolver, KernelDataAtZeroModeIsStationary) {
    auto grid = grid2(2);
    const PropagatorSet props(bgk1(), grid, 0.1, 0.02);
    SpectralField f0(grid, Eigen::Index(basis6()->dim()));
    f0.coeffs.col(Eigen::Index(grid->zero_index())) = basis6()->hydro_profile(0.3, ComplexVec3(0.1, -0.2, 0.0), -0.1);
    KineticRun run;
    run.eps = 0.1;
    run.dt = 0.02;
    run.T = 0.2;
    run.nonlinear = false;
    const auto traj = solve_kinetic(f0, run, props, nullptr);
    EXPECT_LE((traj.states.back() - f0.coeffs).norm(), 1e-12);
}

TEST(KineticSolver, ConservesInvariantsOverUnitTime) {
    auto grid = grid2(3);
    const double eps = 0.1, dt = 0.02;
    const PropagatorSet props(bgk1(), grid, eps, dt);
    const GammaConvolution gamma(bgk1(), std::make_shared<const Convolver>(grid));
    const auto f0 = random_field(grid, 0.05, 9);
    KineticRun run;
    run.eps = eps;
    run.dt = dt;
    run.T = 1.0;
    const RealMatrix rows = basis6()->hydro_rows();
    const auto z = Eigen::Index(grid->zero_index());
    const ComplexVector m0 = rows.cast<Complex>() * f0.coeffs.col(z);
    double drift = 0.0;
    const auto traj = solve_kinetic(f0, run, props, &gamma, [&](std::size_t, double, const ComplexMatrix& f) {
        drift = std::max(drift, (rows.cast<Complex>() * f.col(z) - m0).norm());
    });
    EXPECT_LE(drift, 1e-9);
    EXPECT_LE(SpectralField{traj.at(traj.steps())}.reality_defect(), 1e-12);
}

TEST(KineticSolver, ResidualIsZeroForZeroDataAndSecondOrder) {
    auto grid = grid2(2);
    const double eps = 0.2;
    const GammaConvolution gamma(bgk1(), std::make_shared<const Convolver>(grid));
    {
        const PropagatorSet props(bgk1(), grid, eps, 0.05);
        KineticRun run;
        run.eps = eps;
        run.dt = 0.05;
        run.T = 0.2;
        const auto traj = solve_kinetic(SpectralField(grid, Eigen::Index(basis6()->dim())), run, props, &gamma);
        EXPECT_EQ(residual_check(traj, props, &gamma), 0.0);
    }
    const auto f0 = random_field(grid, 0.5, 10, true);
    std::vector<double> res;
    for (double dt : {0.02, 0.01, 0.005}) {
        const PropagatorSet props(bgk1(), grid, eps, dt);
        KineticRun run;
        run.eps = eps;
        run.dt = dt;
        run.T = 0.2;
        const auto traj = solve_kinetic(f0, run, props, &gamma);
        res.push_back(residual_check(traj, props, &gamma));
    }
    EXPECT_GT(res[0], 0.0);
    // At least second order; the stiff relaxation damps the O(dt^3) step mismatch,
    // so the observed ratio sits near 8 at these step sizes.
    for (std::size_t i = 1; i < res.size(); ++i) {
        EXPECT_GE(res[i - 1] / res[i], 3.5) << i;
    }
}

TEST(KineticSolver, UniformlyBoundedForWellPreparedSmallData) {
    auto grid = grid2(2);
    const GammaConvolution gamma(bgk1(), std::make_shared<const Convolver>(grid));
    const auto f0 = random_field(grid, 0.05, 11, true);
    const double n0 = f0.hm_norm(0.5);
    for (double eps : {0.2, 0.1, 0.05}) {
        const PropagatorSet props(bgk1(), grid, eps, 0.01);
        KineticRun run;
        run.eps = eps;
        run.dt = 0.01;
        run.T = 0.3;
        double sup = 0.0;
        (void)solve_kinetic(f0, run, props, &gamma, [&](std::size_t, double, const ComplexMatrix& f) {
            SpectralField s;
            s.grid = grid;
            s.coeffs = f;
            sup = std::max(sup, s.hm_norm(0.5));
        });
        EXPECT_LE(sup, 1.5 * n0) << eps;
    }
}

TEST(KineticSolver, RejectsBadRunsAndDetectsBlowUp) {
    auto grid = grid2(1);
    const PropagatorSet props(bgk1(), grid, 0.1, 0.01);
    const GammaConvolution gamma(bgk1(), std::make_shared<const Convolver>(grid));
    KineticRun run;
    run.eps = 0.1;
    run.dt = 0.01;
    run.T = 0.105;
    const auto f0 = random_field(grid, 1.0, 12);
    EXPECT_THROW(solve_kinetic(f0, run, props, &gamma), ConfigError);
    run.T = 0.1;
    EXPECT_THROW(solve_kinetic(f0, run, props, nullptr), ConfigError);
    run.dt = 0.02;
    EXPECT_THROW(solve_kinetic(f0, run, props, &gamma), ConfigError);
    run.dt = 0.01;
    const auto big = random_field(grid, 1e4, 13);
    EXPECT_THROW(solve_kinetic(big, run, props, &gamma), NumericalError);
}
