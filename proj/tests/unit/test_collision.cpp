#include "hydrolimit/collision.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hydrolimit;
using namespace hydrolimit::collision;
using velocity::VelocityBasis;

namespace {

std::shared_ptr<const VelocityBasis> basis6() {
    static const auto b = std::make_shared<const VelocityBasis>(VelocityBasis::build(6));
    return b;
}

ComplexVector random_field(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    ComplexVector f(static_cast<Eigen::Index>(dim));
    for (auto& c : f) c = {g(rng), g(rng)};
    return f;
}

// Coefficients of mu^{-1/2} M[F] for F = mu + eps mu^{1/2} f, with M[F] the
// local Maxwellian carrying the mass, momentum and energy of F.
RealVector local_maxwellian_coeffs(const VelocityBasis& b, const RealVector& f, double eps) {
    const RealVector p = b.values().transpose() * f;  // f / mu^{1/2} at the nodes
    double mass = 1.0, energy = 1.5;
    Vec3 momentum = Vec3::Zero();
    for (Eigen::Index q = 0; q < b.nodes().cols(); ++q) {
        const Vec3 v = b.nodes().col(q);
        const double w = b.weights()(q) * eps * p(q);
        mass += w;
        momentum += w * v;
        energy += 0.5 * w * v.squaredNorm();
    }
    const Vec3 u = momentum / mass;
    const double temp = (2.0 * energy / mass - u.squaredNorm()) / 3.0;
    RealVector samples(b.nodes().cols());
    for (Eigen::Index q = 0; q < b.nodes().cols(); ++q) {
        const Vec3 v = b.nodes().col(q);
        // M / mu with mu the unit Gaussian.
        const double ratio = mass * std::pow(temp, -1.5) *
                             std::exp(-(v - u).squaredNorm() / (2.0 * temp) + 0.5 * v.squaredNorm());
        samples(q) = b.weights()(q) * ratio;
    }
    return b.values() * samples;
}

}  // namespace

TEST(Bgk, SpectrumOfProjectorComplement) {
    const auto backend = bgk_backend(basis6(), 1.0);
    const RealVector ev = l_eigenvalues(backend);
    EXPECT_EQ(kernel_dimension(backend), 5);
    int minus_one = 0;
    for (double e : ev) minus_one += std::abs(e + 1.0) < 1e-12 ? 1 : 0;
    EXPECT_EQ(minus_one, 84 - 5);
    EXPECT_LE((backend.L() * basis6()->kernel_basis()).norm(), 1e-12);
}

TEST(Bgk, RejectsNonpositiveFrequency) {
    EXPECT_THROW(bgk_backend(basis6(), 0.0), ConfigError);
    EXPECT_THROW(bgk_backend(basis6(), -1.0), ConfigError);
}

TEST(Bgk, GammaVanishesOnMicroscopicInputs) {
    const auto backend = bgk_backend(basis6(), 1.0);
    std::mt19937_64 rng(1);
    ComplexVector f = random_field(84, rng);
    f -= velocity::project_p0(*basis6(), f);
    EXPECT_LE(backend.gamma(f, f).norm(), 1e-13);
}

TEST(Bgk, GammaIsSecondOrderTermOfLocalMaxwellian) {
    const auto& b = *basis6();
    const double nu = 1.0;
    const auto backend = bgk_backend(basis6(), nu);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 0.3);
    RealVector f(84);
    for (auto& c : f) c = g(rng);
    const double eps = 1e-3;
    const RealVector plus = local_maxwellian_coeffs(b, f, eps);
    const RealVector minus = local_maxwellian_coeffs(b, f, -eps);
    const RealVector zero = local_maxwellian_coeffs(b, f, 0.0);
    const RealVector second = (plus + minus - 2.0 * zero) / (2.0 * eps * eps);
    const ComplexVector model = backend.gamma(f.cast<Complex>(), f.cast<Complex>());
    EXPECT_LE((model.real() - nu * second).norm(), 1e-5 * second.norm());
    EXPECT_LE(model.imag().norm(), 1e-15);
}

TEST(Bgk, ConservationOverThousandSamples) {
    const auto backend = bgk_backend(basis6(), 1.0);
    const ConservationReport r = check_conservation(backend, 1000, 4);
    EXPECT_TRUE(r.passed);
    EXPECT_LE(r.max_residual, 1e-12);
    const auto zero = check_conservation(backend, 0);
    EXPECT_EQ(zero.max_residual, 0.0);
}

TEST(GammaSym, SymmetricBitwiseAndMomentFree) {
    const auto backend = synthetic_gamma_backend(basis6(), 17, 1.0);
    const auto bgk = bgk_backend(basis6(), 1.0);
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const ComplexVector f1 = random_field(84, rng);
        const ComplexVector f2 = random_field(84, rng);
        for (const auto* be : {&backend, &bgk}) {
            const ComplexVector a = gamma_sym(*be, f1, f2);
            const ComplexVector c = gamma_sym(*be, f2, f1);
            EXPECT_TRUE((a.array() == c.array()).all());
            worst = std::max(worst, velocity::project_p0(*basis6(), a).norm());
        }
    }
    EXPECT_LE(worst, 1e-12);
    std::mt19937_64 rng2(6);
    const ComplexVector f = random_field(84, rng2);
    EXPECT_LE((gamma_sym(bgk, f, f) - bgk.gamma(f, f)).norm(), 0.0);
}

TEST(Synthetic, ContinuityConstantBoundsRandomPairs) {
    const auto backend = synthetic_gamma_backend(basis6(), 3, 2.0);
    const double c = backend.continuity_constant();
    EXPECT_GT(c, 0.0);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 200; ++trial) {
        RealVector f1(84), f2(84);
        for (auto& x : f1) x = g(rng);
        for (auto& x : f2) x = g(rng);
        const double out =
            backend.gamma(f1.cast<Complex>(), f2.cast<Complex>()).norm() / (f1.norm() * f2.norm());
        EXPECT_LE(out, c * (1.0 + 1e-9));
    }
    // Microscopic output is genuine (not zero on P0-free inputs).
    const auto rep = check_conservation(backend, 50, 2);
    EXPECT_LE(rep.max_residual, 1e-12);
}

TEST(FluxFunctions, BgkSolveIsExplicit) {
    const auto& b = *basis6();
    const auto backend = bgk_backend(basis6(), 1.0);
    const FluxFunctions flux = solve_flux_functions(backend);
    EXPECT_LE(flux.residual, 1e-10);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const RealVector rhs = b.project([i, j](const Vec3& v) {
                return (i == j ? v.squaredNorm() / 3.0 : 0.0) - v(i) * v(j);
            });
            EXPECT_LE((flux.phi[3 * i + j] + rhs).norm(), 1e-12);
            EXPECT_LE((b.kernel_basis().transpose() * flux.phi[3 * i + j]).norm(), 1e-10);
        }
    }
    for (int i = 0; i < 3; ++i) {
        for (std::size_t n = 0; n < b.dim(); ++n) {
            if (b.indices()[n].degree() % 2 == 0) EXPECT_NEAR(flux.psi[i](Eigen::Index(n)), 0.0, 1e-13);
        }
        EXPECT_LE((b.kernel_basis().transpose() * flux.psi[i]).norm(), 1e-10);
    }
}

TEST(Viscosities, BgkGaussianMomentValues) {
    const auto v1 = viscosities(bgk_backend(basis6(), 1.0));
    EXPECT_NEAR(v1.nu_ns, 1.0, 1e-12);
    EXPECT_NEAR(v1.nu_heat, 1.0, 1e-12);
    const auto v2 = viscosities(bgk_backend(basis6(), 2.0));
    EXPECT_NEAR(v2.nu_ns, 0.5, 1e-12);
    EXPECT_NEAR(v2.nu_heat, 0.5, 1e-12);
}

TEST(Coercivity, BgkGapIsFrequency) {
    EXPECT_NEAR(coercivity_constant(bgk_backend(basis6(), 1.0)), 1.0, 1e-12);
    EXPECT_NEAR(coercivity_constant(bgk_backend(basis6(), 3.0)), 3.0, 1e-12);
    // Against the stronger weighted norm the gap can only shrink.
    EXPECT_LT(coercivity_constant(bgk_backend(basis6(), 1.0), 0, 2.0), 1.0);
}

TEST(Maxwell, EigenvalueIntegralsMatchClosedForms) {
    // With b = 1/(2 pi): lambda_{0,2} = -int sin^3 (3/4) = -1, lambda_{1,1} = -2/3.
    EXPECT_NEAR(maxwell_eigenvalue(0, 2, 32), -1.0, 1e-12);
    EXPECT_NEAR(maxwell_eigenvalue(1, 1, 32), -2.0 / 3.0, 1e-12);
    EXPECT_NEAR(maxwell_eigenvalue(0, 0, 32), 0.0, 1e-13);
    EXPECT_NEAR(maxwell_eigenvalue(0, 1, 32), 0.0, 1e-13);
    EXPECT_NEAR(maxwell_eigenvalue(1, 0, 32), 0.0, 1e-13);
}

TEST(Maxwell, BackendStructure) {
    const auto backend = maxwell_cutoff_backend(basis6(), 32);
    EXPECT_EQ(kernel_dimension(backend), 5);
    EXPECT_LE((backend.L() - backend.L().transpose()).cwiseAbs().maxCoeff(), 1e-10);
    const RealVector ev = l_eigenvalues(backend);
    double smallest = 1e300;
    for (const auto& [name, value] : backend.params) {
        if (name.rfind("lambda_", 0) == 0 && std::abs(value) > 1e-10) {
            EXPECT_LT(value, 0.0) << name;
            smallest = std::min(smallest, std::abs(value));
        }
    }
    for (double e : ev) EXPECT_LE(e, 1e-10);
    EXPECT_NEAR(coercivity_constant(backend), smallest, 1e-10);
    EXPECT_LE(check_conservation(backend, 100).max_residual, 1e-11);
    EXPECT_THROW(maxwell_cutoff_backend(basis6(), 8), ConfigError);
}

TEST(Maxwell, ViscositiesFromBurnettEigenvalues) {
    // The stress and heat-flux sources are pure (0,2) and (1,1) Burnett functions.
    const auto v = viscosities(maxwell_cutoff_backend(basis6(), 32));
    EXPECT_NEAR(v.nu_ns, 1.0, 1e-10);
    EXPECT_NEAR(v.nu_heat, 1.5, 1e-10);
}
