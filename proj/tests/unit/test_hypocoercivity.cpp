#include "hydrolimit/hypocoercivity.hpp"
#include "hydrolimit/mode_spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hydrolimit;
using namespace hydrolimit::hypo;

namespace {

std::shared_ptr<const velocity::VelocityBasis> basis6() {
    static const auto b =
        std::make_shared<const velocity::VelocityBasis>(velocity::VelocityBasis::build(6));
    return b;
}

const collision::CollisionBackend& bgk(double nu) {
    static const auto b1 = collision::bgk_backend(basis6(), 1.0);
    static const auto b2 = collision::bgk_backend(basis6(), 2.0);
    return nu == 1.0 ? b1 : b2;
}

ComplexVector random_vector(std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    ComplexVector v(Eigen::Index(basis6()->dim()));
    for (auto& x : v) x = Complex(nd(rng), nd(rng));
    return v;
}

ComplexVector unit_mode(int a, int b, int c) {
    ComplexVector v = ComplexVector::Zero(Eigen::Index(basis6()->dim()));
    v(Eigen::Index(basis6()->index_or_throw({{a, b, c}}))) = 1.0;
    return v;
}

ComplexVector micro_part(const ComplexVector& f) {
    return f - velocity::project_p0(*basis6(), f);
}

/// Theta_jl[f] by direct quadrature of f (v_j v_l - delta_jl) mu^{1/2}.
ComplexMat3 stress_by_quadrature(const ComplexVector& f) {
    const auto& b = *basis6();
    const ComplexVector vals = b.values().transpose().cast<Complex>() * f;
    ComplexMat3 out = ComplexMat3::Zero();
    for (Eigen::Index q = 0; q < vals.size(); ++q)
        for (int j = 0; j < 3; ++j)
            for (int l = 0; l < 3; ++l)
                out(j, l) += b.weights()(q) * vals(q) *
                             (b.nodes()(j, q) * b.nodes()(l, q) - (j == l ? 1.0 : 0.0));
    return out;
}

const Deltas kDefault{0.1, 0.01, 0.001};

}  // namespace

TEST(Deltas, RejectsZeroAndNegative) {
    EXPECT_THROW((Deltas{0, 0, 0}.validate()), ConfigError);
    EXPECT_THROW((Deltas{0.1, -0.01, 0.001}.validate()), ConfigError);
    EXPECT_THROW((Deltas{0.1, 0.01, std::nan("")}.validate()), ConfigError);
    EXPECT_NO_THROW(kDefault.validate());
    EXPECT_TRUE(kDefault.ordered());
    EXPECT_FALSE((Deltas{0.01, 0.1, 0.001}.ordered()));
    EXPECT_THROW(HypoForm(basis6(), Deltas{0, 0, 0}, 0.1), ConfigError);
    EXPECT_THROW(HypoForm(basis6(), kDefault, 1.5), ConfigError);
    EXPECT_THROW(HypoForm(basis6(), kDefault, 0.0), ConfigError);
}

TEST(Psi, VanishesWithoutMoments) {
    std::mt19937_64 rng(1);
    // Modes of degree >= 4 carry none of rho, u, theta, M, Theta.
    ComplexVector f = random_vector(rng);
    for (std::size_t i = 0; i < basis6()->dim(); ++i)
        if (basis6()->indices()[i].degree() < 4) f(Eigen::Index(i)) = 0.0;
    const ComplexVector g = random_vector(rng);
    const Vec3 k(1, 2, 3);
    EXPECT_LE(std::abs(psi_functional(*basis6(), kDefault, f, f, k)), 1e-14 * f.squaredNorm());
    EXPECT_LE(std::abs(psi_functional(*basis6(), kDefault, f, g, k)), 1e-13 * g.norm());
}

TEST(Psi, VanishesAtZeroWavevector) {
    std::mt19937_64 rng(2);
    const ComplexVector f = random_vector(rng), g = random_vector(rng);
    EXPECT_EQ(psi_functional(*basis6(), kDefault, f, g, Vec3::Zero()), Complex(0.0));
    HypoForm form(basis6(), kDefault, 0.5);
    EXPECT_EQ(form.psi_matrix(Vec3::Zero()).norm(), 0.0);
}

TEST(Psi, SinglePairMatchesQuadrature) {
    const ComplexVector f1 = unit_mode(1, 0, 0);  // v_1 mu^{1/2}
    for (const auto& [f2, k] : {std::pair{unit_mode(2, 0, 0), Vec3(1, 0, 0)},
                                std::pair{unit_mode(1, 1, 0), Vec3(0, 1, 0)},
                                std::pair{unit_mode(1, 1, 0), Vec3(1, 0, 0)}}) {
        // Only the first stress term survives: f1 has u = e_1 and no micro part, f2 has u = 0.
        const ComplexMat3 theta2 = stress_by_quadrature(f2);
        Complex contraction = 0.0;
        for (int j = 0; j < 3; ++j)
            for (int l = 0; l < 3; ++l)
                contraction += 0.5 * (k(j) * (l == 0) + k(l) * (j == 0)) * std::conj(theta2(j, l));
        const Complex expected = kI * kDefault.d2 / (1 + k.squaredNorm()) * contraction;
        EXPECT_NEAR(std::abs(psi_functional(*basis6(), kDefault, f1, f2, k) - expected), 0.0, 1e-14);
    }
    // (2,0,0) at k = e_1: Theta_11 = sqrt 2, so psi = i d2 sqrt(2) / 2.
    EXPECT_NEAR(std::abs(psi_functional(*basis6(), kDefault, f1, unit_mode(2, 0, 0), Vec3(1, 0, 0)) -
                         kI * kDefault.d2 * std::sqrt(2.0) / 2.0),
                0.0, 1e-14);
}

TEST(Psi, StressIdentityBehindTheThetaTerm) {
    std::mt19937_64 rng(3);
    for (int s = 0; s < 5; ++s) {
        const ComplexVector f = random_vector(rng);
        const auto h = velocity::moments(*basis6(), f);
        const ComplexMat3 full = velocity::moment_Theta(*basis6(), f);
        const ComplexMat3 split = velocity::moment_Theta(*basis6(), micro_part(f)) +
                                  h.theta * ComplexMat3::Identity();
        EXPECT_LE((full - split).norm(), 1e-13 * f.norm());
        EXPECT_LE((full - stress_by_quadrature(f)).norm(), 1e-12 * f.norm());
    }
}

TEST(Psi, MatrixMatchesFunctionalAndIsHermitian) {
    std::mt19937_64 rng(4);
    const HypoForm form(basis6(), Deltas{0.3, 0.07, 0.02}, 0.7);
    for (const Vec3& k : {Vec3(1, 0, 0), Vec3(2, -1, 0), Vec3(3, 1, -4)}) {
        const ComplexMatrix psi = form.psi_matrix(k);
        EXPECT_LE((psi - psi.adjoint()).norm(), 1e-15);
        for (int s = 0; s < 5; ++s) {
            const ComplexVector f1 = random_vector(rng), f2 = random_vector(rng);
            const Complex direct = psi_functional(*basis6(), form.deltas(), f1, f2, k);
            const Complex swapped = psi_functional(*basis6(), form.deltas(), f2, f1, k);
            const Complex via_matrix = f2.dot(psi * f1);
            const double scale = f1.norm() * f2.norm();
            EXPECT_LE(std::abs(direct - via_matrix), 1e-13 * scale);
            EXPECT_LE(std::abs(direct - std::conj(swapped)), 1e-13 * scale);
            EXPECT_LE(std::abs(form.inner(f1, f1, k).imag()), 1e-13 * f1.squaredNorm());

            // Sesquilinear: linear in the first slot, antilinear in the second.
            const Complex a(0.3, -1.2);
            const ComplexVector g = random_vector(rng);
            EXPECT_LE(std::abs(psi_functional(*basis6(), form.deltas(), a * f1 + g, f2, k) -
                               (a * direct + psi_functional(*basis6(), form.deltas(), g, f2, k))),
                      1e-13 * (f1.norm() + g.norm()) * f2.norm());
            EXPECT_LE(std::abs(form.inner(f1, a * f2, k) - std::conj(a) * form.inner(f1, f2, k)),
                      1e-13 * scale);
        }
    }
}

TEST(Psi, BoundedUniformlyInK) {
    // Psi(k) = |k| / <k>^2 * Psi_1(k/|k|) and the basis is rotation invariant.
    const HypoForm form(basis6(), kDefault, 1.0);
    const double c1 = form.psi_matrix(Vec3(1, 0, 0)).operatorNorm() * 2.0;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (double r : {0.5, 3.0, 40.0, 1e3}) {
        Vec3 k(nd(rng), nd(rng), nd(rng));
        k *= r / k.norm();
        const double n = form.psi_matrix(k).operatorNorm();
        EXPECT_NEAR(n, c1 * r / (1 + r * r), 1e-10 * c1);
        EXPECT_LE(n, c1 / 2 * (1 + 1e-12));
    }
}

TEST(Equivalence, EigenvaluesWithinEpsPsi) {
    for (double eps : {1.0, 0.1}) {
        const HypoForm form(basis6(), kDefault, eps);
        for (const Vec3& k : {Vec3(1, 0, 0), Vec3(3, 2, 0)}) {
            const auto e = equivalence_bounds(form, k);
            const double bound = eps * form.psi_matrix(k).operatorNorm();
            EXPECT_NEAR(e.upper - 1.0, bound, 1e-12);
            EXPECT_NEAR(1.0 - e.lower, bound, 1e-12);
            EXPECT_LE(bound, 0.5);
        }
    }
}

TEST(Wavevectors, CanonicalOrbits) {
    EXPECT_EQ(canonical_wavevectors(2, 2.0).size(), 4u);
    EXPECT_EQ(canonical_wavevectors(3, 2.0).size(), 5u);
    const auto ks = canonical_wavevectors(3, 8.0);
    EXPECT_TRUE(ks.front().is_zero());
    for (const auto& k : ks) EXPECT_LE(k.norm(), 8.0);
    EXPECT_THROW(canonical_wavevectors(1, 2.0), ConfigError);
}

TEST(Coercivity, MicroscopicAtZeroWavevectorIsTheSpectralGap) {
    CoercivityOptions o;
    o.k_radius = 0.0;
    o.samples = 50;
    for (double nu : {1.0, 2.0}) {
        const auto r = verify_coercivity(bgk(nu), kDefault, o);
        ASSERT_EQ(r.cells.size(), o.eps_list.size());
        const double gap = collision::coercivity_constant(bgk(nu));
        EXPECT_NEAR(r.lambda3_exact, gap, 1e-10 * gap);
        for (double x : r.ratios) EXPECT_GE(x, gap * (1 - 1e-10));
    }
}

TEST(Coercivity, MicroscopicSamplesKeepTheGap) {
    // P0 f = 0 and k != 0: lambda >= lambda_2 (1 - O(d1)).
    std::mt19937_64 rng(6);
    for (double nu : {1.0, 2.0}) {
        const double gap = collision::coercivity_constant(bgk(nu));
        for (double eps : {1.0, 0.1, 0.01}) {
            const HypoForm form(basis6(), kDefault, eps);
            for (const Vec3& k : {Vec3(1, 0, 0), Vec3(4, 3, 0)}) {
                const ComplexMatrix a = form.gram(k) * spectral::assemble_mode_operator(
                                                           bgk(nu), Wavevector{{int(k(0)), int(k(1)), 0}}, eps);
                double worst = 1e300;
                for (int s = 0; s < 200; ++s) {
                    const ComplexVector f = micro_part(random_vector(rng));
                    worst = std::min(worst, -f.dot(a * f).real() * eps * eps / f.squaredNorm());
                }
                EXPECT_GE(worst, gap * (1 - 2 * kDefault.d1));
                EXPECT_LE(worst, gap * (1 + 2 * kDefault.d1));
            }
        }
    }
}

TEST(Coercivity, TunedDeltasPassOnAReducedScan) {
    CoercivityOptions o;
    o.eps_list = {1.0, 0.1};
    o.k_radius = 4.0;
    o.samples = 40;
    const auto r = verify_coercivity(bgk(1.0), kDefault, o);
    EXPECT_TRUE(r.passed());
    EXPECT_GT(r.lambda3_exact, 0.0);
    EXPECT_EQ(r.ratios.size(), r.cells.size() * o.samples);
    for (const auto& c : r.cells) {
        EXPECT_GE(c.lambda_sampled, c.lambda_exact - 1e-10);
        EXPECT_GE(c.sampled_equivalence.lower, c.exact_equivalence.lower - 1e-12);
        EXPECT_LE(c.sampled_equivalence.upper, c.exact_equivalence.upper + 1e-12);
    }
}

TEST(Coercivity, SeededScanIsReproducible) {
    CoercivityOptions o;
    o.eps_list = {0.1};
    o.k_radius = 2.0;
    o.samples = 30;
    const auto a = verify_coercivity(bgk(1.0), kDefault, o);
    const auto b = verify_coercivity(bgk(1.0), kDefault, o);
    EXPECT_EQ(a.ratios, b.ratios);
    o.seed = 2;
    EXPECT_NE(verify_coercivity(bgk(1.0), kDefault, o).ratios, a.ratios);
}

TEST(Coercivity, DegradesMonotonicallyAsDeltasShrink) {
    CoercivityOptions o;
    o.eps_list = {1.0, 0.1};
    o.k_radius = 3.0;
    o.samples = 0;
    double previous = 1e300;
    for (double s : {0.1, 0.03, 0.01, 0.003}) {
        const auto r = verify_coercivity(bgk(1.0), Deltas{s, 0.1 * s, 0.01 * s}, o);
        EXPECT_GT(r.lambda3_exact, 0.0);
        EXPECT_LT(r.lambda3_exact, previous);
        previous = r.lambda3_exact;
    }
}

TEST(Coercivity, ScalesWithCollisionFrequencyOnMicroscopicData) {
    std::mt19937_64 rng(7);
    const HypoForm form(basis6(), kDefault, 0.01);
    const Wavevector k{{2, 1, 0}};
    const ComplexMatrix h = form.gram(k.as_real());
    const ComplexMatrix a1 = h * spectral::assemble_mode_operator(bgk(1.0), k, 0.01);
    const ComplexMatrix a2 = h * spectral::assemble_mode_operator(bgk(2.0), k, 0.01);
    for (int s = 0; s < 20; ++s) {
        const ComplexVector f = micro_part(random_vector(rng));
        const double r = f.dot(a2 * f).real() / f.dot(a1 * f).real();
        EXPECT_NEAR(r, 2.0, 0.1);
    }
}

TEST(Tuning, FindsFeasibleOrderedDeltas) {
    CoercivityOptions o;
    o.eps_list = {1.0, 0.1};
    o.k_radius = 3.0;
    o.samples = 20;
    const auto t = tune_deltas(bgk(1.0), o);
    EXPECT_EQ(t.candidates.size(), 4u);
    EXPECT_TRUE(t.best.ordered());
    EXPECT_TRUE(t.report.passed());
    for (const auto& c : t.candidates)
        if (c.feasible) EXPECT_LE(c.lambda3, t.report.lambda3_exact * (1 + 1e-12));
    EXPECT_THROW(tune_deltas(bgk(1.0), o, -1.0), NumericalError);
}

TEST(Flow, HypocoerciveNormIsNonincreasing) {
    std::mt19937_64 rng(8);
    for (double eps : {1.0, 0.1, 0.01}) {
        const HypoForm form(basis6(), kDefault, eps);
        for (const Wavevector& k : {Wavevector{{1, 0, 0}}, Wavevector{{2, 1, 0}}, Wavevector{{0, 0, 0}}}) {
            ComplexVector f = random_vector(rng);
            if (k.is_zero()) f = micro_part(f);
            const auto p = flow_norm_profile(bgk(1.0), form, k, f, 0.05 * eps * eps, 200);
            for (std::size_t n = 1; n < p.size(); ++n) EXPECT_LE(p[n], p[n - 1] * (1 + 1e-12));
            EXPECT_LT(p.back(), p.front());
        }
    }
}

TEST(SemigroupEstimates, MicroscopicDataAtZeroWavevector) {
    // U f = e^{-nu t / eps^2} f: ratio = 1 + eps^{-1} (eps^2 (1 - e^{-2 nu T / eps^2}) / (2 nu))^{1/2}.
    std::mt19937_64 rng(9);
    const ComplexVector f = micro_part(random_vector(rng));
    for (double eps : {0.2, 0.1, 0.05}) {
        const auto r = data_estimate(bgk(1.0), eps, {{Wavevector{}, f}}, 1.0);
        const double micro = std::sqrt((1 - std::exp(-2.0 / (eps * eps))) / 2.0);
        EXPECT_NEAR(r.linf / r.input, 1.0, 1e-12);
        EXPECT_LE(r.macro, 1e-12 * r.input);
        EXPECT_NEAR(r.micro / r.input, micro, 2e-3 * micro);
    }
}

TEST(SemigroupEstimates, KernelModeFollowsTheShearDecay) {
    // f = v_2 mu^{1/2} at k = e_1 is a divergence-free shear: P0 U f ~ e^{-nu_NS t} f.
    const ComplexVector f = unit_mode(0, 1, 0);
    const double macro = std::sqrt((1 - std::exp(-2.0)) / 2.0);
    std::vector<double> micro;
    for (double eps : {0.02, 0.01}) {
        const auto r = data_estimate(bgk(1.0), eps, {{Wavevector{{1, 0, 0}}, f}}, 0.0);
        EXPECT_NEAR(r.linf / r.input, 1.0, 1e-10);
        EXPECT_NEAR(r.macro / r.input, macro, 5 * eps * macro);
        micro.push_back(r.micro / r.input);
    }
    EXPECT_NEAR(micro[0] / micro[1], 1.0, 0.05);
    EXPECT_LT(micro[1], 1.0);
}

TEST(SemigroupEstimates, RatioIsStableAcrossEps) {
    std::mt19937_64 rng(10);
    hypo::ModeData data;
    for (const Wavevector& k : {Wavevector{{1, 0, 0}}, Wavevector{{1, 2, 0}}, Wavevector{{0, 0, 0}}}) {
        ComplexVector f = random_vector(rng);
        if (k.is_zero()) f = micro_part(f);
        data.push_back({k, f});
    }
    std::vector<double> ratios;
    for (double eps : {0.1, 0.05, 0.025}) ratios.push_back(data_estimate(bgk(1.0), eps, data, 1.0).ratio());
    for (double r : ratios) EXPECT_NEAR(r / ratios.front(), 1.0, 0.1);
}

TEST(SemigroupEstimates, MicroscopicSourceGainsAFactorEps) {
    // k = 0: h = eps^2 (1 - e^{-nu t / eps^2}) S / nu.
    std::mt19937_64 rng(11);
    const ComplexVector s = micro_part(random_vector(rng));
    const double T = 1.0;
    for (double eps : {0.2, 0.1, 0.05}) {
        const double a = 1.0 / (eps * eps);
        const double l2 = T - 2 * (1 - std::exp(-a * T)) / a + (1 - std::exp(-2 * a * T)) / (2 * a);
        const double expected = (eps * eps * (1 - std::exp(-a * T)) + eps * std::sqrt(l2)) / std::sqrt(T);
        const auto r = source_estimate(bgk(1.0), eps, {{Wavevector{}, s}}, 0.0);
        EXPECT_NEAR(r.ratio(), expected, 2e-3 * expected);
    }
    std::vector<double> scaled;
    for (double eps : {0.1, 0.05, 0.025}) {
        const auto r = source_estimate(bgk(1.0), eps, {{Wavevector{{1, 1, 0}}, s}}, 1.0);
        scaled.push_back(r.ratio() / eps);
    }
    for (double x : scaled) EXPECT_NEAR(x / scaled.front(), 1.0, 0.15);
}

TEST(SemigroupEstimates, RejectsInadmissibleInput) {
    const ComplexVector hydro = unit_mode(0, 0, 0);
    EXPECT_THROW(data_estimate(bgk(1.0), 0.1, {{Wavevector{}, hydro}}, 0.0), ConfigError);
    EXPECT_THROW(source_estimate(bgk(1.0), 0.1, {{Wavevector{{1, 0, 0}}, hydro}}, 0.0), ConfigError);
    EXPECT_THROW(data_estimate(bgk(1.0), 0.1, {}, 0.0), ConfigError);
    EXPECT_THROW(data_estimate(bgk(1.0), 2.0, {{Wavevector{{1, 0, 0}}, hydro}}, 0.0), ConfigError);
}
