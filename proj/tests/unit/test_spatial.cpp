#include "hydrolimit/collision.hpp"
#include "hydrolimit/spatial.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hydrolimit;

namespace {

ComplexMatrix random_modes(std::size_t n, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    ComplexMatrix m(Eigen::Index(n), cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < Eigen::Index(n); ++i) m(i, j) = {g(rng), g(rng)};
    return m;
}

}  // namespace

TEST(SpatialGrid, LayoutAndNegation) {
    SpatialGrid g2(2, 3);
    EXPECT_EQ(g2.size(), 49u);
    EXPECT_TRUE(g2.mode(g2.zero_index()).is_zero());
    for (std::size_t i = 0; i < g2.size(); ++i) {
        EXPECT_EQ(g2.mode(g2.negated(i)), -g2.mode(i));
        EXPECT_EQ(*g2.index_of(g2.mode(i)), i);
        EXPECT_EQ(g2.mode(i).k[2], 0);
    }
    EXPECT_FALSE(g2.index_of({{4, 0, 0}}).has_value());
    EXPECT_FALSE(g2.index_of({{0, 0, 1}}).has_value());
    EXPECT_EQ(SpatialGrid(3, 2).size(), 125u);
    EXPECT_THROW(SpatialGrid(1, 2), ConfigError);
}

TEST(Convolver, SingleModesMultiply) {
    auto grid = std::make_shared<SpatialGrid>(2, 4);
    Convolver conv(grid, ConvolutionPath::Direct);
    ComplexMatrix a = ComplexMatrix::Zero(Eigen::Index(grid->size()), 1);
    ComplexMatrix b = a;
    a(Eigen::Index(*grid->index_of({{1, 2, 0}})), 0) = {2.0, 1.0};
    b(Eigen::Index(*grid->index_of({{-3, 1, 0}})), 0) = {0.0, 3.0};
    const ComplexMatrix out = conv.products(a, b, {{0, 0}});
    const auto target = Eigen::Index(*grid->index_of({{-2, 3, 0}}));
    EXPECT_NEAR(std::abs(out(target, 0) - Complex(2.0, 1.0) * Complex(0.0, 3.0)), 0.0, 1e-15);
    EXPECT_NEAR(out.norm(), std::abs(out(target, 0)), 1e-15);
    // Products leaving the grid are truncated.
    b.setZero();
    b(Eigen::Index(*grid->index_of({{4, 0, 0}})), 0) = 1.0;
    EXPECT_EQ(conv.products(a, b, {{0, 0}}).norm(), 0.0);
}

TEST(Convolver, DirectMatchesBruteForce) {
    auto grid = std::make_shared<SpatialGrid>(2, 3);
    Convolver conv(grid, ConvolutionPath::Direct);
    std::mt19937_64 rng(1);
    const ComplexMatrix a = random_modes(grid->size(), 2, rng);
    const ComplexMatrix b = random_modes(grid->size(), 2, rng);
    const ComplexMatrix out = conv.products(a, b, {{0, 1}, {1, 0}});
    for (std::size_t i = 0; i < grid->size(); ++i) {
        Complex expected{};
        for (std::size_t j = 0; j < grid->size(); ++j) {
            const Wavevector& k = grid->mode(i);
            const Wavevector& kp = grid->mode(j);
            auto d = grid->index_of({{k.k[0] - kp.k[0], k.k[1] - kp.k[1], 0}});
            if (d) expected += a(Eigen::Index(*d), 0) * b(Eigen::Index(j), 1);
        }
        EXPECT_NEAR(std::abs(out(Eigen::Index(i), 0) - expected), 0.0, 1e-12);
    }
}

TEST(Convolver, DirectAndFftAgreeAtK8) {
    for (int d : {2, 3}) {
        auto grid = std::make_shared<SpatialGrid>(d, d == 2 ? 8 : 4);
        Convolver direct(grid, ConvolutionPath::Direct);
        Convolver fft(grid, ConvolutionPath::Fft);
        EXPECT_EQ(fft.path(), ConvolutionPath::Fft);
        std::mt19937_64 rng(2);
        const ComplexMatrix a = random_modes(grid->size(), 3, rng);
        const ComplexMatrix b = random_modes(grid->size(), 2, rng);
        const std::vector<std::pair<int, int>> pairs{{0, 0}, {1, 1}, {2, 0}, {2, 1}};
        const ComplexMatrix x = direct.products(a, b, pairs);
        const ComplexMatrix y = fft.products(a, b, pairs);
        EXPECT_LE((x - y).cwiseAbs().maxCoeff(), 1e-10 * x.cwiseAbs().maxCoeff());
    }
}

TEST(Convolver, AutoPathSelection) {
    EXPECT_EQ(Convolver(std::make_shared<SpatialGrid>(2, 5)).path(), ConvolutionPath::Direct);
    EXPECT_EQ(Convolver(std::make_shared<SpatialGrid>(3, 2)).path(), ConvolutionPath::Direct);
    EXPECT_EQ(Convolver(std::make_shared<SpatialGrid>(2, 6)).path(), ConvolutionPath::Fft);
    EXPECT_EQ(Convolver(std::make_shared<SpatialGrid>(2, 16)).path(), ConvolutionPath::Fft);
}

TEST(SpectralField, NormsAndReality) {
    auto grid = std::make_shared<SpatialGrid>(2, 2);
    SpectralField f(grid, 3);
    const auto i = Eigen::Index(*grid->index_of({{1, 1, 0}}));
    f.coeffs(0, i) = {3.0, 4.0};
    EXPECT_NEAR(f.hm_norm(0.0), 5.0, 1e-14);
    EXPECT_NEAR(f.hm_norm(1.0), 5.0 * std::sqrt(3.0), 1e-13);
    EXPECT_NEAR(f.reality_defect(), 5.0, 1e-14);
    f.symmetrize_reality();
    EXPECT_NEAR(f.reality_defect(), 0.0, 1e-15);
}

TEST(LatticeSymmetry, GroupSizesAndTransportCovariance) {
    EXPECT_EQ(lattice_symmetries(2).size(), 8u);
    EXPECT_EQ(lattice_symmetries(3).size(), 48u);
    const auto basis = velocity::VelocityBasis::build(4);
    const auto bgk = collision::bgk_backend(std::make_shared<const velocity::VelocityBasis>(basis), 1.0);
    for (const auto& g : lattice_symmetries(3)) {
        const RealMatrix r = velocity_representation(basis, g);
        EXPECT_LE((r * r.transpose() - RealMatrix::Identity(35, 35)).norm(), 1e-12);
        EXPECT_LE((r * bgk.L() * r.transpose() - bgk.L()).norm(), 1e-12);
        const Wavevector k{{1, -2, 3}};
        const Wavevector gk = g.apply(k);
        RealMatrix vk = RealMatrix::Zero(35, 35), vgk = vk;
        for (int j = 0; j < 3; ++j) {
            vk += k.k[j] * basis.multiply_by_v(j);
            vgk += gk.k[j] * basis.multiply_by_v(j);
        }
        EXPECT_LE((r * vk * r.transpose() - vgk).norm(), 1e-12);
    }
}

TEST(LatticeSymmetry, ReductionCoversGrid) {
    const auto basis = velocity::VelocityBasis::build(4);
    SpatialGrid grid(2, 4);
    const SymmetryReduction red = reduce_by_symmetry(grid, basis);
    EXPECT_EQ(red.canonical_modes.size(), 15u);  // 0 <= k2 <= k1 <= 4
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& g = red.group[red.element[i]];
        const Wavevector canon = grid.mode(red.canonical_modes[red.representative[i]]);
        EXPECT_EQ(g.apply(canon), grid.mode(i));
    }
}
