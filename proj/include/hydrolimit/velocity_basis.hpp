#pragma once

// Tensor Hermite discretization of velocity space.
//
// A velocity function f(v) is stored through its coefficients c_n in the
// orthonormal family phi_n(v) = psi_n(v) mu^{1/2}(v), where psi_n is the product
// of normalized probabilists' Hermite polynomials He_{n_j}(v_j)/sqrt(n_j!) and
// mu is the standard Gaussian density on R^3. The total degree |n| is at most
// max_degree.

#include "hydrolimit/common.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

namespace hydrolimit::velocity {

struct MultiIndex {
    std::array<int, 3> n{0, 0, 0};
    [[nodiscard]] int degree() const { return n[0] + n[1] + n[2]; }
    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

/// 1D Gauss-Hermite rule for the standard normal density (weights sum to one).
struct GaussHermiteRule {
    RealVector nodes;
    RealVector weights;
};
GaussHermiteRule gauss_hermite(int order);

/// Values of the normalized Hermite polynomials He_n(x)/sqrt(n!) for n = 0..max_n.
RealVector hermite_values(double x, int max_n);

template <class T>
struct HydroMomentsT {
    T rho{};
    Eigen::Matrix<T, 3, 1> u = Eigen::Matrix<T, 3, 1>::Zero();
    T theta{};
};
using HydroMoments = HydroMomentsT<double>;
using ComplexHydroMoments = HydroMomentsT<Complex>;

class VelocityBasis {
public:
    /// Smallest admissible truncation: Ker L plus the degree 3-4 flux functions.
    static constexpr int kMinDegree = 4;

    /// Builds the basis and its tensor quadrature of order 2*max_degree+2.
    /// Throws ConfigError for max_degree < 4 and NumericalError when the
    /// quadrature Gram matrix deviates from identity by more than 1e-8.
    static VelocityBasis build(int max_degree);

    [[nodiscard]] int max_degree() const { return max_degree_; }
    [[nodiscard]] std::size_t dim() const { return indices_.size(); }
    [[nodiscard]] const std::vector<MultiIndex>& indices() const { return indices_; }
    [[nodiscard]] std::optional<std::size_t> index_of(const MultiIndex& m) const;
    [[nodiscard]] std::size_t index_or_throw(const MultiIndex& m) const;

    // Quadrature: nodes are columns of a 3 x Q matrix, weights sum to one
    // (expectations under mu), values(n, q) = psi_n(v_q).
    [[nodiscard]] const RealMatrix& nodes() const { return nodes_; }
    [[nodiscard]] const RealVector& weights() const { return weights_; }
    [[nodiscard]] const RealMatrix& values() const { return values_; }
    [[nodiscard]] double gram_deviation() const { return gram_deviation_; }

    /// Coefficients of p(v) mu^{1/2}(v); exact whenever deg p <= max_degree.
    [[nodiscard]] RealVector project(const std::function<double(const Vec3&)>& p) const;

    /// Row vector r with r.dot(c) = int f(v) p(v) mu^{1/2}(v) dv for f with coefficients c.
    [[nodiscard]] RealVector moment_row(const std::function<double(const Vec3&)>& p) const;

    /// Symmetric matrix of multiplication by v_axis, truncated back to max_degree.
    [[nodiscard]] const RealMatrix& multiply_by_v(int axis) const { return v_mult_[axis]; }

    /// Derivative d/dv_axis acting on the polynomial factor psi (lowers the degree).
    [[nodiscard]] const RealMatrix& poly_derivative(int axis) const { return poly_deriv_[axis]; }

    /// Values of d psi_n / dv_axis at the quadrature nodes (dim x Q).
    [[nodiscard]] const RealMatrix& grad_values(int axis) const { return grad_values_[axis]; }

    /// Rotation generator v_b d_c - v_c d_b about coordinate axis a (skew-symmetric, exact).
    [[nodiscard]] const RealMatrix& angular_momentum(int axis) const { return ang_mom_[axis]; }

    /// Orthonormal basis of Ker L: mu^{1/2}, v_j mu^{1/2}, (|v|^2-3)/sqrt(6) mu^{1/2} (dim x 5).
    [[nodiscard]] const RealMatrix& kernel_basis() const { return kernel_basis_; }

    /// Orthogonal projector onto Ker L.
    [[nodiscard]] const RealMatrix& p0_matrix() const { return p0_; }

    /// Rows of the moment functionals rho, u_j, theta (5 x dim, in that order).
    [[nodiscard]] const RealMatrix& hydro_rows() const { return hydro_rows_; }
    /// Rows of M_j[f] = int f v_j (|v|^2-5) mu^{1/2} (3 x dim).
    [[nodiscard]] const RealMatrix& heat_flux_rows() const { return m_rows_; }
    /// Rows of Theta_ij[f] = int f (v_i v_j - delta_ij) mu^{1/2}, row index 3*i+j (9 x dim).
    [[nodiscard]] const RealMatrix& stress_rows() const { return theta_rows_; }

    /// Gram matrix G with ||f||^2_{H^{s,*}_v} = c^H G c for s in {0, 1} (cached per (s, gamma)).
    [[nodiscard]] const RealMatrix& hstar_gram(int s, double gamma) const;

    /// Coefficient vector of the degree-2 kinetic profile (rho + u.v + theta(|v|^2-3)/2) mu^{1/2}.
    [[nodiscard]] ComplexVector hydro_profile(const Complex& rho, const ComplexVec3& u,
                                              const Complex& theta) const;

private:
    VelocityBasis() = default;

    int max_degree_ = 0;
    std::vector<MultiIndex> indices_;
    std::map<std::array<int, 3>, std::size_t> lookup_;
    RealMatrix nodes_;
    RealVector weights_;
    RealMatrix values_;
    double gram_deviation_ = 0.0;
    std::array<RealMatrix, 3> v_mult_;
    std::array<RealMatrix, 3> poly_deriv_;
    std::array<RealMatrix, 3> ang_mom_;
    std::vector<RealMatrix> grad_values_;
    RealMatrix kernel_basis_;
    RealMatrix p0_;
    RealMatrix hydro_rows_;
    RealMatrix m_rows_;
    RealMatrix theta_rows_;

    struct GramCache {
        std::mutex mutex;
        std::map<std::pair<int, double>, RealMatrix> grams;
    };
    std::shared_ptr<GramCache> gram_cache_ = std::make_shared<GramCache>();
};

// ---- operations on velocity coefficients --------------------------------

template <class Derived>
auto moments(const VelocityBasis& basis, const Eigen::MatrixBase<Derived>& f)
    -> HydroMomentsT<typename Derived::Scalar> {
    using T = typename Derived::Scalar;
    if (static_cast<std::size_t>(f.size()) != basis.dim()) {
        throw ConfigError("moments: coefficient length does not match the basis");
    }
    const Eigen::Matrix<T, Eigen::Dynamic, 1> m = basis.hydro_rows().cast<T>() * f;
    HydroMomentsT<T> out;
    out.rho = m(0);
    out.u = m.template segment<3>(1);
    out.theta = m(4);
    return out;
}

template <class Derived>
auto project_p0(const VelocityBasis& basis, const Eigen::MatrixBase<Derived>& f)
    -> Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> {
    using T = typename Derived::Scalar;
    return basis.p0_matrix().cast<T>() * f;
}

template <class Derived>
auto multiply_by_v(const VelocityBasis& basis, const Eigen::MatrixBase<Derived>& f, int axis)
    -> Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> {
    using T = typename Derived::Scalar;
    return basis.multiply_by_v(axis).cast<T>() * f;
}

/// Heat-flux moment M[f] = int f v (|v|^2 - 5) mu^{1/2}.
template <class Derived>
auto moment_M(const VelocityBasis& basis, const Eigen::MatrixBase<Derived>& f)
    -> Eigen::Matrix<typename Derived::Scalar, 3, 1> {
    using T = typename Derived::Scalar;
    return basis.heat_flux_rows().cast<T>() * f;
}

/// Stress moment Theta[f] = int f (v (x) v - Id) mu^{1/2} (symmetric 3x3).
template <class Derived>
auto moment_Theta(const VelocityBasis& basis, const Eigen::MatrixBase<Derived>& f)
    -> Eigen::Matrix<typename Derived::Scalar, 3, 3> {
    using T = typename Derived::Scalar;
    const Eigen::Matrix<T, 9, 1> flat = basis.stress_rows().cast<T>() * f;
    Eigen::Matrix<T, 3, 3> out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out(i, j) = flat(3 * i + j);
    return out;
}

/// ||f||_{H^{s,*}_v} for s in {0, 1}. s = 0 is the weighted L^2 norm ||<v>^{gamma/2} f||;
/// s = 1 is the anisotropic weighted H^1 norm. Integrands are evaluated on the
/// basis quadrature, exact for even integer gamma >= 0 and approximate otherwise.
double weighted_norm(const VelocityBasis& basis, const ComplexVector& f, int s, double gamma);
double weighted_norm(const VelocityBasis& basis, const RealVector& f, int s, double gamma);

struct SurrogateNorms {
    double lower = 0.0;
    double upper = 0.0;
};

/// Equivalence slack between the two sides of the fractional sandwich.
inline constexpr double kSurrogateSlack = 2.0;

/// Lower/upper surrogates of the fractional H^{s,*}_v norm for s in (0, 1):
///   lower = ||<v>^{gamma/2+s} f|| + ||<v>^{gamma/2} f||_{H^s},
///   upper = ||<v>^{gamma/2+s} f||_{H^s},
/// with ||g||_{H^s} realized as ||g||^{1-s} ||g||_{H^1}^s.
SurrogateNorms surrogate_norms(const VelocityBasis& basis, const ComplexVector& f, double s,
                               double gamma);

/// Fractional H^s_v norm of <v>^a f by interpolation (s in [0, 1]).
double weighted_fractional_sobolev(const VelocityBasis& basis, const ComplexVector& f, double a,
                                   double s);

}  // namespace hydrolimit::velocity
