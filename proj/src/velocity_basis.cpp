#include "hydrolimit/velocity_basis.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace hydrolimit::velocity {

GaussHermiteRule gauss_hermite(int order) {
    if (order < 1) throw ConfigError("gauss_hermite: order must be positive");
    // Golub-Welsch on the Jacobi matrix of the normalized He_n recurrence.
    RealMatrix jacobi = RealMatrix::Zero(order, order);
    for (int i = 1; i < order; ++i) {
        jacobi(i, i - 1) = std::sqrt(double(i));
        jacobi(i - 1, i) = std::sqrt(double(i));
    }
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(jacobi);
    GaussHermiteRule rule;
    rule.nodes = solver.eigenvalues();
    rule.weights = solver.eigenvectors().row(0).transpose().array().square();
    // Symmetrize to remove the last bits of eigen-solver asymmetry.
    for (int i = 0; i < order / 2; ++i) {
        const int j = order - 1 - i;
        const double x = 0.5 * (rule.nodes(j) - rule.nodes(i));
        const double w = 0.5 * (rule.weights(i) + rule.weights(j));
        rule.nodes(i) = -x;
        rule.nodes(j) = x;
        rule.weights(i) = rule.weights(j) = w;
    }
    if (order % 2 == 1) rule.nodes(order / 2) = 0.0;
    rule.weights /= rule.weights.sum();
    return rule;
}

RealVector hermite_values(double x, int max_n) {
    RealVector h(max_n + 1);
    h(0) = 1.0;
    if (max_n >= 1) h(1) = x;
    for (int n = 1; n < max_n; ++n) {
        h(n + 1) = (x * h(n) - std::sqrt(double(n)) * h(n - 1)) / std::sqrt(double(n + 1));
    }
    return h;
}

VelocityBasis VelocityBasis::build(int max_degree) {
    if (max_degree < kMinDegree) {
        throw ConfigError("build_basis: max_degree must be at least 4 (got " +
                          std::to_string(max_degree) + ")");
    }
    VelocityBasis b;
    b.max_degree_ = max_degree;
    // Graded ordering: by total degree, then lexicographically descending in n1, n2.
    for (int deg = 0; deg <= max_degree; ++deg) {
        for (int n1 = deg; n1 >= 0; --n1) {
            for (int n2 = deg - n1; n2 >= 0; --n2) {
                const int n3 = deg - n1 - n2;
                b.lookup_[{n1, n2, n3}] = b.indices_.size();
                b.indices_.push_back({{n1, n2, n3}});
            }
        }
    }
    const auto dim = static_cast<Eigen::Index>(b.indices_.size());

    const int q1 = 2 * max_degree + 2;
    const GaussHermiteRule rule = gauss_hermite(q1);
    const Eigen::Index nq = Eigen::Index(q1) * q1 * q1;
    b.nodes_.resize(3, nq);
    b.weights_.resize(nq);
    RealMatrix h1d(max_degree + 1, q1);
    for (int i = 0; i < q1; ++i) h1d.col(i) = hermite_values(rule.nodes(i), max_degree);
    b.values_.resize(dim, nq);
    Eigen::Index q = 0;
    for (int i = 0; i < q1; ++i) {
        for (int j = 0; j < q1; ++j) {
            for (int l = 0; l < q1; ++l, ++q) {
                b.nodes_.col(q) << rule.nodes(i), rule.nodes(j), rule.nodes(l);
                b.weights_(q) = rule.weights(i) * rule.weights(j) * rule.weights(l);
                for (Eigen::Index n = 0; n < dim; ++n) {
                    const auto& m = b.indices_[n].n;
                    b.values_(n, q) = h1d(m[0], i) * h1d(m[1], j) * h1d(m[2], l);
                }
            }
        }
    }
    const RealMatrix gram = b.values_ * b.weights_.asDiagonal() * b.values_.transpose();
    b.gram_deviation_ = (gram - RealMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff();
    if (b.gram_deviation_ > 1e-8) {
        std::ostringstream msg;
        msg << "build_basis: quadrature Gram deviation " << b.gram_deviation_ << " exceeds 1e-8";
        throw NumericalError(msg.str());
    }

    for (int axis = 0; axis < 3; ++axis) {
        RealMatrix v = RealMatrix::Zero(dim, dim);
        RealMatrix d = RealMatrix::Zero(dim, dim);
        for (Eigen::Index n = 0; n < dim; ++n) {
            const auto& m = b.indices_[n].n;
            auto up = m;
            ++up[axis];
            if (auto it = b.lookup_.find(up); it != b.lookup_.end()) {
                const double c = std::sqrt(double(m[axis] + 1));
                v(Eigen::Index(it->second), n) = c;
                v(n, Eigen::Index(it->second)) = c;
            }
            if (m[axis] > 0) {
                auto down = m;
                --down[axis];
                d(Eigen::Index(b.lookup_.at(down)), n) = std::sqrt(double(m[axis]));
            }
        }
        b.v_mult_[axis] = std::move(v);
        b.poly_deriv_[axis] = std::move(d);
    }
    for (int a = 0; a < 3; ++a) {
        const int i = (a + 1) % 3;
        const int j = (a + 2) % 3;
        b.ang_mom_[a] = b.v_mult_[i] * b.poly_deriv_[j] - b.v_mult_[j] * b.poly_deriv_[i];
    }
    b.grad_values_.resize(3);
    for (int axis = 0; axis < 3; ++axis) {
        b.grad_values_[axis] = b.poly_deriv_[axis].transpose() * b.values_;
    }

    b.kernel_basis_ = RealMatrix::Zero(dim, 5);
    b.kernel_basis_(0, 0) = 1.0;
    for (int axis = 0; axis < 3; ++axis) {
        std::array<int, 3> e{0, 0, 0};
        e[axis] = 1;
        b.kernel_basis_(Eigen::Index(b.lookup_.at(e)), axis + 1) = 1.0;
        e[axis] = 2;
        b.kernel_basis_(Eigen::Index(b.lookup_.at(e)), 4) = 1.0 / std::sqrt(3.0);
    }
    b.p0_ = b.kernel_basis_ * b.kernel_basis_.transpose();

    b.hydro_rows_.resize(5, dim);
    b.hydro_rows_.row(0) = b.moment_row([](const Vec3&) { return 1.0; }).transpose();
    for (int axis = 0; axis < 3; ++axis) {
        b.hydro_rows_.row(axis + 1) =
            b.moment_row([axis](const Vec3& v) { return v(axis); }).transpose();
    }
    b.hydro_rows_.row(4) =
        b.moment_row([](const Vec3& v) { return (v.squaredNorm() - 3.0) / 3.0; }).transpose();
    b.m_rows_.resize(3, dim);
    for (int axis = 0; axis < 3; ++axis) {
        b.m_rows_.row(axis) = b.moment_row([axis](const Vec3& v) {
                                   return v(axis) * (v.squaredNorm() - 5.0);
                               }).transpose();
    }
    b.theta_rows_.resize(9, dim);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            b.theta_rows_.row(3 * i + j) = b.moment_row([i, j](const Vec3& v) {
                                                return v(i) * v(j) - (i == j ? 1.0 : 0.0);
                                            }).transpose();
        }
    }
    return b;
}

std::optional<std::size_t> VelocityBasis::index_of(const MultiIndex& m) const {
    if (auto it = lookup_.find(m.n); it != lookup_.end()) return it->second;
    return std::nullopt;
}

std::size_t VelocityBasis::index_or_throw(const MultiIndex& m) const {
    if (auto idx = index_of(m)) return *idx;
    throw ConfigError("multi-index outside the basis");
}

RealVector VelocityBasis::project(const std::function<double(const Vec3&)>& p) const {
    RealVector samples(nodes_.cols());
    for (Eigen::Index q = 0; q < nodes_.cols(); ++q) samples(q) = weights_(q) * p(nodes_.col(q));
    return values_ * samples;
}

RealVector VelocityBasis::moment_row(const std::function<double(const Vec3&)>& p) const {
    // int psi_n mu^{1/2} p mu^{1/2} dv = E_mu[psi_n p], the same quadrature as project().
    return project(p);
}

const RealMatrix& VelocityBasis::hstar_gram(int s, double gamma) const {
    if (s != 0 && s != 1) throw ConfigError("hstar_gram: s must be 0 or 1");
    std::lock_guard lock(gram_cache_->mutex);
    auto key = std::make_pair(s, gamma);
    if (auto it = gram_cache_->grams.find(key); it != gram_cache_->grams.end()) return it->second;

    const Eigen::Index nq = nodes_.cols();
    RealVector w_gamma(nq), w_gamma2(nq);
    for (Eigen::Index q = 0; q < nq; ++q) {
        const double r = nodes_.col(q).norm();
        w_gamma(q) = weights_(q) * std::pow(bracket(r), gamma);
        w_gamma2(q) = weights_(q) * std::pow(bracket(r), gamma + 2.0);
    }
    RealMatrix gram;
    if (s == 0) {
        gram = values_ * w_gamma.asDiagonal() * values_.transpose();
    } else {
        // Gradient of psi mu^{1/2} divided by mu^{1/2}: grad psi - psi v / 2.
        std::array<RealMatrix, 3> c;
        for (int j = 0; j < 3; ++j) {
            c[j] = grad_values_[j] - values_ * (0.5 * nodes_.row(j).transpose()).asDiagonal();
        }
        RealMatrix radial = RealMatrix::Zero(values_.rows(), nq);
        for (Eigen::Index q = 0; q < nq; ++q) {
            const double r = nodes_.col(q).norm();
            if (r == 0.0) continue;
            for (int j = 0; j < 3; ++j) radial.col(q) += c[j].col(q) * (nodes_(j, q) / r);
        }
        gram = values_ * w_gamma2.asDiagonal() * values_.transpose();
        for (int j = 0; j < 3; ++j) gram += c[j] * w_gamma2.asDiagonal() * c[j].transpose();
        gram += radial * (w_gamma - w_gamma2).asDiagonal() * radial.transpose();
        gram = 0.5 * (gram + gram.transpose()).eval();
    }
    return gram_cache_->grams.emplace(key, std::move(gram)).first->second;
}

ComplexVector VelocityBasis::hydro_profile(const Complex& rho, const ComplexVec3& u,
                                           const Complex& theta) const {
    ComplexVector out = ComplexVector::Zero(Eigen::Index(dim()));
    out(0) = rho;
    for (int axis = 0; axis < 3; ++axis) {
        std::array<int, 3> e{0, 0, 0};
        e[axis] = 1;
        out(Eigen::Index(lookup_.at(e))) = u(axis);
        e[axis] = 2;
        // (|v|^2 - 3)/2 = sum_j He_2(v_j)/2 = sum_j psi_{2e_j}/sqrt(2).
        out(Eigen::Index(lookup_.at(e))) = theta / std::sqrt(2.0);
    }
    return out;
}

double weighted_norm(const VelocityBasis& basis, const ComplexVector& f, int s, double gamma) {
    if (s != 0 && s != 1) throw ConfigError("weighted_norm: s must be 0 or 1, use surrogate_norms");
    if (static_cast<std::size_t>(f.size()) != basis.dim()) {
        throw ConfigError("weighted_norm: coefficient length does not match the basis");
    }
    if (s == 0 && gamma == 0.0) return f.norm();
    const RealMatrix& g = basis.hstar_gram(s, gamma);
    const double re = (f.real().dot(g * f.real())) + (f.imag().dot(g * f.imag()));
    return std::sqrt(std::max(re, 0.0));
}

double weighted_norm(const VelocityBasis& basis, const RealVector& f, int s, double gamma) {
    return weighted_norm(basis, ComplexVector(f.cast<Complex>()), s, gamma);
}

namespace {

struct WeightedPieces {
    double l2 = 0.0;
    double h1 = 0.0;
};

// ||<v>^a f||_{L^2} and ||<v>^a f||_{H^1} by quadrature.
WeightedPieces weighted_pieces(const VelocityBasis& basis, const ComplexVector& f, double a) {
    const RealMatrix& nodes = basis.nodes();
    const ComplexVector p = basis.values().transpose().cast<Complex>() * f;
    std::array<ComplexVector, 3> grad;
    for (int j = 0; j < 3; ++j) {
        grad[j] = basis.grad_values(j).transpose().cast<Complex>() * f;
    }
    double l2 = 0.0, dsq = 0.0;
    for (Eigen::Index q = 0; q < nodes.cols(); ++q) {
        const Vec3 v = nodes.col(q);
        const double br = bracket(v.norm());
        const double wa = std::pow(br, a);
        const double wa2 = a * std::pow(br, a - 2.0);
        l2 += basis.weights()(q) * wa * wa * std::norm(p(q));
        for (int j = 0; j < 3; ++j) {
            const Complex g = wa * (grad[j](q) - 0.5 * v(j) * p(q)) + wa2 * v(j) * p(q);
            dsq += basis.weights()(q) * std::norm(g);
        }
    }
    return {std::sqrt(l2), std::sqrt(l2 + dsq)};
}

double interpolate(const WeightedPieces& w, double s) {
    if (w.l2 == 0.0) return 0.0;
    return std::pow(w.l2, 1.0 - s) * std::pow(w.h1, s);
}

}  // namespace

double weighted_fractional_sobolev(const VelocityBasis& basis, const ComplexVector& f, double a,
                                   double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("weighted_fractional_sobolev: s outside [0,1]");
    return interpolate(weighted_pieces(basis, f, a), s);
}

SurrogateNorms surrogate_norms(const VelocityBasis& basis, const ComplexVector& f, double s,
                               double gamma) {
    if (!(s > 0.0 && s < 1.0)) throw ConfigError("surrogate_norms: s must lie in (0,1)");
    const WeightedPieces shifted = weighted_pieces(basis, f, gamma / 2.0 + s);
    const WeightedPieces plain = weighted_pieces(basis, f, gamma / 2.0);
    SurrogateNorms out;
    out.lower = shifted.l2 + interpolate(plain, s);
    out.upper = interpolate(shifted, s);
    return out;
}

}  // namespace hydrolimit::velocity
