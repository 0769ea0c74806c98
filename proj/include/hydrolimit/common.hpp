#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace hydrolimit {

using Complex = std::complex<double>;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using ComplexVec3 = Eigen::Vector3cd;
using ComplexMat3 = Eigen::Matrix3cd;

inline constexpr Complex kI{0.0, 1.0};

/// Invalid parameters or inputs (violated preconditions).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not certify its own postcondition.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Integer wavevector on the torus; unused components are zero in 2D runs.
struct Wavevector {
    std::array<int, 3> k{0, 0, 0};

    [[nodiscard]] double norm() const;
    [[nodiscard]] double norm_squared() const;
    [[nodiscard]] Vec3 as_real() const { return {double(k[0]), double(k[1]), double(k[2])}; }
    [[nodiscard]] bool is_zero() const { return k[0] == 0 && k[1] == 0 && k[2] == 0; }
    [[nodiscard]] Wavevector operator-() const { return {{-k[0], -k[1], -k[2]}}; }
    friend bool operator==(const Wavevector&, const Wavevector&) = default;
};

/// Japanese bracket <x> = sqrt(1 + |x|^2).
inline double bracket(double r) { return std::sqrt(1.0 + r * r); }

/// Runs body(i) for i in [0, n) on up to HYDROLIMIT_THREADS worker threads.
/// Each index must be independent; results are merged by index, so output is deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Worker count from the HYDROLIMIT_THREADS environment variable (default 1).
std::size_t thread_count();

}  // namespace hydrolimit
