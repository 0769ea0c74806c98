#pragma once

// Fixed point of x = x0 + L x + B(x, x) in the ball of radius (1 - ||L||) / (2 ||B||).

#include "hydrolimit/common.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace hydrolimit::analysis {

/// X needs +, - and a norm; Eigen vectors qualify.
template <class X>
struct PicardProblem {
    X x0;
    std::function<X(const X&)> linear;
    std::function<X(const X&, const X&)> bilinear;
    std::function<double(const X&)> norm;
    double l_norm = 0.0;
    double b_norm = 0.0;

    /// (1 - ||L||)^2 / (4 ||B||); infinite when B vanishes.
    [[nodiscard]] double data_bound() const {
        if (b_norm <= 0.0) return std::numeric_limits<double>::infinity();
        return (1.0 - l_norm) * (1.0 - l_norm) / (4.0 * b_norm);
    }
    [[nodiscard]] double ball_radius() const {
        if (b_norm <= 0.0) return std::numeric_limits<double>::infinity();
        return (1.0 - l_norm) / (2.0 * b_norm);
    }
    /// ||x|| <= C0 ||x0|| for the solution inside the ball.
    [[nodiscard]] double c0() const { return 2.0 / (1.0 - l_norm); }

    /// Throws ConfigError when ||L|| >= 1 or ||x0|| is not below the data bound.
    void check_admissible() const {
        if (!(l_norm >= 0.0 && l_norm < 1.0))
            throw ConfigError("picard: the linear part must have norm < 1");
        if (b_norm < 0.0) throw ConfigError("picard: negative bilinear norm");
        if (!(norm(x0) < data_bound()))
            throw ConfigError("picard: data norm is not below (1 - |L|)^2 / (4 |B|)");
    }
};

template <class X>
struct PicardResult {
    X x;
    std::size_t iterations = 0;
    double last_increment = 0.0;
    double max_increment_ratio = 0.0;
    double solution_norm = 0.0;
    double data_norm = 0.0;
    double radius = 0.0;
    double c0 = 0.0;

    [[nodiscard]] bool inside_ball() const { return solution_norm <= radius; }
    [[nodiscard]] bool within_c0() const { return solution_norm <= c0 * data_norm * (1 + 1e-12); }
};

struct PicardOptions {
    double tol = 1e-12;
    std::size_t max_iterations = 10000;
    /// Increment ratios are only policed after this many iterations.
    std::size_t warmup = 2;
};

/// Iterates x_{j+1} = x0 + L x_j + B(x_j, x_j) from `start` until the increment
/// drops below tol (absolute, or relative to ||x0||). Throws NumericalError when two
/// successive increments fail to contract or the iteration does not converge.
template <class X>
PicardResult<X> picard_solve(const PicardProblem<X>& p, const X& start,
                             const PicardOptions& opt = {}) {
    p.check_admissible();
    PicardResult<X> r;
    r.data_norm = p.norm(p.x0);
    r.radius = p.ball_radius();
    r.c0 = p.c0();
    const double scale = std::max(1.0, r.data_norm);

    X x = start;
    double previous = -1.0;
    for (std::size_t j = 1; j <= opt.max_iterations; ++j) {
        X next = p.x0 + p.linear(x) + p.bilinear(x, x);
        const double inc = p.norm(next - x);
        x = std::move(next);
        r.iterations = j;
        r.last_increment = inc;
        if (inc <= opt.tol * scale) {
            r.x = std::move(x);
            r.solution_norm = p.norm(r.x);
            return r;
        }
        if (previous > 0.0) {
            const double ratio = inc / previous;
            if (j > opt.warmup) {
                r.max_increment_ratio = std::max(r.max_increment_ratio, ratio);
                if (ratio >= 1.0) throw NumericalError("picard: increments stopped contracting");
            }
        }
        previous = inc;
    }
    throw NumericalError("picard: no convergence within the iteration budget");
}

template <class X>
PicardResult<X> picard_solve(const PicardProblem<X>& p, const PicardOptions& opt = {}) {
    return picard_solve(p, X(p.x0 - p.x0), opt);
}

/// Randomized power-iteration estimate of sup ||L x|| / ||x||, times `safety`.
/// `sample` draws a random element from the generator.
template <class X>
double estimate_operator_norm(const std::function<X(const X&)>& op,
                              const std::function<double(const X&)>& norm,
                              const std::function<X(std::mt19937_64&)>& sample,
                              std::uint64_t seed, int restarts = 3, int iterations = 8,
                              double safety = 1.2) {
    std::mt19937_64 rng(seed);
    double best = 0.0;
    for (int r = 0; r < restarts; ++r) {
        X x = sample(rng);
        double nx = norm(x);
        if (nx == 0.0) continue;
        for (int it = 0; it < iterations; ++it) {
            X y = op(x);
            const double ny = norm(y);
            best = std::max(best, ny / nx);
            if (ny == 0.0) break;
            x = y;
            nx = ny;
        }
    }
    return safety * best;
}

/// Same for a bilinear map, iterating x <- B(x, x) / ||B(x, x)|| and mixing
/// in independent second arguments.
template <class X>
double estimate_bilinear_norm(const std::function<X(const X&, const X&)>& op,
                              const std::function<double(const X&)>& norm,
                              const std::function<X(std::mt19937_64&)>& sample,
                              std::uint64_t seed, int restarts = 3, int iterations = 6,
                              double safety = 1.2) {
    std::mt19937_64 rng(seed);
    double best = 0.0;
    for (int r = 0; r < restarts; ++r) {
        X x = sample(rng);
        X y = sample(rng);
        for (int it = 0; it < iterations; ++it) {
            const double nx = norm(x), ny = norm(y);
            if (nx == 0.0 || ny == 0.0) break;
            X z = op(x, y);
            const double nz = norm(z);
            best = std::max(best, nz / (nx * ny));
            X w = op(x, x);
            const double nw = norm(w);
            best = std::max(best, nw / (nx * nx));
            if (nz == 0.0 || nw == 0.0) break;
            x = w;
            y = z;
        }
    }
    return safety * best;
}

}  // namespace hydrolimit::analysis
