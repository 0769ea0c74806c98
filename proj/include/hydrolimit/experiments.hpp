#pragma once

// Named experiments with pass/fail verdicts, shared by the command-line tool and
// the acceptance runner. Each returns its verdicts, plot-ready tables and a JSON
// summary of the measured quantities.

#include "hydrolimit/analysis.hpp"
#include "hydrolimit/hypocoercivity.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace hydrolimit::experiments {

inline constexpr const char* kVersion = "0.1.0";

struct Verdict {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
    double seconds = 0.0;
};

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    /// UTF-8, header row, '.' decimal, 17 significant digits.
    void write_csv(const std::string& path) const;
};

struct Outcome {
    std::vector<Verdict> verdicts;
    std::vector<Table> tables;
    nlohmann::json summary = nlohmann::json::object();

    [[nodiscard]] bool passed() const;
    void merge(Outcome other);
};

nlohmann::json to_json(const Verdict& v);

struct BackendSpec {
    std::string kind = "bgk";  ///< bgk | maxwell | synthetic
    double nu = 1.0;
    int max_degree = 6;
    int angular_quad_order = 32;
    double synthetic_scale = 0.1;
    std::uint64_t synthetic_seed = 1;

    void validate() const;
};

/// Throws ConfigError for unknown kinds or invalid parameters.
std::shared_ptr<const collision::CollisionBackend> make_backend(const BackendSpec& spec);

struct ConservationConfig {
    BackendSpec backend;
    int dim_x = 2;
    int max_mode = 8;
    std::size_t pairs = 1000;
    double eps = 0.1;
    double T = 1.0;
    double dt = 0.02;
    double data_norm = 0.05;
    std::uint64_t seed = 1;
    double kernel_tol = 1e-10;
    double gamma_tol = 1e-12;
    double drift_tol = 1e-8;
    std::string cache_dir;
};

/// Kernel dimension of L, P0 Gamma_sym over random pairs, conserved moments of a kinetic run.
Outcome conservation_and_kernel(const ConservationConfig& config);

struct SpectralConfig {
    BackendSpec backend;
    std::vector<double> vanishing_radii{1e-2, 1e-3};
    std::vector<Vec3> directions{Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(2, -1, 3)};
    std::size_t fit_radius_count = 12;
    double projector_tol = 1e-8;
    double viscosity_tol = 0.02;
    double sound_tol = 0.01;
    /// Transport fits and the branch table; off for the quick invariant suite.
    bool fits = true;
};

/// Vanishing eigenvalues and gap, P0 = sum of leading projectors, closed-form projectors,
/// transport fits and kappa.
Outcome spectral_structure(const SpectralConfig& config);

struct ScalingConfig {
    BackendSpec backend;
    std::vector<double> eps_list{1.0, 0.5, 0.1, 0.03};
    std::vector<Wavevector> ks{Wavevector{{1, 0, 0}}, Wavevector{{2, -3, 0}}, Wavevector{{1, 1, 4}}};
    std::vector<double> times{0.001, 0.01, 0.1};
    double tol = 1e-10;
};

/// || U^eps(t, k) - U^1(t / eps^2, eps k) || over the lattice.
Outcome scaling_identity(const ScalingConfig& config);

struct SharpDecayConfig {
    BackendSpec backend;
    int dim_x = 3;
    double eps = 0.01;  ///< compared with eps / 2
    double tol = 0.05;
};

/// Fitted lambda_0 = rate * eps^2 of the sharp part at eps and eps / 2, on modes with
/// eps |k| <= kappa / 2 where the flat part carries every hydrodynamic branch.
Outcome sharp_decay(const SharpDecayConfig& config);

struct HypoConfig {
    BackendSpec backend;
    hypo::CoercivityOptions options;
    bool tune = true;
    hypo::Deltas deltas;  ///< used when tune is false
    double max_c = 0.5;
};

/// Delta tuning and the coercivity / norm-equivalence scan.
Outcome hypocoercivity(const HypoConfig& config);

struct FluidConfig {
    BackendSpec backend;
    int dim_x = 2;
    int max_mode = 16;
    double data_norm = 0.1;
    int data_max_k = 4;
    double T = 0.25;
    std::vector<double> dt_list{1.0 / 512, 1.0 / 1024, 1.0 / 2048};
    double tol = 1e-6;
    /// Smallest accepted log2 of successive residual ratios.
    double min_order = 1.8;
    std::uint64_t seed = 3;
};

/// Fluid Duhamel residual of the NSF solver under dt refinement.
Outcome fluid_duhamel(const FluidConfig& config);

struct KineticConfig {
    BackendSpec backend;
    int dim_x = 2;
    int max_mode = 8;
    double eps = 0.1;
    double T = 0.5;
    double dt = 0.01;
    double data_norm = 0.1;
    double micro_norm = 0.0;
    int data_max_k = 2;
    double residual_tol = 1e-5;
    std::uint64_t seed = 1;
    std::string cache_dir;
};

/// One kinetic run: norms over time, Duhamel residual, conservation drift.
Outcome kinetic_run(const KineticConfig& config);

/// Cross-check of g + delta against the kinetic solver.
Outcome cross_check(const analysis::CrossCheckConfig& config, double factor = 5.0);

/// Strictly decreasing e(eps) and slope >= min_slope.
Outcome convergence(const analysis::SweepResult& compliant, double min_slope = 0.35);

/// The microscopic-data sweep keeps every e(eps) >= floor while the compliant one converges.
Outcome sensitivity(const analysis::SweepResult& compliant, const analysis::SweepResult& micro,
                    double floor = 0.01, double min_slope = 0.35);

Table sweep_table(const std::string& name, const analysis::SweepResult& sweep);

/// Scalar and 100-dimensional synthetic problems with ||L|| = 1/2 and data at 90% of the bound.
Outcome picard_lemma(std::uint64_t seed = 1);

}  // namespace hydrolimit::experiments
