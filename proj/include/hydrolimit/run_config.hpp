#pragma once

// Run configuration of the command-line tool: strict JSON parsing, the resolved
// (defaults filled in) form written to manifests, and dispatch of subcommands.

#include "hydrolimit/experiments.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hydrolimit::cli {

struct RunConfig {
    /// eps, alpha, beta, ell and the velocity norm (s, gamma); required in every config.
    analysis::XNormParams xnorm;
    experiments::BackendSpec backend;
    std::uint64_t seed = 1;
    std::string cache_dir;

    experiments::ConservationConfig check;
    experiments::ScalingConfig scaling;
    experiments::SpectralConfig spectrum;
    experiments::SharpDecayConfig sharp_decay;
    experiments::FluidConfig nsf;
    experiments::KineticConfig kinetic;
    analysis::SweepConfig limit;
    /// H^{1/2} norm of the microscopic data in the sensitivity sweep.
    double limit_micro_norm = 0.05;
    double limit_min_slope = 0.35;
    double limit_plateau_floor = 0.01;
    bool limit_cross_check = true;
    analysis::CrossCheckConfig cross_check;
    double cross_check_factor = 5.0;
    experiments::HypoConfig hypo;
};

struct Overrides {
    std::vector<double> eps;  ///< first value sets eps; two or more also set limit.eps_list
    std::optional<std::uint64_t> seed;
};

/// Accepts a config object or a manifest (its "config" member). Unknown keys, wrong
/// types and out-of-range values throw ConfigError; eps, alpha, beta, ell and
/// backend.kind have no defaults.
RunConfig parse_config(const nlohmann::json& input, const Overrides& overrides = {});

/// Every parameter, defaults included; parse_config(resolve(c)) reproduces c.
nlohmann::json resolve(const RunConfig& config);

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"check", "spectrum", "nsf", "kinetic", "limit", "hypo"};
    return names;
}

/// Throws ConfigError for an unknown name.
experiments::Outcome run_subcommand(const std::string& name, const RunConfig& config);

}  // namespace hydrolimit::cli
