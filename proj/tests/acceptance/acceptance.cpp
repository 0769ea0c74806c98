// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.
// A criterion also fails when it exceeds its wall-clock budget.

#include "hydrolimit/experiments.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace hydrolimit;
using namespace hydrolimit::experiments;

namespace {

struct Criterion {
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

std::string summarize(const Outcome& out) {
    std::string s;
    for (const auto& v : out.verdicts) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3g/%.3g", v.measured, v.threshold);
        if (!s.empty()) s += "; ";
        s += (v.passed ? "" : "[failed] ") + v.name.substr(v.name.find(':') + 2) + " " + buf;
    }
    return s;
}

}  // namespace

int main() {
    analysis::SweepResult compliant, micro;

    const std::vector<Criterion> criteria{
        {"conservation and kernel", 60.0, [] { return conservation_and_kernel(ConservationConfig{}); }},
        {"spectral structure", 120.0, [] { return spectral_structure(SpectralConfig{}); }},
        {"scaling identity", 60.0, [] { return scaling_identity(ScalingConfig{}); }},
        {"sharp-part decay", 60.0, [] { return sharp_decay(SharpDecayConfig{}); }},
        {"hypocoercivity", 120.0, [] { return hypocoercivity(HypoConfig{}); }},
        {"fluid Duhamel identity", 120.0, [] { return fluid_duhamel(FluidConfig{}); }},
        {"solver cross-check", 300.0, [] { return cross_check(analysis::CrossCheckConfig{}); }},
        {"convergence at desk scale", 1800.0,
         [&] {
             compliant = analysis::convergence_sweep(analysis::SweepConfig{});
             return convergence(compliant);
         }},
        {"hypothesis sensitivity", 900.0,
         [&] {
             analysis::SweepConfig cfg;
             cfg.micro_norm = 0.05;
             micro = analysis::convergence_sweep(cfg);
             return sensitivity(compliant, micro);
         }},
        {"Picard lemma", 60.0, [] { return picard_lemma(); }},
    };

    int passed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        std::string error;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = seconds <= c.budget_seconds;
        const bool ok = error.empty() && !out.verdicts.empty() && out.passed() && in_budget;
        passed += ok;
        std::printf("%s  %-26s %7.1f s / %4.0f s  %s\n", ok ? "PASS" : "FAIL", c.name.c_str(), seconds,
                    c.budget_seconds, error.empty() ? summarize(out).c_str() : ("error: " + error).c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", passed, criteria.size());
    return passed == int(criteria.size()) ? 0 : 1;
}
