// hydrolimit: runs one experiment family and writes a result bundle.
//
// Exit codes: 0 every verdict passed, 1 a verdict failed or a numerical procedure
// gave up, 2 the command line or config was rejected.

#include "hydrolimit/run_config.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace {

using nlohmann::json;
using namespace hydrolimit;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void print(const experiments::Outcome& outcome) {
    for (const auto& v : outcome.verdicts) {
        std::printf("%s  %s  measured %.4g  threshold %.4g  (%.1f s)\n", v.passed ? "PASS" : "FAIL", v.name.c_str(),
                    v.measured, v.threshold, v.seconds);
        if (!v.detail.empty()) std::printf("      %s\n", v.detail.c_str());
    }
}

int run(const std::string& command, const std::string& config_path, const std::string& out_dir,
        const cli::Overrides& overrides) {
    const auto config = cli::parse_config(load_json(config_path), overrides);
    std::filesystem::path dir;
    if (!out_dir.empty()) {
        dir = out_dir;
        std::filesystem::create_directories(dir);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const auto outcome = cli::run_subcommand(command, config);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    print(outcome);

    if (!out_dir.empty()) {
        json verdicts = json::array();
        for (const auto& v : outcome.verdicts) verdicts.push_back(experiments::to_json(v));
        json tables = json::array();
        for (const auto& t : outcome.tables) {
            const std::string file = t.name + ".csv";
            t.write_csv((dir / file).string());
            tables.push_back(file);
        }
        write_json(dir / "manifest.json", {{"tool", "hydrolimit"},
                                           {"version", experiments::kVersion},
                                           {"command", command},
                                           {"config", cli::resolve(config)},
                                           {"seed", config.seed},
                                           {"threads", thread_count()},
                                           {"seconds", seconds},
                                           {"passed", outcome.passed()},
                                           {"verdicts", verdicts},
                                           {"tables", tables}});
        write_json(dir / "summary.json", outcome.summary);
    }
    return outcome.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hydrodynamic-limit experiments for the linearized Boltzmann equation"};
    app.set_version_flag("--version", std::string(experiments::kVersion));
    app.require_subcommand(1, 1);

    std::string config_path, out_dir;
    std::vector<double> eps;
    std::uint64_t seed = 0;
    const std::map<std::string, std::string> help{
        {"check", "conservation, kernel, coercivity, projectors, scaling identity, Picard lemma"},
        {"spectrum", "branch tables, kappa, transport fits, sharp-part decay"},
        {"nsf", "fluid solve and its Duhamel residual under dt refinement"},
        {"kinetic", "one kinetic run: norms, Duhamel residual, conserved moments"},
        {"limit", "eps sweep, microscopic-data sensitivity, delta cross-check"},
        {"hypo", "delta tuning and the hypocoercivity scan"}};
    std::vector<CLI::Option*> seed_opts;
    for (const auto& name : cli::subcommands()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", config_path, "JSON config or a manifest.json from an earlier run")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "directory for manifest.json, summary.json and CSV tables");
        sub->add_option("--eps", eps, "eps override; two or more values also replace limit.eps_list");
        seed_opts.push_back(sub->add_option("--seed", seed, "seed override"));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    cli::Overrides overrides;
    overrides.eps = eps;
    for (auto* opt : seed_opts)
        if (opt->count() > 0) overrides.seed = seed;

    try {
        return run(app.get_subcommands().front()->get_name(), config_path, out_dir, overrides);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
