#include "hydrolimit/run_config.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hydrolimit;
using nlohmann::json;

namespace {

json minimal() {
    return json::parse(R"({"eps": 0.1, "alpha": 0.05, "beta": 0.25, "ell": 2.0,
                           "backend": {"kind": "bgk"}})");
}

void expect_rejected(const json& j, const std::string& fragment) {
    try {
        (void)cli::parse_config(j);
        FAIL() << "accepted: " << j.dump();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

}  // namespace

TEST(RunConfig, MinimalConfigFillsDefaults) {
    const auto c = cli::parse_config(minimal());
    EXPECT_DOUBLE_EQ(c.xnorm.eps, 0.1);
    EXPECT_EQ(c.backend.kind, "bgk");
    EXPECT_EQ(c.backend.max_degree, 6);
    EXPECT_DOUBLE_EQ(c.check.eps, 0.1);
    EXPECT_DOUBLE_EQ(c.cross_check.xnorm.beta, 0.25);
    EXPECT_DOUBLE_EQ(c.limit.alpha, 0.05);
}

TEST(RunConfig, ExponentsAreRequired) {
    for (const char* key : {"eps", "alpha", "beta", "ell"}) {
        json j = minimal();
        j.erase(key);
        expect_rejected(j, key);
    }
    json j = minimal();
    j.erase("backend");
    expect_rejected(j, "backend");
    j = minimal();
    j["backend"].erase("kind");
    expect_rejected(j, "backend.kind");
}

TEST(RunConfig, TheoremRangesEnforced) {
    const std::vector<std::pair<const char*, double>> bad{
        {"beta", 0.5}, {"beta", 0.07}, {"alpha", 0.25}, {"alpha", 0.0}, {"ell", 1.5}, {"ell", 2.1},
        {"eps", 0.0},  {"eps", 1.5}};
    for (const auto& [key, value] : bad) {
        json j = minimal();
        j[key] = value;
        EXPECT_THROW((void)cli::parse_config(j), ConfigError) << key << " = " << value;
    }
    json j = minimal();
    j["ell"] = 1.6;
    j["beta"] = 0.05;  // alpha (ell - 1/2) = 0.055
    EXPECT_THROW((void)cli::parse_config(j), ConfigError);
    j["beta"] = 0.06;
    EXPECT_NO_THROW((void)cli::parse_config(j));
}

TEST(RunConfig, UnknownKeysAndWrongTypesRejected) {
    json j = minimal();
    j["chek"] = json::object();
    expect_rejected(j, "chek");
    j = minimal();
    j["limit"]["eps_lst"] = {0.1};
    expect_rejected(j, "limit.eps_lst");
    j = minimal();
    j["check"]["K"] = 8.5;
    expect_rejected(j, "check.K");
    j = minimal();
    j["seed"] = -1;
    expect_rejected(j, "seed");
    j = minimal();
    j["spectrum"]["directions"] = {{0, 0, 0}};
    expect_rejected(j, "zero direction");
    expect_rejected(json::array(), "must be an object");
}

TEST(RunConfig, BackendAndSectionChecks) {
    json j = minimal();
    j["backend"]["kind"] = "hard-spheres";
    expect_rejected(j, "backend.kind");
    j = minimal();
    j["limit"]["eps_list"] = {0.2, 0.1};
    expect_rejected(j, "three");
    j = minimal();
    j["hypo"]["tune"] = false;
    j["hypo"]["deltas"] = {{"d1", 0.0}, {"d2", 0.0}, {"d3", 0.0}};
    expect_rejected(j, "deltas");
    j = minimal();
    j["nsf"]["dt_list"] = {0.01};
    expect_rejected(j, "dt_list");
}

TEST(RunConfig, Overrides) {
    cli::Overrides o;
    o.eps = {0.05};
    o.seed = 9;
    auto c = cli::parse_config(minimal(), o);
    EXPECT_DOUBLE_EQ(c.xnorm.eps, 0.05);
    EXPECT_DOUBLE_EQ(c.kinetic.eps, 0.05);
    EXPECT_EQ(c.hypo.options.seed, 9u);
    EXPECT_EQ(c.limit.eps_list.size(), 4u);

    o.eps = {0.4, 0.2, 0.1};
    c = cli::parse_config(minimal(), o);
    EXPECT_EQ(c.limit.eps_list, o.eps);
    EXPECT_DOUBLE_EQ(c.xnorm.eps, 0.4);

    o.eps = {2.0};
    EXPECT_THROW((void)cli::parse_config(minimal(), o), ConfigError);
}

TEST(RunConfig, ResolveRoundTrips) {
    json j = minimal();
    j["seed"] = 17;
    j["hypo"]["samples"] = 20;
    j["scaling"]["ks"] = {{1, 2, 3}};
    j["spectrum"]["directions"] = {{1, 0, 0}, {0, 1, 1}};
    const json resolved = cli::resolve(cli::parse_config(j));
    EXPECT_EQ(resolved["seed"], 17);
    EXPECT_EQ(resolved["hypo"]["samples"], 20);
    EXPECT_EQ(cli::resolve(cli::parse_config(resolved)), resolved);

    const json manifest{{"tool", "hydrolimit"}, {"config", resolved}, {"verdicts", json::array()}};
    EXPECT_EQ(cli::resolve(cli::parse_config(manifest)), resolved);
}

TEST(RunConfig, UnknownSubcommand) {
    EXPECT_THROW((void)cli::run_subcommand("frobnicate", cli::parse_config(minimal())), ConfigError);
}

TEST(RunConfig, LimitNeedsBgk) {
    json j = minimal();
    j["backend"]["kind"] = "maxwell";
    EXPECT_THROW((void)cli::run_subcommand("limit", cli::parse_config(j)), ConfigError);
}

TEST(Experiments, TableCsvFormat) {
    experiments::Table t{"t", {"a", "b"}, {{0.1, 1.0 / 3.0}, {-2.5, 1e-300}}};
    const auto path = (std::filesystem::temp_directory_path() / "hydrolimit_table_test.csv").string();
    t.write_csv(path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), "a,b\n0.10000000000000001,0.33333333333333331\n-2.5,1e-300\n");
    std::remove(path.c_str());
}

TEST(Experiments, OutcomeMerge) {
    experiments::Outcome a, b;
    a.verdicts.push_back({"x", true});
    a.summary["x"] = 1;
    b.verdicts.push_back({"y", false});
    b.summary["y"] = 2;
    EXPECT_TRUE(a.passed());
    a.merge(b);
    EXPECT_FALSE(a.passed());
    EXPECT_EQ(a.verdicts.size(), 2u);
    EXPECT_EQ(a.summary["y"], 2);
}

TEST(Experiments, PicardLemmaPassesForSeveralSeeds) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto out = experiments::picard_lemma(seed);
        ASSERT_EQ(out.verdicts.size(), 1u);
        EXPECT_TRUE(out.verdicts[0].passed) << out.verdicts[0].detail;
        EXPECT_LE(out.summary["picard"]["solution_ratio"].get<double>(), 4.0);
    }
}

TEST(Experiments, ScalingIdentityOnSmallLattice) {
    experiments::ScalingConfig c;
    c.eps_list = {1.0, 0.2};
    c.ks = {Wavevector{{1, -1, 0}}};
    c.times = {0.01};
    const auto out = experiments::scaling_identity(c);
    EXPECT_TRUE(out.passed());
    EXPECT_EQ(out.tables[0].rows.size(), 2u);
}

TEST(Experiments, CheckSuiteIsSeedDeterministic) {
    auto c = cli::parse_config(minimal());
    c.check.pairs = 50;
    c.check.T = 0.2;
    const auto a = experiments::conservation_and_kernel(c.check);
    const auto b = experiments::conservation_and_kernel(c.check);
    EXPECT_TRUE(a.passed());
    ASSERT_EQ(a.tables.size(), b.tables.size());
    EXPECT_EQ(a.tables[0].rows, b.tables[0].rows);
    EXPECT_EQ(a.summary, b.summary);
}

TEST(Experiments, ProjectorChecksWithoutFits) {
    experiments::SpectralConfig c;
    c.fits = false;
    const auto out = experiments::spectral_structure(c);
    EXPECT_EQ(out.verdicts.size(), 3u);
    EXPECT_TRUE(out.passed());
    EXPECT_TRUE(out.tables.empty());
}

TEST(Experiments, BackendFactory) {
    experiments::BackendSpec s;
    s.kind = "synthetic";
    const auto be = experiments::make_backend(s);
    EXPECT_EQ(be->basis().max_degree(), 6);
    s.kind = "nope";
    EXPECT_THROW((void)experiments::make_backend(s), ConfigError);
    s.kind = "bgk";
    s.nu = 0.0;
    EXPECT_THROW((void)experiments::make_backend(s), ConfigError);
}
