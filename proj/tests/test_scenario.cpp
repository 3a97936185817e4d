// Scenario configuration, pipeline orchestration, reports and trajectory export.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "eqmorse/scenario.hpp"

using namespace eqmorse;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / ("eqmorse_test_" + name);
    fs::remove_all(d);
    return d;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

const char* kCustom = R"({
  "id": "custom",
  "manifold": {"ambient_dim": 2, "constraints": [[{"coeff": 1.0, "powers": [2, 0]}, {"coeff": 1.0, "powers": [0, 2]},
                                                 {"coeff": -1.0, "powers": [0, 0]}]],
               "bound": 1.5, "description": "circle"},
  "action": {"generator": [[0.0, -3.0], [3.0, 0.0]], "weight": 3},
  "function": [{"coeff": 1.0, "powers": [1, 0]}, {"coeff": 0.1, "powers": [0, 1]}],
  "m_max": 6,
  "tolerances": {"rtol": 1e-11, "atol": 3.3e-13},
  "perturbation": {"seed": 42, "amplitude": 0.002, "retries": 1},
  "expected": [1, 0, 0, 0, 0, 0, 0]
})";

}  // namespace

TEST(Config, RoundTripIsStable) {
    ScenarioConfig c = parse_config(kCustom);
    json once = to_json(c);
    json twice = to_json(config_from_json(once));
    EXPECT_EQ(once.dump(), twice.dump());
    EXPECT_EQ(config_from_json(json::parse(once.dump())).tolerances.at("atol"), 3.3e-13);
    EXPECT_EQ(c.perturbation.seed, 42u);
    ASSERT_TRUE(c.action && c.action->generator);
    EXPECT_EQ((*c.action->generator)(1, 0), 3.0);
}

TEST(Config, UnknownKeysAreRejectedWithPosition) {
    try {
        parse_config("{\n  \"builtin\": \"circle-w1\",\n  \"colour\": 1\n}");
        FAIL() << "accepted an unknown key";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 3);
        EXPECT_EQ(e.column(), 3);
        EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
    }
    EXPECT_THROW(parse_config(R"({"builtin": "circle-w1", "perturbation": {"sead": 1}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"builtin": "circle-w1", "tolerances": {"rtoll": 1e-9}})"), ConfigError);
}

TEST(Config, SyntaxErrorsReportLineAndColumn) {
    try {
        parse_config("{\n  \"builtin\": \"circle-w1\",\n  \"m_max\": 4,,\n}");
        FAIL() << "accepted malformed JSON";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 3);
        EXPECT_GT(e.column(), 1);
        EXPECT_EQ(e.kind(), "config");
    }
}

TEST(Config, IncompleteScenarioIsRejected) {
    EXPECT_THROW(parse_config(R"({"manifold": {"builtin": "circle"}, "action": {"weight": 1}})"), ConfigError);
    EXPECT_THROW(resolve(parse_config(R"({"builtin": "circle-w9"})")), ConfigError);
    EXPECT_THROW(resolve(parse_config(R"({"builtin": "circle-w1", "function": [{"coeff": 1.0, "powers": [1, 0, 0]}]})")),
                 ConfigError);
    EXPECT_THROW(resolve(parse_config(R"({"manifold": {"builtin": "klein"}, "action": {"weight": 1},
                                          "function": [{"coeff": 1.0, "powers": [1, 0]}]})")),
                 ConfigError);
}

TEST(Config, ResolvesOverridesOnBuiltins) {
    auto rs = resolve(parse_config(R"({"builtin": "circle-w1", "action": {"weight": 2}, "m_max": 3, "tolerances": {"rtol": 1e-9}})"));
    EXPECT_EQ(rs.m_max, 3);
    EXPECT_EQ(rs.scenario.tol.rtol, 1e-9);
    EXPECT_EQ(rs.scenario.action.weight(), 2);
    EXPECT_NEAR(rs.scenario.action.generator()(1, 0), 2.0, 0.0);
    ASSERT_TRUE(rs.expected);

    auto custom = resolve(parse_config(kCustom));
    EXPECT_EQ(custom.scenario.id, "custom");
    EXPECT_EQ(custom.scenario.dim(), 1);
    EXPECT_EQ(custom.retries, 1);
    EXPECT_TRUE(validate_scenario(custom.scenario).passed());
}

TEST(Builtins, CatalogueHasTheNamedScenarios) {
    std::set<std::string> ids;
    for (const auto& b : builtin_scenarios()) EXPECT_TRUE(ids.insert(b.id).second) << "duplicate " << b.id;
    for (const char* id : {"circle-w1", "circle-w2", "circle-w3", "sphere-rot", "torus-rot", "s3-hopf", "s3-hopf-symmetric"})
        EXPECT_TRUE(ids.count(id)) << id;
    EXPECT_EQ(*builtin("circle-w1").expected_dims, (std::vector<int>{1, 0, 0, 0, 0, 0, 0, 0, 0}));
}

TEST(Builtins, TrivialVariantsExpectMorseHomologyTensorT) {
    for (const auto& b : builtin_scenarios()) {
        if (!b.scenario.action.is_trivial()) continue;
        auto r = run_pipeline(builtin_config(b.id), {Stage::morse});
        ASSERT_TRUE(r.morse) << b.id;
        auto betti = r.morse->homology(b.scenario.dim());
        std::vector<int> want(b.m_max + 1, 0);
        for (int m = 0; m <= b.m_max; ++m)
            for (int l = 0; l <= m && l < static_cast<int>(betti.size()); ++l)
                if ((m - l) % 2 == 0) want[m] += betti[l];
        EXPECT_EQ(*b.expected_dims, want) << b.id;
    }
}

TEST(Pipeline, CircleWeightOnePasses) {
    auto r = run_pipeline(builtin_config("circle-w1"));
    EXPECT_EQ(r.exit(), 0);
    ASSERT_TRUE(r.homology);
    EXPECT_EQ(r.homology->table.dims, (std::vector<int>{1, 0, 0, 0, 0, 0, 0, 0, 0}));
    EXPECT_TRUE(r.homology->truncation_stable);
    ASSERT_EQ(r.attempts.size(), 1u);
    EXPECT_TRUE(r.attempts[0].succeeded);
}

TEST(Pipeline, SymmetricHopfIsInconclusive) {
    auto r = run_pipeline(builtin_config("s3-hopf-symmetric"));
    EXPECT_EQ(r.exit(), 2);
    ASSERT_EQ(r.attempts.size(), 1u);
    EXPECT_EQ(r.attempts[0].stage, "jumps");
    ASSERT_TRUE(r.jumps);
    ASSERT_NE(r.jumps->first_missing(), nullptr);
    EXPECT_EQ(r.jumps->first_missing()->failure_kind, "non-transversal");
    EXPECT_FALSE(r.homology);
}

TEST(Pipeline, PerturbationRecoversSymmetricHopf) {
    auto c = parse_config(R"({"builtin": "s3-hopf-symmetric", "perturbation": {"seed": 7, "amplitude": 0.01, "retries": 1}})");
    auto r = run_pipeline(c);
    ASSERT_EQ(r.attempts.size(), 2u);
    EXPECT_FALSE(r.attempts[0].succeeded);
    EXPECT_TRUE(r.attempts[1].succeeded);
    EXPECT_EQ(r.attempts[1].amplitude, 0.01);
    EXPECT_EQ(r.exit(), 0);
    ASSERT_TRUE(r.homology);
    EXPECT_EQ(r.homology->table.dims, (std::vector<int>{1, 0, 1, 0, 0, 0}));
}

TEST(Pipeline, WrongExpectedTableIsAMismatch) {
    PipelineOptions opt;
    opt.expected = std::vector<int>{1, 1};
    auto r = run_pipeline(builtin_config("circle-w1"), opt);
    EXPECT_EQ(r.exit(), 3);
    ASSERT_TRUE(r.matches);
    EXPECT_FALSE(*r.matches);
}

TEST(Pipeline, StopsAfterRequestedStage) {
    auto r = run_pipeline(builtin_config("sphere-rot"), {Stage::crit});
    EXPECT_EQ(r.exit(), 0);
    EXPECT_EQ(r.crits.size(), 2u);
    EXPECT_FALSE(r.morse);
    EXPECT_FALSE(r.homology);
}

TEST(Pipeline, ValidationFailureStopsWithoutRetry) {
    auto c = parse_config(R"({"builtin": "circle-w1", "action": {"generator": [[0.0, -1.0], [2.0, 0.0]], "weight": 1}})");
    auto r = run_pipeline(c);
    EXPECT_EQ(r.exit(), 2);
    ASSERT_EQ(r.attempts.size(), 1u);
    EXPECT_EQ(r.attempts[0].stage, "validate");
}

TEST(Report, DeterministicAcrossRuns) {
    for (const char* id : {"circle-w2", "torus-rot"}) {
        auto c = builtin_config(id);
        c.perturbation.seed = 5;
        EXPECT_EQ(to_json(run_pipeline(c)).dump(), to_json(run_pipeline(c)).dump()) << id;
    }
    auto c = parse_config(kCustom);
    EXPECT_EQ(to_json(run_pipeline(c)).dump(), to_json(run_pipeline(c)).dump());
}

TEST(Report, RecordsSeedAndVerification) {
    auto c = builtin_config("circle-w3");
    c.perturbation.seed = 99;
    auto j = to_json(run_pipeline(c));
    EXPECT_EQ(j.at("seed"), 99);
    EXPECT_EQ(j.at("status"), "pass");
    EXPECT_TRUE(j.at("verification").at("d_squared_zero").get<bool>());
    EXPECT_EQ(j.at("jumps").at(0).at("solutions").size(), 3u);
    EXPECT_EQ(j.at("homology").at("dims"), (std::vector<int>{1, 0, 0, 0, 0, 0, 0, 0, 0}));
}

TEST(Export, CircleJumpSolution) {
    auto dir = fresh_dir("circle");
    auto c = builtin_config("circle-w1");
    write_outputs(dir, c, run_pipeline(c));
    auto ex = export_trajectories(dir);
    ASSERT_EQ(ex.jump_files.size(), 1u);
    auto records = read_lines(dir / "trajectories" / (ex.jump_files[0] + "_jumps.csv"));
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[0].rfind("after_segment,s", 0), 0u);
    double s = std::stod(records[1].substr(records[1].find(',') + 1));
    EXPECT_NEAR(s, std::numbers::pi, 1e-9);
    auto seg = read_lines(dir / "trajectories" / (ex.jump_files[0] + "_segments.csv"));
    std::set<char> segments;
    for (std::size_t i = 1; i < seg.size(); ++i) segments.insert(seg[i][0]);
    EXPECT_EQ(segments.size(), 2u);
    for (const auto& chk : ex.checks) {
        EXPECT_LT(chk.monotonicity_violation, 1e-9) << chk.file;
        EXPECT_LT(chk.constraint_drift, 1e-8) << chk.file;
    }
}

TEST(Export, SphereRotationHasNoJumps) {
    auto dir = fresh_dir("sphere");
    auto c = builtin_config("sphere-rot");
    write_outputs(dir, c, run_pipeline(c));
    auto ex = export_trajectories(dir);
    EXPECT_TRUE(ex.jump_files.empty());
    EXPECT_TRUE(ex.morse_files.empty());
}

TEST(Export, TorusJumpsCarryCertificates) {
    auto dir = fresh_dir("torus");
    auto c = builtin_config("torus-rot");
    write_outputs(dir, c, run_pipeline(c));
    auto ex = export_trajectories(dir);
    bool saddle_to_bottom = false;
    for (const auto& stem : ex.jump_files) {
        std::ifstream in(dir / "trajectories" / (stem + ".json"));
        json j = json::parse(in);
        EXPECT_LT(j.at("certificate").at("residual").get<double>(), 1e-8);
        EXPECT_GT(j.at("certificate").at("sigma_min").get<double>(), 1e-4);
        if (j.at("y") == "c0_0" && j.at("x") == "c1_1") saddle_to_bottom = true;
    }
    EXPECT_TRUE(saddle_to_bottom);
}

TEST(Export, MissingCacheIsInstructive) {
    auto dir = fresh_dir("missing");
    try {
        export_trajectories(dir);
        FAIL() << "exported without a cache";
    } catch (const StructuralError& e) {
        EXPECT_NE(std::string(e.what()).find("--out-dir"), std::string::npos);
    }
}
