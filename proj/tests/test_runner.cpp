#include "mpet/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <gtest/gtest.h>

namespace mpet {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    EXPECT_TRUE(in.good()) << path;
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

size_t count_lines(const std::string& text) {
    size_t lines = 0;
    for (char c : text) {
        if (c == '\n') {
            ++lines;
        }
    }
    return lines;
}

TEST(ResolvePlan, DefaultsToTheRobustVerificationStudy) {
    const RunPlan plan = resolve_plan(RunConfig{});
    EXPECT_EQ(plan.mode, RunMode::kConvergence);
    EXPECT_EQ(plan.case_name, "table2");
    ASSERT_EQ(plan.formulations.size(), 1u);
    EXPECT_EQ(plan.formulations[0], Formulation::kTotalPressure);
    EXPECT_EQ(plan.error_mode, ErrorMode::kExact);
    EXPECT_EQ(plan.levels, 5);
    EXPECT_DOUBLE_EQ(plan.nu, 0.49999);
    EXPECT_DOUBLE_EQ(plan.storage, 1.0);
    EXPECT_DOUBLE_EQ(plan.lambda_scale, 1.0);
    EXPECT_FALSE(plan.dt.has_value());
    EXPECT_FALSE(plan.t_end.has_value());
    EXPECT_EQ(plan.output_dir, "out");
    EXPECT_FALSE(plan.emit_energy_trace);
    EXPECT_FALSE(plan.emit_matrices);
}

TEST(ResolvePlan, AppliesCaseSpecificDefaults) {
    {
        RunConfig config;
        config.case_name = "table1";
        const RunPlan plan = resolve_plan(config);
        ASSERT_EQ(plan.formulations.size(), 1u);
        EXPECT_EQ(plan.formulations[0], Formulation::kStandard);
    }
    {
        RunConfig config;
        config.case_name = "table3-nu04";
        EXPECT_DOUBLE_EQ(resolve_plan(config).nu, 0.4);
    }
    {
        RunConfig config;
        config.case_name = "table4-c0";
        EXPECT_DOUBLE_EQ(resolve_plan(config).storage, 0.0);
    }
    {
        RunConfig config;
        config.case_name = "table5-superconv";
        EXPECT_EQ(resolve_plan(config).error_mode, ErrorMode::kInterpolant);
    }
    {
        RunConfig config;
        config.case_name = "brain";
        EXPECT_EQ(resolve_plan(config).mode, RunMode::kScenario);
    }
    {
        RunConfig config;
        config.case_name = "example1-table2";  // alias
        EXPECT_EQ(resolve_plan(config).case_name, "table2");
    }
}

TEST(ResolvePlan, ExpandsBothIntoOrderedFormulations) {
    RunConfig config;
    config.formulation = "both";
    const RunPlan plan = resolve_plan(config);
    ASSERT_EQ(plan.formulations.size(), 2u);
    EXPECT_EQ(plan.formulations[0], Formulation::kTotalPressure);
    EXPECT_EQ(plan.formulations[1], Formulation::kStandard);
}

TEST(ResolvePlan, ExplicitSettingsBeatCaseDefaults) {
    RunConfig config;
    config.case_name = "table3-nu04";
    config.nu = 0.45;
    config.levels = 3;
    config.formulation = "standard";
    config.mode = "single-solve";
    config.output_dir = "elsewhere";
    config.emit_matrices = true;
    config.dt = 0.25;
    const RunPlan plan = resolve_plan(config);
    EXPECT_EQ(plan.mode, RunMode::kSingleSolve);
    EXPECT_DOUBLE_EQ(plan.nu, 0.45);
    EXPECT_EQ(plan.levels, 3);
    ASSERT_EQ(plan.formulations.size(), 1u);
    EXPECT_EQ(plan.formulations[0], Formulation::kStandard);
    EXPECT_EQ(plan.output_dir, "elsewhere");
    EXPECT_TRUE(plan.emit_matrices);
    ASSERT_TRUE(plan.dt.has_value());
    EXPECT_DOUBLE_EQ(*plan.dt, 0.25);
}

TEST(ResolvePlan, RejectsContradictoryCombinations) {
    {
        RunConfig config;
        config.case_name = "brain";
        config.mode = "convergence";
        EXPECT_THROW(resolve_plan(config), std::invalid_argument);
    }
    {
        RunConfig config;
        config.case_name = "table2";
        config.mode = "scenario";
        EXPECT_THROW(resolve_plan(config), std::invalid_argument);
    }
    for (const char* key : {"levels", "nu", "storage", "lambda"}) {
        RunConfig config;
        config.case_name = "brain";
        if (std::string(key) == "levels") {
            config.levels = 3;
        } else if (std::string(key) == "nu") {
            config.nu = 0.4;
        } else if (std::string(key) == "storage") {
            config.storage = 1.0;
        } else {
            config.lambda_scale = 10.0;
        }
        EXPECT_THROW(resolve_plan(config), std::invalid_argument) << key;
    }
    {
        RunConfig config;
        config.mode = "warp";
        EXPECT_THROW(resolve_plan(config), std::invalid_argument);
    }
}

TEST(ExecutePlan, RequiresAtLeastOneFormulation) {
    RunPlan plan;
    plan.formulations.clear();
    EXPECT_THROW(execute_plan(plan), std::invalid_argument);
}

TEST(ExecutePlan, SingleSolveWritesReportsAndArtifacts) {
    const fs::path dir = fs::path(::testing::TempDir()) / "mpet_runner_single";
    fs::remove_all(dir);

    RunPlan plan;
    plan.mode = RunMode::kSingleSolve;
    plan.case_name = "table2";
    plan.formulations = {Formulation::kTotalPressure};
    plan.levels = 2;  // one solve at the H/2 resolution
    plan.nu = 0.3;
    plan.output_dir = dir.string();
    plan.emit_energy_trace = true;
    plan.emit_matrices = true;
    execute_plan(plan);

    EXPECT_TRUE(fs::exists(dir / "report.csv"));
    EXPECT_TRUE(fs::exists(dir / "report.md"));
    EXPECT_TRUE(fs::exists(dir / "energy.csv"));
    EXPECT_TRUE(fs::exists(dir / "lhs.mtx"));
    EXPECT_TRUE(fs::exists(dir / "history.mtx"));

    const std::string csv = slurp(dir / "report.csv");
    EXPECT_NE(csv.find("level,cells_per_side,h"), std::string::npos);
    EXPECT_NE(csv.find("H,8,"), std::string::npos);  // 4 * 2^(levels-1) cells per side
    EXPECT_EQ(count_lines(csv), 2u);                 // header plus the single level

    // Initial sample plus four steps of the default time grid.
    EXPECT_EQ(count_lines(slurp(dir / "energy.csv")), 6u);

    const std::string mtx = slurp(dir / "lhs.mtx");
    EXPECT_NE(mtx.find("%%MatrixMarket"), std::string::npos);

    fs::remove_all(dir);
}

TEST(ExecutePlan, ConvergenceModeStacksBothFormulations) {
    const fs::path dir = fs::path(::testing::TempDir()) / "mpet_runner_stacked";
    fs::remove_all(dir);

    RunPlan plan;
    plan.mode = RunMode::kConvergence;
    plan.case_name = "table2";
    plan.formulations = {Formulation::kTotalPressure, Formulation::kStandard};
    plan.levels = 2;
    plan.nu = 0.3;
    plan.output_dir = dir.string();
    execute_plan(plan);

    const std::string md = slurp(dir / "report.md");
    EXPECT_NE(md.find("(total-pressure)"), std::string::npos);
    EXPECT_NE(md.find("(standard)"), std::string::npos);

    // Two stacked CSV blocks, each with its own header, separated by a
    // blank line.
    const std::string csv = slurp(dir / "report.csv");
    size_t headers = 0;
    for (size_t pos = csv.find("level,cells_per_side"); pos != std::string::npos;
         pos = csv.find("level,cells_per_side", pos + 1)) {
        ++headers;
    }
    EXPECT_EQ(headers, 2u);
    EXPECT_NE(csv.find("\n\n"), std::string::npos);

    fs::remove_all(dir);
}

}  // namespace
}  // namespace mpet
