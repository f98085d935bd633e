#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "levy_bsde/cli.hpp"
#include "levy_bsde/config.hpp"
#include "levy_bsde/registry.hpp"

using namespace levy_bsde;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() / (std::string("levy_bsde_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

fs::path write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

const char* kSolveConfig = R"({
  "model": {"d": 1, "k": 1, "a": [0.0], "sigma": [[1.0]], "atoms": [{"mark": [0.5], "intensity": 1.0}]},
  "grid": {"T": 1.0, "N": 5},
  "ensemble": {"M": 200, "seed": 3},
  "generator": {"id": "ylogy_osgood", "params": {"c_z": 0.5}},
  "terminal": {"id": "brownian"},
  "experiment": {"type": "solve"}
})";

}  // namespace

TEST(ConfigParse, MinimalSolve) {
    const auto cfg = parse_config(kSolveConfig);
    EXPECT_EQ(cfg.experiment_type, "solve");
    EXPECT_EQ(cfg.paths, 200u);
    EXPECT_EQ(cfg.seed, 3u);
    ASSERT_TRUE(cfg.model.has_value());
    EXPECT_EQ(cfg.model->atom_count(), 1u);
    EXPECT_EQ(cfg.grid.steps(), 5u);
    EXPECT_EQ(cfg.scheme.basis_degree, 2u);
    EXPECT_EQ(cfg.output_dir, "out");
}

TEST(ConfigParse, MissingHorizonNamesField) {
    const auto msg = config_error(R"({"grid": {"N": 10}, "experiment": {"type": "bihari"}})");
    EXPECT_NE(msg.find("grid.T"), std::string::npos) << msg;
}

TEST(ConfigParse, UnknownKeyRejected) {
    const auto msg = config_error(R"({"grid": {"T": 1, "N": 10, "dt": 0.1}, "experiment": {"type": "bihari"}})");
    EXPECT_NE(msg.find("grid.dt"), std::string::npos) << msg;
}

TEST(ConfigParse, SyntaxErrorReportsLine) {
    const auto msg = config_error("{\n  \"grid\": {\"T\": 1,\n  \"N\": }\n}");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(ConfigParse, SolverExperimentsNeedEnsembleAndTerminal) {
    const auto msg = config_error(R"({
      "model": {"d": 1, "k": 1, "a": [0.0], "sigma": [[1.0]]},
      "grid": {"T": 1.0, "N": 5},
      "generator": {"id": "zero"},
      "terminal": {"id": "brownian"},
      "experiment": {"type": "solve"}})");
    EXPECT_NE(msg.find("ensemble"), std::string::npos) << msg;
}

TEST(ConfigParse, UnknownExperimentType) {
    const auto msg = config_error(R"({"grid": {"T": 1, "N": 1}, "experiment": {"type": "optimize"}})");
    EXPECT_NE(msg.find("experiment.type"), std::string::npos) << msg;
}

TEST(ConfigParse, ShippedConfigsParse) {
    for (const auto& entry : fs::directory_iterator(LEVY_BSDE_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(parse_config(read_text_file(entry.path().string()))) << entry.path();
    }
}

TEST(RunConfigFile, SolveWritesOutputsAndManifest) {
    TempDir dir;
    const auto cfg = write_file(dir.path() / "solve.json", kSolveConfig);
    const auto out = dir.path() / "out";
    ASSERT_EQ(run_config_file(cfg.string(), out.string()), kExitPass);
    for (const char* name : {"solution.csv", "diagnostics.json", "report.json", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(out / name)) << name;
    }
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest["experiment"], "solve");
    EXPECT_EQ(manifest["seed"], 3);
    EXPECT_EQ(manifest["exit_status"], 0);
    EXPECT_EQ(manifest["version"], kVersion);
    EXPECT_EQ(slurp(out / "solution.csv").substr(0, 27), "path,step,field,index,value");
}

TEST(RunConfigFile, BihariLinearBoundIsE) {
    TempDir dir;
    const auto out = dir.path() / "out";
    ASSERT_EQ(run_config_file(std::string(LEVY_BSDE_CONFIG_DIR) + "/bihari_linear.json", out.string()), kExitPass);
    std::istringstream csv(slurp(out / "bihari.csv"));
    std::string header, first;
    std::getline(csv, header);
    std::getline(csv, first);
    EXPECT_EQ(header, "t,bound,in_domain");
    const auto a = first.find(',');
    const auto b = first.find(',', a + 1);
    EXPECT_NEAR(std::stod(first.substr(a + 1, b - a - 1)), std::exp(1.0), 1e-6);
}

TEST(RunConfigFile, MalformedConfigIsError) {
    TempDir dir;
    const auto cfg = write_file(dir.path() / "bad.json", R"({"grid": {"T": -1, "N": 4}, "experiment": {"type": "bihari"}})");
    std::ostringstream err;
    EXPECT_EQ(run_config_file(cfg.string(), (dir.path() / "out").string(), err), kExitError);
    EXPECT_NE(err.str().find("grid"), std::string::npos) << err.str();
    std::ostringstream missing;
    EXPECT_EQ(run_config_file((dir.path() / "nope.json").string(), std::nullopt, missing), kExitError);
}

TEST(RunConfigFile, FailedCheckVerdictExitsTwo) {
    TempDir dir;
    const auto cfg = write_file(dir.path() / "check.json", R"({
      "model": {"d": 1, "k": 1, "a": [0.0], "sigma": [[1.0]]},
      "grid": {"T": 1.0, "N": 10},
      "generator": {"id": "quadratic"},
      "experiment": {"type": "check", "assumptions": ["monotonicity"], "samples": 2000, "radius": 2.0}})");
    const auto out = dir.path() / "out";
    EXPECT_EQ(run_config_file(cfg.string(), out.string()), kExitVerdictFail);
    EXPECT_TRUE(fs::exists(out / "report.json"));
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest["exit_status"], kExitVerdictFail);
}

TEST(RunConfigFile, PassingCheckExitsZero) {
    TempDir dir;
    const auto cfg = write_file(dir.path() / "check.json", R"({
      "model": {"d": 1, "k": 1, "a": [0.0], "sigma": [[1.0]], "atoms": [{"mark": [0.5], "intensity": 1.0}]},
      "grid": {"T": 1.0, "N": 10},
      "generator": {"id": "ylogy_osgood"},
      "experiment": {"type": "check", "assumptions": ["f0", "monotonicity", "gamma", "rho_bounds", "osgood"],
                     "samples": 2000}})");
    EXPECT_EQ(run_config_file(cfg.string(), (dir.path() / "out").string()), kExitPass);
}

TEST(Registry, ListFilter) {
    const auto all = list_registry("");
    EXPECT_EQ(all.size(), 16u);
    const auto some = list_registry("osgood");
    ASSERT_EQ(some.size(), 2u);
    EXPECT_EQ(some[0], "generator ylogy_osgood");
    EXPECT_EQ(some[1], "rho log_osgood");
}

TEST(Binary, RunListVersion) {
    TempDir dir;
    const std::string exe = LEVY_BSDE_CLI_PATH;
    const auto out = dir.path() / "out";
    const std::string run = "\"" + exe + "\" --threads 1 run \"" + std::string(LEVY_BSDE_CONFIG_DIR) +
                            "/bihari_linear.json\" -o \"" + out.string() + "\"";
    EXPECT_EQ(std::system(run.c_str()), 0);
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
    const auto listed = dir.path() / "list.txt";
    EXPECT_EQ(std::system(("\"" + exe + "\" list terminal > \"" + listed.string() + "\"").c_str()), 0);
    EXPECT_NE(slurp(listed).find("terminal jump_indicator"), std::string::npos);
    const auto version = dir.path() / "version.txt";
    EXPECT_EQ(std::system(("\"" + exe + "\" version > \"" + version.string() + "\"").c_str()), 0);
    EXPECT_EQ(slurp(version), std::string("levy_bsde ") + kVersion + "\n");
    const auto bad = write_file(dir.path() / "bad.json", "{");
    const int rc = std::system(("\"" + exe + "\" run \"" + bad.string() + "\" 2> /dev/null").c_str());
    EXPECT_EQ(WEXITSTATUS(rc), 1);
}
