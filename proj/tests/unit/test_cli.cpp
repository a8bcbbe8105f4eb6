#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "dinigrad/props.hpp"

namespace fs = std::filesystem;
using dinigrad::cli::run;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "dinigrad_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "scenario.json";
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "dinigrad");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(call({"--help"}).code, 0);
  EXPECT_EQ(call({}).code, 2);
  EXPECT_EQ(call({"frobnicate"}).code, 2);
  EXPECT_EQ(call({"verify", "--no-such-flag"}).code, 2);
  EXPECT_EQ(call({"verify", "--threads", "0"}).code, 2);
}

TEST(Cli, EstimateIdentityHasUnitEstimator) {
  const fs::path d = scratch("estimate_identity");
  const Result r = call({"estimate", "--out", d.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(d / "estimator.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "r,R_11,R_12,R_21,R_22,mu,E");
  int rows = 0;
  while (std::getline(csv, line)) {
    EXPECT_NEAR(std::stod(line.substr(line.rfind(',') + 1)), 1.0, 1e-13);
    ++rows;
  }
  EXPECT_GT(rows, 100);
  EXPECT_TRUE(fs::exists(d / "manifest.json"));
}

TEST(Cli, EstimateGrowthAndDecay) {
  for (double amp : {0.5, -0.5}) {
    const fs::path d = scratch(amp > 0 ? "estimate_growth" : "estimate_decay");
    const std::string cfg = write_config(
        d, R"({"field": {"family": "gilbarg-serrin", "amplitude": )" + std::to_string(amp) + "}}");
    ASSERT_EQ(call({"estimate", "--config", cfg, "--out", d.string()}).code, 0);
    std::istringstream csv(slurp(d / "estimator.csv"));
    std::string line, first;
    std::getline(csv, line);
    std::getline(csv, first);
    const double e0 = std::stod(first.substr(first.rfind(',') + 1));
    if (amp > 0) EXPECT_GT(e0, 2.0);
    else EXPECT_LT(e0, 0.5);
  }
}

TEST(Cli, VerifyIdentityPassesWithFlatRatio) {
  const fs::path d = scratch("verify_identity");
  const Result r = call({"verify", "--out", d.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(d / "ratio_report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "j,r,M2_grad,E,ratio,verdict");
  EXPECT_NE(csv.find(",1.128379"), std::string::npos);
  for (const char* f : {"trajectories.csv", "field_snapshot.csv", "estimator.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(d / f)) << f;
  const std::string manifest = slurp(d / "manifest.json");
  for (const char* key : {"\"config\"", "\"tolerances\"", "\"fitted_constants\"", "\"contraction\"", "\"seed\""})
    EXPECT_NE(manifest.find(key), std::string::npos) << key;
}

TEST(Cli, VerifyIsByteIdenticalAcrossRunsAndThreads) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const std::string cfg =
      write_config(a, R"({"field": {"family": "gilbarg-serrin", "amplitude": 0.2},
                          "boundary": [{"degree": 1, "index": 0, "weight": 1}, {"degree": 2, "index": 1, "weight": 0.5}]})");
  ASSERT_EQ(call({"verify", "--config", cfg, "--out", a.string(), "--threads", "1"}).code, 0);
  ASSERT_EQ(call({"verify", "--config", cfg, "--out", b.string(), "--threads", "3"}).code, 0);
  for (const char* f : {"ratio_report.csv", "trajectories.csv", "field_snapshot.csv", "estimator.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, NonSquareDiniProfileIsRefused) {
  const fs::path d = scratch("refuse");
  const std::string cfg = write_config(d, R"({"field": {"family": "gilbarg-serrin", "exponent": 0.4}})");
  const Result r = call({"verify", "--config", cfg, "--out", d.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("not square-Dini"), std::string::npos);
  EXPECT_EQ(call({"sharpness", "--config", cfg, "--out", d.string()}).code, 2);
  EXPECT_FALSE(fs::exists(d / "ratio_report.csv"));
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  const fs::path d = scratch("config_errors");
  EXPECT_EQ(call({"verify", "--config", write_config(d, R"({"unknown": true})")}).code, 2);
  EXPECT_EQ(call({"estimate", "--config", write_config(d, "{broken")}).code, 2);
  EXPECT_EQ(call({"props", "--config", (d / "missing.json").string()}).code, 2);
}

TEST(Cli, ContractionFailureExitsWithThree) {
  const fs::path d = scratch("contraction");
  const std::string cfg = write_config(d, R"({"field": {"family": "gilbarg-serrin", "amplitude": 0.5},
                                            "solver": {"fixed_point_max_iter": 3}})");
  const Result r = call({"verify", "--config", cfg, "--out", d.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("numerical failure"), std::string::npos);
}

TEST(Cli, VerdictFailureExitsWithOne) {
  const fs::path d = scratch("verdict");
  const std::string cfg = write_config(d, R"({"tolerances": {"sharpness_drift": 1e-30},
                                            "field": {"family": "gilbarg-serrin", "amplitude": 0.5}})");
  EXPECT_EQ(call({"sharpness", "--config", cfg, "--out", d.string()}).code, 1);
}

TEST(Cli, SharpnessOnGrowthProfilePasses) {
  const fs::path d = scratch("sharpness");
  const std::string cfg = write_config(d, R"({"field": {"family": "gilbarg-serrin", "amplitude": 0.5}})");
  const Result r = call({"sharpness", "--config", cfg, "--out", d.string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(slurp(d / "sharpness.csv").substr(0, 11), "r,v,E,ratio");
}

TEST(Cli, PropsDefaultPassesAndTightenedSweepNamesModules) {
  const fs::path d = scratch("props");
  const Result ok = call({"props", "--out", d.string()});
  EXPECT_EQ(ok.code, 0) << ok.out << ok.err;
  EXPECT_NE(slurp(d / "props.csv").find("module,check,value,tolerance,verdict"), std::string::npos);

  const std::string cfg = write_config(d, R"({"props": {"tolerance_scale": 1e-6, "random_systems": 2}})");
  const Result tight = call({"props", "--config", cfg, "--out", d.string()});
  EXPECT_EQ(tight.code, 1);
  for (const char* module : {"estimator:", "potential:", "pipeline:"})
    EXPECT_NE(tight.err.find(module), std::string::npos) << module << "\n" << tight.err;
}

TEST(Cli, PropsSeedIsRecordedAndSuitesSelectable) {
  const fs::path d = scratch("props_seed");
  const Result r = call({"props", "--suite", "sphere", "--suite", "dynsys", "--seed", "1234", "--out", d.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(d / "manifest.json").find("1234"), std::string::npos);
  const std::string csv = slurp(d / "props.csv");
  EXPECT_EQ(csv.find("pipeline,"), std::string::npos);
  EXPECT_EQ(call({"props", "--suite", "nonsense", "--out", d.string()}).code, 2);
  EXPECT_EQ(dinigrad::props_modules().size(), 6u);
}
