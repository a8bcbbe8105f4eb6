#include <gtest/gtest.h>

#include <sstream>

#include "dinigrad/report.hpp"
#include "dinigrad/scenario.hpp"

using namespace dinigrad;

TEST(Scenario, EmptyDocumentGivesDefaults) {
  for (const std::string& text : {std::string(""), std::string("  \n"), std::string("{}")}) {
    const ScenarioConfig c = parse_scenario(text);
    EXPECT_EQ(c.dimension, 2);
    EXPECT_EQ(c.field.family, "identity");
    EXPECT_EQ(c.pipeline.harmonic_degree, 8);
    EXPECT_EQ(c.pipeline.per_octave, 20);
    EXPECT_EQ(c.j_min, 6);
    EXPECT_EQ(c.j_max, 14);
    EXPECT_DOUBLE_EQ(c.ratio_bound, 3.0);
    ASSERT_EQ(c.boundary.size(), 1u);
    EXPECT_EQ(c.boundary[0].degree, 1);
  }
}

TEST(Scenario, ParsesEveryKey) {
  const ScenarioConfig c = parse_scenario(R"({
    "name": "x", "dimension": 3,
    "field": {"family": "gilbarg-serrin", "amplitude": -0.5, "exponent": 0.6, "margin": 0.1, "delta": 0.2},
    "grid": {"per_octave": 12, "lo_octave": -30, "hi_octave": 4},
    "harmonic_degree": 6,
    "solver": {"block_tol": 1e-11, "block_max_iter": 50, "fixed_point_tol": 1e-8, "fixed_point_max_iter": 30,
               "omega_floor": 1e-10},
    "boundary": [{"degree": 2, "index": 4, "weight": 2.5}],
    "levels": {"j_min": 4, "j_max": 12},
    "tolerances": {"ratio_bound": 4, "sharpness_drift": 0.05},
    "regularity_lambda": 0.4, "square_dini_r0": 0.01,
    "props": {"tolerance_scale": 0.5, "random_systems": 7},
    "seed": 99, "threads": 3})");
  EXPECT_EQ(c.name, "x");
  EXPECT_EQ(c.dimension, 3);
  EXPECT_DOUBLE_EQ(c.field.amplitude, -0.5);
  EXPECT_DOUBLE_EQ(c.field.delta, 0.2);
  EXPECT_EQ(c.pipeline.lo_octave, -30);
  EXPECT_EQ(c.pipeline.fixed_point_max_iter, 30);
  EXPECT_EQ(c.boundary[0].index, 4);
  EXPECT_EQ(c.j_max, 12);
  EXPECT_DOUBLE_EQ(c.sharpness_tolerance, 0.05);
  EXPECT_EQ(c.props_random_systems, 7);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.threads, 3);
}

TEST(Scenario, CanonicalJsonRoundTrips) {
  ScenarioConfig c = parse_scenario(R"({"dimension": 3, "field": {"family": "gilbarg-serrin"}, "seed": 5})");
  const std::string text = scenario_to_json(c);
  const ScenarioConfig d = parse_scenario(text);
  EXPECT_EQ(scenario_to_json(d), text);
  EXPECT_EQ(d.dimension, 3);
  EXPECT_EQ(d.seed, 5u);
}

TEST(Scenario, RejectsUnknownKeysWithTheirPath) {
  try {
    parse_scenario(R"({"field": {"family": "identity", "amplitud": 0.5}})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("field.amplitud"), std::string::npos);
  }
  EXPECT_THROW(parse_scenario(R"({"extra": 1})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"boundary": [{"degree": 1, "phase": 0}]})"), ConfigError);
}

TEST(Scenario, RejectsWrongTypesAndRanges) {
  EXPECT_THROW(parse_scenario(R"({"dimension": "two"})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"dimension": 2.5})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"dimension": 4})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"field": {"family": "random"}})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"field": {"amplitude": -0.99}})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"boundary": [{"degree": 9}]})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"boundary": [{"degree": 1, "index": 2}]})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"levels": {"j_min": 8, "j_max": 8}})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"grid": {"lo_octave": -10}})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"seed": -1})"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"threads": 0})"), ConfigError);
  EXPECT_THROW(parse_scenario("{not json"), ConfigError);
  EXPECT_THROW(parse_scenario("[1, 2]"), ConfigError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST(Scenario, BuildsTheNamedField) {
  ScenarioConfig c;
  EXPECT_EQ(build_field(c)->family(), "identity");
  c.field.family = "gilbarg-serrin";
  c.dimension = 3;
  const CoefficientFieldPtr f = build_field(c);
  EXPECT_EQ(f->dimension(), 3);
  EXPECT_NEAR(f->profile(0.01), scenario_profile(c)(0.01), 0.0);
}

TEST(Report, SeventeenSignificantDigits) {
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
  EXPECT_EQ(format_real(1.0), "1");
  EXPECT_EQ(format_real(-2.5e-300), "-2.5e-300");
  EXPECT_EQ(format_real(1.0 / 3.0), "0.33333333333333331");
}

TEST(Report, RatioCsvLayout) {
  RatioReport rep;
  rep.rows.push_back({6, 0.015625, 1.5, 1.25, 1.2, true});
  rep.rows.push_back({7, 0.0078125, 1.0, 1.0, 1.0, false});
  std::ostringstream os;
  write_ratio_csv(os, rep);
  EXPECT_EQ(os.str(), "j,r,M2_grad,E,ratio,verdict\n6,0.015625,1.5,1.25,1.2,PASS\n7,0.0078125,1,1,1,FAIL\n");
}

TEST(Report, TrajectoryAndSnapshotHeaders) {
  BlockSolution sol;
  sol.t = {0.0, 0.5};
  Vec a(2), b(2);
  a << 1, 2;
  b << 3, 4;
  sol.phi = {a, b};
  sol.psi = {b, a};
  std::ostringstream os;
  write_trajectories_csv(os, sol);
  EXPECT_EQ(os.str(), "t,phi_1,phi_2,psi_1,psi_2\n0,1,2,3,4\n0.5,3,4,1,2\n");

  const RadialGridPtr grid = make_radial_grid(-1, 0, 2);
  ModalField f(grid, build_harmonic_basis(build_sphere_rule(2, 8), 1));
  f.c(2, 2) = 0.25;
  std::ostringstream snap;
  write_field_snapshot_csv(snap, f);
  const std::string s = snap.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "r,k,m,coefficient");
  EXPECT_NE(s.find("1,1,1,0.25\n"), std::string::npos);
}

TEST(Report, EstimatorCsvColumns) {
  const RadialGridPtr grid = make_radial_grid(-2, 0, 2);
  const ReducedCurve rc = reduced_curve(*make_identity_field(3), grid, *build_sphere_rule(3, 8));
  std::ostringstream os;
  write_estimator_csv(os, rc, estimator_curve(rc));
  std::string header;
  std::getline(std::istringstream(os.str()) >> std::ws, header);
  EXPECT_EQ(header, "r,R_11,R_12,R_13,R_21,R_22,R_23,R_31,R_32,R_33,mu,E");
}

TEST(Report, ManifestIsSortedAndStable) {
  Manifest a, b;
  a.set("z", "k", 1.5);
  a.set("a", "list", std::vector<double>{1.0, 2.0});
  a.set("a", "flag", true);
  a.set("a", "inf", std::numeric_limits<double>::infinity());
  b.set("a", "inf", std::numeric_limits<double>::infinity());
  b.set("a", "flag", true);
  b.set("a", "list", std::vector<double>{1.0, 2.0});
  b.set("z", "k", 1.5);
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_LT(a.dump().find("\"a\""), a.dump().find("\"z\""));
  EXPECT_NE(a.dump().find("\"inf\""), std::string::npos);
}
