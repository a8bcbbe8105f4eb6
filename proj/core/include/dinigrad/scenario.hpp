#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dinigrad/coeffs.hpp"
#include "dinigrad/pipeline.hpp"

namespace dinigrad {

/// Coefficient family and its parameters.
struct FieldConfig {
  std::string family = "identity";  // identity | gilbarg-serrin
  double amplitude = 0.5;           // g = amplitude (log(e/r))^(-exponent)
  double exponent = 0.75;
  double margin = 0.05;             // ellipticity margin: g > -1 + margin
  double delta = 0.1;               // smallness budget in the Y-norm
};

/// A complete run description. Every field has a default, so an empty
/// document is a valid scenario (identity field, n = 2, boundary x_1).
struct ScenarioConfig {
  std::string name = "scenario";
  int dimension = 2;
  FieldConfig field;
  PipelineOptions pipeline;
  std::vector<BoundaryMode> boundary{{1, 0, 1.0}};
  int j_min = 6;
  int j_max = 14;
  double ratio_bound = 3.0;
  double sharpness_tolerance = 0.1;
  double regularity_lambda = 0.5;
  double square_dini_r0 = 1e-3;
  double props_tolerance_scale = 1.0;
  int props_random_systems = 20;
  std::uint64_t seed = 20240611;
  int threads = 1;
};

/// Parses a JSON scenario. Unknown keys, wrong types and out-of-range values
/// raise ConfigError with the offending key path.
ScenarioConfig parse_scenario(const std::string& json_text);

/// Reads and parses a scenario file; an empty file yields the defaults.
ScenarioConfig load_scenario(const std::string& path);

/// Canonical JSON of a scenario (sorted keys, every field present).
std::string scenario_to_json(const ScenarioConfig& cfg);

/// Builds the coefficient field named by the scenario.
CoefficientFieldPtr build_field(const ScenarioConfig& cfg);

/// The profile described by a Gilbarg-Serrin scenario.
GSProfile scenario_profile(const ScenarioConfig& cfg);

}  // namespace dinigrad
