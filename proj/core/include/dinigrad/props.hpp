#pragma once

#include <string>
#include <vector>

#include "dinigrad/scenario.hpp"

namespace dinigrad {

/// One invariant measured by a property suite. The check passes when
/// value <= tolerance * scale, where scale is the configured tolerance scale.
struct PropCheck {
  std::string module;
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string note;
};

struct PropsReport {
  std::vector<PropCheck> checks;
  double tolerance_scale = 1.0;
  std::uint64_t seed = 0;
  bool passed() const;
  /// "module: check (value > tolerance)" for every failed check.
  std::vector<std::string> failures() const;
};

/// Names of the available suites, one per library module.
std::vector<std::string> props_modules();

/// Runs the named suites (all when empty) with the scenario's dimension,
/// seed, tolerance scale and random-system count. Numerical failures inside
/// a suite are recorded as failed checks rather than thrown.
PropsReport run_props(const ScenarioConfig& cfg, const std::vector<std::string>& modules = {});

}  // namespace dinigrad
