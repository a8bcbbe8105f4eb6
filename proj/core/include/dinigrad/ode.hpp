#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dinigrad {

using OdeState = Eigen::VectorXd;
using OdeRhs = std::function<void(double t, const OdeState& y, OdeState& dydt)>;

struct OdeOptions {
  double rtol = 1e-12;
  double atol = 1e-14;
  double initial_step = 0.0;  // 0 picks a step from the first derivative
  double min_step = 1e-13;    // relative to the span of integration
  std::size_t max_steps = 2'000'000;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

/// Dormand-Prince 5(4) with error control. Integrates from (t0, y0) through
/// the monotone sequence `outputs` (increasing or decreasing), landing on
/// each output time exactly, and returns the state there.
/// Throws StepUnderflowError when the step falls below the minimum.
std::vector<OdeState> dopri5(const OdeRhs& rhs, double t0, OdeState y0, std::span<const double> outputs,
                             const OdeOptions& opts = {}, OdeStats* stats = nullptr);

}  // namespace dinigrad
