#pragma once

#include <string>
#include <vector>

#include "dinigrad/coeffs.hpp"
#include "dinigrad/grid.hpp"
#include "dinigrad/sphere.hpp"
#include "dinigrad/types.hpp"

namespace dinigrad {

/// Sphere average of A(r theta) - n (A(r theta) theta) theta^T; zero for r > 1.
Mat reduced_matrix(const CoefficientField& field, double r, const SphereRule& rule);

/// Reduced matrices and growth rates mu[-R] on a radial grid.
struct ReducedCurve {
  RadialGridPtr grid;
  std::vector<Mat> R;
  std::vector<double> mu;  // mu[-R(r_j)]
};

ReducedCurve reduced_curve(const CoefficientField& field, RadialGridPtr grid, const SphereRule& rule);

/// Reduced curve from a rate function mu(r) alone (R = -mu I); used by tests
/// and by synthetic systems.
ReducedCurve reduced_curve_from_rate(int n, RadialGridPtr grid, const std::function<double(double)>& mu);

/// E(r) = exp int_r^1 mu[-R(rho)] drho/rho on the grid, E = 1 for r >= 1.
class EstimatorCurve {
 public:
  EstimatorCurve() = default;
  EstimatorCurve(RadialGridPtr grid, std::vector<double> mu, std::vector<double> log_e);

  const RadialGridPtr& grid() const { return grid_; }
  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& log_values() const { return log_e_; }
  double at_node(std::size_t j) const;

  /// E(r) for any r > 0: log-linear interpolation inside the grid,
  /// extrapolation with the last rate below it, 1 above r = 1.
  double operator()(double r) const;
  /// Time-side estimator: value at t = -log r.
  double time_value(double t) const { return (*this)(std::exp(-t)); }
  /// True when r lies below the smallest grid radius.
  bool extrapolated(double r) const;

 private:
  RadialGridPtr grid_;
  std::vector<double> mu_;
  std::vector<double> log_e_;
};

/// Integrates the rate in log rho with 8-point cell quadrature.
EstimatorCurve estimator_curve(const ReducedCurve& rc);

/// Closed form of E for the log-power radial profile.
double gs_estimator_closed_form(int n, double amplitude, double exponent, double r);

struct RegularityReport {
  double lambda = 0.5;
  double r0 = 0.0;  // both monotonicity conditions hold for grid radii <= r0
  bool holds_everywhere = false;
  double worst_rate = 0.0;  // max |mu| below r0
  std::vector<std::string> failures;
};

/// Largest r0 such that E r^{-lambda} is decreasing and E r^{lambda} is
/// increasing on grid radii r <= r0.
RegularityReport check_regularity(const EstimatorCurve& ec, double lambda);

}  // namespace dinigrad
