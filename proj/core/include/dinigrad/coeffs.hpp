#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dinigrad/grid.hpp"
#include "dinigrad/sphere.hpp"
#include "dinigrad/types.hpp"

namespace dinigrad {

/// A modulus of continuity r -> omega(r) together with the growth exponent
/// kappa (omega(r) r^(kappa-1) nonincreasing) and the smallness budget delta.
///
/// Values for r > 1 are frozen at omega(1).
class Modulus {
 public:
  Modulus() = default;

  /// Closed-form modulus; `fn` is only called on (0, 1].
  static Modulus from_function(std::function<double(double)> fn, double kappa, double delta,
                               std::string label = "closed-form");
  /// Tabulated modulus on increasing radii; interpolated linearly in log r,
  /// made nondecreasing by a running maximum, constant outside the table.
  static Modulus from_table(std::vector<double> radii, std::vector<double> values, double kappa,
                            double delta);

  double operator()(double r) const;
  double kappa() const { return kappa_; }
  double delta() const { return delta_; }
  const std::string& label() const { return label_; }

 private:
  std::function<double(double)> fn_;
  std::vector<double> log_radii_;
  std::vector<double> table_;
  double kappa_ = 0.5;
  double delta_ = 0.1;
  std::string label_;
};

/// Radial profile g(r) = amplitude * (log(e/r))^(-exponent) for r <= 1.
struct GSProfile {
  double amplitude = 0.5;
  double exponent = 0.75;
  double ellipticity_margin = 0.05;  // g must stay above -1 + margin

  double operator()(double r) const;
  /// Exponent kappa for which |g(r)| r^(kappa-1) is nonincreasing on (0,1];
  /// floored at 0.05, where the condition only holds away from r = 1.
  double growth_exponent() const;
};

/// Symmetric coefficient matrix field A(x) on R^n with its modulus and
/// ellipticity bounds. A(x) = I for |x| > 1.
class CoefficientField {
 public:
  using Evaluator = std::function<Mat(const Point& x)>;

  CoefficientField(int n, Evaluator eval, Modulus modulus, double lambda_min, double lambda_max,
                   std::string family);

  int dimension() const { return n_; }
  /// A(x); returns the identity for |x| > 1.
  Mat operator()(const Point& x) const;
  /// A(r theta) for a unit vector theta.
  Mat at(double r, const Point& theta) const;
  const Modulus& modulus() const { return modulus_; }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }
  const std::string& family() const { return family_; }

  /// Radial profile when the field is of rank-one radial type I + g theta theta^T.
  bool is_radial_rank_one() const { return static_cast<bool>(profile_); }
  double profile(double r) const { return profile_ ? (r > 1.0 ? 0.0 : profile_(r)) : 0.0; }
  void set_profile(std::function<double(double)> g) { profile_ = std::move(g); }

 private:
  int n_;
  Evaluator eval_;
  Modulus modulus_;
  double lambda_min_;
  double lambda_max_;
  std::string family_;
  std::function<double(double)> profile_;
};

using CoefficientFieldPtr = std::shared_ptr<const CoefficientField>;

CoefficientFieldPtr make_identity_field(int n, double delta = 0.1);
CoefficientFieldPtr make_gs_field(int n, const GSProfile& profile, double delta = 0.1);
/// General rank-one radial field I + g(r) theta theta^T for a caller profile.
CoefficientFieldPtr make_radial_field(int n, std::function<double(double)> g, double kappa,
                                      double delta, double margin, std::string family);

/// Outcome of the square-Dini test.
struct SquareDiniResult {
  bool finite = false;
  double integral = 0.0;       // int_{r0}^1 omega^2/r dr
  double tail_estimate = 0.0;  // extrapolated int_0^{r0}, infinite when divergent
  double tail_slope = 0.0;     // fitted decay exponent of the dyadic block sums
  std::vector<double> block_sums;
};

/// Integral of omega^2(r)/r over (0,1]: adaptive quadrature on [r0, 1] plus a
/// tail from blocks in t = log(1/r) with doubling lengths. The tail is judged
/// finite when the block sums decay geometrically, i.e. the integrand in t
/// falls off faster than 1/t.
SquareDiniResult square_dini_integral(const Modulus& m, double r0);

/// Worst-case margins of the CoefficientField invariants sampled on
/// grid x rule.
struct FieldCheck {
  double symmetry_defect = 0.0;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double modulus_margin = 0.0;  // min over r <= 1 of omega(r) - sup |A - I|
  double extension_defect = 0.0;
  double monotonicity_defect = 0.0;  // omega decrease or omega r^(kappa-1) increase
  std::vector<double> radii;
  std::vector<double> sup_deviation;  // sup_theta max_ij |a_ij - delta_ij|
  bool ellipticity_ok = true;
  bool passed = true;
  std::vector<std::string> failures;
};

FieldCheck check_field(const CoefficientField& field, const RadialGrid& grid, const SphereRule& rule);

/// omega(r) = running max of max_theta |A(r theta) - I| over the grid.
Modulus estimate_modulus(const CoefficientField& field, const RadialGrid& grid,
                         const SphereRule& rule, double kappa, double delta);

}  // namespace dinigrad
