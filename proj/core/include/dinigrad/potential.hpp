#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dinigrad/grid.hpp"
#include "dinigrad/sphere.hpp"
#include "dinigrad/types.hpp"

namespace dinigrad {

/// Scalar field on R^n \ {0} stored as harmonic coefficients c_idx(r_j) over
/// a radial grid, optionally with the radial derivatives dc_idx/dr.
struct ModalField {
  RadialGridPtr grid;
  HarmonicBasisPtr basis;
  std::vector<double> coeff;  // mode-major: [idx * radii + j]
  std::vector<double> deriv;  // same layout, empty when absent

  ModalField() = default;
  ModalField(RadialGridPtr g, HarmonicBasisPtr b);

  std::size_t modes() const { return basis->size(); }
  std::size_t radii() const { return grid->size(); }
  int dimension() const { return basis->dimension(); }
  bool has_derivative() const { return !deriv.empty(); }

  double& c(std::size_t idx, std::size_t j) { return coeff[idx * radii() + j]; }
  double c(std::size_t idx, std::size_t j) const { return coeff[idx * radii() + j]; }
  double& d(std::size_t idx, std::size_t j) { return deriv[idx * radii() + j]; }
  double d(std::size_t idx, std::size_t j) const { return deriv[idx * radii() + j]; }
  std::span<const double> row(std::size_t idx) const { return {coeff.data() + idx * radii(), radii()}; }
  std::span<const double> drow(std::size_t idx) const { return {deriv.data() + idx * radii(), radii()}; }

  ModalField& operator+=(const ModalField& other);
  ModalField& operator-=(const ModalField& other);
  ModalField& operator*=(double s);
};

ModalField operator+(ModalField a, const ModalField& b);
ModalField operator-(ModalField a, const ModalField& b);
ModalField operator*(double s, ModalField a);

/// Analyzes u(r, theta) on rule x grid. When `radial_derivative` is given the
/// derivative table is analyzed from it, otherwise it stays empty.
ModalField modal_from_function(RadialGridPtr grid, HarmonicBasisPtr basis,
                               const std::function<double(double, const Point&)>& u,
                               const std::function<double(double, const Point&)>& radial_derivative = {});

/// Fills the derivative table by 7-point differentiation in log r.
void differentiate(ModalField& f);

/// Largest absolute coefficient among degrees 0 and 1.
double low_mode_size(const ModalField& f);
/// Zeros degrees 0 and 1 (the P projection in modal form).
void remove_low_modes(ModalField& f);

/// Point values at radius index j on the rule nodes.
SphereSamples sample_values(const ModalField& f, std::size_t j);
/// Gradient at radius index j on the rule nodes; requires derivatives.
std::vector<Point> sample_gradient(const ModalField& f, std::size_t j);

/// Per-radius sphere mean of f^2 (Parseval) and of |grad f|^2.
std::vector<double> sphere_square_mean(const ModalField& f);
std::vector<double> sphere_gradient_square_mean(const ModalField& f);

/// Cartesian gradient components as modal fields on a basis one degree
/// higher, with derivative tables by differentiation.
std::vector<ModalField> gradient_components(const ModalField& f, const HarmonicBasisPtr& raised);

/// A vector field sampled on rule x grid: values[(j * nodes + i) * n + c].
struct VectorSamples {
  RadialGridPtr grid;
  SphereRulePtr rule;
  int n = 0;
  std::vector<double> values;

  VectorSamples() = default;
  VectorSamples(RadialGridPtr g, SphereRulePtr r);
  double& at(std::size_t j, std::size_t i, int c) { return values[(j * rule->size() + i) * n + c]; }
  double at(std::size_t j, std::size_t i, int c) const { return values[(j * rule->size() + i) * n + c]; }
};

/// Per-radius sphere means of |f|^p for p in {1, 2}.
std::vector<double> sphere_power_mean(const VectorSamples& f, int p);

/// Annulus averages over {r_j < |x| < 2 r_j} of a per-radius sphere mean g,
/// weighted by rho^{n-1}. Entries whose annulus leaves the grid are NaN.
std::vector<double> annulus_profile(const RadialGrid& grid, std::span<const double> sphere_means, int n);

/// Index of r on the grid such that 2r is also a node; throws otherwise.
std::size_t annulus_index(const RadialGrid& grid, double r);

/// M_p(f, r) = (mean over the annulus r < |x| < 2r of |f|^p)^(1/p), p in {1, 2}.
double annulus_mean(const ModalField& f, double r, int p);
double annulus_mean(const VectorSamples& f, double r, int p);
/// M_p(grad f, r).
double annulus_gradient_mean(const ModalField& f, double r, int p);
/// M_{1,p} (order 1) or M_{2,p} (order 2). Order 2 needs a basis of degree K+1.
double sobolev_annulus_mean(const ModalField& f, double r, int p, int order,
                            const HarmonicBasisPtr& raised = nullptr);

/// Solves -Lap w = f^perp mode by mode with the exact radial Green kernel.
/// Throws DomainError when f carries degree-0/1 content.
ModalField newtonian_solve_source(const ModalField& f);

/// Solves -Lap w = [div fvec]^perp in the weak sense; only fvec enters the
/// quadratures, through the tables <f.theta, phi> and <f, grad_S phi>.
ModalField newtonian_solve_divergence(const VectorSamples& fvec, const HarmonicBasisPtr& basis);

struct PotentialBoundReport {
  std::vector<double> radii;
  std::vector<double> lhs;
  std::vector<double> rhs;
  double constant = 0.0;  // max lhs/rhs over dyadic radii with rhs > 0
  bool finite = true;
};

/// Fits c in M_{2,2}(w) <= c (r^{-n} int_0^r M(f) rho^{n+1} drho + r^2 int_r^inf M(f) rho^{-1} drho).
PotentialBoundReport verify_source_bound(const ModalField& w, const ModalField& f, const HarmonicBasisPtr& raised);
/// Fits c in M_{1,2}(w) <= c (r^{-n} int_0^r M(f) rho^n drho + r^2 int_r^inf M(f) rho^{-2} drho).
PotentialBoundReport verify_divergence_bound(const ModalField& w, const VectorSamples& f);

}  // namespace dinigrad
