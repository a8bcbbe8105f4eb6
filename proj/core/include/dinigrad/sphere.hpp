#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "dinigrad/types.hpp"

namespace dinigrad {

/// Quadrature on S^{n-1} normalized as a mean: weights sum to one.
///
/// Circle: equispaced trapezoid. Sphere: Gauss-Legendre in cos(polar angle)
/// times equispaced azimuth. Node counts are twice the minimum needed for
/// exactness on harmonics of degree 2K, so the rule is exact through degree
/// 4K+1.
class SphereRule {
 public:
  SphereRule(int n, int max_degree);

  int dimension() const { return n_; }
  int max_degree() const { return max_degree_; }
  /// Highest polynomial degree integrated exactly.
  int exactness() const { return exactness_; }
  std::size_t size() const { return nodes_.size(); }

  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const Point& node(std::size_t i) const { return nodes_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// Polar/azimuth index layout for n = 3; n_polar() == 1 for the circle.
  int n_polar() const { return n_polar_; }
  int n_azimuth() const { return n_azimuth_; }

 private:
  int n_;
  int max_degree_;
  int exactness_;
  int n_polar_ = 1;
  int n_azimuth_ = 0;
  std::vector<Point> nodes_;
  std::vector<double> weights_;
};

using SphereRulePtr = std::shared_ptr<const SphereRule>;

SphereRulePtr build_sphere_rule(int n, int max_degree);

/// Values of a scalar (components == 1) or vector field at the rule nodes,
/// stored node-major.
struct SphereSamples {
  SphereRulePtr rule;
  int components = 1;
  std::vector<double> values;

  SphereSamples() = default;
  SphereSamples(SphereRulePtr r, int comps);
  SphereSamples(SphereRulePtr r, std::vector<double> scalar_values);

  std::size_t size() const { return rule ? rule->size() : 0; }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double& at(std::size_t node, int comp) { return values[node * components + comp]; }
  double at(std::size_t node, int comp) const { return values[node * components + comp]; }
};

/// Samples f(theta) at every node of the rule.
template <class F>
SphereSamples sample_on(const SphereRulePtr& rule, F&& f) {
  SphereSamples s(rule, 1);
  for (std::size_t i = 0; i < rule->size(); ++i) s.values[i] = f(rule->node(i));
  return s;
}

/// Weighted mean, one entry per component.
std::vector<double> sphere_mean(const SphereSamples& f);

/// Mean of f(theta) theta_k for each k; scalar samples only.
std::vector<double> first_moment(const SphereSamples& f);

/// Projection onto span{1, theta_1, ..., theta_n}.
SphereSamples project_P(const SphereSamples& f);

/// f - P f.
SphereSamples perp_part(const SphereSamples& f);

/// Real orthonormal spherical harmonics tabulated on a rule, with their
/// surface gradients. Orthonormal in the mean inner product, so phi_{0,1} = 1.
///
/// Flat index layout: degree k occupies [offset(k), offset(k) + count(k)).
/// Circle: {1}, then sqrt(2) cos(k phi), sqrt(2) sin(k phi).
/// Sphere: m = 0, then (cos m phi, sin m phi) pairs for m = 1..k.
class HarmonicBasis {
 public:
  HarmonicBasis(SphereRulePtr rule, int max_degree);

  const SphereRulePtr& rule() const { return rule_; }
  int dimension() const { return rule_->dimension(); }
  int max_degree() const { return max_degree_; }
  std::size_t size() const { return degree_of_.size(); }

  /// Dimension N(k) of the degree-k harmonic space.
  static int count(int n, int k);
  int count(int k) const { return count(dimension(), k); }
  std::size_t offset(int k) const { return offsets_[k]; }
  int degree(std::size_t idx) const { return degree_of_[idx]; }
  /// k (k + n - 2): minus the Laplace-Beltrami eigenvalue.
  double eigenvalue(std::size_t idx) const;

  /// phi_idx at node i.
  double value(std::size_t idx, std::size_t node) const { return values_[idx * rule_->size() + node]; }
  /// Surface gradient of phi_idx at node i (a tangent vector of R^n).
  const Point& surface_gradient(std::size_t idx, std::size_t node) const {
    return grads_[idx * rule_->size() + node];
  }

  /// Evaluates phi_idx at an arbitrary unit vector.
  double evaluate(std::size_t idx, const Point& theta) const;

 private:
  SphereRulePtr rule_;
  int max_degree_;
  std::vector<std::size_t> offsets_;
  std::vector<int> degree_of_;
  std::vector<int> order_of_;  // signed azimuthal order: +m cos, -m sin
  std::vector<double> values_;
  std::vector<Point> grads_;
};

using HarmonicBasisPtr = std::shared_ptr<const HarmonicBasis>;

HarmonicBasisPtr build_harmonic_basis(SphereRulePtr rule, int max_degree);

/// c_idx = <f, phi_idx> in the rule inner product.
std::vector<double> harmonic_analyze(const SphereSamples& f, const HarmonicBasis& basis);

/// Inverse of harmonic_analyze on band-limited data.
SphereSamples harmonic_synthesize(std::span<const double> coeffs, const HarmonicBasis& basis);

}  // namespace dinigrad
