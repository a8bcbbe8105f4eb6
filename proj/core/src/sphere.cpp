#include "dinigrad/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dinigrad/quadrature.hpp"

namespace dinigrad {

SphereRule::SphereRule(int n, int max_degree) : n_(n), max_degree_(max_degree) {
  check_dimension(n);
  if (max_degree < 1) throw DomainError("SphereRule: harmonic degree must be >= 1");

  const double two_pi = 2.0 * std::numbers::pi;
  if (n == 2) {
    // Trapezoid on 2(2K+1) points is exact for trigonometric degree <= 4K+1.
    n_azimuth_ = 2 * (2 * max_degree + 1);
    exactness_ = n_azimuth_ - 1;
    nodes_.reserve(n_azimuth_);
    for (int i = 0; i < n_azimuth_; ++i) {
      const double phi = two_pi * i / n_azimuth_;
      nodes_.push_back({std::cos(phi), std::sin(phi), 0.0});
      weights_.push_back(1.0 / n_azimuth_);
    }
    return;
  }

  n_polar_ = 2 * (max_degree + 1);
  n_azimuth_ = 2 * (2 * max_degree + 1);
  exactness_ = std::min(2 * n_polar_ - 1, n_azimuth_ - 1);
  const GaussRule gl = gauss_legendre(n_polar_);
  nodes_.reserve(static_cast<std::size_t>(n_polar_) * n_azimuth_);
  for (int a = 0; a < n_polar_; ++a) {
    const double z = gl.nodes[a];
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int b = 0; b < n_azimuth_; ++b) {
      const double phi = two_pi * b / n_azimuth_;
      nodes_.push_back({s * std::cos(phi), s * std::sin(phi), z});
      weights_.push_back(0.5 * gl.weights[a] / n_azimuth_);
    }
  }
}

SphereRulePtr build_sphere_rule(int n, int max_degree) {
  if (max_degree < 8) throw DomainError("build_sphere_rule: harmonic degree K must be >= 8");
  return std::make_shared<const SphereRule>(n, max_degree);
}

SphereSamples::SphereSamples(SphereRulePtr r, int comps)
    : rule(std::move(r)), components(comps), values(rule->size() * comps, 0.0) {}

SphereSamples::SphereSamples(SphereRulePtr r, std::vector<double> scalar_values)
    : rule(std::move(r)), components(1), values(std::move(scalar_values)) {
  if (values.size() != rule->size()) {
    throw DomainError("SphereSamples: value count does not match node count");
  }
}

std::vector<double> sphere_mean(const SphereSamples& f) {
  std::vector<double> out(f.components, 0.0);
  const auto& w = f.rule->weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (int c = 0; c < f.components; ++c) out[c] += w[i] * f.at(i, c);
  }
  return out;
}

std::vector<double> first_moment(const SphereSamples& f) {
  if (f.components != 1) throw DomainError("first_moment: scalar samples required");
  const int n = f.rule->dimension();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double wf = f.rule->weight(i) * f.values[i];
    const Point& th = f.rule->node(i);
    for (int k = 0; k < n; ++k) out[k] += wf * th[k];
  }
  return out;
}

SphereSamples project_P(const SphereSamples& f) {
  if (f.components != 1) throw DomainError("project_P: scalar samples required");
  const int n = f.rule->dimension();
  const double mean = sphere_mean(f)[0];
  const std::vector<double> moment = first_moment(f);
  SphereSamples out(f.rule, 1);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Point& th = f.rule->node(i);
    double v = mean;
    for (int k = 0; k < n; ++k) v += n * th[k] * moment[k];
    out.values[i] = v;
  }
  return out;
}

SphereSamples perp_part(const SphereSamples& f) {
  SphereSamples out = project_P(f);
  for (std::size_t i = 0; i < f.size(); ++i) out.values[i] = f.values[i] - out.values[i];
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Unnormalized associated Legendre P_l^m(x) for l = m..lmax (no Condon-Shortley phase).
std::vector<double> associated_legendre(int m, int lmax, double x) {
  std::vector<double> p(lmax + 1, 0.0);
  if (m > lmax) return p;
  const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
  double pmm = 1.0;
  for (int i = 1; i <= m; ++i) pmm *= (2.0 * i - 1.0) * s;
  p[m] = pmm;
  if (m + 1 <= lmax) p[m + 1] = x * (2.0 * m + 1.0) * pmm;
  for (int l = m + 2; l <= lmax; ++l) {
    p[l] = ((2.0 * l - 1.0) * x * p[l - 1] - (l + m - 1.0) * p[l - 2]) / (l - m);
  }
  return p;
}

// Mean-square normalization of P_l^m(cos t) * trig(m phi) over S^2.
double sphere_norm(int l, int m) {
  double ratio = 1.0;  // (l-m)!/(l+m)!
  for (int i = l - m + 1; i <= l + m; ++i) ratio /= i;
  return std::sqrt((2.0 * l + 1.0) * ratio * (m > 0 ? 2.0 : 1.0));
}

struct HarmonicValue {
  double value;
  Point grad;
};

HarmonicValue circle_harmonic(int k, int order, const Point& theta) {
  const double phi = std::atan2(theta[1], theta[0]);
  const Point e_phi{-std::sin(phi), std::cos(phi), 0.0};
  if (k == 0) return {1.0, {0.0, 0.0, 0.0}};
  const double c = std::sqrt(2.0);
  const double val = order > 0 ? c * std::cos(k * phi) : c * std::sin(k * phi);
  const double dphi = order > 0 ? -c * k * std::sin(k * phi) : c * k * std::cos(k * phi);
  return {val, {dphi * e_phi[0], dphi * e_phi[1], 0.0}};
}

HarmonicValue sphere_harmonic(int l, int order, const Point& theta) {
  const int m = std::abs(order);
  const double z = std::clamp(theta[2], -1.0, 1.0);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = std::atan2(theta[1], theta[0]);
  const std::vector<double> p = associated_legendre(m, l, z);
  const double plm = p[l];
  const double plm1 = l - 1 >= m ? p[l - 1] : 0.0;
  const double norm = sphere_norm(l, m);

  const double trig = order >= 0 ? std::cos(m * phi) : std::sin(m * phi);
  const double dtrig = order >= 0 ? -m * std::sin(m * phi) : m * std::cos(m * phi);

  HarmonicValue out{};
  out.value = norm * plm * trig;
  if (s < 1e-300) {
    out.grad = {0.0, 0.0, 0.0};
    return out;
  }
  // dP/dtheta = (l z P_l^m - (l+m) P_{l-1}^m) / sin(theta)
  const double dp_dtheta = (l * z * plm - (l + m) * plm1) / s;
  const double d_theta = norm * dp_dtheta * trig;
  const double d_phi_over_s = norm * plm * dtrig / s;
  const Point e_theta{z * std::cos(phi), z * std::sin(phi), -s};
  const Point e_phi{-std::sin(phi), std::cos(phi), 0.0};
  for (int i = 0; i < 3; ++i) out.grad[i] = d_theta * e_theta[i] + d_phi_over_s * e_phi[i];
  return out;
}

}  // namespace

int HarmonicBasis::count(int n, int k) {
  if (k == 0) return 1;
  return n == 2 ? 2 : 2 * k + 1;
}

HarmonicBasis::HarmonicBasis(SphereRulePtr rule, int max_degree)
    : rule_(std::move(rule)), max_degree_(max_degree) {
  if (!rule_) throw DomainError("HarmonicBasis: null rule");
  if (2 * max_degree > rule_->exactness()) {
    throw DomainError("HarmonicBasis: degree exceeds the exactness of the rule");
  }
  const int n = rule_->dimension();
  for (int k = 0; k <= max_degree; ++k) {
    offsets_.push_back(degree_of_.size());
    if (k == 0) {
      degree_of_.push_back(0);
      order_of_.push_back(0);
      continue;
    }
    if (n == 2) {
      degree_of_.insert(degree_of_.end(), {k, k});
      order_of_.insert(order_of_.end(), {1, -1});
    } else {
      degree_of_.push_back(k);
      order_of_.push_back(0);
      for (int m = 1; m <= k; ++m) {
        degree_of_.insert(degree_of_.end(), {k, k});
        order_of_.insert(order_of_.end(), {m, -m});
      }
    }
  }
  offsets_.push_back(degree_of_.size());

  const std::size_t nodes = rule_->size();
  values_.resize(degree_of_.size() * nodes);
  grads_.resize(degree_of_.size() * nodes);
  for (std::size_t idx = 0; idx < degree_of_.size(); ++idx) {
    for (std::size_t i = 0; i < nodes; ++i) {
      const HarmonicValue hv = n == 2 ? circle_harmonic(degree_of_[idx], order_of_[idx], rule_->node(i))
                                      : sphere_harmonic(degree_of_[idx], order_of_[idx], rule_->node(i));
      values_[idx * nodes + i] = hv.value;
      grads_[idx * nodes + i] = hv.grad;
    }
  }
}

double HarmonicBasis::eigenvalue(std::size_t idx) const {
  const int k = degree_of_[idx];
  return static_cast<double>(k) * (k + dimension() - 2);
}

double HarmonicBasis::evaluate(std::size_t idx, const Point& theta) const {
  return dimension() == 2 ? circle_harmonic(degree_of_[idx], order_of_[idx], theta).value
                          : sphere_harmonic(degree_of_[idx], order_of_[idx], theta).value;
}

HarmonicBasisPtr build_harmonic_basis(SphereRulePtr rule, int max_degree) {
  return std::make_shared<const HarmonicBasis>(std::move(rule), max_degree);
}

std::vector<double> harmonic_analyze(const SphereSamples& f, const HarmonicBasis& basis) {
  if (f.components != 1) throw DomainError("harmonic_analyze: scalar samples required");
  if (f.rule != basis.rule()) throw DomainError("harmonic_analyze: samples and basis use different rules");
  const auto& w = f.rule->weights();
  std::vector<double> c(basis.size(), 0.0);
  for (std::size_t idx = 0; idx < basis.size(); ++idx) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f.values[i] * basis.value(idx, i);
    c[idx] = s;
  }
  return c;
}

SphereSamples harmonic_synthesize(std::span<const double> coeffs, const HarmonicBasis& basis) {
  if (coeffs.size() != basis.size()) throw DomainError("harmonic_synthesize: coefficient count mismatch");
  SphereSamples out(basis.rule(), 1);
  for (std::size_t idx = 0; idx < basis.size(); ++idx) {
    const double c = coeffs[idx];
    if (c == 0.0) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += c * basis.value(idx, i);
  }
  return out;
}

}  // namespace dinigrad
