#include "dinigrad/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dinigrad/linalg.hpp"
#include "dinigrad/quadrature.hpp"

namespace dinigrad {

Modulus Modulus::from_function(std::function<double(double)> fn, double kappa, double delta,
                               std::string label) {
  if (!(kappa > 0.0 && kappa <= 1.0)) throw DomainError("Modulus: kappa must lie in (0, 1]");
  if (!(delta > 0.0)) throw DomainError("Modulus: delta must be positive");
  Modulus m;
  m.fn_ = std::move(fn);
  m.kappa_ = kappa;
  m.delta_ = delta;
  m.label_ = std::move(label);
  return m;
}

Modulus Modulus::from_table(std::vector<double> radii, std::vector<double> values, double kappa,
                            double delta) {
  if (radii.size() != values.size() || radii.empty()) throw DomainError("Modulus: malformed table");
  Modulus m;
  m.kappa_ = kappa;
  m.delta_ = delta;
  m.label_ = "tabulated";
  double running = 0.0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (i > 0 && !(radii[i] > radii[i - 1])) throw DomainError("Modulus: radii must increase");
    running = std::max(running, values[i]);
    m.log_radii_.push_back(std::log(radii[i]));
    m.table_.push_back(running);
  }
  return m;
}

double Modulus::operator()(double r) const {
  const double rr = std::min(r, 1.0);
  if (fn_) return fn_(rr);
  if (table_.empty()) return 0.0;
  const double x = std::log(rr);
  if (x <= log_radii_.front()) return table_.front();
  if (x >= log_radii_.back()) return table_.back();
  const auto it = std::upper_bound(log_radii_.begin(), log_radii_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - log_radii_.begin());
  const double w = (x - log_radii_[i - 1]) / (log_radii_[i] - log_radii_[i - 1]);
  return (1.0 - w) * table_[i - 1] + w * table_[i];
}

double GSProfile::operator()(double r) const {
  if (r > 1.0) return 0.0;
  return amplitude * std::pow(1.0 - std::log(r), -exponent);
}

double GSProfile::growth_exponent() const { return std::clamp(1.0 - exponent, 0.05, 0.5); }

// ---------------------------------------------------------------------------

CoefficientField::CoefficientField(int n, Evaluator eval, Modulus modulus, double lambda_min,
                                   double lambda_max, std::string family)
    : n_(n),
      eval_(std::move(eval)),
      modulus_(std::move(modulus)),
      lambda_min_(lambda_min),
      lambda_max_(lambda_max),
      family_(std::move(family)) {
  check_dimension(n);
  if (!(lambda_min > 0.0) || lambda_max < lambda_min) {
    throw DomainError("CoefficientField: ellipticity bounds must satisfy 0 < lambda_min <= lambda_max");
  }
}

Mat CoefficientField::operator()(const Point& x) const {
  const double r = std::sqrt(dot(x, x, n_));
  if (r > 1.0) return Mat::Identity(n_, n_);
  return eval_(x);
}

Mat CoefficientField::at(double r, const Point& theta) const {
  if (r > 1.0) return Mat::Identity(n_, n_);
  return eval_({r * theta[0], r * theta[1], r * theta[2]});
}

CoefficientFieldPtr make_identity_field(int n, double delta) {
  check_dimension(n);
  Modulus m = Modulus::from_function([](double) { return 1e-15; }, 0.5, delta, "identity");
  auto field = std::make_shared<CoefficientField>(
      n, [n](const Point&) -> Mat { return Mat::Identity(n, n); }, std::move(m), 1.0, 1.0, "identity");
  field->set_profile([](double) { return 0.0; });
  return field;
}

namespace {

CoefficientFieldPtr build_radial_field(int n, std::function<double(double)> g, Modulus modulus,
                                       double margin, std::string family) {
  check_dimension(n);
  double g_min = 0.0;
  double g_max = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double v = g(std::exp(-0.25 * i));
    if (!std::isfinite(v)) throw DomainError("radial field: profile is not finite");
    g_min = std::min(g_min, v);
    g_max = std::max(g_max, v);
  }
  if (g_min <= -1.0 + margin) {
    throw DomainError("radial field: 1 + g(r) drops below the ellipticity margin");
  }
  auto field = std::make_shared<CoefficientField>(
      n,
      [n, g](const Point& x) -> Mat {
        const double r = std::sqrt(dot(x, x, n));
        Mat a = Mat::Identity(n, n);
        if (r == 0.0) return a;
        const double gr = g(r);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) a(i, j) += gr * x[i] * x[j] / (r * r);
        return a;
      },
      std::move(modulus), std::min(1.0, 1.0 + g_min), std::max(1.0, 1.0 + g_max), std::move(family));
  field->set_profile(std::move(g));
  return field;
}

}  // namespace

CoefficientFieldPtr make_radial_field(int n, std::function<double(double)> g, double kappa,
                                      double delta, double margin, std::string family) {
  // Running sup of |g| over a geometric sweep toward the origin.
  auto sup_abs = [g](double r) {
    double s = std::abs(g(r));
    for (double rho = 0.5 * r; rho > r * 1e-12; rho *= 0.5) s = std::max(s, std::abs(g(rho)));
    return s;
  };
  Modulus m = Modulus::from_function(sup_abs, kappa, delta, family);
  return build_radial_field(n, std::move(g), std::move(m), margin, std::move(family));
}

CoefficientFieldPtr make_gs_field(int n, const GSProfile& profile, double delta) {
  if (profile.exponent <= 0.0) throw DomainError("GS profile: exponent must be positive");
  const GSProfile p = profile;
  // |g| is nondecreasing in r for the log-power family, so it is its own modulus.
  Modulus m = Modulus::from_function([p](double r) { return std::abs(p(r)); }, p.growth_exponent(), delta,
                                     "gilbarg-serrin");
  return build_radial_field(n, [p](double r) { return p(r); }, std::move(m), p.ellipticity_margin,
                            "gilbarg-serrin");
}

// ---------------------------------------------------------------------------

SquareDiniResult square_dini_integral(const Modulus& m, double r0) {
  if (!(r0 > 0.0 && r0 < 1.0)) throw DomainError("square_dini_integral: r0 must lie in (0, 1)");
  // In t = log(1/r) the integrand is omega(e^{-t})^2 on [0, inf).
  auto integrand = [&m](double t) {
    const double w = m(std::exp(-t));
    return w * w;
  };

  // Monotonicity: omega nondecreasing in r means nonincreasing in t.
  double prev = integrand(0.0);
  for (double t = 0.01; t < 690.0; t *= 1.05) {
    const double cur = integrand(t);
    if (cur > prev * (1.0 + 1e-12) + 1e-300) throw DomainError("square_dini_integral: modulus is not monotone");
    prev = cur;
  }

  SquareDiniResult res;
  const double t0 = -std::log(r0);
  res.integral = integrate_adaptive(integrand, 0.0, t0, 1e-13);

  // Dyadic blocks [2^j, 2^{j+1}] in t up to t = 512.
  for (int j = 0; j < 9; ++j) {
    const double a = std::ldexp(1.0, j);
    res.block_sums.push_back(integrate_gl(integrand, a, 2.0 * a, 32, 10));
  }
  const std::size_t nb = res.block_sums.size();
  const double b1 = res.block_sums[nb - 2];
  const double b2 = res.block_sums[nb - 1];
  // A modulus below 1e-12 everywhere on the tail is treated as vanishing.
  if (b2 <= 256.0 * 1e-24) {
    res.finite = true;
    res.tail_slope = std::numeric_limits<double>::infinity();
    res.tail_estimate = 0.0;
    return res;
  }
  // Block sums of t^{-p} scale by 2^{1-p}.
  res.tail_slope = 1.0 - std::log2(b2 / b1);
  res.finite = res.tail_slope > 1.005;
  if (!res.finite) {
    res.tail_estimate = std::numeric_limits<double>::infinity();
    return res;
  }
  const double q = std::exp2(1.0 - res.tail_slope);
  const double t_end = 512.0;
  const double direct = t0 < t_end ? integrate_gl(integrand, t0, t_end, 256, 10) : 0.0;
  res.tail_estimate = direct + b2 * q / (1.0 - q);
  return res;
}

FieldCheck check_field(const CoefficientField& field, const RadialGrid& grid, const SphereRule& rule) {
  const int n = field.dimension();
  if (rule.dimension() != n) throw DomainError("check_field: rule dimension mismatch");
  FieldCheck rep;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  rep.max_eigenvalue = -std::numeric_limits<double>::infinity();
  rep.modulus_margin = std::numeric_limits<double>::infinity();
  const Modulus& om = field.modulus();
  double prev_omega = -1.0;
  double prev_scaled = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double r = grid.r(j);
    double sup_dev = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const Mat a = field.at(r, rule.node(i));
      rep.symmetry_defect = std::max(rep.symmetry_defect, max_abs_entry(a - a.transpose()));
      const Vec ev = symmetric_eigenvalues(a);
      rep.min_eigenvalue = std::min(rep.min_eigenvalue, ev(0));
      rep.max_eigenvalue = std::max(rep.max_eigenvalue, ev(n - 1));
      sup_dev = std::max(sup_dev, max_abs_entry(a - Mat::Identity(n, n)));
      if (r > 1.0) rep.extension_defect = std::max(rep.extension_defect, max_abs_entry(a - Mat::Identity(n, n)));
    }
    rep.radii.push_back(r);
    rep.sup_deviation.push_back(sup_dev);
    const double w = om(r);
    if (r <= 1.0) {
      rep.modulus_margin = std::min(rep.modulus_margin, w - sup_dev);
      const double scaled = w * std::pow(r, om.kappa() - 1.0);
      if (prev_omega >= 0.0) {
        rep.monotonicity_defect = std::max(rep.monotonicity_defect, prev_omega - w);
        rep.monotonicity_defect = std::max(rep.monotonicity_defect, scaled - prev_scaled * (1.0 + 1e-12));
      }
      prev_omega = w;
      prev_scaled = scaled;
    } else if (std::abs(w - om(1.0)) > 0.0) {
      rep.extension_defect = std::max(rep.extension_defect, std::abs(w - om(1.0)));
    }
  }
  const double tol = 1e-12;
  if (rep.symmetry_defect > tol) rep.failures.push_back("coefficient matrix not symmetric");
  if (rep.min_eigenvalue < field.lambda_min() - 1e-12 || rep.max_eigenvalue > field.lambda_max() + 1e-12 ||
      rep.min_eigenvalue <= 0.0) {
    rep.ellipticity_ok = false;
    rep.failures.push_back("ellipticity bounds violated");
  }
  if (rep.modulus_margin < -1e-12) rep.failures.push_back("deviation from identity exceeds the modulus");
  if (rep.extension_defect > 0.0) rep.failures.push_back("extension beyond r = 1 is not the identity");
  if (rep.monotonicity_defect > 1e-12) rep.failures.push_back("modulus growth conditions violated");
  rep.passed = rep.failures.empty();
  return rep;
}

Modulus estimate_modulus(const CoefficientField& field, const RadialGrid& grid, const SphereRule& rule,
                         double kappa, double delta) {
  const int n = field.dimension();
  std::vector<double> radii;
  std::vector<double> values;
  for (std::size_t j = 0; j < grid.size() && grid.r(j) <= 1.0; ++j) {
    double sup_dev = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      sup_dev = std::max(sup_dev, max_abs_entry(field.at(grid.r(j), rule.node(i)) - Mat::Identity(n, n)));
    }
    radii.push_back(grid.r(j));
    values.push_back(sup_dev);
  }
  return Modulus::from_table(std::move(radii), std::move(values), kappa, delta);
}

}  // namespace dinigrad
