#include "dinigrad/estimator.hpp"

#include <algorithm>
#include <cmath>

#include "dinigrad/linalg.hpp"

namespace dinigrad {

Mat reduced_matrix(const CoefficientField& field, double r, const SphereRule& rule) {
  const int n = field.dimension();
  if (rule.dimension() != n) throw DomainError("reduced_matrix: rule dimension mismatch");
  if (!(r > 0.0)) throw DomainError("reduced_matrix: radius must be positive");
  Mat out = Mat::Zero(n, n);
  if (r > 1.0) return out;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const Point& th = rule.node(i);
    const Mat a = field.at(r, th);
    Vec theta(n);
    for (int k = 0; k < n; ++k) theta(k) = th[k];
    const Vec at = a * theta;
    out += rule.weight(i) * (a - n * at * theta.transpose());
  }
  return out;
}

ReducedCurve reduced_curve(const CoefficientField& field, RadialGridPtr grid, const SphereRule& rule) {
  ReducedCurve rc;
  rc.grid = std::move(grid);
  rc.R.reserve(rc.grid->size());
  rc.mu.reserve(rc.grid->size());
  for (std::size_t j = 0; j < rc.grid->size(); ++j) {
    Mat R = reduced_matrix(field, rc.grid->r(j), rule);
    rc.mu.push_back(mu_max(-R));
    rc.R.push_back(std::move(R));
  }
  return rc;
}

ReducedCurve reduced_curve_from_rate(int n, RadialGridPtr grid, const std::function<double(double)>& mu) {
  ReducedCurve rc;
  rc.grid = std::move(grid);
  for (std::size_t j = 0; j < rc.grid->size(); ++j) {
    const double r = rc.grid->r(j);
    const double m = r > 1.0 ? 0.0 : mu(r);
    rc.R.push_back(-m * Mat::Identity(n, n));
    rc.mu.push_back(m);
  }
  return rc;
}

EstimatorCurve::EstimatorCurve(RadialGridPtr grid, std::vector<double> mu, std::vector<double> log_e)
    : grid_(std::move(grid)), mu_(std::move(mu)), log_e_(std::move(log_e)) {}

double EstimatorCurve::at_node(std::size_t j) const { return std::exp(log_e_[j]); }

bool EstimatorCurve::extrapolated(double r) const { return r < grid_->r(0) * (1.0 - 1e-12); }

double EstimatorCurve::operator()(double r) const {
  if (!(r > 0.0)) throw DomainError("EstimatorCurve: radius must be positive");
  if (r >= 1.0) return 1.0;
  if (extrapolated(r)) {
    return std::exp(log_e_.front() + mu_.front() * std::log(grid_->r(0) / r));
  }
  const double pos = (std::log2(r) - grid_->lo_octave()) * grid_->per_octave();
  const std::size_t j = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(pos))), grid_->size() - 2);
  const double w = std::clamp(pos - static_cast<double>(j), 0.0, 1.0);
  return std::exp((1.0 - w) * log_e_[j] + w * log_e_[j + 1]);
}

EstimatorCurve estimator_curve(const ReducedCurve& rc) {
  const RadialGrid& g = *rc.grid;
  std::vector<double> log_e(g.size(), 0.0);
  const auto one = g.find(1.0);
  std::size_t top = g.size() - 1;
  if (one) {
    top = *one;
  } else if (g.r(g.size() - 1) > 1.0) {
    throw DomainError("estimator_curve: grid must contain r = 1 when it extends beyond it");
  }
  if (top >= 1) {
    std::vector<std::size_t> breaks;
    if (one) breaks.push_back(*one);
    const CellQuadrature cq(rc.grid, 8, breaks);
    const std::vector<double> cells = cq.cell_integrals(rc.mu, 0.0);
    // int_r^1 mu dlog(rho), accumulated downward from r = 1 (or the grid top).
    for (std::size_t j = top; j-- > 0;) log_e[j] = log_e[j + 1] + cells[j];
  }
  return EstimatorCurve(rc.grid, rc.mu, std::move(log_e));
}

double gs_estimator_closed_form(int n, double amplitude, double exponent, double r) {
  if (r >= 1.0) return 1.0;
  const double c = (n - 1.0) / n * amplitude;
  const double L = 1.0 - std::log(r);
  if (std::abs(exponent - 1.0) < 1e-14) return std::exp(c * std::log(L));
  return std::exp(c * (std::pow(L, 1.0 - exponent) - 1.0) / (1.0 - exponent));
}

RegularityReport check_regularity(const EstimatorCurve& ec, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("check_regularity: lambda must lie in (0, 1)");
  RegularityReport rep;
  rep.lambda = lambda;
  const RadialGrid& g = *ec.grid();
  std::size_t top = g.size() - 1;
  while (top > 0 && g.r(top) > 1.0) --top;
  // Scan upward from the smallest radius; stop at the first violation.
  std::size_t good = 0;
  for (std::size_t j = 0; j < top; ++j) {
    const double dlog_r = g.tau(j + 1) - g.tau(j);
    const double dlog_e = ec.log_values()[j + 1] - ec.log_values()[j];
    const bool dec = dlog_e - lambda * dlog_r <= 1e-14;  // E r^{-lambda} decreasing
    const bool inc = dlog_e + lambda * dlog_r >= -1e-14;  // E r^{lambda} increasing
    if (!dec || !inc) {
      if (!dec) rep.failures.push_back("E r^{-lambda} increases near r = " + std::to_string(g.r(j)));
      if (!inc) rep.failures.push_back("E r^{lambda} decreases near r = " + std::to_string(g.r(j)));
      break;
    }
    rep.worst_rate = std::max(rep.worst_rate, std::abs(dlog_e / dlog_r));
    good = j + 1;
  }
  rep.r0 = good == 0 ? 0.0 : g.r(good);
  rep.holds_everywhere = good == top;
  return rep;
}

}  // namespace dinigrad
