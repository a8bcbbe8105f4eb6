#include "dinigrad/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dinigrad/quadrature.hpp"
#include "dinigrad/types.hpp"

namespace dinigrad {

RadialGrid::RadialGrid(int lo_octave, int hi_octave, int per_octave)
    : lo_(lo_octave), hi_(hi_octave), per_octave_(per_octave) {
  if (per_octave < 2) throw DomainError("RadialGrid: need at least 2 points per octave");
  if (hi_octave <= lo_octave) throw DomainError("RadialGrid: empty radial range");
  step_ = std::numbers::ln2 / per_octave;
  const std::size_t count = static_cast<std::size_t>(hi_ - lo_) * per_octave + 1;
  radii_.resize(count);
  taus_.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    const double exponent = lo_ + static_cast<double>(j) / per_octave;
    radii_[j] = std::exp2(exponent);
    taus_[j] = exponent * std::numbers::ln2;
  }
}

std::optional<std::size_t> RadialGrid::dyadic_index(int e) const {
  if (e < lo_ || e > hi_) return std::nullopt;
  return static_cast<std::size_t>(e - lo_) * per_octave_;
}

std::optional<std::size_t> RadialGrid::find(double r) const {
  if (!(r > 0.0)) return std::nullopt;
  const double pos = (std::log2(r) - lo_) * per_octave_;
  const double rounded = std::round(pos);
  if (rounded < 0.0 || rounded > static_cast<double>(size() - 1)) return std::nullopt;
  const auto j = static_cast<std::size_t>(rounded);
  if (std::abs(radii_[j] - r) > 1e-9 * r) return std::nullopt;
  return j;
}

RadialGridPtr make_radial_grid(int lo_octave, int hi_octave, int per_octave) {
  return std::make_shared<const RadialGrid>(lo_octave, hi_octave, per_octave);
}

// ---------------------------------------------------------------------------

namespace {

// Lagrange basis polynomial q on integer nodes 0..p-1, evaluated at x.
double lagrange_basis(int p, int q, double x) {
  double v = 1.0;
  for (int i = 0; i < p; ++i) {
    if (i == q) continue;
    v *= (x - i) / static_cast<double>(q - i);
  }
  return v;
}

double lagrange_basis_derivative(int p, int q, double x) {
  double sum = 0.0;
  for (int skip = 0; skip < p; ++skip) {
    if (skip == q) continue;
    double term = 1.0 / static_cast<double>(q - skip);
    for (int i = 0; i < p; ++i) {
      if (i == q || i == skip) continue;
      term *= (x - i) / static_cast<double>(q - i);
    }
    sum += term;
  }
  return sum;
}

}  // namespace

CellQuadrature::CellQuadrature(RadialGridPtr grid, int order, std::vector<std::size_t> breakpoints)
    : grid_(std::move(grid)), order_(order) {
  if (!grid_) throw DomainError("CellQuadrature: null grid");
  const std::size_t last = grid_->size() - 1;
  std::sort(breakpoints.begin(), breakpoints.end());
  for (std::size_t b : breakpoints) {
    if (b > 0 && b < last && (segment_ends_.empty() || segment_ends_.back() != b)) segment_ends_.push_back(b);
  }
  segment_ends_.push_back(last);
  std::size_t shortest = segment_ends_.front();
  for (std::size_t i = 1; i < segment_ends_.size(); ++i)
    shortest = std::min(shortest, segment_ends_[i] - segment_ends_[i - 1]);
  order_ = std::min<int>(order_, static_cast<int>(shortest) + 1);
  if (order_ < 2) throw DomainError("CellQuadrature: grid too small");
}

std::size_t CellQuadrature::stencil_start(std::size_t cell) const {
  const auto it = std::upper_bound(segment_ends_.begin(), segment_ends_.end(), cell);
  const long seg_hi = static_cast<long>(*it);
  const long seg_lo = it == segment_ends_.begin() ? 0L : static_cast<long>(*(it - 1));
  const long start = static_cast<long>(cell) - (order_ / 2 - 1);
  return static_cast<std::size_t>(std::clamp(start, seg_lo, seg_hi - order_ + 1));
}

const std::vector<double>& CellQuadrature::weights_for(double a) const {
  std::lock_guard lock(mutex_);
  auto it = cache_.find(a);
  if (it != cache_.end()) return it->second;

  const int p = order_;
  const double h = grid_->step();
  const GaussRule gl = gauss_legendre(12);
  std::vector<double> w(static_cast<std::size_t>(p - 1) * p, 0.0);
  for (int offset = 0; offset < p - 1; ++offset) {
    for (std::size_t g = 0; g < gl.nodes.size(); ++g) {
      const double s = 0.5 * (gl.nodes[g] + 1.0);  // position within the cell, [0, 1]
      const double kernel = 0.5 * gl.weights[g] * h * std::exp(a * h * s);
      for (int q = 0; q < p; ++q) w[offset * p + q] += kernel * lagrange_basis(p, q, offset + s);
    }
  }
  return cache_.emplace(a, std::move(w)).first->second;
}

std::vector<double> CellQuadrature::cell_integrals(std::span<const double> f, double a) const {
  if (f.size() != grid_->size()) throw DomainError("cell_integrals: value count does not match grid");
  const std::vector<double>& w = weights_for(a);
  const std::size_t cells = grid_->size() - 1;
  std::vector<double> out(cells, 0.0);
  for (std::size_t j = 0; j < cells; ++j) {
    const std::size_t s = stencil_start(j);
    const std::size_t offset = j - s;
    const double* row = &w[offset * order_];
    double sum = 0.0;
    for (int q = 0; q < order_; ++q) sum += row[q] * f[s + q];
    out[j] = sum;
  }
  return out;
}

std::vector<double> lagrange_weights(int p, double x) {
  std::vector<double> w(p);
  for (int q = 0; q < p; ++q) w[q] = lagrange_basis(p, q, x);
  return w;
}

std::vector<double> interpolate_midpoints(std::span<const double> f, int order) {
  const long size = static_cast<long>(f.size());
  if (size < 2) return {};
  const int p = static_cast<int>(std::min<long>(order, size));
  std::vector<std::vector<double>> table(p - 1);
  for (int o = 0; o < p - 1; ++o) table[o] = lagrange_weights(p, o + 0.5);
  std::vector<double> out(size - 1);
  for (long i = 0; i + 1 < size; ++i) {
    const long start = std::clamp(i - (p / 2 - 1), 0L, size - p);
    const auto& w = table[i - start];
    double v = 0.0;
    for (int q = 0; q < p; ++q) v += w[q] * f[start + q];
    out[i] = v;
  }
  return out;
}

std::vector<double> derivative_tau(std::span<const double> f, double step, int order) {
  const long size = static_cast<long>(f.size());
  const int p = static_cast<int>(std::min<long>(order, size));
  if (p < 2) throw DomainError("derivative_tau: need at least 2 samples");
  std::vector<double> out(f.size(), 0.0);
  // Weight tables per offset are identical across the interior; cache per offset.
  std::vector<std::vector<double>> table(p, std::vector<double>(p));
  for (int o = 0; o < p; ++o) {
    for (int q = 0; q < p; ++q) table[o][q] = lagrange_basis_derivative(p, q, o) / step;
  }
  for (long j = 0; j < size; ++j) {
    const long start = std::clamp(j - p / 2, 0L, size - p);
    const int o = static_cast<int>(j - start);
    double d = 0.0;
    for (int q = 0; q < p; ++q) d += table[o][q] * f[start + q];
    out[j] = d;
  }
  return out;
}

std::vector<double> uniform_integration_weights(std::size_t cells, double h) {
  std::vector<double> w(cells + 1, 0.0);
  if (cells == 0) return w;
  if (cells == 1) {
    w[0] = w[1] = 0.5 * h;
    return w;
  }
  std::size_t simpson_cells = cells;
  if (cells % 2 == 1) {
    // 3/8 rule on the last three cells.
    simpson_cells = cells - 3;
    const std::size_t b = simpson_cells;
    w[b] += 3.0 * h / 8.0;
    w[b + 1] += 9.0 * h / 8.0;
    w[b + 2] += 9.0 * h / 8.0;
    w[b + 3] += 3.0 * h / 8.0;
  }
  for (std::size_t i = 0; i + 2 <= simpson_cells; i += 2) {
    w[i] += h / 3.0;
    w[i + 1] += 4.0 * h / 3.0;
    w[i + 2] += h / 3.0;
  }
  return w;
}

}  // namespace dinigrad
