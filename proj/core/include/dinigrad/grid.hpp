#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace dinigrad {

/// Log-spaced radii r_j = 2^(lo + j/m), j = 0..J, J = (hi - lo) m.
///
/// The spacing is uniform in tau = log r (and in t = -log r), with step
/// h = ln 2 / m. Every dyadic radius 2^e with lo <= e <= hi is a node.
class RadialGrid {
 public:
  RadialGrid(int lo_octave, int hi_octave, int per_octave);

  std::size_t size() const { return radii_.size(); }
  int per_octave() const { return per_octave_; }
  int lo_octave() const { return lo_; }
  int hi_octave() const { return hi_; }
  double step() const { return step_; }
  double r(std::size_t j) const { return radii_[j]; }
  double tau(std::size_t j) const { return taus_[j]; }
  const std::vector<double>& radii() const { return radii_; }

  /// Index of the node at 2^e; nullopt outside the grid.
  std::optional<std::size_t> dyadic_index(int e) const;
  /// Index of a node equal to r up to 1e-9 relative; nullopt otherwise.
  std::optional<std::size_t> find(double r) const;

  bool operator==(const RadialGrid& other) const {
    return lo_ == other.lo_ && hi_ == other.hi_ && per_octave_ == other.per_octave_;
  }

 private:
  int lo_;
  int hi_;
  int per_octave_;
  double step_;
  std::vector<double> radii_;
  std::vector<double> taus_;
};

using RadialGridPtr = std::shared_ptr<const RadialGrid>;

RadialGridPtr make_radial_grid(int lo_octave, int hi_octave, int per_octave);

/// Integrals over grid cells of exp(a (tau - tau_j)) f(tau), f given at the
/// nodes and interpolated by local Lagrange polynomials of `order` points.
///
/// With order 8 the per-cell error is O(h^9) for smooth f. Stencils never
/// cross a breakpoint node, so f may have jumps in value or slope there.
class CellQuadrature {
 public:
  explicit CellQuadrature(RadialGridPtr grid, int order = 8, std::vector<std::size_t> breakpoints = {});

  const RadialGridPtr& grid() const { return grid_; }
  int order() const { return order_; }

  /// result[j] = int_{tau_j}^{tau_{j+1}} exp(a (tau - tau_j)) f(tau) dtau for
  /// every cell j = 0..J-1.
  std::vector<double> cell_integrals(std::span<const double> f, double a) const;

  /// First index of the interpolation stencil used for cell j.
  std::size_t stencil_start(std::size_t cell) const;

 private:
  const std::vector<double>& weights_for(double a) const;

  RadialGridPtr grid_;
  int order_;
  std::vector<std::size_t> segment_ends_;  // sorted, last entry is size()-1
  mutable std::mutex mutex_;
  mutable std::map<double, std::vector<double>> cache_;  // [offset][q] flattened
};

/// Weights of the Lagrange interpolant through integer nodes 0..p-1 at x.
std::vector<double> lagrange_weights(int p, double x);

/// Values halfway between consecutive samples of a uniform sequence by
/// `order`-point Lagrange interpolation; result has size - 1 entries.
std::vector<double> interpolate_midpoints(std::span<const double> f, int order = 8);

/// Derivative df/dtau at every node by `order`-point Lagrange differentiation
/// (centered in the interior, one-sided at the ends).
std::vector<double> derivative_tau(std::span<const double> f, double step, int order = 7);

/// Weights w_i for int_{x_0}^{x_N} g dx over N uniform cells of width h.
/// Composite Simpson when N is even, Simpson plus a 3/8 panel otherwise.
std::vector<double> uniform_integration_weights(std::size_t cells, double h);

}  // namespace dinigrad
