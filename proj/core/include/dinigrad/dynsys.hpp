#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dinigrad/ode.hpp"
#include "dinigrad/types.hpp"

namespace dinigrad {

using MatrixFunction = std::function<Mat(double t)>;
using VectorFunction = std::function<Vec(double t)>;

/// Fundamental matrix of phi' = -R1(t) phi with Phi(0) = I, sampled on a
/// time grid, together with log E(t) = int_0^t mu[-R1].
struct Propagator {
  int n = 0;
  std::vector<double> t;
  std::vector<Mat> phi;
  std::vector<double> log_estimator;
  double liouville_defect = 0.0;  // max relative |det Phi - exp(-int tr R1)|
};

Propagator fundamental_matrix(const MatrixFunction& R1, int n, std::span<const double> t_grid,
                              const OdeOptions& opts = {});

struct PropagatorReport {
  double worst_single = 0.0;  // max_t |Phi(t)| / E(t) - 1
  double worst_pair = 0.0;    // max_{s<t} |Phi(t) Phi(s)^{-1}| E(s) / E(t) - 1
  std::size_t pairs = 0;
  bool passed = false;
};

/// Checks |Phi(t)| <= E(t) and |Phi(t) Phi^{-1}(s)| <= E(t)/E(s) in the
/// spectral norm at every grid time and every pair s < t.
PropagatorReport verify_propagator_bounds(const Propagator& p, std::span<const double> log_estimator,
                                          double rel_tol = 1e-8);

/// A smooth random matrix curve with |R1(t)| <= varpi(t), where
/// varpi(t) = amplitude (1 + t)^(-exponent).
struct RandomSystem {
  int n = 0;
  MatrixFunction R1;
  std::function<double(double)> varpi;
};

RandomSystem make_random_system(int n, std::mt19937_64& rng, double amplitude, double exponent);

struct InhomogeneousSolution {
  std::vector<double> t;
  std::vector<Vec> phi;
  std::vector<double> log_estimator;
  double weighted_l1 = 0.0;      // int |f| / E
  double bound_violation = 0.0;  // max (|phi| - E (|phi0| + weighted_l1)) / E
  double oracle_defect = 0.0;    // max |phi - direct integration of phi' = -R1 phi + f|
};

/// phi(t) = Phi(t) (phi0 + int_0^t Phi^{-1}(s) f(s) ds). Throws
/// NumericalError when the weighted forcing norm does not settle on the grid.
InhomogeneousSolution solve_inhomogeneous(const MatrixFunction& R1, const VectorFunction& f, const Vec& phi0,
                                          std::span<const double> t_grid, const OdeOptions& opts = {});

/// The 2n-dimensional system on a uniform lattice t_i = i h, i = 0..N:
///   phi' = -R1 phi - R2 psi + F1,   psi' = n psi - R3 phi - R4 psi + F2,
/// stored as the 2n x 2n coupling [[R1, R2], [R3, R4]] and forcing (F1, F2).
struct BlockSystem {
  int n = 0;
  double step = 0.0;
  std::vector<Mat> coupling;
  std::vector<Vec> forcing;
  std::vector<double> varpi;
  std::vector<double> log_estimator;  // optional; derived from R1 when empty
  double delta = 0.1;

  std::size_t size() const { return coupling.size(); }
  double t(std::size_t i) const { return static_cast<double>(i) * step; }
  double t_max() const { return t(size() - 1); }
};

/// Samples a block system from continuous data on [0, t_max] with spacing h.
BlockSystem make_block_system(int n, const MatrixFunction& coupling, const VectorFunction& forcing,
                              const std::function<double(double)>& varpi, double t_max, double h,
                              double delta = 0.1);

/// log E(t) = int_0^t mu[-R1], cumulative, on the lattice.
std::vector<double> lattice_log_estimator(const BlockSystem& bs);

struct BlockSolution {
  std::vector<double> t;
  std::vector<Vec> phi;
  std::vector<Vec> psi;
  std::vector<double> log_estimator;
  std::vector<double> increments;  // X-norm differences of successive iterates
  double contraction = 0.0;        // largest ratio of successive increments
  int iterations = 0;
};

/// Finite-energy solution with phi(0) = phi0: psi by backward RK4 from
/// psi(t_max) = 0, phi by forward RK4, alternated until the X-norm increment
/// falls below tol relative to |phi|_X. Throws ContractionError otherwise.
BlockSolution solve_block_system(const BlockSystem& bs, const Vec& phi0, double tol = 1e-10, int max_iter = 200);

struct BlockBoundReport {
  double c_alpha = 0.0;
  double forcing_l1 = 0.0;  // |E^{-1} F1|_{L1}
  double c_phi = 0.0;
  double c_psi = 0.0;
  double scale = 0.0;  // c_alpha + |phi(0)| + forcing_l1
};

/// Fits the smallest constants with |phi| <= c E scale and
/// |psi| <= c varpi E scale on the lattice.
BlockBoundReport verify_block_bounds(const BlockSolution& sol, const BlockSystem& bs);

/// sup over lattice pairs of log|Psi(t) Psi(s)^{-1}| / |t - s| for Psi' = -R4 Psi.
double gronwall_rate(const BlockSystem& bs);

/// sup_s int_s^T e^{(delta-n) v} E(v) dv / (e^{(delta-n) s} E(s)).
double exp_estimator_constant(const BlockSystem& bs, std::span<const double> log_estimator);

/// Interpolates uniform samples of matrices at the midpoints (8-point Lagrange).
std::vector<Mat> midpoint_matrices(const std::vector<Mat>& m);
std::vector<Vec> midpoint_vectors(const std::vector<Vec>& v);

}  // namespace dinigrad
