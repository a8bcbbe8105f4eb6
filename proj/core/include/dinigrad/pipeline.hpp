#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dinigrad/coeffs.hpp"
#include "dinigrad/dynsys.hpp"
#include "dinigrad/estimator.hpp"
#include "dinigrad/grid.hpp"
#include "dinigrad/potential.hpp"
#include "dinigrad/sphere.hpp"
#include "dinigrad/types.hpp"

namespace dinigrad {

/// Cutoff equal to 1 on [0, inner] and 0 on [outer, inf), with a degree-9
/// smoothstep in s = log(r/inner)/log(outer/inner) between (C^4 overall).
struct Cutoff {
  double inner = 0.25;
  double outer = 0.5;
  double operator()(double r) const;
  double derivative(double r) const;
};

struct PipelineOptions {
  int harmonic_degree = 8;
  int per_octave = 20;
  int lo_octave = 0;  // 0 selects -ceil((40/n)/ln 2)
  int hi_octave = 3;
  double block_tol = 1e-12;
  int block_max_iter = 200;
  double fixed_point_tol = 1e-9;
  int fixed_point_max_iter = 60;
  double omega_floor = 1e-12;  // lower bound on omega in the Y-norm weight
};

/// Field-dependent data shared by every solve on one grid.
struct Workspace {
  int n = 0;
  PipelineOptions options;
  CoefficientFieldPtr field;
  RadialGridPtr grid;
  SphereRulePtr rule;
  HarmonicBasisPtr basis;
  HarmonicBasisPtr raised;
  ReducedCurve reduced;
  EstimatorCurve estimator;
  std::size_t unit_index = 0;  // grid index of r = 1
  std::shared_ptr<const CellQuadrature> quadrature;  // breakpoint at r = 1

  // Sphere averages of the field at every radius.
  std::vector<double> alpha;          // mean of theta.A theta
  std::vector<Vec> beta;              // mean of (theta.A theta) theta
  std::vector<Vec> gamma;             // mean of A theta
  std::vector<Mat> b_tilde;           // C - beta beta^T / alpha
  std::vector<Mat> c_tilde;           // B - beta gamma^T / alpha
  std::vector<Mat> c_tilde_t;         // D - gamma beta^T / alpha
  std::vector<Mat> a_tilde;           // mean A - gamma gamma^T / alpha
  std::vector<Mat> coupling;          // 2n x 2n block coupling in (phi, psi) variables
  Mat to_state;                       // (v, X) = to_state * (phi, psi)
  Mat from_state;                     // inverse of to_state

  /// Maps a degree-1 basis index to its Cartesian direction:
  /// theta_c = sum_idx cartesian(c, idx) phi_idx.
  Mat cartesian;
  std::size_t degree1_offset = 0;
  std::size_t degree1_count = 0;
};

using WorkspacePtr = std::shared_ptr<const Workspace>;

/// Lowest grid octave: the configured one, or -ceil((40/n)/ln 2) when it is 0.
int effective_lo_octave(int n, const PipelineOptions& options);

WorkspacePtr make_workspace(CoefficientFieldPtr field, const PipelineOptions& options = {});

/// Data of the localized problem div(A grad u~) = div f + f0.
struct LocalizedRHS {
  Cutoff cutoff;
  VectorSamples fvec;
  ModalField f0;
  double f0_integral = 0.0;           // int f0 dx
  double f0_abs_integral = 0.0;       // int |f0| dx
  double fvec_l2 = 0.0;
  double f0_l2 = 0.0;
  double u_l2 = 0.0;                  // |u|_{L2(B1)}
  double norm_constant = 0.0;         // (|fvec| + |f0|) / |u|
};

/// Localizes a solution u (derivative table required) with the cutoff.
LocalizedRHS localize_rhs(const Workspace& ws, const ModalField& u, const Cutoff& cutoff = {});

/// L2 norm over the unit ball of a modal field.
double l2_norm_unit_ball(const Workspace& ws, const ModalField& u);

/// u = u0(|x|) + v(|x|).x + w(x) on the grid.
struct Decomposition {
  RadialGridPtr grid;
  std::vector<double> u0;
  std::vector<double> du0;            // d u0 / dr
  std::vector<Vec> v;
  std::vector<Vec> v_t;               // dv/dt with t = -log r
  ModalField w;
  // Split into w-driven and source-driven parts (filled by fixed_point_solve).
  std::vector<double> du0_w, du0_source;
  std::vector<Vec> v_w, v_source;
};

/// Splits a modal field into its mean, first-moment and P-orthogonal parts.
Decomposition sphere_decompose(const Workspace& ws, const ModalField& u);

/// Sums the three parts into one modal field with derivative tables.
ModalField assemble(const Workspace& ws, const Decomposition& dec);

/// Sphere averages p[grad w], X_w, Y_w and the source terms entering the
/// radial identities, at every grid radius.
struct ReductionForcing {
  std::vector<double> s;              // right side of the radial identity, w-part included
  std::vector<Vec> h1, h2, rz;
  std::vector<Vec> block_forcing;     // (F1, F2) on the lattice, index i <-> r = 2^{-i/m}
};

/// Builds the forcing from the source (when `rhs` is given) and from w (when
/// `w` is given). Both parts are linear, so either may be omitted.
ReductionForcing build_reduction(const Workspace& ws, const LocalizedRHS* rhs, const ModalField* w);

/// The block system on the lattice t_i = i h, i = 0..unit_index.
BlockSystem block_system(const Workspace& ws, const ReductionForcing& forcing);

struct ReducedSolution {
  std::vector<double> du0, u0;
  std::vector<Vec> v, v_t, phi, psi, x;
  BlockSolution block;
};

/// Solves the block system with phi(0) = 0 and recovers v, dv/dt, u0', u0.
ReducedSolution recover_u0(const Workspace& ws, const ReductionForcing& forcing);

struct FixedPointReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> increments;     // relative Y-norm increments
  double contraction = 0.0;           // largest ratio of successive increments
  double xi_norm = 0.0;               // |xi|_Y
  double w_norm = 0.0;                // |w|_Y at the fixed point
  double xi_constant = 0.0;           // |xi|_Y / |u|
  double block_contraction = 0.0;     // largest Picard ratio inside block solves
};

struct ConstructiveSolution {
  Decomposition dec;
  ModalField u;                       // assembled u~
  FixedPointReport report;
  BlockSystem block;                  // final block system
  BlockSolution block_solution;
};

/// Y-norm of a P-orthogonal modal field with derivative table.
double y_norm(const Workspace& ws, const ModalField& y);

/// Iterates w <- Phi(w) from w = 0 until the relative Y increment falls below
/// the tolerance. Throws ContractionError when increments stop decreasing.
ConstructiveSolution fixed_point_solve(const Workspace& ws, const LocalizedRHS& rhs);

/// Boundary data as harmonic coefficients on the unit sphere.
struct BoundaryMode {
  int degree = 1;
  int index = 0;  // position within the degree
  double weight = 1.0;
};

/// Solution of div(A grad u) = 0 with the given modes on |x| = 1 and regular
/// at the origin, for radial rank-one fields. Each degree is integrated in
/// log r by Dormand-Prince from far below the grid and normalized at r = 1.
ModalField direct_solve_oracle(const Workspace& ws, const std::vector<BoundaryMode>& modes);
ModalField direct_solve_oracle(const Workspace& ws, const SphereSamples& boundary);

/// Radial profile of one degree of the oracle, normalized at r = 1:
/// values and d/dr on the grid.
std::pair<std::vector<double>, std::vector<double>> oracle_degree_profile(const Workspace& ws, int degree);

struct GradientProfile {
  std::vector<int> levels;            // j with r = 2^{-j}
  std::vector<double> radii;
  std::vector<double> m2_grad;
};

GradientProfile gradient_profile(const Workspace& ws, const ModalField& u, int j_min, int j_max);

struct RatioRow {
  int j = 0;
  double r = 0.0;
  double m2_grad = 0.0;
  double estimator = 0.0;
  double ratio = 0.0;
  bool pass = true;
};

struct RatioReport {
  std::vector<RatioRow> rows;
  double spread = 0.0;                // max ratio / min ratio
  double bound = 3.0;
  bool blow_up_trend = false;
  std::string gradient_trend;         // growing, decaying or flat
  bool passed = false;
};

RatioReport gradient_ratio_check(const GradientProfile& profile, const EstimatorCurve& ec, double u_norm,
                           double bound = 3.0);

struct SharpnessReport {
  std::vector<double> radii;
  std::vector<double> v;
  std::vector<double> estimator;
  std::vector<double> ratio;          // v / E
  double decade_lo = 0.0, decade_hi = 0.0;
  double drift = 0.0;                 // max/min - 1 of v/E on the last decade
  double window_drift = 0.0;          // same on [2^{-14}, 2^{-6}]
  double tolerance = 0.1;
  bool passed = false;
};

/// Degree-1 oracle profile against the estimator on the deepest grid decade.
SharpnessReport gs_sharpness_check(const Workspace& ws, double tolerance = 0.1);

/// Relative L2 difference between two fields over r in [r_lo, r_hi].
double relative_l2_difference(const Workspace& ws, const ModalField& a, const ModalField& b, double r_lo,
                              double r_hi);

/// Multiplies every coefficient by the cutoff (derivatives by the product rule).
ModalField apply_cutoff(const Workspace& ws, const ModalField& u, const Cutoff& cutoff);

struct WeakResidual {
  double radial = 0.0;                // identity tested against eta(r)
  double linear = 0.0;                // identities tested against eta(r) x_l
};

WeakResidual weak_form_residual(const Workspace& ws, const ModalField& u, const LocalizedRHS& rhs);

struct ComponentBounds {
  double c_du0 = 0.0;                 // M2(u0') <= c omega E |u|
  double c_rv = 0.0;                  // M2(r v') <= c omega E |u|
  double c_grad_w = 0.0;              // M2(grad w) <= c omega E |u|
  double c_v = 0.0;                   // M2(v) <= c E |u|
  double c_state = 0.0;               // (phi, psi) versus (n v - v_t, v_t)/n^2 over omega-scaled size
};

ComponentBounds component_bounds(const Workspace& ws, const ConstructiveSolution& sol, double u_norm, int j_min,
                                 int j_max);

}  // namespace dinigrad
