#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dinigrad/pipeline.hpp"

using namespace dinigrad;

namespace {

WorkspacePtr gs_workspace(int n, double amp, int max_iter = 60) {
  GSProfile p;
  p.amplitude = amp;
  p.exponent = 0.75;
  PipelineOptions o;
  o.fixed_point_max_iter = max_iter;
  return make_workspace(amp == 0.0 ? make_identity_field(n) : make_gs_field(n, p), o);
}

const std::vector<BoundaryMode> kModes{{0, 0, 0.3}, {1, 0, 1.0}, {2, 0, 0.5}, {3, 1, 0.25}, {5, 0, 0.1}};

}  // namespace

TEST(Cutoff, ValuesSupportAndSmoothness) {
  const Cutoff c;
  EXPECT_EQ(c(0.1), 1.0);
  EXPECT_EQ(c(0.25), 1.0);
  EXPECT_EQ(c(0.5), 0.0);
  EXPECT_EQ(c(0.9), 0.0);
  EXPECT_NEAR(c(std::sqrt(0.125)), 0.5, 1e-15);
  double prev = 1.0;
  for (double r = 0.25; r <= 0.5; r += 0.001) {
    EXPECT_LE(c(r), prev + 1e-15);
    prev = c(r);
    const double h = 1e-6;
    if (r > 0.25 + h && r < 0.5 - h) EXPECT_NEAR(c.derivative(r), (c(r + h) - c(r - h)) / (2 * h), 1e-6);
  }
  EXPECT_NEAR(c.derivative(0.25 + 1e-6), 0.0, 1e-12);
  EXPECT_NEAR(c.derivative(0.5 - 1e-6), 0.0, 1e-12);
}

TEST(Workspace, IdentityAveragesAndStateMaps) {
  const WorkspacePtr ws = gs_workspace(2, 0.0);
  EXPECT_NEAR(ws->grid->r(ws->unit_index), 1.0, 1e-15);
  for (std::size_t j = 0; j < ws->grid->size(); j += 50) {
    EXPECT_NEAR(ws->alpha[j], 1.0, 1e-14);
    EXPECT_NEAR(ws->beta[j].norm(), 0.0, 1e-14);
  }
  EXPECT_NEAR((ws->to_state * ws->from_state - Mat::Identity(4, 4)).norm(), 0.0, 1e-14);
  EXPECT_EQ(effective_lo_octave(2, PipelineOptions{}), -29);
  EXPECT_EQ(effective_lo_octave(3, PipelineOptions{}), -20);
}

TEST(Oracle, IdentityGivesHomogeneousHarmonics) {
  for (int n : {2, 3}) {
    const WorkspacePtr ws = gs_workspace(n, 0.0);
    for (int k : {1, 2, 4}) {
      const auto [v, d] = oracle_degree_profile(*ws, k);
      for (std::size_t j = 0; j < ws->grid->size(); j += 37) {
        const double r = ws->grid->r(j);
        if (r > 1.0) continue;
        EXPECT_NEAR(v[j], std::pow(r, k), 1e-9 * std::pow(r, k));
        EXPECT_NEAR(d[j], k * std::pow(r, k - 1), 1e-8 * k * std::pow(r, k - 1));
      }
    }
  }
}

TEST(Oracle, RadialEquationResidual) {
  const WorkspacePtr ws = gs_workspace(2, 0.5);
  const int k = 2;
  const auto [v, d] = oracle_degree_profile(*ws, k);
  // ((1+g) r^{n-1} v')' = k(k+n-2) r^{n-3} v, checked through q = (1+g) r v'.
  std::vector<double> q(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) q[j] = (1.0 + ws->field->profile(ws->grid->r(j))) * ws->grid->r(j) * d[j];
  const std::vector<double> dq = derivative_tau(q, ws->grid->step());
  double worst = 0.0;
  for (std::size_t j = 10; j + 10 < ws->unit_index; ++j) {
    const double lhs = dq[j];
    const double rhs = k * k * v[j];
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Decomposition, RoundTripAndOrthogonality) {
  const WorkspacePtr ws = gs_workspace(3, 0.3);
  const ModalField u = direct_solve_oracle(*ws, {{0, 0, 0.3}, {1, 2, 1.0}, {2, 0, 0.5}, {3, 1, 0.25}});
  const Decomposition dec = sphere_decompose(*ws, u);
  EXPECT_EQ(low_mode_size(dec.w), 0.0);
  const ModalField back = assemble(*ws, dec);
  double worst = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < u.coeff.size(); ++i) {
    worst = std::max(worst, std::abs(back.coeff[i] - u.coeff[i]));
    peak = std::max(peak, std::abs(u.coeff[i]));
  }
  EXPECT_LT(worst / peak, 1e-9);
}

TEST(Localization, SourceHasZeroMeanAndIsSupportedInTheTransition) {
  const WorkspacePtr ws = gs_workspace(2, 0.1);
  const ModalField u = direct_solve_oracle(*ws, kModes);
  const LocalizedRHS rhs = localize_rhs(*ws, u);
  EXPECT_LT(std::abs(rhs.f0_integral), 1e-10 * rhs.f0_abs_integral);
  EXPECT_GT(rhs.f0_abs_integral, 0.0);
  EXPECT_GT(rhs.u_l2, 0.0);
  for (std::size_t j = 0; j < ws->grid->size(); ++j) {
    const double r = ws->grid->r(j);
    if (r >= 0.25 && r <= 0.5) continue;
    for (std::size_t idx = 0; idx < rhs.f0.modes(); ++idx) EXPECT_EQ(rhs.f0.c(idx, j), 0.0);
  }
  EXPECT_THROW(localize_rhs(*ws, u, Cutoff{0.1, 0.9}), DomainError);
}

TEST(FixedPoint, SmallAmplitudeConvergesAndMatchesTheOracle) {
  const WorkspacePtr ws = gs_workspace(2, 0.1, 20);
  const ModalField u = direct_solve_oracle(*ws, kModes);
  const LocalizedRHS rhs = localize_rhs(*ws, u);
  const ConstructiveSolution sol = fixed_point_solve(*ws, rhs);
  EXPECT_TRUE(sol.report.converged);
  EXPECT_LE(sol.report.iterations, 20);
  EXPECT_LT(sol.report.contraction, 1.0);
  EXPECT_LT(sol.report.increments.back(), 1e-9);
  EXPECT_GT(sol.report.xi_constant, 0.0);
  EXPECT_TRUE(std::isfinite(sol.report.xi_constant));
  EXPECT_LT(relative_l2_difference(*ws, sol.u, apply_cutoff(*ws, u, rhs.cutoff), std::ldexp(1.0, -10), 0.5), 1e-4);
  const WeakResidual wr = weak_form_residual(*ws, sol.u, rhs);
  EXPECT_LT(wr.radial, 1e-6);
  EXPECT_LT(wr.linear, 1e-6);
  const ComponentBounds cb = component_bounds(*ws, sol, rhs.u_l2, 6, 14);
  for (double c : {cb.c_rv, cb.c_grad_w, cb.c_v, cb.c_state}) {
    EXPECT_GT(c, 0.0);
    EXPECT_LT(c, 100.0);
  }
  EXPECT_GE(cb.c_du0, 0.0);
  EXPECT_LT(cb.c_du0, 100.0);
}

TEST(FixedPoint, ComponentConstantsAreStableUnderRefinement) {
  std::vector<ComponentBounds> cbs;
  for (int m : {16, 24}) {
    GSProfile p;
    p.amplitude = 0.1;
    PipelineOptions o;
    o.per_octave = m;
    const WorkspacePtr ws = make_workspace(make_gs_field(2, p), o);
    const ModalField u = direct_solve_oracle(*ws, kModes);
    const LocalizedRHS rhs = localize_rhs(*ws, u);
    cbs.push_back(component_bounds(*ws, fixed_point_solve(*ws, rhs), rhs.u_l2, 6, 14));
  }
  auto factor = [](double a, double b) { return std::max(a, b) / std::min(a, b); };
  EXPECT_LT(factor(cbs[0].c_rv, cbs[1].c_rv), 2.0);
  EXPECT_LT(factor(cbs[0].c_grad_w, cbs[1].c_grad_w), 2.0);
  EXPECT_LT(factor(cbs[0].c_v, cbs[1].c_v), 2.0);
  EXPECT_LT(factor(cbs[0].c_state, cbs[1].c_state), 2.0);
}

TEST(FixedPoint, IterationBudgetExhaustionIsAContractionError) {
  const WorkspacePtr ws = gs_workspace(2, 0.5, 3);
  const ModalField u = direct_solve_oracle(*ws, kModes);
  EXPECT_THROW(fixed_point_solve(*ws, localize_rhs(*ws, u)), ContractionError);
}

TEST(FixedPoint, YNormIsZeroOnZero) {
  const WorkspacePtr ws = gs_workspace(2, 0.1);
  ModalField z(ws->grid, ws->basis);
  z.deriv.assign(z.coeff.size(), 0.0);
  EXPECT_EQ(y_norm(*ws, z), 0.0);
}

TEST(GradientRatio, LinearSolutionRatioIsTwoOverRootPi) {
  const WorkspacePtr ws = gs_workspace(2, 0.0);
  const ModalField u = direct_solve_oracle(*ws, {{1, 0, 1.0}});
  const double norm = l2_norm_unit_ball(*ws, u);
  EXPECT_NEAR(norm, std::sqrt(std::numbers::pi / 4.0) / std::sqrt(0.5), 1e-10);
  const RatioReport rep = gradient_ratio_check(gradient_profile(*ws, u, 6, 14), ws->estimator, norm);
  ASSERT_EQ(rep.rows.size(), 9u);
  for (const RatioRow& row : rep.rows) EXPECT_NEAR(row.ratio, 2.0 / std::sqrt(std::numbers::pi), 1e-10);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.gradient_trend, "flat");
}

TEST(GradientRatio, QuadraticGradientDecaysLinearly) {
  const WorkspacePtr ws = gs_workspace(3, 0.0);
  const ModalField u = direct_solve_oracle(*ws, {{2, 0, 1.0}});
  const GradientProfile gp = gradient_profile(*ws, u, 2, 10);
  for (std::size_t q = 1; q < gp.m2_grad.size(); ++q) EXPECT_NEAR(gp.m2_grad[q] / gp.m2_grad[q - 1], 0.5, 1e-9);
}

TEST(GradientRatio, BlowUpTrendFailsTheVerdict) {
  GradientProfile gp;
  for (int j = 6; j <= 14; ++j) {
    gp.levels.push_back(j);
    gp.radii.push_back(std::ldexp(1.0, -j));
    gp.m2_grad.push_back(std::pow(1.3, j - 6));
  }
  const RadialGridPtr g = make_radial_grid(-20, 0, 4);
  const EstimatorCurve flat = estimator_curve(reduced_curve_from_rate(2, g, [](double) { return 0.0; }));
  const RatioReport rep = gradient_ratio_check(gp, flat, 1.0, 10.0);
  EXPECT_TRUE(rep.blow_up_trend);
  EXPECT_FALSE(rep.passed);
  EXPECT_EQ(rep.gradient_trend, "growing");
  const RatioReport empty = gradient_ratio_check(GradientProfile{}, flat, 1.0);
  EXPECT_FALSE(empty.passed);
}

TEST(Sharpness, IdentityHasNoDrift) {
  const SharpnessReport rep = gs_sharpness_check(*gs_workspace(2, 0.0));
  EXPECT_NEAR(rep.drift, 0.0, 1e-9);
  EXPECT_TRUE(rep.passed);
}

TEST(Sharpness, GrowthProfilePlateaus) {
  const SharpnessReport rep = gs_sharpness_check(*gs_workspace(2, 0.5));
  EXPECT_TRUE(rep.passed);
  EXPECT_LT(rep.drift, 0.1);
  EXPECT_LT(rep.window_drift, 0.1);
  EXPECT_NEAR(rep.decade_hi / rep.decade_lo, 10.0, 1e-12);
}
