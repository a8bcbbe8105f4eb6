#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dinigrad/dynsys.hpp"
#include "dinigrad/linalg.hpp"
#include "dinigrad/ode.hpp"

using namespace dinigrad;

TEST(Ode, Dopri5MatchesExponentialAndOscillator) {
  const std::vector<double> outs{0.5, 1.0, 2.0};
  OdeState y0(1);
  y0 << 1.0;
  const auto ys = dopri5([](double, const OdeState& y, OdeState& d) { d = -0.7 * y; }, 0.0, y0, outs);
  for (std::size_t i = 0; i < outs.size(); ++i) EXPECT_NEAR(ys[i][0], std::exp(-0.7 * outs[i]), 1e-12);

  OdeState z0(2);
  z0 << 1.0, 0.0;
  OdeStats stats;
  const std::vector<double> back{-1.0, -3.0};
  const auto zs = dopri5(
      [](double, const OdeState& y, OdeState& d) {
        d.resize(2);
        d << y[1], -y[0];
      },
      0.0, z0, back, {}, &stats);
  EXPECT_NEAR(zs[1][0], std::cos(3.0), 1e-11);
  EXPECT_NEAR(zs[1][1], std::sin(3.0), 1e-11);
  EXPECT_GT(stats.accepted, 0u);
}

TEST(Ode, BlowUpRaisesStepUnderflow) {
  OdeState y0(1);
  y0 << 1.0;
  const std::vector<double> outs{2.0};
  EXPECT_THROW(dopri5([](double, const OdeState& y, OdeState& d) { d = y.cwiseProduct(y); }, 0.0, y0, outs),
               StepUnderflowError);
}

TEST(Ode, NonMonotoneOutputsAreRejected) {
  OdeState y0(1);
  y0 << 1.0;
  const std::vector<double> outs{1.0, 0.5};
  EXPECT_THROW(dopri5([](double, const OdeState& y, OdeState& d) { d = y; }, 0.0, y0, outs), DomainError);
}

std::vector<double> uniform_times(double T, int steps) {
  std::vector<double> t;
  for (int i = 0; i <= steps; ++i) t.push_back(T * i / steps);
  return t;
}

TEST(Propagator, ConstantNormalMatrixAttainsTheBound) {
  Mat R(2, 2);
  R << -0.3, 0.0, 0.0, 0.2;  // phi' = -R phi grows like e^{0.3 t}
  const std::vector<double> t = uniform_times(5.0, 50);
  const Propagator p = fundamental_matrix([&](double) { return R; }, 2, t);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(p.log_estimator[i], 0.3 * t[i], 1e-12);
    EXPECT_NEAR(spectral_norm(p.phi[i]), std::exp(0.3 * t[i]), 1e-10 * std::exp(0.3 * t[i]));
  }
  const PropagatorReport rep = verify_propagator_bounds(p, p.log_estimator);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.pairs, t.size() * (t.size() - 1) / 2);
  EXPECT_LT(p.liouville_defect, 1e-10);
}

TEST(Propagator, RandomSystemsRespectTheBounds) {
  std::mt19937_64 rng(11);
  const std::vector<double> t = uniform_times(20.0, 80);
  for (int n : {2, 3}) {
    for (int s = 0; s < 5; ++s) {
      const RandomSystem sys = make_random_system(n, rng, 0.5, 0.75);
      for (double tt : {0.0, 1.3, 7.0}) EXPECT_LE(spectral_norm(sys.R1(tt)), sys.varpi(tt) * (1 + 1e-12));
      const Propagator p = fundamental_matrix(sys.R1, n, t);
      EXPECT_TRUE(verify_propagator_bounds(p, p.log_estimator, 1e-8).passed);
    }
  }
}

TEST(Propagator, ShrunkEstimatorIsDetected) {
  Mat R(2, 2);
  R << -0.3, 0.0, 0.0, 0.2;
  const std::vector<double> t = uniform_times(5.0, 20);
  const Propagator p = fundamental_matrix([&](double) { return R; }, 2, t);
  std::vector<double> low = p.log_estimator;
  for (double& x : low) x *= 0.9;
  EXPECT_FALSE(verify_propagator_bounds(p, low, 1e-8).passed);
}

TEST(Propagator, InhomogeneousBoundAndOracle) {
  std::mt19937_64 rng(3);
  const RandomSystem sys = make_random_system(2, rng, 0.4, 0.75);
  const VectorFunction f = [](double t) {
    Vec v(2);
    v << std::exp(-t), 0.5 * std::cos(t) * std::exp(-0.5 * t);
    return v;
  };
  Vec phi0(2);
  phi0 << 1.0, -0.5;
  const InhomogeneousSolution sol = solve_inhomogeneous(sys.R1, f, phi0, uniform_times(15.0, 60));
  EXPECT_LE(sol.bound_violation, 1e-10);
  EXPECT_LT(sol.oracle_defect, 1e-9);
}

BlockSystem test_block(int n, double T, double h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const RandomSystem sys = make_random_system(n, rng, 0.3, 0.75);
  const auto varpi = sys.varpi;
  auto coupling = [=](double t) {
    Mat m = Mat::Zero(2 * n, 2 * n);
    m.topLeftCorner(n, n) = sys.R1(t);
    m.topRightCorner(n, n) = 0.2 * varpi(t) * Mat::Identity(n, n);
    m.bottomLeftCorner(n, n) = 0.2 * varpi(t) * Mat::Identity(n, n);
    m.bottomRightCorner(n, n) = 0.1 * varpi(t) * Mat::Identity(n, n);
    return m;
  };
  auto forcing = [=](double t) {
    Vec f(2 * n);
    for (int i = 0; i < 2 * n; ++i) f[i] = varpi(t) * std::cos(0.7 * t + i);
    return f;
  };
  return make_block_system(n, coupling, forcing, varpi, T, h);
}

TEST(BlockSystem, LatticeAndEstimator) {
  const BlockSystem bs = test_block(2, 10.0, 0.05, 1);
  EXPECT_EQ(bs.size(), 201u);
  EXPECT_NEAR(bs.t_max(), 10.0, 1e-12);
  const std::vector<double> le = lattice_log_estimator(bs);
  ASSERT_EQ(le.size(), bs.size());
  EXPECT_EQ(le[0], 0.0);
  EXPECT_THROW(make_block_system(2, [](double) { return Mat::Zero(4, 4); }, [](double) { return Vec::Zero(4); },
                                 [](double) { return 0.0; }, 0.01, 0.05),
               DomainError);
}

TEST(BlockSystem, SolutionSatisfiesTheEquations) {
  const int n = 2;
  const BlockSystem bs = test_block(n, 12.0, 0.02, 5);
  const Vec phi0 = Vec::Constant(n, 0.5);
  const BlockSolution sol = solve_block_system(bs, phi0, 1e-13);
  EXPECT_NEAR((sol.phi[0] - phi0).norm(), 0.0, 1e-15);
  EXPECT_NEAR(sol.psi.back().norm(), 0.0, 1e-15);
  EXPECT_LT(sol.contraction, 1.0);
  // Residual of the ODEs by centered differences in the interior.
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < bs.size(); ++i) {
    const Mat& C = bs.coupling[i];
    const Vec dphi = (sol.phi[i + 1] - sol.phi[i - 1]) / (2 * bs.step);
    const Vec dpsi = (sol.psi[i + 1] - sol.psi[i - 1]) / (2 * bs.step);
    const Vec rphi = -C.topLeftCorner(n, n) * sol.phi[i] - C.topRightCorner(n, n) * sol.psi[i] + bs.forcing[i].head(n);
    const Vec rpsi = n * sol.psi[i] - C.bottomLeftCorner(n, n) * sol.phi[i] - C.bottomRightCorner(n, n) * sol.psi[i] +
                     bs.forcing[i].tail(n);
    worst = std::max({worst, (dphi - rphi).norm(), (dpsi - rpsi).norm()});
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(BlockSystem, FiniteEnergyAndBlockConstants) {
  const int n = 3;
  const double T = 24.0;
  const Vec phi0 = Vec::Constant(n, 0.5);
  const BlockSystem a = test_block(n, T, 0.05, 9);
  const BlockSystem b = test_block(n, 2 * T, 0.05, 9);
  const BlockSolution sa = solve_block_system(a, phi0, 1e-13);
  const BlockSolution sb = solve_block_system(b, phi0, 1e-13);
  double diff = 0.0;
  for (std::size_t i = 0; sa.t[i] <= 0.5 * T; ++i) diff = std::max(diff, (sa.psi[i] - sb.psi[i]).norm());
  EXPECT_LT(diff, 1e-8);

  const BlockSystem fine = test_block(n, T, 0.025, 9);
  const BlockBoundReport c1 = verify_block_bounds(sa, a);
  const BlockBoundReport c2 = verify_block_bounds(solve_block_system(fine, phi0, 1e-13), fine);
  EXPECT_GT(c1.c_phi, 0.0);
  EXPECT_LT(std::max(c1.c_phi, c2.c_phi) / std::min(c1.c_phi, c2.c_phi), 2.0);
  EXPECT_LT(std::max(c1.c_psi, c2.c_psi) / std::min(c1.c_psi, c2.c_psi), 2.0);
  EXPECT_GE(gronwall_rate(a), 0.0);
  EXPECT_GT(exp_estimator_constant(a, lattice_log_estimator(a)), 0.0);
}

TEST(BlockSystem, MidpointInterpolation) {
  std::vector<Vec> v;
  for (int i = 0; i < 20; ++i) {
    Vec x(1);
    x << std::pow(0.1 * i, 3);
    v.push_back(x);
  }
  const std::vector<Vec> m = midpoint_vectors(v);
  ASSERT_EQ(m.size(), v.size() - 1);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m[i][0], std::pow(0.1 * (i + 0.5), 3), 1e-13);
}
