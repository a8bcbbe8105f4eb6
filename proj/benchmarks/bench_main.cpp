#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "dinigrad/coeffs.hpp"
#include "dinigrad/dynsys.hpp"
#include "dinigrad/estimator.hpp"
#include "dinigrad/pipeline.hpp"
#include "dinigrad/potential.hpp"
#include "dinigrad/sphere.hpp"

using namespace dinigrad;

namespace {

GSProfile growth() {
  GSProfile p;
  p.amplitude = 0.5;
  p.exponent = 0.75;
  return p;
}

void BM_SphereRule(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_harmonic_basis(build_sphere_rule(n, 9), 8));
}
BENCHMARK(BM_SphereRule)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_HarmonicAnalyze(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const HarmonicBasisPtr basis = build_harmonic_basis(build_sphere_rule(n, 9), 8);
  const SphereSamples f = sample_on(basis->rule(), [](const Point& t) { return std::exp(t[0]) * t[1]; });
  for (auto _ : state) benchmark::DoNotOptimize(harmonic_analyze(f, *basis));
}
BENCHMARK(BM_HarmonicAnalyze)->Arg(2)->Arg(3);

void BM_EstimatorCurve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const CoefficientFieldPtr field = make_gs_field(n, growth());
  const SphereRulePtr rule = build_sphere_rule(n, 8);
  const RadialGridPtr grid = make_radial_grid(-30, 0, 20);
  for (auto _ : state) benchmark::DoNotOptimize(estimator_curve(reduced_curve(*field, grid, *rule)));
}
BENCHMARK(BM_EstimatorCurve)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_BlockSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(7);
  const RandomSystem sys = make_random_system(n, rng, 0.3, 0.75);
  const auto varpi = sys.varpi;
  const BlockSystem bs = make_block_system(
      n,
      [=](double t) {
        Mat m = Mat::Zero(2 * n, 2 * n);
        m.topLeftCorner(n, n) = sys.R1(t);
        m.bottomRightCorner(n, n) = 0.1 * varpi(t) * Mat::Identity(n, n);
        return m;
      },
      [=](double t) { return Vec::Constant(2 * n, varpi(t)); }, varpi, 24.0, 0.05);
  const Vec phi0 = Vec::Constant(n, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(solve_block_system(bs, phi0, 1e-12));
}
BENCHMARK(BM_BlockSolve)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_NewtonianSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const HarmonicBasisPtr basis = build_harmonic_basis(build_sphere_rule(n, 9), 8);
  const RadialGridPtr grid = make_radial_grid(-20, 5, 20);
  const std::size_t idx = basis->offset(2);
  const ModalField f = modal_from_function(grid, basis, [&](double r, const Point& t) {
    return r * r * std::exp(-r * r) * basis->evaluate(idx, t);
  });
  for (auto _ : state) benchmark::DoNotOptimize(newtonian_solve_source(f));
}
BENCHMARK(BM_NewtonianSolve)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_FixedPoint(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const WorkspacePtr ws = make_workspace(make_gs_field(n, growth()));
  const ModalField u = direct_solve_oracle(*ws, {{1, 0, 1.0}, {2, 0, 0.5}});
  const LocalizedRHS rhs = localize_rhs(*ws, u);
  for (auto _ : state) benchmark::DoNotOptimize(fixed_point_solve(*ws, rhs));
}
BENCHMARK(BM_FixedPoint)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
