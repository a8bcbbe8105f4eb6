#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "dinigrad/coeffs.hpp"
#include "dinigrad/dynsys.hpp"
#include "dinigrad/estimator.hpp"
#include "dinigrad/linalg.hpp"
#include "dinigrad/pipeline.hpp"
#include "dinigrad/potential.hpp"
#include "dinigrad/sphere.hpp"

using namespace dinigrad;

namespace {

class Criterion {
 public:
  explicit Criterion(double budget_seconds) : budget_(budget_seconds), start_(std::chrono::steady_clock::now()) {}

  void expect(bool ok, const std::string& what) {
    std::printf("  [%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
    ok_ = ok_ && ok;
  }
  template <class... A>
  std::string fmt(const char* f, A... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
  }
  int finish() {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    expect(elapsed < budget_, fmt("runtime %.2f s < %.0f s", elapsed, budget_));
    std::printf("%s\n", ok_ ? "PASSED" : "FAILED");
    return ok_ ? 0 : 1;
  }

 private:
  double budget_;
  std::chrono::steady_clock::time_point start_;
  bool ok_ = true;
};

GSProfile profile(double amplitude, double exponent = 0.75) {
  GSProfile p;
  p.amplitude = amplitude;
  p.exponent = exponent;
  return p;
}

const std::vector<BoundaryMode> kModes{{0, 0, 0.3}, {1, 0, 1.0}, {2, 0, 0.5}, {3, 1, 0.25}, {5, 0, 0.1}};

int sphere_exactness() {
  Criterion c(1.0);
  for (int n : {2, 3}) {
    const SphereRulePtr rule = build_sphere_rule(n, 8);
    double worst = 0.0;
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (std::size_t i = 0; i < rule->size(); ++i) s += rule->weight(i) * rule->node(i)[k] * rule->node(i)[l];
        worst = std::max(worst, std::abs(s - (k == l ? 1.0 / n : 0.0)));
      }
    c.expect(worst <= 1e-12, c.fmt("n=%d: max |mean theta_k theta_l - delta/n| = %.2e <= 1e-12", n, worst));
  }
  return c.finish();
}

int reduced_matrix_identity() {
  Criterion c(5.0);
  for (int n : {2, 3}) {
    const SphereRulePtr rule = build_sphere_rule(n, 8);
    for (double amp : {0.5, -0.5}) {
      const GSProfile p = profile(amp);
      const CoefficientFieldPtr f = make_gs_field(n, p);
      double worst = 0.0;
      for (int i = 0; i < 200; ++i) {
        const double r = std::pow(2.0, -30.0 * i / 199.0);
        const Mat R = reduced_matrix(*f, r, *rule);
        worst = std::max(worst, spectral_norm(R + ((n - 1.0) / n) * p(r) * Mat::Identity(n, n)));
      }
      c.expect(worst <= 1e-10, c.fmt("n=%d amp=%+.1f: max |R + (n-1)/n g I| over 200 radii = %.2e", n, amp, worst));
    }
  }
  return c.finish();
}

int propagator_bounds() {
  Criterion c(30.0);
  std::mt19937_64 rng(20240611);
  std::vector<double> t;
  for (int i = 0; i <= 100; ++i) t.push_back(0.25 * i);
  double worst = -1.0;
  int failures = 0;
  std::size_t pairs = 0;
  for (int s = 0; s < 100; ++s) {
    const int n = s % 2 == 0 ? 2 : 3;
    const RandomSystem sys = make_random_system(n, rng, 0.6, 0.6);
    const Propagator p = fundamental_matrix(sys.R1, n, t);
    const PropagatorReport rep = verify_propagator_bounds(p, p.log_estimator, 1e-8);
    worst = std::max({worst, rep.worst_single, rep.worst_pair});
    pairs += rep.pairs;
    failures += rep.passed ? 0 : 1;
  }
  c.expect(failures == 0, c.fmt("100 systems, %zu pairs: %d violations, worst excess %.2e (allowed 1e-8)", pairs,
                                failures, worst));
  return c.finish();
}

BlockSystem synthetic_block(int n, double T, double h, std::uint64_t seed) {
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

int finite_energy() {
  Criterion c(30.0);
  const double T = 24.0;
  for (int n : {2, 3}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Vec phi0 = Vec::Constant(n, 0.5);
      const BlockSystem a = synthetic_block(n, T, 0.05, seed);
      const BlockSystem b = synthetic_block(n, 2 * T, 0.05, seed);
      const BlockSolution sa = solve_block_system(a, phi0, 1e-13);
      const BlockSolution sb = solve_block_system(b, phi0, 1e-13);
      double diff = 0.0;
      for (std::size_t i = 0; sa.t[i] <= 0.5 * T + 1e-12; ++i) diff = std::max(diff, (sa.psi[i] - sb.psi[i]).norm());
      c.expect(diff < 1e-8, c.fmt("n=%d seed=%llu: psi change on [0, T/2] when T doubles = %.2e", n,
                                  static_cast<unsigned long long>(seed), diff));

      const BlockSystem fine = synthetic_block(n, T, 0.025, seed);
      const BlockBoundReport p1 = verify_block_bounds(sa, a);
      const BlockBoundReport p2 = verify_block_bounds(solve_block_system(fine, phi0, 1e-13), fine);
      const double f_phi = std::max(p1.c_phi, p2.c_phi) / std::min(p1.c_phi, p2.c_phi);
      const double f_psi = std::max(p1.c_psi, p2.c_psi) / std::min(p1.c_psi, p2.c_psi);
      c.expect(f_phi < 2.0 && f_psi < 2.0,
               c.fmt("  fitted constants phi %.4f -> %.4f, psi %.4f -> %.4f under h/2 (factors %.3f, %.3f)", p1.c_phi,
                     p2.c_phi, p1.c_psi, p2.c_psi, f_phi, f_psi));
    }
  }
  return c.finish();
}

int potential_recovery() {
  Criterion c(30.0);
  for (int n : {2, 3}) {
    const int K = 8;
    const SphereRulePtr rule = build_sphere_rule(n, K + 1);
    const HarmonicBasisPtr basis = build_harmonic_basis(rule, K);
    const HarmonicBasisPtr raised = build_harmonic_basis(rule, K + 1);
    const RadialGridPtr grid = make_radial_grid(-12, 5, 20);
    std::vector<double> ca, cb;
    for (int k : {2, 3, 5}) {
      const std::size_t idx = basis->offset(k);
      auto exact = [&](double r, const Point& t) { return std::pow(r, k) * std::exp(-r * r) * basis->evaluate(idx, t); };
      auto exact_dr = [&](double r, const Point& t) {
        return (k / r - 2.0 * r) * std::pow(r, k) * std::exp(-r * r) * basis->evaluate(idx, t);
      };
      auto source = [&](double r, const Point& t) {
        return std::pow(r, k) * std::exp(-r * r) * (2.0 * n + 4.0 * k - 4.0 * r * r) * basis->evaluate(idx, t);
      };
      const ModalField f = modal_from_function(grid, basis, source);
      const ModalField ref = modal_from_function(grid, basis, exact, exact_dr);
      const ModalField w = newtonian_solve_source(f);
      VectorSamples fv(grid, rule);
      for (std::size_t j = 0; j < grid->size(); ++j) {
        const std::vector<Point> g = sample_gradient(ref, j);
        for (std::size_t i = 0; i < rule->size(); ++i)
          for (int q = 0; q < n; ++q) fv.at(j, i, q) = -g[i][q];
      }
      const ModalField w2 = newtonian_solve_divergence(fv, basis);
      double peak = 0.0, e1 = 0.0, e2 = 0.0;
      for (std::size_t j = 0; j < grid->size(); ++j) {
        if (grid->r(j) < 1e-3 || grid->r(j) > 4.0) continue;
        for (std::size_t i = 0; i < basis->size(); ++i) {
          peak = std::max(peak, std::abs(ref.c(i, j)));
          e1 = std::max(e1, std::abs(w.c(i, j) - ref.c(i, j)));
          e2 = std::max(e2, std::abs(w2.c(i, j) - ref.c(i, j)));
        }
      }
      ca.push_back(verify_source_bound(w, f, raised).constant);
      cb.push_back(verify_divergence_bound(w2, fv).constant);
      c.expect(e1 / peak < 1e-7 && e2 / peak < 1e-7,
               c.fmt("n=%d degree %d: relative recovery source %.2e, divergence %.2e; constants %.3f, %.3f", n, k,
                     e1 / peak, e2 / peak, ca.back(), cb.back()));
    }
    auto spread = [](const std::vector<double>& v) {
      return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
    };
    c.expect(spread(ca) < 2.0 && spread(cb) < 2.0,
             c.fmt("n=%d: constant spread across three sources %.3f (source), %.3f (divergence)", n, spread(ca),
                   spread(cb)));
  }
  return c.finish();
}

struct Run {
  WorkspacePtr ws;
  ModalField u;
  LocalizedRHS rhs;
  ConstructiveSolution sol;
};

Run constructive(int n, double amp, int max_iter, const std::vector<BoundaryMode>& modes = kModes) {
  PipelineOptions o;
  o.fixed_point_max_iter = max_iter;
  Run run;
  run.ws = make_workspace(amp == 0.0 ? make_identity_field(n) : make_gs_field(n, profile(amp)), o);
  run.u = direct_solve_oracle(*run.ws, modes);
  run.rhs = localize_rhs(*run.ws, run.u);
  run.sol = fixed_point_solve(*run.ws, run.rhs);
  return run;
}

int fixed_point() {
  Criterion c(120.0);
  for (int n : {2, 3}) {
    const Run run = constructive(n, 0.1, 20);
    const FixedPointReport& r = run.sol.report;
    c.expect(r.contraction < 1.0, c.fmt("n=%d: combined contraction factor %.4f < 1", n, r.contraction));
    c.expect(r.converged && r.increments.back() < 1e-9 && r.iterations <= 20,
             c.fmt("n=%d: final Y increment %.2e after %d iterations", n, r.increments.back(), r.iterations));
    c.expect(std::isfinite(r.xi_constant) && r.xi_constant > 0.0,
             c.fmt("n=%d: |xi|_Y = %.4e <= c |u| with fitted c = %.4f (|u| = %.4f)", n, r.xi_norm, r.xi_constant,
                   run.rhs.u_l2));
    c.expect(std::abs(run.rhs.f0_integral) < 1e-10, c.fmt("n=%d: integral of scalar source %.2e", n, run.rhs.f0_integral));
  }
  return c.finish();
}

int oracle_equivalence() {
  Criterion c(120.0);
  for (const auto& [n, amp] : std::vector<std::pair<int, double>>{{2, 0.1}, {3, 0.1}, {2, 0.5}, {2, -0.5}}) {
    const Run run = constructive(n, amp, 60);
    const double diff = relative_l2_difference(*run.ws, run.sol.u, apply_cutoff(*run.ws, run.u, run.rhs.cutoff),
                                               std::ldexp(1.0, -10), 0.5);
    const WeakResidual wr = weak_form_residual(*run.ws, run.sol.u, run.rhs);
    c.expect(diff < 1e-4, c.fmt("n=%d amp=%+.1f: relative L2 difference on [2^-10, 1/2] = %.2e (K=8, %d per octave)",
                                n, amp, diff, run.ws->options.per_octave));
    c.expect(wr.radial < 1e-6 && wr.linear < 1e-6,
             c.fmt("  weak-form residuals %.2e (radial tests), %.2e (linear tests)", wr.radial, wr.linear));
  }
  return c.finish();
}

int gradient_ratio() {
  Criterion c(4 * 180.0);
  struct Scenario {
    const char* name;
    int n;
    double amp;
    std::vector<BoundaryMode> modes;
    std::string trend;
  };
  const std::vector<Scenario> scenarios{
      {"identity", 2, 0.0, {{1, 0, 1.0}}, "flat"},
      {"growth", 2, 0.5, kModes, "growing"},
      {"growth", 3, 0.5, kModes, "growing"},
      {"decay", 2, -0.5, kModes, "decaying"},
  };
  for (const Scenario& s : scenarios) {
    const auto t0 = std::chrono::steady_clock::now();
    const Run run = constructive(s.n, s.amp, 60, s.modes);
    const GradientProfile gp = gradient_profile(*run.ws, run.sol.u, 6, 14);
    const RatioReport rep = gradient_ratio_check(gp, run.ws->estimator, run.rhs.u_l2, 3.0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool monotone = true;
    for (std::size_t q = 1; q < gp.m2_grad.size(); ++q) {
      if (s.trend == "growing") monotone = monotone && gp.m2_grad[q] > gp.m2_grad[q - 1];
      if (s.trend == "decaying") monotone = monotone && gp.m2_grad[q] < gp.m2_grad[q - 1];
    }
    c.expect(rep.rows.size() == 9 && rep.spread <= 3.0 && rep.passed,
             c.fmt("%s n=%d: ratio spread over j=6..14 = %.4f <= 3 (ratios %.4f .. %.4f)", s.name, s.n, rep.spread,
                   rep.rows.front().ratio, rep.rows.back().ratio));
    c.expect(rep.gradient_trend == s.trend && monotone,
             c.fmt("  M2(grad u) %.4e -> %.4e is %s", gp.m2_grad.front(), gp.m2_grad.back(), rep.gradient_trend.c_str()));
    if (s.amp == 0.0)
      c.expect(std::abs(rep.rows.front().ratio * std::sqrt(M_PI) / 2.0 - 1.0) < 1e-5,
               c.fmt("  identity ratio %.9f matches 2/sqrt(pi) to 1e-5", rep.rows.front().ratio));
    c.expect(secs < 180.0, c.fmt("  scenario runtime %.2f s < 180 s", secs));
  }
  return c.finish();
}

int sharpness() {
  Criterion c(60.0);
  for (int n : {2, 3}) {
    const WorkspacePtr ws = make_workspace(make_gs_field(n, profile(0.5)));
    const SharpnessReport rep = gs_sharpness_check(*ws, 0.1);
    c.expect(rep.passed && rep.drift <= 0.1,
             c.fmt("n=%d: v/E drift over last decade [%.3e, %.3e] = %.4f <= 0.10", n, rep.decade_lo, rep.decade_hi,
                   rep.drift));
    c.expect(rep.window_drift <= 0.1, c.fmt("n=%d: drift over [2^-14, 2^-6] = %.4f <= 0.10", n, rep.window_drift));
  }
  return c.finish();
}

int square_dini() {
  Criterion c(1.0);
  for (int n : {2, 3}) {
    for (double s : {0.4, 0.5, 0.6, 0.75, 1.0}) {
      const SquareDiniResult r = square_dini_integral(make_gs_field(n, profile(0.5, s))->modulus(), 1e-3);
      c.expect(r.finite == (s > 0.5), c.fmt("n=%d s=%.2f: classified %s (tail slope %.4f)", n, s,
                                            r.finite ? "finite" : "divergent", r.tail_slope));
    }
  }
  return c.finish();
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<int()>>> criteria{
      {1, {"sphere exactness", sphere_exactness}},
      {2, {"reduced-matrix identity", reduced_matrix_identity}},
      {3, {"propagator bounds on random systems", propagator_bounds}},
      {4, {"finite-energy solver and block-system constants", finite_energy}},
      {5, {"potential recovery and bound constants", potential_recovery}},
      {6, {"fixed point contraction", fixed_point}},
      {7, {"constructive solution against the radial oracle", oracle_equivalence}},
      {8, {"gradient ratio verdict", gradient_ratio}},
      {9, {"sharpness plateau", sharpness}},
      {10, {"square-Dini classifier", square_dini}},
  };
  if (argc != 2 || !criteria.count(std::atoi(argv[1]))) {
    std::fprintf(stderr, "usage: %s <criterion 1..10>\n", argv[0]);
    return 2;
  }
  const auto& [title, fn] = criteria.at(std::atoi(argv[1]));
  std::printf("criterion %s: %s\n", argv[1], title);
  try {
    return fn();
  } catch (const std::exception& e) {
    std::printf("FAILED with exception: %s\n", e.what());
    return 1;
  }
}
