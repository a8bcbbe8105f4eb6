#include "dinigrad/dynsys.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dinigrad/grid.hpp"
#include "dinigrad/linalg.hpp"

namespace dinigrad {

namespace {

double vnorm(const Vec& v) { return v.size() == 0 ? 0.0 : v.norm(); }

template <class T>
std::vector<T> midpoints_of(const std::vector<T>& v, int order = 8) {
  const long size = static_cast<long>(v.size());
  if (size < 2) return {};
  const int p = static_cast<int>(std::min<long>(order, size));
  std::vector<std::vector<double>> table(p - 1);
  for (int o = 0; o < p - 1; ++o) table[o] = lagrange_weights(p, o + 0.5);
  std::vector<T> out;
  out.reserve(size - 1);
  for (long i = 0; i + 1 < size; ++i) {
    const long start = std::clamp(i - (p / 2 - 1), 0L, size - p);
    const auto& w = table[i - start];
    T acc = w[0] * v[start];
    for (int q = 1; q < p; ++q) acc += w[q] * v[start + q];
    out.push_back(acc);
  }
  return out;
}

Mat unpack(const OdeState& y, int n, int offset) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = y(offset + i * n + j);
  return m;
}

void pack(const Mat& m, OdeState& y, int offset) {
  const int n = static_cast<int>(m.rows());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) y(offset + i * n + j) = m(i, j);
}

}  // namespace

std::vector<Mat> midpoint_matrices(const std::vector<Mat>& m) { return midpoints_of(m); }
std::vector<Vec> midpoint_vectors(const std::vector<Vec>& v) { return midpoints_of(v); }

// ---------------------------------------------------------------------------

Propagator fundamental_matrix(const MatrixFunction& R1, int n, std::span<const double> t_grid,
                              const OdeOptions& opts) {
  if (n < 1 || n > 6) throw DomainError("fundamental_matrix: matrix size must lie in 1..6");
  const int nn = n * n;
  OdeState y0 = OdeState::Zero(nn + 2);
  pack(Mat::Identity(n, n), y0, 0);
  auto rhs = [&](double t, const OdeState& y, OdeState& dy) {
    const Mat r = R1(t);
    const Mat phi = unpack(y, n, 0);
    pack(-r * phi, dy, 0);
    dy(nn) = mu_max(-r);
    dy(nn + 1) = r.trace();
  };
  const std::vector<OdeState> ys = dopri5(rhs, 0.0, y0, t_grid, opts);
  Propagator p;
  p.n = n;
  p.t.assign(t_grid.begin(), t_grid.end());
  for (const OdeState& y : ys) {
    const Mat phi = unpack(y, n, 0);
    const double det_expected = std::exp(-y(nn + 1));
    p.liouville_defect = std::max(p.liouville_defect, std::abs(phi.determinant() - det_expected) / det_expected);
    p.phi.push_back(phi);
    p.log_estimator.push_back(y(nn));
  }
  return p;
}

PropagatorReport verify_propagator_bounds(const Propagator& p, std::span<const double> log_estimator,
                                          double rel_tol) {
  if (log_estimator.size() != p.phi.size()) throw DomainError("verify_propagator_bounds: size mismatch");
  PropagatorReport rep;
  rep.worst_single = -1.0;
  rep.worst_pair = -1.0;
  std::vector<Mat> inv;
  inv.reserve(p.phi.size());
  for (const Mat& m : p.phi) inv.push_back(m.inverse());
  for (std::size_t i = 0; i < p.phi.size(); ++i) {
    const double e_t = std::exp(log_estimator[i]);
    rep.worst_single = std::max(rep.worst_single, spectral_norm(p.phi[i]) / e_t - 1.0);
    for (std::size_t s = 0; s < i; ++s) {
      const double ratio = std::exp(log_estimator[i] - log_estimator[s]);
      rep.worst_pair = std::max(rep.worst_pair, spectral_norm(p.phi[i] * inv[s]) / ratio - 1.0);
      ++rep.pairs;
    }
  }
  rep.passed = rep.worst_single <= rel_tol && rep.worst_pair <= rel_tol;
  return rep;
}

RandomSystem make_random_system(int n, std::mt19937_64& rng, double amplitude, double exponent) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> freq(0.5, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.14159265358979323846);
  Mat b1(n, n), b2(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      b1(i, j) = gauss(rng);
      b2(i, j) = gauss(rng);
    }
  const double scale = spectral_norm(b1) + spectral_norm(b2);
  b1 /= scale;
  b2 /= scale;
  const double w1 = freq(rng), w2 = freq(rng), p1 = phase(rng), p2 = phase(rng);
  RandomSystem sys;
  sys.n = n;
  sys.varpi = [amplitude, exponent](double t) { return amplitude * std::pow(1.0 + std::max(t, 0.0), -exponent); };
  auto varpi = sys.varpi;
  sys.R1 = [=](double t) -> Mat { return varpi(t) * (std::cos(w1 * t + p1) * b1 + std::sin(w2 * t + p2) * b2); };
  return sys;
}

InhomogeneousSolution solve_inhomogeneous(const MatrixFunction& R1, const VectorFunction& f, const Vec& phi0,
                                          std::span<const double> t_grid, const OdeOptions& opts) {
  const int n = static_cast<int>(phi0.size());
  const int nn = n * n;
  // State: Phi, Phi^{-1}, z = int Phi^{-1} f, log E, int |f| / E.
  OdeState y0 = OdeState::Zero(2 * nn + n + 2);
  pack(Mat::Identity(n, n), y0, 0);
  pack(Mat::Identity(n, n), y0, nn);
  auto rhs = [&](double t, const OdeState& y, OdeState& dy) {
    const Mat r = R1(t);
    const Mat phi = unpack(y, n, 0);
    const Mat inv = unpack(y, n, nn);
    const Vec ft = f(t);
    pack(-r * phi, dy, 0);
    pack(inv * r, dy, nn);
    const Vec dz = inv * ft;
    for (int k = 0; k < n; ++k) dy(2 * nn + k) = dz(k);
    dy(2 * nn + n) = mu_max(-r);
    dy(2 * nn + n + 1) = vnorm(ft) * std::exp(-y(2 * nn + n));
  };
  const std::vector<OdeState> ys = dopri5(rhs, 0.0, y0, t_grid, opts);

  InhomogeneousSolution sol;
  sol.t.assign(t_grid.begin(), t_grid.end());
  std::vector<double> cumulative;
  for (const OdeState& y : ys) {
    const Mat phi = unpack(y, n, 0);
    Vec z(n);
    for (int k = 0; k < n; ++k) z(k) = y(2 * nn + k);
    sol.phi.push_back(phi * (phi0 + z));
    sol.log_estimator.push_back(y(2 * nn + n));
    cumulative.push_back(y(2 * nn + n + 1));
  }
  sol.weighted_l1 = cumulative.back();

  // Divergence test on the weighted forcing: compare the last two doubling blocks.
  const double T = sol.t.back();
  auto cum_at = [&](double tq) {
    const auto it = std::lower_bound(sol.t.begin(), sol.t.end(), tq);
    if (it == sol.t.begin()) return cumulative.front();
    if (it == sol.t.end()) return cumulative.back();
    const std::size_t i = static_cast<std::size_t>(it - sol.t.begin());
    const double w = (tq - sol.t[i - 1]) / (sol.t[i] - sol.t[i - 1]);
    return (1.0 - w) * cumulative[i - 1] + w * cumulative[i];
  };
  const double block1 = cum_at(0.5 * T) - cum_at(0.25 * T);
  const double block2 = cumulative.back() - cum_at(0.5 * T);
  if (T > 0.0 && block2 > 1e-12 * (1.0 + sol.weighted_l1) && block2 >= 0.95 * block1) {
    throw NumericalError("solve_inhomogeneous: weighted forcing norm |f|/E does not converge on the grid");
  }

  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double e = std::exp(sol.log_estimator[i]);
    sol.bound_violation =
        std::max(sol.bound_violation, (vnorm(sol.phi[i]) - e * (vnorm(phi0) + cumulative[i])) / e);
  }

  // Independent oracle: integrate phi' = -R1 phi + f directly.
  OdeState p0 = phi0;
  auto direct = [&](double t, const OdeState& y, OdeState& dy) {
    const Vec yv = y;
    const Vec d = -R1(t) * yv + f(t);
    dy = d;
  };
  const std::vector<OdeState> ref = dopri5(direct, 0.0, p0, t_grid, opts);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const Vec rv = ref[i];
    sol.oracle_defect = std::max(sol.oracle_defect, vnorm(rv - sol.phi[i]) / std::max(1.0, vnorm(rv)));
  }
  return sol;
}

// ---------------------------------------------------------------------------

BlockSystem make_block_system(int n, const MatrixFunction& coupling, const VectorFunction& forcing,
                              const std::function<double(double)>& varpi, double t_max, double h, double delta) {
  if (!(h > 0.0) || !(t_max > h)) throw DomainError("make_block_system: invalid lattice");
  const std::size_t N = static_cast<std::size_t>(std::llround(t_max / h));
  BlockSystem bs;
  bs.n = n;
  bs.step = t_max / static_cast<double>(N);
  bs.delta = delta;
  for (std::size_t i = 0; i <= N; ++i) {
    const double t = bs.t(i);
    bs.coupling.push_back(coupling(t));
    bs.forcing.push_back(forcing(t));
    bs.varpi.push_back(varpi(t));
  }
  return bs;
}

std::vector<double> lattice_log_estimator(const BlockSystem& bs) {
  const int n = bs.n;
  std::vector<Mat> r1;
  r1.reserve(bs.size());
  for (const Mat& c : bs.coupling) r1.push_back(c.topLeftCorner(n, n));
  const std::vector<Mat> mid = midpoints_of(r1);
  std::vector<double> out(bs.size(), 0.0);
  for (std::size_t i = 0; i + 1 < bs.size(); ++i) {
    const double a = mu_max(-r1[i]), m = mu_max(-mid[i]), b = mu_max(-r1[i + 1]);
    out[i + 1] = out[i] + bs.step / 6.0 * (a + 4.0 * m + b);
  }
  return out;
}

BlockSolution solve_block_system(const BlockSystem& bs, const Vec& phi0, double tol, int max_iter) {
  const int n = bs.n;
  const std::size_t N = bs.size();
  if (N < 3) throw DomainError("solve_block_system: lattice too short");
  if (phi0.size() != n) throw DomainError("solve_block_system: phi0 has the wrong size");
  if (bs.forcing.size() != N) throw DomainError("solve_block_system: forcing size mismatch");
  const double h = bs.step;

  const std::vector<Mat> cmid = midpoints_of(bs.coupling);
  const std::vector<Vec> fmid = midpoints_of(bs.forcing);
  auto blocks = [n](const Mat& c) {
    return std::array<Mat, 4>{c.topLeftCorner(n, n), c.topRightCorner(n, n), c.bottomLeftCorner(n, n),
                              c.bottomRightCorner(n, n)};
  };
  std::vector<std::array<Mat, 4>> cb, cbm;
  for (const Mat& c : bs.coupling) cb.push_back(blocks(c));
  for (const Mat& c : cmid) cbm.push_back(blocks(c));

  BlockSolution sol;
  sol.log_estimator = bs.log_estimator.empty() ? lattice_log_estimator(bs) : bs.log_estimator;
  if (sol.log_estimator.size() != N) throw DomainError("solve_block_system: estimator size mismatch");
  for (std::size_t i = 0; i < N; ++i) sol.t.push_back(bs.t(i));

  auto forward = [&](const std::vector<Vec>& psi) {
    const std::vector<Vec> psim = midpoints_of(psi);
    std::vector<Vec> phi(N);
    phi[0] = phi0;
    auto rhs = [&](const std::array<Mat, 4>& b, const Vec& p, const Vec& s, const Vec& F) -> Vec {
      return -b[0] * p - b[1] * s + F.head(n);
    };
    for (std::size_t i = 0; i + 1 < N; ++i) {
      const Vec& y = phi[i];
      const Vec k1 = rhs(cb[i], y, psi[i], bs.forcing[i]);
      const Vec k2 = rhs(cbm[i], y + 0.5 * h * k1, psim[i], fmid[i]);
      const Vec k3 = rhs(cbm[i], y + 0.5 * h * k2, psim[i], fmid[i]);
      const Vec k4 = rhs(cb[i + 1], y + h * k3, psi[i + 1], bs.forcing[i + 1]);
      phi[i + 1] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return phi;
  };
  auto backward = [&](const std::vector<Vec>& phi) {
    const std::vector<Vec> phim = midpoints_of(phi);
    std::vector<Vec> psi(N);
    psi[N - 1] = Vec::Zero(n);
    auto rhs = [&](const std::array<Mat, 4>& b, const Vec& p, const Vec& s, const Vec& F) -> Vec {
      return n * s - b[2] * p - b[3] * s + F.tail(n);
    };
    for (std::size_t i = N - 1; i > 0; --i) {
      const Vec& y = psi[i];
      const double hb = -h;
      const Vec k1 = rhs(cb[i], phi[i], y, bs.forcing[i]);
      const Vec k2 = rhs(cbm[i - 1], phim[i - 1], y + 0.5 * hb * k1, fmid[i - 1]);
      const Vec k3 = rhs(cbm[i - 1], phim[i - 1], y + 0.5 * hb * k2, fmid[i - 1]);
      const Vec k4 = rhs(cb[i - 1], phi[i - 1], y + hb * k3, bs.forcing[i - 1]);
      psi[i - 1] = y + hb / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return psi;
  };
  auto xnorm = [&](const std::vector<Vec>& phi) {
    double m = 0.0;
    for (std::size_t i = 0; i < N; ++i) m = std::max(m, vnorm(phi[i]) * std::exp(-sol.log_estimator[i]));
    return m;
  };

  std::vector<Vec> phi = forward(std::vector<Vec>(N, Vec::Zero(n)));
  std::vector<Vec> psi = backward(phi);
  double prev_inc = -1.0;
  for (int it = 1; it <= max_iter; ++it) {
    std::vector<Vec> next = forward(psi);
    std::vector<Vec> diff(N);
    for (std::size_t i = 0; i < N; ++i) diff[i] = next[i] - phi[i];
    const double inc = xnorm(diff);
    phi = std::move(next);
    psi = backward(phi);
    sol.increments.push_back(inc);
    sol.iterations = it;
    if (prev_inc > 0.0 && inc > 0.0) sol.contraction = std::max(sol.contraction, inc / prev_inc);
    const double size = xnorm(phi);
    if (inc <= tol * std::max(size, 1e-300) || inc == 0.0) {
      sol.phi = std::move(phi);
      sol.psi = std::move(psi);
      return sol;
    }
    if (prev_inc > 0.0 && inc >= prev_inc && it > 3) {
      throw ContractionError("solve_block_system: Picard iteration does not contract (ratio " +
                             std::to_string(inc / prev_inc) + "); the smallness budget delta on varpi is violated");
    }
    prev_inc = inc;
  }
  throw ContractionError("solve_block_system: no convergence within the iteration budget");
}

BlockBoundReport verify_block_bounds(const BlockSolution& sol, const BlockSystem& bs) {
  const int n = bs.n;
  const std::size_t N = bs.size();
  const double h = bs.step;
  const double alpha = n - bs.delta;
  BlockBoundReport rep;
  std::vector<double> E(N);
  for (std::size_t i = 0; i < N; ++i) E[i] = std::exp(sol.log_estimator[i]);

  for (std::size_t i = 0; i + 1 < N; ++i) {
    rep.forcing_l1 += 0.5 * h * (vnorm(bs.forcing[i].head(n)) / E[i] + vnorm(bs.forcing[i + 1].head(n)) / E[i + 1]);
  }
  // G(t) = e^{alpha t} int_t^T |F2| e^{-alpha s} ds by a backward recurrence.
  std::vector<double> G(N, 0.0);
  const double decay = std::exp(-alpha * h);
  for (std::size_t i = N - 1; i > 0; --i) {
    const double cell = 0.5 * h * (vnorm(bs.forcing[i - 1].tail(n)) + vnorm(bs.forcing[i].tail(n)) * decay);
    G[i - 1] = decay * G[i] + cell;
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (bs.varpi[i] > 0.0) rep.c_alpha = std::max(rep.c_alpha, G[i] / (bs.varpi[i] * E[i]));
  }
  rep.scale = rep.c_alpha + vnorm(sol.phi.front()) + rep.forcing_l1;
  if (rep.scale <= 0.0) return rep;
  for (std::size_t i = 0; i < N; ++i) {
    rep.c_phi = std::max(rep.c_phi, vnorm(sol.phi[i]) / (E[i] * rep.scale));
    if (bs.varpi[i] > 0.0) rep.c_psi = std::max(rep.c_psi, vnorm(sol.psi[i]) / (bs.varpi[i] * E[i] * rep.scale));
  }
  return rep;
}

double gronwall_rate(const BlockSystem& bs) {
  const int n = bs.n;
  const std::size_t N = bs.size();
  const double h = bs.step;
  std::vector<Mat> r4;
  for (const Mat& c : bs.coupling) r4.push_back(c.bottomRightCorner(n, n));
  const std::vector<Mat> mid = midpoints_of(r4);
  std::vector<Mat> psi(N);
  psi[0] = Mat::Identity(n, n);
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const Mat& y = psi[i];
    const Mat k1 = -r4[i] * y;
    const Mat k2 = -mid[i] * (y + 0.5 * h * k1);
    const Mat k3 = -mid[i] * (y + 0.5 * h * k2);
    const Mat k4 = -r4[i + 1] * (y + h * k3);
    psi[i + 1] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  const std::size_t stride = std::max<std::size_t>(1, N / 200);
  double rate = 0.0;
  for (std::size_t s = 0; s < N; s += stride) {
    const Mat inv = psi[s].inverse();
    for (std::size_t t = s + stride; t < N; t += stride) {
      rate = std::max(rate, std::log(spectral_norm(psi[t] * inv)) / (bs.t(t) - bs.t(s)));
    }
  }
  return rate;
}

double exp_estimator_constant(const BlockSystem& bs, std::span<const double> log_estimator) {
  const std::size_t N = bs.size();
  const double h = bs.step;
  const double a = bs.delta - bs.n;
  const double decay = std::exp(a * h);
  std::vector<double> J(N, 0.0);
  double worst = 0.0;
  for (std::size_t i = N - 1; i > 0; --i) {
    const double ratio = std::exp(log_estimator[i] - log_estimator[i - 1]);
    J[i - 1] = decay * ratio * J[i] + 0.5 * h * (1.0 + decay * ratio);
    worst = std::max(worst, J[i - 1]);
  }
  return worst;
}

}  // namespace dinigrad
