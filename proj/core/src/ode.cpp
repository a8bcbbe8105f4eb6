#include "dinigrad/ode.hpp"

#include <algorithm>
#include <cmath>

#include "dinigrad/types.hpp"

namespace dinigrad {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

std::vector<OdeState> dopri5(const OdeRhs& rhs, double t0, OdeState y0, std::span<const double> outputs,
                             const OdeOptions& opts, OdeStats* stats) {
  std::vector<OdeState> result;
  result.reserve(outputs.size());
  if (outputs.empty()) return result;

  const double t_final = outputs.back();
  const double dir = t_final >= t0 ? 1.0 : -1.0;
  const double span = std::max(std::abs(t_final - t0), 1e-300);
  const Eigen::Index dim = y0.size();

  OdeState y = std::move(y0);
  OdeState k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), tmp(dim), y_new(dim), err(dim);
  OdeStats local;
  double t = t0;
  rhs(t, y, k1);
  ++local.evaluations;

  double h = opts.initial_step;
  if (h <= 0.0) {
    const double ynorm = y.cwiseAbs().maxCoeff();
    const double fnorm = k1.cwiseAbs().maxCoeff();
    h = (fnorm > 0.0) ? 0.01 * std::max(ynorm, 1e-6) / fnorm : 1e-3 * span;
    h = std::clamp(h, 1e-6 * span, 0.1 * span);
  }
  h = std::abs(h);
  const double h_min = opts.min_step * std::max(1.0, span);

  for (double t_out : outputs) {
    if ((t_out - t) * dir < -1e-14 * span) throw DomainError("dopri5: output times must be monotone");
    while ((t_out - t) * dir > 1e-15 * std::max(1.0, std::abs(t_out))) {
      if (local.accepted + local.rejected >= opts.max_steps) {
        throw StepUnderflowError("dopri5: step budget exhausted");
      }
      const double remaining = std::abs(t_out - t);
      const bool last = h >= remaining;
      const double hs = (last ? remaining : h) * dir;

      tmp = y + hs * a21 * k1;
      rhs(t + c2 * hs, tmp, k2);
      tmp = y + hs * (a31 * k1 + a32 * k2);
      rhs(t + c3 * hs, tmp, k3);
      tmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      rhs(t + c4 * hs, tmp, k4);
      tmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      rhs(t + c5 * hs, tmp, k5);
      tmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      rhs(t + hs, tmp, k6);
      y_new = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      rhs(t + hs, y_new, k7);
      local.evaluations += 6;

      err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double enorm = 0.0;
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double sc = opts.atol + opts.rtol * std::max(std::abs(y(i)), std::abs(y_new(i)));
        enorm = std::max(enorm, std::abs(err(i)) / sc);
      }
      if (!std::isfinite(enorm) || !y_new.allFinite()) enorm = 1e10;

      if (enorm <= 1.0) {
        t = last ? t_out : t + hs;
        y.swap(y_new);
        k1 = k7;
        ++local.accepted;
        const double grow = enorm > 0.0 ? 0.9 * std::pow(enorm, -0.2) : 5.0;
        if (!last) h = std::abs(hs) * std::clamp(grow, 0.2, 5.0);
      } else {
        ++local.rejected;
        h = std::abs(hs) * std::max(0.1, 0.9 * std::pow(enorm, -0.2));
        if (h < h_min) throw StepUnderflowError("dopri5: step size underflow");
      }
    }
    result.push_back(y);
  }
  if (stats) *stats = local;
  return result;
}

}  // namespace dinigrad
