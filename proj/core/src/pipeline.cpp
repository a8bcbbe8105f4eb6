#include "dinigrad/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dinigrad/linalg.hpp"
#include "dinigrad/ode.hpp"
#include "dinigrad/parallel.hpp"

namespace dinigrad {

namespace {

double sphere_area(int n) { return n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi; }

Vec zero_vec(int n) { return Vec::Zero(n); }

// Integral over |x| < r_end of a radial density g (given per node), i.e.
// |S| int r^{n-1} g dr, using cells below index `end`.
double ball_integral(const Workspace& ws, std::span<const double> g, std::size_t end) {
  const std::vector<double> cells = ws.quadrature->cell_integrals(g, static_cast<double>(ws.n));
  double s = 0.0;
  for (std::size_t j = 0; j < end && j < cells.size(); ++j) s += std::pow(ws.grid->r(j), ws.n) * cells[j];
  return sphere_area(ws.n) * s;
}

// T_j = int_{r_j}^{inf} rho^{a-1} g(rho) d rho with g given per node.
std::vector<double> upper_tail(const Workspace& ws, std::span<const double> g, double a) {
  const std::vector<double> cells = ws.quadrature->cell_integrals(g, a);
  const std::size_t J = ws.grid->size();
  std::vector<double> out(J, 0.0);
  for (std::size_t j = J - 1; j-- > 0;) out[j] = out[j + 1] + std::pow(ws.grid->r(j), a) * cells[j];
  return out;
}

Mat field_at(const Workspace& ws, std::size_t j, std::size_t i) { return ws.field->at(ws.grid->r(j), ws.rule->node(i)); }

Vec point_vec(const Point& p, int n) {
  Vec v(n);
  for (int c = 0; c < n; ++c) v[c] = p[c];
  return v;
}

// Gradient samples of a modal field at every radius (empty field -> zeros).
std::vector<Point> gradient_or_zero(const ModalField* f, std::size_t j, std::size_t nodes) {
  if (f == nullptr) return std::vector<Point>(nodes, Point{0.0, 0.0, 0.0});
  return sample_gradient(*f, j);
}

}  // namespace

// ---------------------------------------------------------------------------

double Cutoff::operator()(double r) const {
  if (r <= inner) return 1.0;
  if (r >= outer) return 0.0;
  const double s = std::log(r / inner) / std::log(outer / inner);
  const double s5 = s * s * s * s * s;
  return 1.0 - s5 * (126.0 + s * (-420.0 + s * (540.0 + s * (-315.0 + s * 70.0))));
}

double Cutoff::derivative(double r) const {
  if (r <= inner || r >= outer) return 0.0;
  const double s = std::log(r / inner) / std::log(outer / inner);
  const double q = s * (1.0 - s);
  return -630.0 * q * q * q * q / (r * std::log(outer / inner));
}

// ---------------------------------------------------------------------------

int effective_lo_octave(int n, const PipelineOptions& options) {
  if (options.lo_octave != 0) return options.lo_octave;
  return -static_cast<int>(std::ceil((40.0 / n) / std::numbers::ln2));
}

WorkspacePtr make_workspace(CoefficientFieldPtr field, const PipelineOptions& options) {
  if (!field) throw DomainError("make_workspace: missing field");
  auto ws = std::make_shared<Workspace>();
  const int n = field->dimension();
  check_dimension(n);
  ws->n = n;
  ws->options = options;
  ws->field = field;
  const int lo = effective_lo_octave(n, options);
  if (lo >= 0 || options.hi_octave < 2) throw DomainError("make_workspace: grid must span r < 1 and r >= 4");
  ws->grid = make_radial_grid(lo, options.hi_octave, options.per_octave);
  ws->unit_index = *ws->grid->dyadic_index(0);
  ws->rule = build_sphere_rule(n, options.harmonic_degree);
  ws->basis = build_harmonic_basis(ws->rule, options.harmonic_degree);
  ws->raised = build_harmonic_basis(ws->rule, options.harmonic_degree + 1);
  ws->reduced = reduced_curve(*field, ws->grid, *ws->rule);
  ws->estimator = estimator_curve(ws->reduced);
  ws->quadrature = std::make_shared<CellQuadrature>(ws->grid, 8, std::vector<std::size_t>{ws->unit_index});

  const std::size_t J = ws->grid->size();
  ws->alpha.assign(J, 1.0);
  ws->beta.assign(J, zero_vec(n));
  ws->gamma.assign(J, zero_vec(n));
  ws->b_tilde.assign(J, Mat::Identity(n, n));
  ws->c_tilde.assign(J, Mat::Identity(n, n));
  ws->c_tilde_t.assign(J, Mat::Identity(n, n));
  ws->a_tilde.assign(J, Mat::Identity(n, n));
  ws->coupling.assign(J, Mat::Zero(2 * n, 2 * n));

  Mat T = Mat::Zero(2 * n, 2 * n);
  T.topLeftCorner(n, n) = n * Mat::Identity(n, n);
  T.topRightCorner(n, n) = n * Mat::Identity(n, n);
  T.bottomLeftCorner(n, n) = Mat::Identity(n, n);
  T.bottomRightCorner(n, n) = -(n - 1.0) * Mat::Identity(n, n);
  ws->to_state = T;
  ws->from_state = T.inverse();
  Mat drift = Mat::Zero(2 * n, 2 * n);
  drift.bottomRightCorner(n, n) = n * Mat::Identity(n, n);

  const SphereRule& rule = *ws->rule;
  parallel_for(J, [&](std::size_t j) {
    const double r = ws->grid->r(j);
    double alpha = 0.0;
    Vec beta = zero_vec(n), gamma = zero_vec(n);
    Mat B = Mat::Zero(n, n), C = Mat::Zero(n, n), Abar = Mat::Zero(n, n);
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double wgt = rule.weight(i);
      const Vec th = point_vec(rule.node(i), n);
      const Mat A = field->at(r, rule.node(i));
      const Vec at = A * th;
      const double q = th.dot(at);
      alpha += wgt * q;
      beta += wgt * q * th;
      gamma += wgt * at;
      B += wgt * th * at.transpose();
      C += wgt * q * th * th.transpose();
      Abar += wgt * A;
    }
    if (!(alpha > 0.0)) throw DomainError("make_workspace: mean of theta.A theta is not positive");
    const Mat D = B.transpose();
    const Mat bt = C - beta * beta.transpose() / alpha;
    const Mat ct = B - beta * gamma.transpose() / alpha;
    const Mat ctt = D - gamma * beta.transpose() / alpha;
    const Mat at = Abar - gamma * gamma.transpose() / alpha;
    const Mat bti = bt.inverse();
    Mat calA(2 * n, 2 * n);
    calA.topLeftCorner(n, n) = bti * ct;
    calA.topRightCorner(n, n) = -bti;
    calA.bottomLeftCorner(n, n) = ctt * bti * ct - at;
    calA.bottomRightCorner(n, n) = n * Mat::Identity(n, n) - ctt * bti;
    ws->alpha[j] = alpha;
    ws->beta[j] = beta;
    ws->gamma[j] = gamma;
    ws->b_tilde[j] = bt;
    ws->c_tilde[j] = ct;
    ws->c_tilde_t[j] = ctt;
    ws->a_tilde[j] = at;
    ws->coupling[j] = drift - ws->from_state * calA * T;
  });

  ws->degree1_offset = ws->basis->offset(1);
  ws->degree1_count = static_cast<std::size_t>(ws->basis->count(1));
  ws->cartesian = Mat::Zero(n, static_cast<Eigen::Index>(ws->degree1_count));
  for (int c = 0; c < n; ++c) {
    for (std::size_t m = 0; m < ws->degree1_count; ++m) {
      double s = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i)
        s += rule.weight(i) * rule.node(i)[c] * ws->basis->value(ws->degree1_offset + m, i);
      ws->cartesian(c, static_cast<Eigen::Index>(m)) = s;
    }
  }
  return ws;
}

// ---------------------------------------------------------------------------

double l2_norm_unit_ball(const Workspace& ws, const ModalField& u) {
  const std::vector<double> sq = sphere_square_mean(u);
  return std::sqrt(std::max(0.0, ball_integral(ws, sq, ws.unit_index)));
}

LocalizedRHS localize_rhs(const Workspace& ws, const ModalField& u, const Cutoff& cutoff) {
  constexpr double slack = 1e-12;
  if (!(cutoff.inner >= 0.25 - slack && cutoff.outer <= 0.5 + slack && cutoff.inner < cutoff.outer)) {
    throw DomainError("localize_rhs: cutoff transition must lie inside [1/4, 1/2]");
  }
  if (!u.has_derivative()) throw DomainError("localize_rhs: solution needs a derivative table");
  const int n = ws.n;
  const SphereRule& rule = *ws.rule;
  const std::size_t J = ws.grid->size();
  LocalizedRHS rhs;
  rhs.cutoff = cutoff;
  rhs.fvec = VectorSamples(ws.grid, ws.rule);
  rhs.f0 = ModalField(ws.grid, ws.basis);
  std::vector<double> f0_abs(J, 0.0), fvec_sq(J, 0.0);
  parallel_for(J, [&](std::size_t j) {
    const double r = ws.grid->r(j);
    const double dchi = cutoff.derivative(r);
    if (dchi == 0.0) return;
    const SphereSamples vals = sample_values(u, j);
    const std::vector<Point> grad = sample_gradient(u, j);
    std::vector<double> f0(rule.size());
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const Vec th = point_vec(rule.node(i), n);
      const Mat A = ws.field->at(r, rule.node(i));
      const Vec at = A * th;
      const Vec g = point_vec(grad[i], n);
      double sq = 0.0;
      for (int c = 0; c < n; ++c) {
        const double fc = dchi * vals.values[i] * at[c];
        rhs.fvec.at(j, i, c) = fc;
        sq += fc * fc;
      }
      f0[i] = dchi * at.dot(g);
      f0_abs[j] += rule.weight(i) * std::abs(f0[i]);
      fvec_sq[j] += rule.weight(i) * sq;
    }
    for (std::size_t idx = 0; idx < ws.basis->size(); ++idx) {
      double s = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i) s += rule.weight(i) * f0[i] * ws.basis->value(idx, i);
      rhs.f0.c(idx, j) = s;
    }
  });
  const std::vector<double> mean0(rhs.f0.row(0).begin(), rhs.f0.row(0).end());
  rhs.f0_integral = ball_integral(ws, mean0, J - 1);
  rhs.f0_abs_integral = ball_integral(ws, f0_abs, J - 1);
  rhs.fvec_l2 = std::sqrt(std::max(0.0, ball_integral(ws, fvec_sq, J - 1)));
  rhs.f0_l2 = std::sqrt(std::max(0.0, ball_integral(ws, sphere_square_mean(rhs.f0), J - 1)));
  rhs.u_l2 = l2_norm_unit_ball(ws, u);
  rhs.norm_constant = rhs.u_l2 > 0.0 ? (rhs.fvec_l2 + rhs.f0_l2) / rhs.u_l2 : 0.0;
  return rhs;
}

// ---------------------------------------------------------------------------

Decomposition sphere_decompose(const Workspace& ws, const ModalField& u) {
  ModalField f = u;
  if (!f.has_derivative()) differentiate(f);
  const int n = ws.n;
  const std::size_t J = ws.grid->size();
  Decomposition dec;
  dec.grid = ws.grid;
  dec.u0.resize(J);
  dec.du0.resize(J);
  dec.v.assign(J, zero_vec(n));
  dec.v_t.assign(J, zero_vec(n));
  for (std::size_t j = 0; j < J; ++j) {
    const double r = ws.grid->r(j);
    dec.u0[j] = f.c(0, j);
    dec.du0[j] = f.d(0, j);
    Vec s = zero_vec(n), ds = zero_vec(n);
    for (std::size_t m = 0; m < ws.degree1_count; ++m) {
      s += f.c(ws.degree1_offset + m, j) * ws.cartesian.col(static_cast<Eigen::Index>(m));
      ds += f.d(ws.degree1_offset + m, j) * ws.cartesian.col(static_cast<Eigen::Index>(m));
    }
    dec.v[j] = (n / r) * s;
    dec.v_t[j] = n * (s / r - ds);
  }
  dec.w = f;
  remove_low_modes(dec.w);
  return dec;
}

ModalField assemble(const Workspace& ws, const Decomposition& dec) {
  ModalField u = dec.w;
  if (!u.has_derivative()) differentiate(u);
  const std::size_t J = ws.grid->size();
  const Mat L = ws.cartesian;
  for (std::size_t j = 0; j < J; ++j) {
    const double r = ws.grid->r(j);
    u.c(0, j) = dec.u0[j];
    u.d(0, j) = dec.du0[j];
    for (std::size_t m = 0; m < ws.degree1_count; ++m) {
      const auto col = L.col(static_cast<Eigen::Index>(m));
      u.c(ws.degree1_offset + m, j) = r * dec.v[j].dot(col);
      u.d(ws.degree1_offset + m, j) = (dec.v[j] - dec.v_t[j]).dot(col);
    }
  }
  return u;
}

// ---------------------------------------------------------------------------

ReductionForcing build_reduction(const Workspace& ws, const LocalizedRHS* rhs, const ModalField* w) {
  const int n = ws.n;
  const std::size_t J = ws.grid->size();
  const SphereRule& rule = *ws.rule;
  std::vector<double> s(J, 0.0);
  std::vector<Vec> xf(J, zero_vec(n)), fbar(J, zero_vec(n)), z(J, zero_vec(n));
  std::vector<double> pw(J, 0.0);
  std::vector<Vec> xw(J, zero_vec(n)), yw(J, zero_vec(n));

  if (rhs != nullptr) {
    std::vector<double> mean0(J);
    for (std::size_t j = 0; j < J; ++j) mean0[j] = rhs->f0.c(0, j);
    const std::vector<double> tail = upper_tail(ws, mean0, static_cast<double>(n));
    parallel_for(J, [&](std::size_t j) {
      const double r = ws.grid->r(j);
      double ftheta = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i) {
        const Point& th = rule.node(i);
        double ft = 0.0;
        for (int c = 0; c < n; ++c) ft += rhs->fvec.at(j, i, c) * th[c];
        const double wgt = rule.weight(i);
        ftheta += wgt * ft;
        for (int c = 0; c < n; ++c) {
          xf[j][c] += wgt * ft * th[c];
          fbar[j][c] += wgt * rhs->fvec.at(j, i, c);
        }
      }
      s[j] = ftheta - std::pow(r, 1.0 - n) * tail[j];
      for (std::size_t m = 0; m < ws.degree1_count; ++m)
        z[j] += rhs->f0.c(ws.degree1_offset + m, j) * ws.cartesian.col(static_cast<Eigen::Index>(m));
    });
  }
  if (w != nullptr) {
    parallel_for(J, [&](std::size_t j) {
      const std::vector<Point> grad = sample_gradient(*w, j);
      for (std::size_t i = 0; i < rule.size(); ++i) {
        const Vec th = point_vec(rule.node(i), n);
        const Mat A = field_at(ws, j, i);
        const Vec g = point_vec(grad[i], n);
        const Vec ag = A * g;
        const double flux = th.dot(ag);
        const double wgt = rule.weight(i);
        pw[j] += wgt * flux;
        xw[j] += wgt * flux * th;
        yw[j] += wgt * ag;
      }
    });
  }

  ReductionForcing out;
  out.s.resize(J);
  out.h1.resize(J);
  out.h2.resize(J);
  out.rz.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double r = ws.grid->r(j);
    const double sj = s[j] - pw[j];
    out.s[j] = sj;
    out.h1[j] = ws.beta[j] * (sj / ws.alpha[j]) - xf[j] + xw[j];
    out.h2[j] = ws.gamma[j] * (sj / ws.alpha[j]) - fbar[j] + yw[j];
    out.rz[j] = r * z[j];
  }
  out.block_forcing.resize(ws.unit_index + 1);
  for (std::size_t i = 0; i <= ws.unit_index; ++i) {
    const std::size_t j = ws.unit_index - i;
    const Mat bti = ws.b_tilde[j].inverse();
    Vec q(2 * n);
    q.head(n) = bti * out.h1[j];
    q.tail(n) = ws.c_tilde_t[j] * bti * out.h1[j] - out.h2[j] - out.rz[j];
    out.block_forcing[i] = ws.from_state * q;
  }
  return out;
}

BlockSystem block_system(const Workspace& ws, const ReductionForcing& forcing) {
  BlockSystem bs;
  bs.n = ws.n;
  bs.step = ws.grid->step();
  bs.delta = ws.field->modulus().delta();
  const std::vector<double>& log_e = ws.estimator.log_values();
  for (std::size_t i = 0; i <= ws.unit_index; ++i) {
    const std::size_t j = ws.unit_index - i;
    bs.coupling.push_back(ws.coupling[j]);
    bs.forcing.push_back(forcing.block_forcing[i]);
    bs.varpi.push_back(ws.field->modulus()(ws.grid->r(j)));
    bs.log_estimator.push_back(log_e[j]);
  }
  return bs;
}

ReducedSolution recover_u0(const Workspace& ws, const ReductionForcing& forcing) {
  const int n = ws.n;
  const std::size_t J = ws.grid->size();
  const std::size_t j1 = ws.unit_index;
  const BlockSystem bs = block_system(ws, forcing);
  ReducedSolution out;
  out.block = solve_block_system(bs, zero_vec(n), ws.options.block_tol, ws.options.block_max_iter);
  out.phi.assign(J, zero_vec(n));
  out.psi.assign(J, zero_vec(n));
  for (std::size_t j = 0; j < J; ++j) {
    if (j <= j1) {
      out.phi[j] = out.block.phi[j1 - j];
      out.psi[j] = out.block.psi[j1 - j];
    } else {
      out.psi[j] = out.block.psi[0] * std::pow(ws.grid->r(j), -static_cast<double>(n));
    }
  }
  out.v.resize(J);
  out.x.resize(J);
  out.v_t.resize(J);
  out.du0.resize(J);
  std::vector<double> du0_tau(J);
  for (std::size_t j = 0; j < J; ++j) {
    Vec st(2 * n);
    st.head(n) = out.phi[j];
    st.tail(n) = out.psi[j];
    const Vec vx = ws.to_state * st;
    out.v[j] = vx.head(n);
    out.x[j] = vx.tail(n);
    out.v_t[j] = ws.b_tilde[j].inverse() * (ws.c_tilde[j] * out.v[j] + forcing.h1[j] - out.x[j]);
    out.du0[j] = (forcing.s[j] - ws.gamma[j].dot(out.v[j]) + ws.beta[j].dot(out.v_t[j])) / ws.alpha[j];
    du0_tau[j] = ws.grid->r(j) * out.du0[j];
  }
  const std::vector<double> cells = ws.quadrature->cell_integrals(du0_tau, 0.0);
  out.u0.assign(J, 0.0);
  for (std::size_t j = J - 1; j-- > 0;) out.u0[j] = out.u0[j + 1] - cells[j];
  return out;
}

// ---------------------------------------------------------------------------

double y_norm(const Workspace& ws, const ModalField& y) {
  const int n = ws.n;
  const RadialGrid& g = *ws.grid;
  const std::vector<double> m0 = annulus_profile(g, sphere_square_mean(y), n);
  const std::vector<double> m1 = annulus_profile(g, sphere_gradient_square_mean(y), n);
  const double delta = ws.field->modulus().delta();
  double out = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (std::isnan(m0[j])) continue;
    const double r = g.r(j);
    const double m12 = r * std::sqrt(std::max(0.0, m1[j])) + std::sqrt(std::max(0.0, m0[j]));
    double weight;
    if (r <= 1.0) {
      const double omega = std::max(ws.field->modulus()(r), ws.options.omega_floor);
      weight = omega * r * ws.estimator.at_node(j);
    } else {
      weight = delta * std::pow(r, -static_cast<double>(n));
    }
    out = std::max(out, m12 / weight);
  }
  return out;
}

namespace {

struct PhiResult {
  ModalField w_next;
  ReducedSolution reduced;
};

// One application of the fixed-point map: reduction driven by (rhs, w), then
// w_next = N_div(Omega grad u~ - f) - N_src(f0^perp).
PhiResult apply_map(const Workspace& ws, const LocalizedRHS& rhs, const ModalField& w, const ModalField& src_part) {
  const int n = ws.n;
  const std::size_t J = ws.grid->size();
  const SphereRule& rule = *ws.rule;
  PhiResult res;
  const ReductionForcing forcing = build_reduction(ws, &rhs, &w);
  res.reduced = recover_u0(ws, forcing);
  VectorSamples flux(ws.grid, ws.rule);
  parallel_for(J, [&](std::size_t j) {
    const double r = ws.grid->r(j);
    const std::vector<Point> gw = gradient_or_zero(&w, j, rule.size());
    const Vec& v = res.reduced.v[j];
    const Vec& vt = res.reduced.v_t[j];
    const double du0 = res.reduced.du0[j];
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const Vec th = point_vec(rule.node(i), n);
      Vec grad = point_vec(gw[i], n) + du0 * th + v - vt.dot(th) * th;
      Mat omega = ws.field->at(r, rule.node(i));
      omega -= Mat::Identity(n, n);
      const Vec og = omega * grad;
      for (int c = 0; c < n; ++c) flux.at(j, i, c) = og[c] - rhs.fvec.at(j, i, c);
    }
  });
  res.w_next = newtonian_solve_divergence(flux, ws.basis);
  res.w_next -= src_part;
  return res;
}

}  // namespace

ConstructiveSolution fixed_point_solve(const Workspace& ws, const LocalizedRHS& rhs) {
  ModalField f0 = rhs.f0;
  remove_low_modes(f0);
  const ModalField src_part = newtonian_solve_source(f0);

  ModalField w(ws.grid, ws.basis);
  w.deriv.assign(w.coeff.size(), 0.0);
  ConstructiveSolution sol;
  FixedPointReport& rep = sol.report;
  double prev_abs = -1.0;
  const int max_iter = std::max(1, ws.options.fixed_point_max_iter);
  for (int it = 1; it <= max_iter; ++it) {
    PhiResult step = apply_map(ws, rhs, w, src_part);
    rep.block_contraction = std::max(rep.block_contraction, step.reduced.block.contraction);
    const ModalField diff = step.w_next - w;
    const double inc_abs = y_norm(ws, diff);
    const double size = y_norm(ws, step.w_next);
    if (it == 1) rep.xi_norm = size;
    w = std::move(step.w_next);
    rep.iterations = it;
    const double rel = size > 0.0 ? inc_abs / size : 0.0;
    rep.increments.push_back(rel);
    if (prev_abs > 0.0 && inc_abs > 0.0 && prev_abs > 1e-13 * size) {
      rep.contraction = std::max(rep.contraction, inc_abs / prev_abs);
    }
    if (rel <= ws.options.fixed_point_tol) {
      rep.converged = true;
      break;
    }
    if (prev_abs > 0.0 && it > 3 && inc_abs >= prev_abs) {
      throw ContractionError("fixed_point_solve: increments stopped decreasing (ratio " +
                             std::to_string(inc_abs / prev_abs) +
                             "); reduce the coefficient amplitude to meet the smallness budget");
    }
    prev_abs = inc_abs;
  }
  if (!rep.converged) {
    throw ContractionError("fixed_point_solve: no convergence within " + std::to_string(max_iter) +
                           " iterations (last relative increment " + std::to_string(rep.increments.back()) + ")");
  }
  rep.w_norm = y_norm(ws, w);
  rep.xi_constant = rhs.u_l2 > 0.0 ? rep.xi_norm / rhs.u_l2 : 0.0;

  const ReductionForcing forcing = build_reduction(ws, &rhs, &w);
  ReducedSolution red = recover_u0(ws, forcing);
  const ReducedSolution src = recover_u0(ws, build_reduction(ws, &rhs, nullptr));
  Decomposition& dec = sol.dec;
  dec.grid = ws.grid;
  dec.u0 = red.u0;
  dec.du0 = red.du0;
  dec.v = red.v;
  dec.v_t = red.v_t;
  dec.w = w;
  dec.du0_source = src.du0;
  dec.v_source = src.v;
  dec.du0_w.resize(dec.du0.size());
  dec.v_w.resize(dec.v.size());
  for (std::size_t j = 0; j < dec.du0.size(); ++j) {
    dec.du0_w[j] = dec.du0[j] - src.du0[j];
    dec.v_w[j] = dec.v[j] - src.v[j];
  }
  sol.u = assemble(ws, dec);
  sol.block = block_system(ws, forcing);
  sol.block_solution = std::move(red.block);
  return sol;
}

// ---------------------------------------------------------------------------

std::pair<std::vector<double>, std::vector<double>> oracle_degree_profile(const Workspace& ws, int degree) {
  if (!ws.field->is_radial_rank_one()) {
    throw DomainError("direct_solve_oracle: the field is not radial rank-one; use fixed_point_solve");
  }
  if (degree < 0) throw DomainError("direct_solve_oracle: negative degree");
  const int n = ws.n;
  const double lambda = static_cast<double>(degree) * (degree + n - 2.0);
  const RadialGrid& g = *ws.grid;
  const CoefficientField& field = *ws.field;
  const OdeRhs rhs = [&](double tau, const OdeState& y, OdeState& dy) {
    const double gg = field.profile(std::exp(tau));
    dy[0] = y[1] / (1.0 + gg);
    dy[1] = lambda * y[0] - (n - 2.0) * y[1];
  };
  const double tau0 = g.tau(0) - 10.0;
  OdeState y0(2);
  y0[0] = 1.0;
  y0[1] = (1.0 + field.profile(std::exp(tau0))) * degree;
  std::vector<double> taus(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) taus[j] = g.tau(j);
  OdeOptions opts;
  opts.rtol = 1e-12;
  opts.atol = 1e-300;
  const std::vector<OdeState> ys = dopri5(rhs, tau0, y0, taus, opts);
  const double norm = ys[ws.unit_index][0];
  std::vector<double> vals(g.size()), ders(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double r = g.r(j);
    vals[j] = ys[j][0] / norm;
    ders[j] = ys[j][1] / ((1.0 + field.profile(r)) * r) / norm;
  }
  return {std::move(vals), std::move(ders)};
}

ModalField direct_solve_oracle(const Workspace& ws, const std::vector<BoundaryMode>& modes) {
  ModalField u(ws.grid, ws.basis);
  u.deriv.assign(u.coeff.size(), 0.0);
  std::vector<int> degrees;
  for (const BoundaryMode& m : modes) {
    if (m.degree < 0 || m.degree > ws.basis->max_degree()) throw DomainError("boundary mode degree out of range");
    if (m.index < 0 || m.index >= ws.basis->count(m.degree)) throw DomainError("boundary mode index out of range");
    degrees.push_back(m.degree);
  }
  std::sort(degrees.begin(), degrees.end());
  degrees.erase(std::unique(degrees.begin(), degrees.end()), degrees.end());
  std::vector<std::pair<std::vector<double>, std::vector<double>>> profiles(degrees.size());
  parallel_for(degrees.size(), [&](std::size_t q) { profiles[q] = oracle_degree_profile(ws, degrees[q]); });
  for (const BoundaryMode& m : modes) {
    const std::size_t q = static_cast<std::size_t>(std::lower_bound(degrees.begin(), degrees.end(), m.degree) - degrees.begin());
    const std::size_t idx = ws.basis->offset(m.degree) + static_cast<std::size_t>(m.index);
    for (std::size_t j = 0; j < u.radii(); ++j) {
      u.c(idx, j) += m.weight * profiles[q].first[j];
      u.d(idx, j) += m.weight * profiles[q].second[j];
    }
  }
  return u;
}

ModalField direct_solve_oracle(const Workspace& ws, const SphereSamples& boundary) {
  if (boundary.rule != ws.rule) throw DomainError("direct_solve_oracle: boundary samples on a different rule");
  const std::vector<double> c = harmonic_analyze(boundary, *ws.basis);
  std::vector<BoundaryMode> modes;
  for (std::size_t idx = 0; idx < c.size(); ++idx) {
    if (std::abs(c[idx]) < 1e-14) continue;
    const int k = ws.basis->degree(idx);
    modes.push_back({k, static_cast<int>(idx - ws.basis->offset(k)), c[idx]});
  }
  return direct_solve_oracle(ws, modes);
}

// ---------------------------------------------------------------------------

GradientProfile gradient_profile(const Workspace& ws, const ModalField& u, int j_min, int j_max) {
  GradientProfile p;
  const std::vector<double> prof = annulus_profile(*ws.grid, sphere_gradient_square_mean(u), ws.n);
  for (int j = j_min; j <= j_max; ++j) {
    const auto idx = ws.grid->dyadic_index(-j);
    if (!idx || std::isnan(prof[*idx])) continue;
    p.levels.push_back(j);
    p.radii.push_back(ws.grid->r(*idx));
    p.m2_grad.push_back(std::sqrt(std::max(0.0, prof[*idx])));
  }
  return p;
}

RatioReport gradient_ratio_check(const GradientProfile& profile, const EstimatorCurve& ec, double u_norm, double bound) {
  RatioReport rep;
  rep.bound = bound;
  if (profile.levels.empty() || !(u_norm > 0.0)) {
    rep.passed = false;
    rep.gradient_trend = "undefined";
    return rep;
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t q = 0; q < profile.levels.size(); ++q) {
    RatioRow row;
    row.j = profile.levels[q];
    row.r = profile.radii[q];
    row.m2_grad = profile.m2_grad[q];
    row.estimator = ec(row.r);
    row.ratio = row.m2_grad / (row.estimator * u_norm);
    lo = std::min(lo, row.ratio);
    hi = std::max(hi, row.ratio);
    rep.rows.push_back(row);
  }
  rep.spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  for (RatioRow& row : rep.rows) row.pass = std::isfinite(row.ratio) && row.ratio > 0.0 && row.ratio <= bound * lo;
  const std::size_t N = rep.rows.size();
  if (N >= 4) {
    bool increasing = true;
    for (std::size_t q = N - 3; q < N; ++q) increasing = increasing && rep.rows[q].ratio > rep.rows[q - 1].ratio;
    rep.blow_up_trend = increasing && rep.rows[N - 1].ratio > 1.25 * rep.rows[N - 4].ratio;
  }
  const double growth = rep.rows.back().m2_grad / rep.rows.front().m2_grad;
  rep.gradient_trend = growth > 1.1 ? "growing" : (growth < 0.9 ? "decaying" : "flat");
  rep.passed = std::isfinite(rep.spread) && rep.spread <= bound && !rep.blow_up_trend;
  return rep;
}

SharpnessReport gs_sharpness_check(const Workspace& ws, double tolerance) {
  SharpnessReport rep;
  rep.tolerance = tolerance;
  const auto [vals, ders] = oracle_degree_profile(ws, 1);
  const RadialGrid& g = *ws.grid;
  for (std::size_t j = 0; j <= ws.unit_index; ++j) {
    const double r = g.r(j);
    rep.radii.push_back(r);
    rep.v.push_back(std::abs(vals[j]) / r);
    rep.estimator.push_back(ws.estimator.at_node(j));
    rep.ratio.push_back(rep.v.back() / rep.estimator.back());
  }
  auto drift_on = [&](double a, double b) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t q = 0; q < rep.radii.size(); ++q) {
      if (rep.radii[q] < a * (1 - 1e-12) || rep.radii[q] > b * (1 + 1e-12)) continue;
      lo = std::min(lo, rep.ratio[q]);
      hi = std::max(hi, rep.ratio[q]);
    }
    return hi > 0.0 ? hi / lo - 1.0 : std::numeric_limits<double>::quiet_NaN();
  };
  rep.decade_lo = g.r(0);
  rep.decade_hi = 10.0 * g.r(0);
  rep.drift = drift_on(rep.decade_lo, rep.decade_hi);
  rep.window_drift = drift_on(std::ldexp(1.0, -14), std::ldexp(1.0, -6));
  rep.passed = std::isfinite(rep.drift) && rep.drift <= tolerance;
  return rep;
}

double relative_l2_difference(const Workspace& ws, const ModalField& a, const ModalField& b, double r_lo,
                              double r_hi) {
  const RadialGrid& g = *ws.grid;
  std::size_t j0 = g.size(), j1 = 0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g.r(j) >= r_lo * (1 - 1e-12) && g.r(j) <= r_hi * (1 + 1e-12)) {
      j0 = std::min(j0, j);
      j1 = std::max(j1, j);
    }
  }
  if (j0 >= j1) throw DomainError("relative_l2_difference: range has fewer than two grid radii");
  const std::vector<double> w = uniform_integration_weights(j1 - j0, g.step());
  double num = 0.0, den = 0.0;
  for (std::size_t j = j0; j <= j1; ++j) {
    double d = 0.0, s = 0.0;
    for (std::size_t idx = 0; idx < a.modes(); ++idx) {
      const double diff = a.c(idx, j) - b.c(idx, j);
      d += diff * diff;
      s += b.c(idx, j) * b.c(idx, j);
    }
    const double rn = std::pow(g.r(j), ws.n);
    num += w[j - j0] * rn * d;
    den += w[j - j0] * rn * s;
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

ModalField apply_cutoff(const Workspace& ws, const ModalField& u, const Cutoff& cutoff) {
  ModalField out = u;
  if (!out.has_derivative()) differentiate(out);
  for (std::size_t j = 0; j < out.radii(); ++j) {
    const double r = ws.grid->r(j);
    const double chi = cutoff(r), dchi = cutoff.derivative(r);
    for (std::size_t idx = 0; idx < out.modes(); ++idx) {
      const double c = out.c(idx, j);
      out.c(idx, j) = chi * c;
      out.d(idx, j) = chi * out.d(idx, j) + dchi * c;
    }
  }
  return out;
}

WeakResidual weak_form_residual(const Workspace& ws, const ModalField& u, const LocalizedRHS& rhs) {
  const int n = ws.n;
  const std::size_t J = ws.grid->size();
  const SphereRule& rule = *ws.rule;
  std::vector<double> flux(J, 0.0), mag(J, 0.0);
  std::vector<Vec> H(J, zero_vec(n)), G(J, zero_vec(n));
  parallel_for(J, [&](std::size_t j) {
    const double r = ws.grid->r(j);
    const std::vector<Point> grad = sample_gradient(u, j);
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const Vec th = point_vec(rule.node(i), n);
      const Vec ag = ws.field->at(r, rule.node(i)) * point_vec(grad[i], n);
      Vec q = ag;
      for (int c = 0; c < n; ++c) q[c] -= rhs.fvec.at(j, i, c);
      const double wgt = rule.weight(i);
      const double qt = q.dot(th);
      flux[j] += wgt * qt;
      H[j] += wgt * qt * th;
      G[j] += wgt * q;
      mag[j] += wgt * ag.norm();
    }
  });
  std::vector<double> mean0(J), gc(J), zc(J);
  for (std::size_t j = 0; j < J; ++j) mean0[j] = rhs.f0.c(0, j);
  const std::vector<double> tail0 = upper_tail(ws, mean0, n);
  WeakResidual res;
  double scale1 = 0.0, scale2 = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    const double r = ws.grid->r(j);
    scale1 = std::max(scale1, std::pow(r, n - 1.0) * mag[j]);
    scale2 = std::max(scale2, std::pow(r, static_cast<double>(n)) * mag[j]);
  }
  for (std::size_t j = 0; j < J; ++j) {
    res.radial = std::max(res.radial, std::abs(std::pow(ws.grid->r(j), n - 1.0) * flux[j] + tail0[j]));
  }
  for (int c = 0; c < n; ++c) {
    for (std::size_t j = 0; j < J; ++j) {
      gc[j] = G[j][c];
      zc[j] = 0.0;
      for (std::size_t m = 0; m < ws.degree1_count; ++m)
        zc[j] += rhs.f0.c(ws.degree1_offset + m, j) * ws.cartesian(c, static_cast<Eigen::Index>(m));
    }
    const std::vector<double> tg = upper_tail(ws, gc, n);
    const std::vector<double> tz = upper_tail(ws, zc, n + 1.0);
    for (std::size_t j = 0; j < J; ++j) {
      const double lhs = std::pow(ws.grid->r(j), static_cast<double>(n)) * H[j][c] + tg[j] + tz[j];
      res.linear = std::max(res.linear, std::abs(lhs));
    }
  }
  res.radial = scale1 > 0.0 ? res.radial / scale1 : res.radial;
  res.linear = scale2 > 0.0 ? res.linear / scale2 : res.linear;
  return res;
}

ComponentBounds component_bounds(const Workspace& ws, const ConstructiveSolution& sol, double u_norm, int j_min,
                                 int j_max) {
  const int n = ws.n;
  const RadialGrid& g = *ws.grid;
  const std::size_t J = g.size();
  const Decomposition& dec = sol.dec;
  std::vector<double> du0_sq(J), rv_sq(J), v_sq(J);
  for (std::size_t j = 0; j < J; ++j) {
    du0_sq[j] = dec.du0[j] * dec.du0[j];
    rv_sq[j] = dec.v_t[j].squaredNorm();
    v_sq[j] = dec.v[j].squaredNorm();
  }
  const std::vector<double> p_du0 = annulus_profile(g, du0_sq, n);
  const std::vector<double> p_rv = annulus_profile(g, rv_sq, n);
  const std::vector<double> p_v = annulus_profile(g, v_sq, n);
  const std::vector<double> p_gw = annulus_profile(g, sphere_gradient_square_mean(dec.w), n);
  ComponentBounds cb;
  if (!(u_norm > 0.0)) return cb;
  const SphereRule& rule = *ws.rule;
  for (int lvl = j_min; lvl <= j_max; ++lvl) {
    const auto idx = g.dyadic_index(-lvl);
    if (!idx || std::isnan(p_v[*idx])) continue;
    const std::size_t j = *idx;
    const double r = g.r(j);
    const double omega = std::max(ws.field->modulus()(r), ws.options.omega_floor);
    const double e = ws.estimator.at_node(j);
    cb.c_du0 = std::max(cb.c_du0, std::sqrt(p_du0[j]) / (omega * e * u_norm));
    cb.c_rv = std::max(cb.c_rv, std::sqrt(p_rv[j]) / (omega * e * u_norm));
    cb.c_grad_w = std::max(cb.c_grad_w, std::sqrt(p_gw[j]) / (omega * e * u_norm));
    cb.c_v = std::max(cb.c_v, std::sqrt(p_v[j]) / (e * u_norm));
    if (j <= ws.unit_index) {
      const std::size_t i = ws.unit_index - j;
      const Vec& v = dec.v[j];
      const Vec& vt = dec.v_t[j];
      const Vec phi_ref = (n * v - vt) / (n * n);
      const Vec psi_ref = vt / (n * n);
      const double dev = std::sqrt((sol.block_solution.phi[i] - phi_ref).squaredNorm() +
                                   (sol.block_solution.psi[i] - psi_ref).squaredNorm());
      const std::vector<Point> gw = sample_gradient(dec.w, j);
      double mean_gw = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q) mean_gw += rule.weight(q) * std::sqrt(dot(gw[q], gw[q], n));
      const double size = omega * (v.norm() + vt.norm() + mean_gw);
      if (size > 0.0) cb.c_state = std::max(cb.c_state, dev / size);
    }
  }
  return cb;
}

}  // namespace dinigrad
