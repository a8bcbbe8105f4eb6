#include "dinigrad/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dinigrad/parallel.hpp"

namespace dinigrad {

namespace {

void check_same_layout(const ModalField& a, const ModalField& b) {
  if (a.grid != b.grid && !(*a.grid == *b.grid)) throw DomainError("ModalField: grid mismatch");
  if (a.basis != b.basis) throw DomainError("ModalField: basis mismatch");
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

ModalField::ModalField(RadialGridPtr g, HarmonicBasisPtr b)
    : grid(std::move(g)), basis(std::move(b)), coeff(grid->size() * basis->size(), 0.0) {}

ModalField& ModalField::operator+=(const ModalField& other) {
  check_same_layout(*this, other);
  for (std::size_t i = 0; i < coeff.size(); ++i) coeff[i] += other.coeff[i];
  if (has_derivative() && other.has_derivative()) {
    for (std::size_t i = 0; i < deriv.size(); ++i) deriv[i] += other.deriv[i];
  } else {
    deriv.clear();
  }
  return *this;
}

ModalField& ModalField::operator-=(const ModalField& other) {
  check_same_layout(*this, other);
  for (std::size_t i = 0; i < coeff.size(); ++i) coeff[i] -= other.coeff[i];
  if (has_derivative() && other.has_derivative()) {
    for (std::size_t i = 0; i < deriv.size(); ++i) deriv[i] -= other.deriv[i];
  } else {
    deriv.clear();
  }
  return *this;
}

ModalField& ModalField::operator*=(double s) {
  for (double& v : coeff) v *= s;
  for (double& v : deriv) v *= s;
  return *this;
}

ModalField operator+(ModalField a, const ModalField& b) { return a += b; }
ModalField operator-(ModalField a, const ModalField& b) { return a -= b; }
ModalField operator*(double s, ModalField a) { return a *= s; }

ModalField modal_from_function(RadialGridPtr grid, HarmonicBasisPtr basis,
                               const std::function<double(double, const Point&)>& u,
                               const std::function<double(double, const Point&)>& radial_derivative) {
  ModalField f(std::move(grid), std::move(basis));
  const bool with_deriv = static_cast<bool>(radial_derivative);
  if (with_deriv) f.deriv.assign(f.coeff.size(), 0.0);
  const HarmonicBasis& b = *f.basis;
  const SphereRule& rule = *b.rule();
  parallel_for(f.radii(), [&](std::size_t j) {
    const double r = f.grid->r(j);
    std::vector<double> vals(rule.size()), dvals;
    for (std::size_t i = 0; i < rule.size(); ++i) vals[i] = rule.weight(i) * u(r, rule.node(i));
    if (with_deriv) {
      dvals.resize(rule.size());
      for (std::size_t i = 0; i < rule.size(); ++i) dvals[i] = rule.weight(i) * radial_derivative(r, rule.node(i));
    }
    for (std::size_t idx = 0; idx < b.size(); ++idx) {
      double s = 0.0, ds = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i) {
        const double phi = b.value(idx, i);
        s += vals[i] * phi;
        if (with_deriv) ds += dvals[i] * phi;
      }
      f.c(idx, j) = s;
      if (with_deriv) f.d(idx, j) = ds;
    }
  });
  return f;
}

void differentiate(ModalField& f) {
  f.deriv.assign(f.coeff.size(), 0.0);
  const double h = f.grid->step();
  for (std::size_t idx = 0; idx < f.modes(); ++idx) {
    const std::vector<double> dt = derivative_tau(f.row(idx), h, 7);
    for (std::size_t j = 0; j < f.radii(); ++j) f.d(idx, j) = dt[j] / f.grid->r(j);
  }
}

double low_mode_size(const ModalField& f) {
  double m = 0.0;
  const std::size_t end = f.basis->max_degree() >= 2 ? f.basis->offset(2) : f.modes();
  for (std::size_t idx = 0; idx < end; ++idx)
    for (std::size_t j = 0; j < f.radii(); ++j) m = std::max(m, std::abs(f.c(idx, j)));
  return m;
}

void remove_low_modes(ModalField& f) {
  const std::size_t end = f.basis->max_degree() >= 2 ? f.basis->offset(2) : f.modes();
  for (std::size_t idx = 0; idx < end; ++idx) {
    for (std::size_t j = 0; j < f.radii(); ++j) {
      f.c(idx, j) = 0.0;
      if (f.has_derivative()) f.d(idx, j) = 0.0;
    }
  }
}

SphereSamples sample_values(const ModalField& f, std::size_t j) {
  const HarmonicBasis& b = *f.basis;
  SphereSamples s(b.rule(), 1);
  for (std::size_t idx = 0; idx < b.size(); ++idx) {
    const double c = f.c(idx, j);
    if (c == 0.0) continue;
    for (std::size_t i = 0; i < s.size(); ++i) s.values[i] += c * b.value(idx, i);
  }
  return s;
}

std::vector<Point> sample_gradient(const ModalField& f, std::size_t j) {
  if (!f.has_derivative()) throw DomainError("sample_gradient: derivative table missing");
  const HarmonicBasis& b = *f.basis;
  const SphereRule& rule = *b.rule();
  const int n = b.dimension();
  const double r = f.grid->r(j);
  std::vector<Point> g(rule.size(), Point{0.0, 0.0, 0.0});
  for (std::size_t idx = 0; idx < b.size(); ++idx) {
    const double c = f.c(idx, j) / r;
    const double dc = f.d(idx, j);
    if (c == 0.0 && dc == 0.0) continue;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double radial = dc * b.value(idx, i);
      const Point& th = rule.node(i);
      const Point& sg = b.surface_gradient(idx, i);
      for (int k = 0; k < n; ++k) g[i][k] += radial * th[k] + c * sg[k];
    }
  }
  return g;
}

std::vector<double> sphere_square_mean(const ModalField& f) {
  std::vector<double> out(f.radii(), 0.0);
  for (std::size_t idx = 0; idx < f.modes(); ++idx)
    for (std::size_t j = 0; j < f.radii(); ++j) out[j] += f.c(idx, j) * f.c(idx, j);
  return out;
}

std::vector<double> sphere_gradient_square_mean(const ModalField& f) {
  if (!f.has_derivative()) throw DomainError("sphere_gradient_square_mean: derivative table missing");
  std::vector<double> out(f.radii(), 0.0);
  for (std::size_t idx = 0; idx < f.modes(); ++idx) {
    const double lam = f.basis->eigenvalue(idx);
    for (std::size_t j = 0; j < f.radii(); ++j) {
      const double r = f.grid->r(j);
      out[j] += f.d(idx, j) * f.d(idx, j) + lam * f.c(idx, j) * f.c(idx, j) / (r * r);
    }
  }
  return out;
}

std::vector<ModalField> gradient_components(const ModalField& f, const HarmonicBasisPtr& raised) {
  if (!raised || raised->rule() != f.basis->rule()) {
    throw DomainError("gradient_components: raised basis must share the rule");
  }
  const int n = f.dimension();
  std::vector<ModalField> comps;
  for (int c = 0; c < n; ++c) comps.emplace_back(f.grid, raised);
  const SphereRule& rule = *raised->rule();
  parallel_for(f.radii(), [&](std::size_t j) {
    const std::vector<Point> g = sample_gradient(f, j);
    for (std::size_t idx = 0; idx < raised->size(); ++idx) {
      double s[3] = {0.0, 0.0, 0.0};
      for (std::size_t i = 0; i < rule.size(); ++i) {
        const double wphi = rule.weight(i) * raised->value(idx, i);
        for (int c = 0; c < n; ++c) s[c] += wphi * g[i][c];
      }
      for (int c = 0; c < n; ++c) comps[c].c(idx, j) = s[c];
    }
  });
  for (auto& comp : comps) differentiate(comp);
  return comps;
}

VectorSamples::VectorSamples(RadialGridPtr g, SphereRulePtr r)
    : grid(std::move(g)), rule(std::move(r)), n(rule->dimension()), values(grid->size() * rule->size() * n, 0.0) {}

std::vector<double> sphere_power_mean(const VectorSamples& f, int p) {
  if (p != 1 && p != 2) throw DomainError("sphere_power_mean: p must be 1 or 2");
  std::vector<double> out(f.grid->size(), 0.0);
  for (std::size_t j = 0; j < f.grid->size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.rule->size(); ++i) {
      double q = 0.0;
      for (int c = 0; c < f.n; ++c) q += f.at(j, i, c) * f.at(j, i, c);
      s += f.rule->weight(i) * (p == 2 ? q : std::sqrt(q));
    }
    out[j] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> annulus_profile(const RadialGrid& grid, std::span<const double> sphere_means, int n) {
  if (sphere_means.size() != grid.size()) throw DomainError("annulus_profile: size mismatch");
  auto gp = std::make_shared<const RadialGrid>(grid);
  const CellQuadrature cq(gp, 8);
  const std::vector<double> cells = cq.cell_integrals(sphere_means, static_cast<double>(n));
  const std::size_t m = static_cast<std::size_t>(grid.per_octave());
  const double h = grid.step();
  const double volume = (std::exp2(static_cast<double>(n)) - 1.0) / n;
  std::vector<double> out(grid.size(), nan());
  for (std::size_t j = 0; j + m < grid.size(); ++j) {
    double s = 0.0;
    for (std::size_t q = 0; q < m; ++q) s += std::exp(n * h * static_cast<double>(q)) * cells[j + q];
    out[j] = s / volume;
  }
  return out;
}

std::size_t annulus_index(const RadialGrid& grid, double r) {
  const auto j = grid.find(r);
  if (!j || *j + static_cast<std::size_t>(grid.per_octave()) >= grid.size()) {
    throw DomainError("annulus [r, 2r] is not covered by grid nodes at r = " + std::to_string(r));
  }
  return *j;
}

namespace {

double annulus_value(const RadialGrid& grid, std::span<const double> means, int n, double r) {
  const std::size_t j = annulus_index(grid, r);
  const std::size_t m = static_cast<std::size_t>(grid.per_octave());
  std::vector<double> local(means.begin() + j, means.begin() + j + m + 1);
  auto sub = std::make_shared<const RadialGrid>(0, 1, grid.per_octave());
  const CellQuadrature cq(sub, 8);
  const std::vector<double> cells = cq.cell_integrals(local, static_cast<double>(n));
  double s = 0.0;
  for (std::size_t q = 0; q < m; ++q) s += std::exp(n * grid.step() * static_cast<double>(q)) * cells[q];
  return s / ((std::exp2(static_cast<double>(n)) - 1.0) / n);
}

std::vector<double> abs_mean_per_radius(const ModalField& f) {
  std::vector<double> out(f.radii(), 0.0);
  const SphereRule& rule = *f.basis->rule();
  for (std::size_t j = 0; j < f.radii(); ++j) {
    const SphereSamples s = sample_values(f, j);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) acc += rule.weight(i) * std::abs(s.values[i]);
    out[j] = acc;
  }
  return out;
}

std::vector<double> gradient_abs_mean_per_radius(const ModalField& f) {
  std::vector<double> out(f.radii(), 0.0);
  const SphereRule& rule = *f.basis->rule();
  const int n = f.dimension();
  for (std::size_t j = 0; j < f.radii(); ++j) {
    const std::vector<Point> g = sample_gradient(f, j);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) acc += rule.weight(i) * std::sqrt(dot(g[i], g[i], n));
    out[j] = acc;
  }
  return out;
}

std::vector<double> hessian_square_mean(const ModalField& f, const HarmonicBasisPtr& raised) {
  std::vector<double> out(f.radii(), 0.0);
  for (const ModalField& comp : gradient_components(f, raised)) {
    const std::vector<double> g = sphere_gradient_square_mean(comp);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += g[j];
  }
  return out;
}

std::vector<double> hessian_abs_mean(const ModalField& f, const HarmonicBasisPtr& raised) {
  const std::vector<ModalField> comps = gradient_components(f, raised);
  const SphereRule& rule = *f.basis->rule();
  const int n = f.dimension();
  std::vector<double> out(f.radii(), 0.0);
  for (std::size_t j = 0; j < f.radii(); ++j) {
    std::vector<double> frob(rule.size(), 0.0);
    for (const ModalField& comp : comps) {
      const std::vector<Point> g = sample_gradient(comp, j);
      for (std::size_t i = 0; i < rule.size(); ++i) frob[i] += dot(g[i], g[i], n);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) acc += rule.weight(i) * std::sqrt(frob[i]);
    out[j] = acc;
  }
  return out;
}

double finish(double avg, int p) { return p == 2 ? std::sqrt(std::max(avg, 0.0)) : avg; }

}  // namespace

double annulus_mean(const ModalField& f, double r, int p) {
  if (p != 1 && p != 2) throw DomainError("annulus_mean: p must be 1 or 2");
  const std::vector<double> means = p == 2 ? sphere_square_mean(f) : abs_mean_per_radius(f);
  return finish(annulus_value(*f.grid, means, f.dimension(), r), p);
}

double annulus_mean(const VectorSamples& f, double r, int p) {
  const std::vector<double> means = sphere_power_mean(f, p);
  return finish(annulus_value(*f.grid, means, f.n, r), p);
}

double annulus_gradient_mean(const ModalField& f, double r, int p) {
  if (p != 1 && p != 2) throw DomainError("annulus_gradient_mean: p must be 1 or 2");
  const std::vector<double> means = p == 2 ? sphere_gradient_square_mean(f) : gradient_abs_mean_per_radius(f);
  return finish(annulus_value(*f.grid, means, f.dimension(), r), p);
}

double sobolev_annulus_mean(const ModalField& f, double r, int p, int order, const HarmonicBasisPtr& raised) {
  if (order != 1 && order != 2) throw DomainError("sobolev_annulus_mean: order must be 1 or 2");
  if (!f.has_derivative()) throw DomainError("sobolev_annulus_mean: derivative table missing");
  const double first = r * annulus_gradient_mean(f, r, p) + annulus_mean(f, r, p);
  if (order == 1) return first;
  if (!raised) throw DomainError("sobolev_annulus_mean: second order needs a raised basis");
  const std::vector<double> means = p == 2 ? hessian_square_mean(f, raised) : hessian_abs_mean(f, raised);
  return r * r * finish(annulus_value(*f.grid, means, f.dimension(), r), p) + first;
}

// ---------------------------------------------------------------------------

ModalField newtonian_solve_source(const ModalField& f) {
  double scale = 0.0;
  for (double v : f.coeff) scale = std::max(scale, std::abs(v));
  if (low_mode_size(f) > 1e-12 * std::max(scale, 1e-300)) {
    throw DomainError("newtonian_solve_source: source has degree 0/1 content; apply the perp projection first");
  }
  const RadialGrid& g = *f.grid;
  const int n = f.dimension();
  const double h = g.step();
  const std::size_t J = g.size();
  ModalField w(f.grid, f.basis);
  w.deriv.assign(w.coeff.size(), 0.0);
  const CellQuadrature cq(f.grid, 8);
  const std::size_t first = f.basis->max_degree() >= 2 ? f.basis->offset(2) : f.modes();
  parallel_for(f.modes() - first, [&](std::size_t m) {
    const std::size_t idx = first + m;
    const int k = f.basis->degree(idx);
    const double c = 1.0 / (2.0 * k + n - 2.0);
    const std::vector<double> lo_cells = cq.cell_integrals(f.row(idx), k + n);
    const std::vector<double> hi_cells = cq.cell_integrals(f.row(idx), 2.0 - k);
    std::vector<double> lo(J, 0.0), hi(J, 0.0);
    const double lo_decay = std::exp(-(k + n - 2.0) * h);
    const double hi_decay = std::exp(-k * h);
    for (std::size_t j = 0; j + 1 < J; ++j) lo[j + 1] = lo_decay * (lo[j] + g.r(j) * g.r(j) * lo_cells[j]);
    for (std::size_t j = J - 1; j-- > 0;) hi[j] = g.r(j) * g.r(j) * hi_cells[j] + hi_decay * hi[j + 1];
    for (std::size_t j = 0; j < J; ++j) {
      w.c(idx, j) = c * (lo[j] + hi[j]);
      w.d(idx, j) = c * ((2.0 - n - k) * lo[j] + k * hi[j]) / g.r(j);
    }
  });
  return w;
}

ModalField newtonian_solve_divergence(const VectorSamples& fvec, const HarmonicBasisPtr& basis) {
  if (fvec.rule != basis->rule()) throw DomainError("newtonian_solve_divergence: rule mismatch");
  const RadialGrid& g = *fvec.grid;
  const int n = basis->dimension();
  const double h = g.step();
  const std::size_t J = g.size();
  const SphereRule& rule = *fvec.rule;
  const std::size_t first = basis->max_degree() >= 2 ? basis->offset(2) : basis->size();
  const std::size_t modes = basis->size();

  // Angular tables a = <f.theta, phi>, b = <f, grad_S phi> per radius.
  std::vector<double> a(modes * J, 0.0), b(modes * J, 0.0);
  parallel_for(J, [&](std::size_t j) {
    std::vector<double> ftheta(rule.size());
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const Point& th = rule.node(i);
      double s = 0.0;
      for (int c = 0; c < n; ++c) s += fvec.at(j, i, c) * th[c];
      ftheta[i] = rule.weight(i) * s;
    }
    for (std::size_t idx = first; idx < modes; ++idx) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i) {
        sa += ftheta[i] * basis->value(idx, i);
        const Point& sg = basis->surface_gradient(idx, i);
        double fs = 0.0;
        for (int c = 0; c < n; ++c) fs += fvec.at(j, i, c) * sg[c];
        sb += rule.weight(i) * fs;
      }
      a[idx * J + j] = sa;
      b[idx * J + j] = sb;
    }
  });

  ModalField w(fvec.grid, basis);
  w.deriv.assign(w.coeff.size(), 0.0);
  const CellQuadrature cq(fvec.grid, 8);
  parallel_for(modes - first, [&](std::size_t m) {
    const std::size_t idx = first + m;
    const int k = basis->degree(idx);
    const double c = 1.0 / (2.0 * k + n - 2.0);
    std::vector<double> lo_src(J), hi_src(J);
    for (std::size_t j = 0; j < J; ++j) {
      const double av = a[idx * J + j], bv = b[idx * J + j];
      lo_src[j] = k * av + bv;
      hi_src[j] = (2.0 - n - k) * av + bv;
    }
    const std::vector<double> lo_cells = cq.cell_integrals(lo_src, k + n - 1.0);
    const std::vector<double> hi_cells = cq.cell_integrals(hi_src, 1.0 - k);
    std::vector<double> lo(J, 0.0), hi(J, 0.0);
    const double lo_decay = std::exp(-(k + n - 2.0) * h);
    const double hi_decay = std::exp(-k * h);
    for (std::size_t j = 0; j + 1 < J; ++j) lo[j + 1] = lo_decay * (lo[j] + g.r(j) * lo_cells[j]);
    for (std::size_t j = J - 1; j-- > 0;) hi[j] = g.r(j) * hi_cells[j] + hi_decay * hi[j + 1];
    for (std::size_t j = 0; j < J; ++j) {
      w.c(idx, j) = -c * (lo[j] + hi[j]);
      w.d(idx, j) = -c * ((2.0 - n - k) * lo[j] + k * hi[j]) / g.r(j) - a[idx * J + j];
    }
  });
  return w;
}

// ---------------------------------------------------------------------------

namespace {

// Integrals r^{-n} int_0^r M rho^{n+q_lo} drho + r^2 int_r^inf M rho^{q_hi} drho at every node,
// with M given per node (NaN treated as zero) and trapezoid in log rho.
std::vector<double> bound_rhs(const RadialGrid& g, const std::vector<double>& M, int n, double q_lo, double q_hi) {
  const std::size_t J = g.size();
  const double h = g.step();
  auto val = [&](std::size_t j) { return std::isnan(M[j]) ? 0.0 : M[j]; };
  std::vector<double> inner(J, 0.0), outer(J, 0.0);
  // inner_j = int_0^{r_j} M rho^{n+q_lo+1} dlog rho, scaled by r_j^{-(n+q_lo+1)} for stability.
  const double a = n + q_lo + 1.0;
  for (std::size_t j = 0; j + 1 < J; ++j) {
    const double decay = std::exp(-a * h);
    inner[j + 1] = decay * inner[j] + 0.5 * h * (val(j) * decay + val(j + 1));
  }
  const double b = q_hi + 1.0;  // rho^{q_hi} drho = rho^{q_hi+1} dlog rho
  for (std::size_t j = J - 1; j-- > 0;) {
    const double growth = std::exp(b * h);
    outer[j] = growth * outer[j + 1] + 0.5 * h * (val(j) + val(j + 1) * growth);
  }
  std::vector<double> out(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double r = g.r(j);
    out[j] = std::pow(r, a - n) * inner[j] + std::pow(r, 2.0 + b) * outer[j];
  }
  return out;
}

PotentialBoundReport fit_potential_bound(const RadialGrid& g, const std::vector<double>& lhs_profile, const std::vector<double>& rhs) {
  PotentialBoundReport rep;
  for (int e = g.lo_octave(); e < g.hi_octave(); ++e) {
    const std::size_t j = *g.dyadic_index(e);
    if (std::isnan(lhs_profile[j])) continue;
    rep.radii.push_back(g.r(j));
    rep.lhs.push_back(lhs_profile[j]);
    rep.rhs.push_back(rhs[j]);
    double peak = 0.0;
    for (double v : rhs) peak = std::max(peak, v);
    if (rhs[j] > 1e-12 * peak) rep.constant = std::max(rep.constant, lhs_profile[j] / rhs[j]);
  }
  rep.finite = std::isfinite(rep.constant);
  return rep;
}

}  // namespace

PotentialBoundReport verify_source_bound(const ModalField& w, const ModalField& f, const HarmonicBasisPtr& raised) {
  const RadialGrid& g = *w.grid;
  const int n = w.dimension();
  std::vector<double> Mf = annulus_profile(g, sphere_square_mean(f), n);
  for (double& v : Mf) v = std::isnan(v) ? v : std::sqrt(std::max(v, 0.0));
  const std::vector<double> m0 = annulus_profile(g, sphere_square_mean(w), n);
  const std::vector<double> m1 = annulus_profile(g, sphere_gradient_square_mean(w), n);
  const std::vector<double> m2 = annulus_profile(g, hessian_square_mean(w, raised), n);
  std::vector<double> lhs(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double r = g.r(j);
    lhs[j] = std::isnan(m0[j]) ? nan() : r * r * std::sqrt(m2[j]) + r * std::sqrt(m1[j]) + std::sqrt(m0[j]);
  }
  return fit_potential_bound(g, lhs, bound_rhs(g, Mf, n, 1.0, -1.0));
}

PotentialBoundReport verify_divergence_bound(const ModalField& w, const VectorSamples& f) {
  const RadialGrid& g = *w.grid;
  const int n = w.dimension();
  std::vector<double> Mf = annulus_profile(g, sphere_power_mean(f, 2), n);
  for (double& v : Mf) v = std::isnan(v) ? v : std::sqrt(std::max(v, 0.0));
  const std::vector<double> m0 = annulus_profile(g, sphere_square_mean(w), n);
  const std::vector<double> m1 = annulus_profile(g, sphere_gradient_square_mean(w), n);
  std::vector<double> lhs(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    lhs[j] = std::isnan(m0[j]) ? nan() : g.r(j) * std::sqrt(m1[j]) + std::sqrt(m0[j]);
  }
  return fit_potential_bound(g, lhs, bound_rhs(g, Mf, n, 0.0, -2.0));
}

}  // namespace dinigrad
