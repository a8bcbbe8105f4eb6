#include "dinigrad/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace dinigrad {

Vec symmetric_eigenvalues(const Mat& sym) {
  const auto size = sym.rows();
  if (sym.cols() != size) throw DomainError("symmetric_eigenvalues: matrix not square");

  Mat a = sym.template selfadjointView<Eigen::Upper>();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (Eigen::Index p = 0; p < size; ++p) {
      diag += a(p, p) * a(p, p);
      for (Eigen::Index q = p + 1; q < size; ++q) off += a(p, q) * a(p, q);
    }
    if (off <= 1e-34 * diag || off == 0.0) break;

    for (Eigen::Index p = 0; p < size; ++p) {
      for (Eigen::Index q = p + 1; q < size; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation annihilating a(p,q), numerically stable form.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < size; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < size; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }

  Vec eig(size);
  for (Eigen::Index i = 0; i < size; ++i) eig(i) = a(i, i);
  std::sort(eig.data(), eig.data() + size);
  return eig;
}

double mu_max(const Mat& m) {
  if (m.size() == 0) return 0.0;
  const Mat sym = 0.5 * (m + m.transpose());
  const Vec eig = symmetric_eigenvalues(sym);
  return eig(eig.size() - 1);
}

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  const Mat gram = m.transpose() * m;
  const Vec eig = symmetric_eigenvalues(gram);
  return std::sqrt(std::max(0.0, eig(eig.size() - 1)));
}

double max_abs_entry(const Mat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace dinigrad
