#pragma once

#include <functional>
#include <vector>

namespace dinigrad {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on P_n).
GaussRule gauss_legendre(int count);

/// Composite Gauss-Legendre integral of f over [a, b] with `panels` panels.
double integrate_gl(const std::function<double(double)>& f, double a, double b, int panels,
                    int order = 8);

/// Adaptive Simpson with absolute+relative tolerance; depth-limited.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-12, int max_depth = 40);

}  // namespace dinigrad
