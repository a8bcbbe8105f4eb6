#pragma once

#include "dinigrad/types.hpp"

namespace dinigrad {

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Only the upper triangle is read.
Vec symmetric_eigenvalues(const Mat& sym);

/// Largest eigenvalue of (M + M^T)/2.
double mu_max(const Mat& m);

/// Spectral norm, sqrt of the top eigenvalue of M^T M.
double spectral_norm(const Mat& m);

/// Largest absolute entry.
double max_abs_entry(const Mat& m);

}  // namespace dinigrad
