#pragma once

#include <cstddef>

// Pairwise Gaussian sums over pre-scaled coordinates, k = exp(-(dx^2 + dy^2)).
// Compiled with relaxed floating-point rules so exp vectorises.
namespace nplme::detail {

/// Returns sum_{a,b} w_a w_b k_ab over ordered pairs (diagonal included).
/// When r is non-null, r[a] += sum_b w_a w_b k_ab (y_a - y_b).
double self_pair_sum(std::size_t n, const double* x, const double* y, const double* w, double* r);

/// Returns sum_{a,b} u_a v_b k_ab between two atom lists. When s is non-null,
/// s[b] += sum_a u_a v_b k_ab (ya_a - yb_b).
double cross_pair_sum(std::size_t na, const double* xa, const double* ya, const double* ua,
                      std::size_t nb, const double* xb, const double* yb, const double* vb,
                      double* s);

}  // namespace nplme::detail
