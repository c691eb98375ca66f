#include "pair_sums.hpp"

#include <cmath>

namespace nplme::detail {

double self_pair_sum(std::size_t n, const double* x, const double* y, const double* w, double* r) {
  double diag = 0.0;
  double off = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const double xa = x[a];
    const double ya = y[a];
    const double wa = w[a];
    diag += wa * wa;
    double row = 0.0;
    double ra = 0.0;
    if (r) {
#pragma omp simd reduction(+ : row, ra)
      for (std::size_t b = 0; b < a; ++b) {
        const double dx = xa - x[b];
        const double dy = ya - y[b];
        const double t = wa * w[b] * std::exp(-(dx * dx + dy * dy));
        row += t;
        ra += t * dy;
        r[b] -= t * dy;
      }
      r[a] += ra;
    } else {
#pragma omp simd reduction(+ : row)
      for (std::size_t b = 0; b < a; ++b) {
        const double dx = xa - x[b];
        const double dy = ya - y[b];
        row += wa * w[b] * std::exp(-(dx * dx + dy * dy));
      }
    }
    off += row;
  }
  return diag + 2.0 * off;
}

double cross_pair_sum(std::size_t na, const double* xa, const double* ya, const double* ua,
                      std::size_t nb, const double* xb, const double* yb, const double* vb,
                      double* s) {
  double total = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    const double xbb = xb[b];
    const double ybb = yb[b];
    double col = 0.0;
    double sb = 0.0;
#pragma omp simd reduction(+ : col, sb)
    for (std::size_t a = 0; a < na; ++a) {
      const double dx = xa[a] - xbb;
      const double dy = ya[a] - ybb;
      const double t = ua[a] * std::exp(-(dx * dx + dy * dy));
      col += t;
      sb += t * dy;
    }
    total += vb[b] * col;
    if (s) s[b] += vb[b] * sb;
  }
  return total;
}

}  // namespace nplme::detail
