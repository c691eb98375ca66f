#include "nplme/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nplme/error.hpp"

namespace nplme {

namespace {

void require_finite(std::span<const double> p, const char* what) {
  for (double v : p) {
    if (!std::isfinite(v)) throw InvalidInput(std::string(what) + ": non-finite coordinate");
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b,
                        std::size_t first, std::size_t last) {
  double s = 0.0;
  for (std::size_t d = first; d < last; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

// Unchecked evaluators used by the pairwise sums once inputs are validated.
struct GaussianEval {
  double inv_two_l2;
  double operator()(std::span<const double> a, std::span<const double> b) const {
    return std::exp(-squared_distance(a, b) * inv_two_l2);
  }
};

struct ProductEval {
  double inv_two_lx2;
  double inv_two_ly2;
  std::size_t x_dim;
  double operator()(std::span<const double> a, std::span<const double> b) const {
    const double dx = squared_distance(a, b, 0, x_dim);
    const double dy = squared_distance(a, b, x_dim, a.size());
    return std::exp(-(dx * inv_two_lx2 + dy * inv_two_ly2));
  }
};

GaussianEval make_eval(const KernelSpec& spec) {
  spec.validate();
  return {1.0 / (2.0 * spec.bandwidth * spec.bandwidth)};
}

ProductEval make_eval(const ProductKernelSpec& spec) {
  spec.validate();
  return {1.0 / (2.0 * spec.kx.bandwidth * spec.kx.bandwidth),
          1.0 / (2.0 * spec.ky.bandwidth * spec.ky.bandwidth), spec.x_dim};
}

void require_points(const PointSet& p, const char* what) {
  for (std::size_t i = 0; i < p.size(); ++i) require_finite(p[i], what);
}

template <class Eval>
double mmd2_unbiased_impl(const PointSet& a, const PointSet& b, const Eval& k) {
  const std::size_t n = a.size();
  const std::size_t s = b.size();
  if (n < 2 || s < 2) throw PreconditionError("mmd2_unbiased: each sample needs at least 2 points");
  if (a.dim() != b.dim()) throw InvalidInput("mmd2_unbiased: dimension mismatch");
  require_points(a, "mmd2_unbiased");
  require_points(b, "mmd2_unbiased");

  double saa = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) saa += k(a[i], a[j]);
  double sbb = 0.0;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = i + 1; j < s; ++j) sbb += k(b[i], b[j]);
  double sab = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < s; ++j) sab += k(a[i], b[j]);

  const double dn = static_cast<double>(n);
  const double ds = static_cast<double>(s);
  return 2.0 * saa / (dn * (dn - 1.0)) + 2.0 * sbb / (ds * (ds - 1.0)) - 2.0 * sab / (dn * ds);
}

template <class Eval>
double weighted_cross(const WeightedSample& p, const WeightedSample& q, const Eval& k) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    if (p.weights[i] == 0.0) continue;
    double row = 0.0;
    for (std::size_t j = 0; j < q.weights.size(); ++j) {
      if (q.weights[j] == 0.0) continue;
      row += q.weights[j] * k(p.atoms[i], q.atoms[j]);
    }
    s += p.weights[i] * row;
  }
  return s;
}

template <class Eval>
double weighted_self(const WeightedSample& p, const Eval& k) {
  double off = 0.0;
  double diag = 0.0;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const double wi = p.weights[i];
    if (wi == 0.0) continue;
    diag += wi * wi * k(p.atoms[i], p.atoms[i]);
    double row = 0.0;
    for (std::size_t j = i + 1; j < p.weights.size(); ++j) {
      if (p.weights[j] == 0.0) continue;
      row += p.weights[j] * k(p.atoms[i], p.atoms[j]);
    }
    off += wi * row;
  }
  return diag + 2.0 * off;
}

template <class Eval>
double mmd2_weighted_impl(const WeightedSample& p, const WeightedSample& q, const Eval& k) {
  p.validate();
  q.validate();
  if (p.atoms.dim() != q.atoms.dim()) throw InvalidInput("mmd2_weighted: dimension mismatch");
  require_points(p.atoms, "mmd2_weighted");
  require_points(q.atoms, "mmd2_weighted");
  const double v = weighted_self(p, k) + weighted_self(q, k) - 2.0 * weighted_cross(p, q, k);
  return v < 0.0 ? 0.0 : v;
}

}  // namespace

KernelSpec KernelSpec::gaussian(double bandwidth) {
  KernelSpec s;
  s.bandwidth = bandwidth;
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw InvalidParameter("kernel bandwidth must be positive and finite");
}

void ProductKernelSpec::validate() const {
  kx.validate();
  ky.validate();
  if (x_dim == 0) throw InvalidParameter("product kernel needs x_dim >= 1");
}

PointSet::PointSet(std::size_t dim, std::vector<double> flat) : dim_(dim), data_(std::move(flat)) {
  if (dim_ == 0 || data_.size() % dim_ != 0)
    throw InvalidInput("PointSet: flat data length is not a multiple of dim");
}

PointSet PointSet::scalars(std::span<const double> values) {
  return PointSet(1, std::vector<double>(values.begin(), values.end()));
}

PointSet PointSet::pairs(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidInput("PointSet::pairs: length mismatch");
  PointSet p(2);
  p.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) p.push_back({xs[i], ys[i]});
  return p;
}

void PointSet::push_back(std::span<const double> point) {
  if (point.size() != dim_) throw InvalidInput("PointSet::push_back: dimension mismatch");
  data_.insert(data_.end(), point.begin(), point.end());
}

void PointSet::push_back(std::initializer_list<double> point) {
  push_back(std::span<const double>(point.begin(), point.size()));
}

std::vector<double> PointSet::column(std::size_t d) const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, d);
  return out;
}

PointSet PointSet::project(std::size_t first, std::size_t count) const {
  if (first + count > dim_) throw InvalidInput("PointSet::project: range out of bounds");
  PointSet out(count);
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].subspan(first, count));
  return out;
}

WeightedSample WeightedSample::uniform(PointSet atoms) {
  const std::size_t n = atoms.size();
  if (n == 0) throw InvalidMeasure("uniform measure on an empty atom list");
  return {std::move(atoms), std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

void WeightedSample::validate() const {
  if (atoms.size() != weights.size())
    throw InvalidMeasure("weighted sample: atoms and weights differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidMeasure("weighted sample: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidMeasure("weighted sample: weights sum to " + std::to_string(total));
}

double eval_kernel(std::span<const double> a, std::span<const double> b, const KernelSpec& spec) {
  if (a.size() != b.size()) throw InvalidInput("eval_kernel: dimension mismatch");
  require_finite(a, "eval_kernel");
  require_finite(b, "eval_kernel");
  return make_eval(spec)(a, b);
}

double eval_kernel(std::span<const double> a, std::span<const double> b,
                   const ProductKernelSpec& spec) {
  if (a.size() != b.size() || a.size() <= spec.x_dim)
    throw InvalidInput("eval_kernel: dimension mismatch");
  require_finite(a, "eval_kernel");
  require_finite(b, "eval_kernel");
  return make_eval(spec)(a, b);
}

double median_heuristic(const PointSet& points) {
  const std::size_t n = points.size();
  if (n < 2) throw PreconditionError("median_heuristic: need at least 2 points");
  require_points(points, "median_heuristic");
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::sqrt(squared_distance(points[i], points[j])));

  const std::size_t m = d.size();
  std::nth_element(d.begin(), d.begin() + m / 2, d.end());
  double med = d[m / 2];
  if (m % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + m / 2);
    med = 0.5 * (med + lower);
  }
  if (med > 0.0) return med;

  double smallest = 0.0;
  for (double v : d)
    if (v > 0.0 && (smallest == 0.0 || v < smallest)) smallest = v;
  if (smallest == 0.0) throw DegenerateSample("median_heuristic: all points are identical");
  return smallest;
}

double mmd2_unbiased(const PointSet& a, const PointSet& b, const KernelSpec& spec) {
  return mmd2_unbiased_impl(a, b, make_eval(spec));
}

double mmd2_unbiased(const PointSet& a, const PointSet& b, const ProductKernelSpec& spec) {
  if (a.dim() <= spec.x_dim) throw InvalidInput("mmd2_unbiased: points too short for product kernel");
  return mmd2_unbiased_impl(a, b, make_eval(spec));
}

double mmd2_weighted(const WeightedSample& p, const WeightedSample& q, const KernelSpec& spec) {
  return mmd2_weighted_impl(p, q, make_eval(spec));
}

double mmd2_weighted(const WeightedSample& p, const WeightedSample& q,
                     const ProductKernelSpec& spec) {
  if (p.atoms.dim() <= spec.x_dim)
    throw InvalidInput("mmd2_weighted: points too short for product kernel");
  return mmd2_weighted_impl(p, q, make_eval(spec));
}

namespace {

// U-statistic from a pooled Gram matrix given the index lists of each sample.
double mmd2_from_gram(const std::vector<double>& gram, std::size_t stride,
                      const std::vector<std::size_t>& ia, const std::vector<std::size_t>& ib) {
  auto self = [&](const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double* row = gram.data() + idx[i] * stride;
      for (std::size_t j = i + 1; j < idx.size(); ++j) s += row[idx[j]];
    }
    const double n = static_cast<double>(idx.size());
    return 2.0 * s / (n * (n - 1.0));
  };
  double cross = 0.0;
  for (std::size_t i : ia) {
    const double* row = gram.data() + i * stride;
    for (std::size_t j : ib) cross += row[j];
  }
  const double n = static_cast<double>(ia.size());
  const double s = static_cast<double>(ib.size());
  return self(ia) + self(ib) - 2.0 * cross / (n * s);
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

TwoSampleTestResult two_sample_test(const PointSet& a, const PointSet& b, std::size_t n_perm,
                                    std::size_t n_boot, Rng& rng) {
  if (n_perm < 100) throw PreconditionError("two_sample_test: n_perm must be at least 100");
  if (a.size() < 2 || b.size() < 2)
    throw PreconditionError("two_sample_test: each sample needs at least 2 points");
  if (a.dim() != b.dim()) throw InvalidInput("two_sample_test: dimension mismatch");

  PointSet pooled(a.dim());
  pooled.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) pooled.push_back(a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) pooled.push_back(b[i]);

  TwoSampleTestResult r;
  r.bandwidth = median_heuristic(pooled);
  const GaussianEval k = make_eval(KernelSpec::gaussian(r.bandwidth));

  const std::size_t n = a.size();
  const std::size_t total = pooled.size();
  std::vector<double> gram(total * total);
  for (std::size_t i = 0; i < total; ++i) {
    gram[i * total + i] = 1.0;
    for (std::size_t j = i + 1; j < total; ++j) {
      const double v = k(pooled[i], pooled[j]);
      gram[i * total + j] = v;
      gram[j * total + i] = v;
    }
  }

  std::vector<std::size_t> ia(n), ib(total - n);
  std::iota(ia.begin(), ia.end(), 0);
  std::iota(ib.begin(), ib.end(), n);
  r.mmd2_u = mmd2_from_gram(gram, total, ia, ib);

  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t exceed = 0;
  for (std::size_t t = 0; t < n_perm; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    std::copy(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n), ia.begin());
    std::copy(perm.begin() + static_cast<std::ptrdiff_t>(n), perm.end(), ib.begin());
    if (mmd2_from_gram(gram, total, ia, ib) >= r.mmd2_u) ++exceed;
  }
  r.n_permutations = n_perm;
  r.p_value = static_cast<double>(1 + exceed) / static_cast<double>(n_perm + 1);

  if (n_boot > 0) {
    std::vector<double> stats;
    stats.reserve(n_boot);
    for (std::size_t t = 0; t < n_boot; ++t) {
      for (auto& i : ia) i = rng.index(n);
      for (auto& j : ib) j = n + rng.index(total - n);
      stats.push_back(mmd2_from_gram(gram, total, ia, ib));
    }
    r.ci_low = percentile(stats, 0.025);
    r.ci_high = percentile(stats, 0.975);
  } else {
    r.ci_low = r.ci_high = r.mmd2_u;
  }
  return r;
}

}  // namespace nplme
