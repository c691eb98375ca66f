#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nplme/rng.hpp"

namespace nplme {

enum class KernelFamily { gaussian };

/// Bounded characteristic kernel, k(x, x') = exp(-|x - x'|^2 / (2 l^2)).
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double bandwidth = 1.0;

  static KernelSpec gaussian(double bandwidth);
  double sup_value() const noexcept { return 1.0; }
  void validate() const;
};

/// k((x, y), (x', y')) = kx(x, x') * ky(y, y'). The first `x_dim`
/// coordinates of a point feed kx, the remainder ky.
struct ProductKernelSpec {
  KernelSpec kx;
  KernelSpec ky;
  std::size_t x_dim = 1;

  double sup_value() const noexcept { return kx.sup_value() * ky.sup_value(); }
  void validate() const;
};

/// Row-major list of points in R^dim.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}
  PointSet(std::size_t dim, std::vector<double> flat);

  static PointSet scalars(std::span<const double> values);
  static PointSet pairs(std::span<const double> xs, std::span<const double> ys);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  double at(std::size_t i, std::size_t d) const { return data_[i * dim_ + d]; }

  void push_back(std::span<const double> point);
  void push_back(std::initializer_list<double> point);
  void reserve(std::size_t n) { data_.reserve(n * dim_); }

  const std::vector<double>& data() const noexcept { return data_; }

  /// Column `d` as a vector.
  std::vector<double> column(std::size_t d) const;
  /// Points restricted to coordinates [first, first + count).
  PointSet project(std::size_t first, std::size_t count) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Atomic probability measure sum_i weights[i] * delta(atoms[i]).
struct WeightedSample {
  PointSet atoms;
  std::vector<double> weights;

  static WeightedSample uniform(PointSet atoms);
  /// Throws InvalidMeasure unless weights are nonnegative, aligned with the
  /// atoms and sum to one within 1e-12.
  void validate() const;
};

double eval_kernel(std::span<const double> a, std::span<const double> b, const KernelSpec& spec);
double eval_kernel(std::span<const double> a, std::span<const double> b,
                   const ProductKernelSpec& spec);

/// Median pairwise Euclidean distance over distinct index pairs. Falls back to
/// the smallest positive distance when the median is zero.
double median_heuristic(const PointSet& points);

/// Unbiased U-statistic estimate of MMD^2; may be negative.
double mmd2_unbiased(const PointSet& a, const PointSet& b, const KernelSpec& spec);
double mmd2_unbiased(const PointSet& a, const PointSet& b, const ProductKernelSpec& spec);

/// V-form MMD^2 between two weighted atomic measures, clamped at zero.
double mmd2_weighted(const WeightedSample& p, const WeightedSample& q, const KernelSpec& spec);
double mmd2_weighted(const WeightedSample& p, const WeightedSample& q,
                     const ProductKernelSpec& spec);

struct TwoSampleTestResult {
  double mmd2_u = 0.0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_permutations = 0;
  double bandwidth = 0.0;
};

/// Permutation test of equal distributions using the unbiased MMD^2 with a
/// Gaussian kernel whose bandwidth is the median heuristic of the pooled
/// sample. The interval is a 95% percentile bootstrap resampling within each
/// sample.
TwoSampleTestResult two_sample_test(const PointSet& a, const PointSet& b, std::size_t n_perm,
                                    std::size_t n_boot, Rng& rng);

}  // namespace nplme
