#include <cmath>

#include "doctest.h"
#include "nplme/error.hpp"
#include "nplme/kernels.hpp"
#include "oracles.hpp"

using namespace nplme;

namespace {

PointSet to_points(const oracle::Points& p, std::size_t dim) {
  PointSet s(dim);
  for (const auto& x : p) s.push_back(x);
  return s;
}

oracle::Points random_points(Rng& r, std::size_t n, std::size_t dim, double shift = 0.0) {
  oracle::Points p(n, std::vector<double>(dim));
  for (auto& x : p)
    for (auto& v : x) v = r.normal() + shift;
  return p;
}

}  // namespace

TEST_CASE("unbiased MMD matches the naive double sum") {
  Rng r(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t dim = 1 + r.index(3);
    const auto a = random_points(r, 2 + r.index(4), dim);
    const auto b = random_points(r, 2 + r.index(4), dim, 0.5);
    const double l = 0.3 + 2.0 * r.uniform();
    const double got = mmd2_unbiased(to_points(a, dim), to_points(b, dim), KernelSpec::gaussian(l));
    CHECK(std::abs(got - oracle::mmd2_u(a, b, l)) < 1e-12);
  }
}

TEST_CASE("product kernel factorises") {
  const ProductKernelSpec k{KernelSpec::gaussian(0.7), KernelSpec::gaussian(2.0), 1};
  const std::vector<double> a{0.1, 1.0}, b{-0.4, 2.5};
  const double expect = std::exp(-0.25 / (2 * 0.49)) * std::exp(-2.25 / 8.0);
  CHECK(eval_kernel(a, b, k) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("weighted MMD identities") {
  const KernelSpec k = KernelSpec::gaussian(1.0);
  WeightedSample d0{PointSet::scalars(std::vector<double>{0.0}), {1.0}};
  WeightedSample d1{PointSet::scalars(std::vector<double>{1.0}), {1.0}};
  CHECK(std::abs(mmd2_weighted(d0, d1, k) - (2.0 - 2.0 * std::exp(-0.5))) < 1e-12);

  Rng r(2);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + r.index(6), m = 1 + r.index(6);
    std::vector<double> px(n), py(n), pw(n), qx(m), qy(m), qw(m);
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < n; ++i) px[i] = r.normal(), py[i] = r.normal(), sp += (pw[i] = r.uniform() + 0.1);
    for (std::size_t i = 0; i < m; ++i) qx[i] = r.normal(), qy[i] = r.normal(), sq += (qw[i] = r.uniform() + 0.1);
    for (auto& w : pw) w /= sp;
    for (auto& w : qw) w /= sq;
    const WeightedSample p{PointSet::pairs(px, py), pw}, q{PointSet::pairs(qx, qy), qw};
    const ProductKernelSpec pk{KernelSpec::gaussian(0.8), KernelSpec::gaussian(1.3), 1};
    CHECK(mmd2_weighted(p, p, pk) <= 1e-12);
    CHECK(mmd2_weighted(p, q, pk) == doctest::Approx(mmd2_weighted(q, p, pk)).epsilon(1e-12));
    const double ref = oracle::mmd2_v_xy(px, py, pw, qx, qy, qw, 0.8, 1.3);
    CHECK(std::abs(mmd2_weighted(p, q, pk) - std::max(ref, 0.0)) < 1e-12);
  }
}

TEST_CASE("median heuristic") {
  CHECK(median_heuristic(PointSet::scalars(std::vector<double>{0.0, 1.0, 3.0})) == doctest::Approx(2.0));
  // zero median falls back to the smallest positive distance
  CHECK(median_heuristic(PointSet::scalars(std::vector<double>{1.0, 1.0, 1.0, 1.0, 4.0})) == doctest::Approx(3.0));
  CHECK_THROWS_AS(median_heuristic(PointSet::scalars(std::vector<double>{2.0, 2.0})), DegenerateSample);
  CHECK_THROWS_AS(median_heuristic(PointSet::scalars(std::vector<double>{2.0})), PreconditionError);
}

TEST_CASE("input validation") {
  const KernelSpec k = KernelSpec::gaussian(1.0);
  const std::vector<double> nan_pt{std::nan("")}, one{1.0};
  CHECK_THROWS_AS(eval_kernel(nan_pt, one, k), InvalidInput);
  CHECK_THROWS_AS(KernelSpec::gaussian(0.0), InvalidParameter);
  CHECK_THROWS_AS(mmd2_unbiased(PointSet::scalars(one), PointSet::scalars(std::vector<double>{1, 2}), k),
                  PreconditionError);
  WeightedSample bad{PointSet::scalars(std::vector<double>{0.0, 1.0}), {0.7, 0.7}};
  CHECK_THROWS_AS(bad.validate(), InvalidMeasure);
}

TEST_CASE("two-sample test separates shifted samples and accepts equal ones") {
  Rng r(4);
  const auto a = random_points(r, 60, 2), b = random_points(r, 60, 2), c = random_points(r, 60, 2, 1.5);
  Rng t1(5), t2(5);
  const auto same = two_sample_test(to_points(a, 2), to_points(b, 2), 300, 100, t1);
  const auto diff = two_sample_test(to_points(a, 2), to_points(c, 2), 300, 100, t2);
  CHECK(same.p_value > 0.05);
  CHECK(diff.p_value < 0.01);
  CHECK(diff.ci_low <= diff.mmd2_u);
  CHECK(diff.mmd2_u <= diff.ci_high);
  CHECK_THROWS_AS(two_sample_test(to_points(a, 2), to_points(b, 2), 50, 10, t1), PreconditionError);
}
