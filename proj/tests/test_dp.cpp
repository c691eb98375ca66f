#include <cmath>
#include <numeric>

#include "doctest.h"
#include "nplme/dp.hpp"
#include "oracles.hpp"

using namespace nplme;

TEST_CASE("DP weights form a simplex with Dirichlet block moments") {
  Rng r(1);
  const double c = 2.0;
  const std::size_t T = 20, m = 3, N = 40000;
  double s = 0.0, s2 = 0.0, first = 0.0;
  for (std::size_t b = 0; b < N; ++b) {
    const auto w = sample_dp_weights(c, T, m, r);
    REQUIRE(w.size() == T + m);
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-13));
    const double prior = std::accumulate(w.begin(), w.begin() + T, 0.0);
    s += prior;
    s2 += prior * prior;
    first += w[T];
  }
  // prior block ~ Beta(c, m), each pseudo slot has mean 1/(c+m)
  const double mean = s / N, var = s2 / N - mean * mean;
  const double e_mean = c / (c + m), e_var = c * m / ((c + m) * (c + m) * (c + m + 1));
  CHECK(std::abs(mean - e_mean) < 4.0 * std::sqrt(e_var / N));
  CHECK(var == doctest::Approx(e_var).epsilon(0.05));
  CHECK(first / N == doctest::Approx(1.0 / (c + m)).epsilon(0.02));
}

TEST_CASE("c = 0 puts exactly zero mass on the prior block") {
  Rng r(2);
  for (int t = 0; t < 100; ++t) {
    const auto w = sample_dp_weights(0.0, 10, 2, r);
    for (std::size_t k = 0; k < 10; ++k) CHECK(w[k] == 0.0);
  }
  CHECK_THROWS_AS(sample_dp_weights(0.0, 10, 0, r), PreconditionError);
  CHECK_THROWS_AS(sample_dp_weights(-1.0, 10, 2, r), InvalidParameter);
}

TEST_CASE("tiny concentrations keep the weights finite") {
  Rng r(3);
  for (int t = 0; t < 1000; ++t) {
    const auto w = sample_dp_weights(1e-4, 100, 3, r);
    for (double v : w) CHECK(std::isfinite(v));
  }
}

TEST_CASE("posterior draws average to the base measure embedding") {
  // Q = N(0,1), atoms {1, 2}, c = 1: E[P] = (1/3) Q + (1/3)(d1 + d2)
  DPPosteriorSpec<double> spec;
  spec.c = 1.0;
  spec.pseudo_atoms = {1.0, 2.0};
  spec.prior_sampler = [](Rng& g) { return g.normal(); };
  spec.truncation = 10;
  Rng r(4);
  std::vector<WeightedSample> draws;
  for (int b = 0; b < 300; ++b) draws.push_back(to_weighted_sample(draw_dp_posterior(spec, r)));
  const WeightedSample pooled = pool_measures(draws);
  CHECK(std::accumulate(pooled.weights.begin(), pooled.weights.end(), 0.0) == doctest::Approx(1.0));
  const double d2 = oracle::mmd2_vs_gaussian_mixture(pooled.atoms.column(0), pooled.weights, 1.0, 1.0 / 3.0, 0.0,
                                                     1.0, spec.pseudo_atoms, 1.0 / 3.0);
  // per-draw E|phi(P) - phi(E P)|^2 is below 1/(c+m+1), so 300 draws give well under 2e-3
  CHECK(d2 < 2e-3);
  CHECK(d2 > -1e-12);
}

TEST_CASE("pruning drops small weights and renormalises") {
  WeightedSample s{PointSet::scalars(std::vector<double>{0, 1, 2}), {0.5, 1e-15, 0.5 - 1e-15}};
  const auto p = prune_weights(s, 1e-12);
  CHECK(p.weights.size() == 2);
  CHECK(p.weights[0] + p.weights[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.atoms.at(1, 0) == 2.0);
  CHECK_THROWS_AS(prune_weights(s, 0.9), InvalidMeasure);
}
