#include <cmath>

#include "doctest.h"
#include "nplme/error.hpp"
#include "nplme/hmc.hpp"
#include "nplme/pseudo_sampling.hpp"

using namespace nplme;

namespace {

double harmonic(std::span<const double> q, std::span<double> g) {
  double lp = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    lp -= 0.5 * q[i] * q[i];
    g[i] = -q[i];
  }
  return lp;
}

TargetLogDensity gaussian_target(std::vector<double> mean, std::vector<double> sd) {
  TargetLogDensity t;
  t.dim = mean.size();
  t.log_density_grad = [mean, sd](std::span<const double> q, std::span<double> g) {
    double lp = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double z = (q[i] - mean[i]) / sd[i];
      lp -= 0.5 * z * z;
      g[i] = -z / sd[i];
    }
    return lp;
  };
  return t;
}

}  // namespace

TEST_CASE("leapfrog moves a free particle in a straight line") {
  auto flat = [](std::span<const double>, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    return 0.0;
  };
  const std::vector<double> q{1.0, -2.0}, p{0.5, 0.25};
  const auto r = leapfrog(q, p, flat, 0.1, 10);
  CHECK(r.position[0] == doctest::Approx(1.5));
  CHECK(r.position[1] == doctest::Approx(-1.75));
  CHECK(r.momentum[1] == 0.25);
}

TEST_CASE("leapfrog nearly conserves energy and is reversible") {
  const std::vector<double> q{1.0, 0.3, -0.7}, p{-0.2, 0.9, 0.4};
  auto energy = [](const std::vector<double>& a, const std::vector<double>& b) {
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e += 0.5 * (a[i] * a[i] + b[i] * b[i]);
    return e;
  };
  const auto fwd = leapfrog(q, p, harmonic, 0.05, 200);
  CHECK(std::abs(energy(fwd.position, fwd.momentum) - energy(q, p)) < 1e-3);
  std::vector<double> back_p = fwd.momentum;
  for (auto& v : back_p) v = -v;
  const auto back = leapfrog(fwd.position, back_p, harmonic, 0.05, 200);
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(std::abs(back.position[i] - q[i]) < 1e-10);
    CHECK(std::abs(back.momentum[i] + p[i]) < 1e-10);
  }
}

TEST_CASE("HMC recovers a scaled Gaussian") {
  HMCConfig cfg;
  cfg.n_chains = 2;
  cfg.warmup = 500;
  cfg.iters = 1500;
  cfg.seed = 3;
  const auto res = run_hmc(gaussian_target({1.0, -2.0}, {0.5, 3.0}), cfg);
  const auto& d = res.diagnostics;
  CHECK(d.divergences == 0);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(d.r_hat[k] < 1.02);
    CHECK(d.ess_bulk[k] > 300.0);
  }
  double s = 0.0, s2 = 0.0, nn = 0.0;
  for (const auto& c : res.chains)
    for (std::size_t it = 0; it < c.iters(); ++it) {
      const double v = c.at(it, 1);
      s += v;
      s2 += v * v;
      nn += 1.0;
    }
  const double mean = s / nn;
  CHECK(mean == doctest::Approx(-2.0).epsilon(0.1));
  CHECK(std::sqrt(s2 / nn - mean * mean) == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("HMC runs are reproducible") {
  HMCConfig cfg;
  cfg.n_chains = 2;
  cfg.warmup = 50;
  cfg.iters = 20;
  cfg.seed = 9;
  const auto a = run_hmc(gaussian_target({0.0}, {1.0}), cfg);
  const auto b = run_hmc(gaussian_target({0.0}, {1.0}), cfg);
  CHECK(a.chains[1].draws == b.chains[1].draws);
}

TEST_CASE("diagnostics flag disagreeing chains") {
  Rng r(4);
  std::vector<std::vector<double>> good(4, std::vector<double>(1000)), bad = good;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 1000; ++i) {
      good[c][i] = r.normal();
      bad[c][i] = r.normal() + (c == 0 ? 3.0 : 0.0);
    }
  CHECK(split_rhat(good) < 1.01);
  CHECK(ess_bulk(good) == doctest::Approx(4000.0).epsilon(0.15));
  CHECK(ess_tail(good) > 2000.0);
  CHECK(split_rhat(bad) > 1.1);
}

TEST_CASE("joint posterior gradient matches finite differences") {
  Rng r(5);
  Dataset d;
  for (int i = 0; i < 6; ++i) {
    d.w.push_back(r.normal());
    d.y.push_back(r.normal() + 3.0);
  }
  for (MEKind kind : {MEKind::classical, MEKind::berkson}) {
    MEConfig me;
    me.kind = kind;
    me.sigma_N_true = 0.8;
    me.sigma_E_true = 0.6;
    const auto t = joint_neg_log_posterior(d, make_family("sigmoid"), me, ThetaPrior::isotropic(3));
    REQUIRE(t.dim == 9);
    std::vector<double> q(t.dim), g(t.dim), scratch(t.dim);
    for (auto& v : q) v = r.normal();
    t.log_density_grad(q, g);
    for (std::size_t k = 0; k < t.dim; ++k) {
      auto p = q, m = q;
      p[k] += 1e-6;
      m[k] -= 1e-6;
      const double fd = (t.log_density_grad(p, scratch) - t.log_density_grad(m, scratch)) / 2e-6;
      CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("pseudo samples from chains pick the documented states") {
  std::vector<ChainOutput> chains(2);
  for (std::size_t c = 0; c < 2; ++c) {
    chains[c].dim = 3;  // theta (1) + n = 2
    for (std::size_t it = 0; it < 100; ++it) {
      const double s = static_cast<double>(c * 100 + it);
      chains[c].draws.insert(chains[c].draws.end(), {s, s + 0.1, s + 0.2});
    }
  }
  const auto spaced = pseudo_from_chains(chains, 1, 2, 2, PseudoRegime::C_spaced);
  // q = 0.25, 0.75 over S = 200 states
  CHECK(spaced.theta_draws == std::vector<double>{50.0, 149.0});
  CHECK(spaced.at(1, 0) == doctest::Approx(50.2));
  const auto thinned = pseudo_from_chains(chains, 1, 2, 3, PseudoRegime::B_thinned);
  CHECK(thinned.theta_draws == std::vector<double>{49.0, 99.0, 149.0});
  CHECK_THROWS_AS(pseudo_from_chains(chains, 1, 2, 5, PseudoRegime::B_thinned), ConfigError);
  CHECK_THROWS_AS(pseudo_from_chains(chains, 1, 2, 1, PseudoRegime::A_independent), InvalidInput);
}

TEST_CASE("pseudo sampling regimes have the documented shapes") {
  Rng g(6);
  Dataset d;
  for (int i = 0; i < 12; ++i) {
    const double x = g.normal();
    d.w.push_back(x + 0.3 * g.normal());
    d.y.push_back(1.0 + 2.0 * x + 0.3 * g.normal());
  }
  MEConfig me;
  me.sigma_N_true = 0.3;
  me.sigma_E_true = 0.3;
  HMCConfig cfg;
  cfg.n_chains = 2;
  cfg.warmup = 100;
  cfg.iters = 100;
  const FamilyPtr lin = make_family("linear");
  for (PseudoRegime reg : {PseudoRegime::A_independent, PseudoRegime::B_thinned, PseudoRegime::C_spaced}) {
    Rng r(7);
    const auto ps = pseudo_sample(d, lin, me, ThetaPrior::isotropic(2), 3, reg, cfg, r);
    CHECK(ps.x_tilde.size() == 36);
    CHECK(ps.theta_rows() == (reg == PseudoRegime::A_independent ? 36u : 3u));
    for (double x : ps.x_tilde) CHECK(std::isfinite(x));
  }
}
