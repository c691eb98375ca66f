#include <cmath>

#include "doctest.h"
#include "nplme/error.hpp"
#include "nplme/estimator.hpp"
#include "oracles.hpp"

using namespace nplme;

namespace {

Dataset linear_data(std::size_t n, double noise, Rng& r) {
  Dataset d;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = r.normal();
    d.w.push_back(x[i] + 0.3 * r.normal());
    d.y.push_back(1.0 + 2.0 * x[i] + noise * r.normal());
  }
  d.x_latent = x;
  return d;
}

}  // namespace

TEST_CASE("Adam finds the minimum of a convex quadratic") {
  auto f = [](std::span<const double> t) {
    ObjectiveValue v;
    v.value = (t[0] - 1.0) * (t[0] - 1.0) + 4.0 * (t[1] + 2.0) * (t[1] + 2.0);
    v.grad = {2.0 * (t[0] - 1.0), 8.0 * (t[1] + 2.0)};
    return v;
  };
  AdamSettings opt;
  opt.iters = 3000;
  const auto r = minimize_adam(f, {0.0, 0.0}, opt);
  CHECK(r.theta[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(r.theta[1] == doctest::Approx(-2.0).epsilon(1e-3));
  CHECK(r.converged);
}

TEST_CASE("Adam keeps the best iterate") {
  int calls = 0;
  auto f = [&](std::span<const double> t) {
    ++calls;
    ObjectiveValue v;
    v.value = calls > 5 ? std::nan("") : t[0] * t[0];
    v.grad = {2.0 * t[0]};
    return v;
  };
  const auto r = minimize_adam(f, {3.0}, AdamSettings{});
  CHECK(std::isfinite(r.objective));
  CHECK(r.objective < 9.0);
}

TEST_CASE("c = 0 replicate matches a grid search on the same objective") {
  Rng g(1);
  const FamilyPtr lin = make_family("linear");
  std::vector<ObservationSpecs> specs(5);
  std::vector<double> jx, jy, jw(5, 0.2);
  for (auto& s : specs) {
    const double x = g.normal(), y = 0.5 - x + 0.4 * g.normal();
    s.joint.c = s.marginal.c = 0.0;
    s.joint.pseudo_atoms = {{x, y}};
    s.marginal.pseudo_atoms = {x};
    jx.push_back(x);
    jy.push_back(y);
  }
  const ProductKernelSpec k{KernelSpec::gaussian(1.0), KernelSpec::gaussian(1.0), 1};
  AdamSettings opt;
  opt.iters = 2000;
  Rng r(2);
  const std::vector<double> init{0.0, 0.0};
  const auto res = fit_one_replicate(specs, lin, 0.0, k, opt, init, r);

  double best = 1e9;
  for (double a = -2.0; a <= 2.0; a += 0.01)
    for (double b = -3.0; b <= 1.0; b += 0.01) {
      std::vector<double> my(5);
      for (int i = 0; i < 5; ++i) my[i] = a + b * jx[i];
      best = std::min(best, oracle::mmd2_v_xy(jx, jy, jw, jx, my, jw, 1.0, 1.0));
    }
  CHECK(res.objective <= best + 1e-6);
}

TEST_CASE("oracle fit recovers a noiseless linear curve") {
  Rng g(3);
  const Dataset d = linear_data(40, 0.0, g);
  Rng r(4);
  AdamSettings opt;
  opt.iters = 1000;
  const auto res = oracle_fit(d, make_family("linear"), 0.0, default_kernel(d), opt, r,
                              std::vector<double>{0.0, 1.0});
  CHECK(res.theta[0] == doctest::Approx(1.0).epsilon(0.01));
  CHECK(res.theta[1] == doctest::Approx(2.0).epsilon(0.01));
  Dataset no_latent = d;
  no_latent.x_latent.reset();
  CHECK_THROWS_AS(oracle_fit(no_latent, make_family("linear"), 0.0, default_kernel(d), opt, r), MissingLatent);
}

TEST_CASE("ensembles do not depend on the thread count") {
  Rng g(5);
  const Dataset d = linear_data(30, 0.3, g);
  MEConfig me;
  me.sigma_N_true = 0.3;
  me.sigma_E_true = 0.3;
  NPLConfig cfg;
  cfg.pseudo = false;
  cfg.B_boot = 6;
  cfg.optimizer.iters = 50;
  Rng r1(6), r2(6);
  cfg.threads = 1;
  const auto a = fit(d, make_family("linear"), me, cfg, r1);
  cfg.threads = 3;
  const auto b = fit(d, make_family("linear"), me, cfg, r2);
  CHECK(a.theta_draws == b.theta_draws);
  CHECK(a.size() == 6);
}

TEST_CASE("specs check the pseudo-sample shape") {
  Rng g(7);
  const Dataset d = linear_data(10, 0.3, g);
  MEConfig me;
  const auto cf = make_centring_factory(d, make_family("linear"), me, ThetaPrior::isotropic(2));
  NPLConfig cfg;
  CHECK_THROWS_AS(build_dp_specs(d, nullptr, cf, cfg), ConfigError);
  PseudoSampleSet ps;
  ps.n = 10;
  ps.m = 2;
  ps.x_tilde.assign(20, 0.0);
  CHECK_THROWS_AS(build_dp_specs(d, &ps, cf, cfg), ConfigError);
  cfg.m = 2;
  const auto specs = build_dp_specs(d, &ps, cf, cfg);
  CHECK(specs.size() == 10);
  CHECK(specs[3].joint.pseudo_atoms[1].y == d.y[3]);
  cfg.pseudo = false;
  const auto raw = build_dp_specs(d, nullptr, cf, cfg);
  CHECK(raw[4].marginal.pseudo_atoms == std::vector<double>{d.w[4]});
}

TEST_CASE("summaries agree with sorted quantiles") {
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 1.0) == 4.0);
  BootstrapEnsemble e;
  e.dim_theta = 2;
  for (int b = 0; b < 5; ++b) {
    e.theta_draws.insert(e.theta_draws.end(), {static_cast<double>(b), 1.0});
    e.objective_values.push_back(0.0);
    e.converged_flags.push_back(true);
  }
  const std::vector<double> grid{0.0, 2.0};
  const auto s = summarize(e, LinearFamily(), grid);
  CHECK(s.theta_mean[0] == doctest::Approx(2.0));
  CHECK(s.theta_sd[0] == doctest::Approx(std::sqrt(2.5)));
  CHECK(s.curve_median[1] == doctest::Approx(4.0));
  CHECK(s.curve_lo[0] == doctest::Approx(0.1));
}

TEST_CASE("bound terms are small when pseudo-samples are the truth") {
  Rng g(8);
  const std::size_t n = 200;
  const Dataset d = linear_data(n, 0.3, g);
  PseudoSampleSet ps;
  ps.n = n;
  ps.m = 1;
  ps.x_tilde = *d.x_latent;
  MEConfig me;
  me.sigma_N_true = 0.3;
  me.sigma_E_true = 0.3;
  const auto cf = make_centring_factory(d, make_family("linear"), me, ThetaPrior::isotropic(2));
  TruthSampler truth = [](std::size_t k, Rng& r) {
    std::vector<XY> out(k);
    for (auto& a : out) {
      a.x = r.normal();
      a.y = 1.0 + 2.0 * a.x + 0.3 * r.normal();
    }
    return out;
  };
  Rng r(9);
  const auto b = bound_terms(d, ps, cf, default_kernel(d), 400, truth, 1e-4, r);
  CHECK(b.pseudo_joint_mmd < 0.15);
  CHECK(b.prior_joint_mmd > b.pseudo_joint_mmd);
  CHECK(b.weight_prior + b.weight_pseudo == doctest::Approx(1.0));
}
