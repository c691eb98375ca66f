#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "doctest.h"
#include "nplme/baselines.hpp"
#include "nplme/error.hpp"

using namespace nplme;

TEST_CASE("NLS fits noiseless sigmoid data exactly") {
  const std::vector<double> th{5.0, 1.0, 0.5};
  std::vector<double> w, y;
  for (int i = 0; i < 50; ++i) {
    w.push_back(-4.0 + 0.16 * i);
    y.push_back(sigmoid_g(w.back(), th));
  }
  const auto r = nls_fit(w, y, SigmoidFamily());
  CHECK(r.converged);
  CHECK(r.residual_ss < 1e-16);
  for (int k = 0; k < 3; ++k) CHECK(r.theta_hat[k] == doctest::Approx(th[k]).epsilon(1e-6));
  for (std::size_t t = 1; t < r.trace.size(); ++t) CHECK(r.trace[t] <= r.trace[t - 1]);
}

TEST_CASE("NLS on a quadratic equals the normal equations") {
  Rng g(1);
  const int n = 40;
  std::vector<double> w(n), y(n);
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd Y(n);
  for (int i = 0; i < n; ++i) {
    w[i] = g.normal();
    y[i] = 1.0 - w[i] + 0.5 * w[i] * w[i] + 0.2 * g.normal();
    X(i, 0) = 1.0;
    X(i, 1) = w[i];
    X(i, 2) = w[i] * w[i];
    Y(i) = y[i];
  }
  const Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
  const auto r = nls_fit(w, y, QuadraticFamily(), std::vector<double>{0.0, 0.0, 0.0});
  for (int k = 0; k < 3; ++k) CHECK(r.theta_hat[k] == doctest::Approx(beta(k)).epsilon(1e-8));
}

TEST_CASE("quadratic extrapolation is exact for quadratics") {
  const std::vector<double> l{0.0, 0.5, 1.0, 1.5, 2.0};
  std::vector<double> v;
  for (double x : l) v.push_back(2.0 - 3.0 * x + 0.7 * x * x);
  CHECK(quadratic_extrapolate(l, v) == doctest::Approx(2.0 + 3.0 + 0.7).epsilon(1e-12));
}

TEST_CASE("SIMEX with no assumed error is NLS") {
  Rng g(2);
  std::vector<double> w(100), y(100);
  for (int i = 0; i < 100; ++i) {
    w[i] = g.normal();
    y[i] = sigmoid_g(w[i], std::vector<double>{5.0, 1.0, 0.0}) + 0.3 * g.normal();
  }
  SimexConfig cfg;
  cfg.sigma_N_assumed = 0.0;
  cfg.B_sim = 5;
  Rng r(3);
  const auto s = simex_fit(w, y, SigmoidFamily(), cfg, r);
  const auto n = nls_fit(w, y, SigmoidFamily());
  for (int k = 0; k < 3; ++k) CHECK(std::abs(s.theta_hat[k] - n.theta_hat[k]) < 1e-6);
  std::ostringstream os;
  write_simex_trace_csv(os, s);
  CHECK(os.str().find("lambda") != std::string::npos);
}

TEST_CASE("SIMEX undoes linear attenuation") {
  Rng g(4);
  const int n = 5000;
  std::vector<double> w(n), y(n);
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    w[i] = x + 0.5 * g.normal();
    y[i] = 2.0 * x + 0.1 * g.normal();
  }
  const auto naive = nls_fit(w, y, ProportionalFamily());
  CHECK(naive.theta_hat[0] == doctest::Approx(1.6).epsilon(0.05));
  SimexConfig cfg;
  cfg.sigma_N_assumed = 0.5;
  cfg.B_sim = 20;
  Rng r(5);
  const auto s = simex_fit(w, y, ProportionalFamily(), cfg, r);
  CHECK(s.theta_hat[0] == doctest::Approx(2.0).epsilon(0.08));
}

TEST_CASE("HMC baseline on a well-identified linear model") {
  Rng g(6);
  Dataset d;
  for (int i = 0; i < 60; ++i) {
    const double w = 2.0 * g.normal();
    d.w.push_back(w);
    d.y.push_back(1.0 + 2.0 * (w + 0.2 * g.normal()) + 0.3 * g.normal());
  }
  MEConfig me;
  me.kind = MEKind::berkson;
  me.sigma_N_true = 0.2;
  me.sigma_E_true = 0.3;
  HMCConfig hc;
  hc.n_chains = 2;
  hc.warmup = 300;
  hc.iters = 300;
  Rng r(7);
  const auto res = hmc_posterior_mean(d, make_family("linear"), me, ThetaPrior::isotropic(2), hc, r);
  CHECK(res.theta_hat[0] == doctest::Approx(1.0).epsilon(0.15));
  CHECK(res.theta_hat[1] == doctest::Approx(2.0).epsilon(0.05));
  CHECK_FALSE(res.rhat_warning);
}
