#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "nplme/hmc.hpp"
#include "nplme/models.hpp"
#include "nplme/rng.hpp"

namespace nplme {

struct NLSSettings {
  std::size_t max_iters = 500;
  double grad_tol = 1e-8;
  double initial_damping = 1e-3;
};

struct NLSResult {
  std::vector<double> theta_hat;
  double residual_ss = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // residual_ss after each accepted step
};

/// Starting point used when none is supplied. Sigmoid: (max y, 1, median w);
/// families linear in theta: their least-squares solution.
std::vector<double> default_nls_init(std::span<const double> w, std::span<const double> y,
                                     const RegressionFamily& model);

/// Levenberg-Marquardt on sum (y_i - g(w_i, theta))^2.
NLSResult nls_fit(std::span<const double> w, std::span<const double> y, const RegressionFamily& model,
                  std::span<const double> theta_init, const NLSSettings& settings = {});
NLSResult nls_fit(std::span<const double> w, std::span<const double> y, const RegressionFamily& model);

struct SimexConfig {
  std::vector<double> lambda_grid{0.0, 0.5, 1.0, 1.5, 2.0};
  std::size_t B_sim = 50;
  double sigma_N_assumed = 1.0;

  void validate() const;
};

struct SimexTraceRow {
  double lambda = 0.0;
  std::size_t sim = 0;
  std::vector<double> theta;
  bool converged = false;
};

struct SimexResult {
  std::vector<double> theta_hat;
  std::vector<std::vector<double>> theta_by_lambda;  // mean over converged sims
  std::vector<SimexTraceRow> trace;
};

/// SIMEX with variance-additive noise w + sqrt(lambda) sigma Z and a
/// per-coordinate quadratic extrapolant evaluated at lambda = -1.
SimexResult simex_fit(std::span<const double> w, std::span<const double> y, const RegressionFamily& model,
                      const SimexConfig& cfg, Rng& rng);

/// Quadratic least-squares fit of values over lambdas, evaluated at `at`.
double quadratic_extrapolate(std::span<const double> lambdas, std::span<const double> values,
                             double at = -1.0);

void write_simex_trace_csv(std::ostream& out, const SimexResult& r);

struct HMCBaselineResult {
  std::vector<double> theta_hat;
  Diagnostics diagnostics;
  bool rhat_warning = false;  // some theta coordinate has R-hat > 1.1
  HMCResult run;
  std::vector<std::string> names;
};

/// Initial (theta, x) positions: NLS estimate with N(0, 0.1^2) jitter per
/// chain, x at w. Given `target`, the default start replaces the NLS estimate
/// when it has the higher log density at x = w.
std::vector<std::vector<double>> default_hmc_inits(const Dataset& data, const RegressionFamily& model,
                                                   std::size_t n_chains, Rng& rng,
                                                   const TargetLogDensity* target = nullptr);

/// Post-warmup mean of the theta block of the joint posterior.
HMCBaselineResult hmc_posterior_mean(const Dataset& data, FamilyPtr model, const MEConfig& me,
                                     const ThetaPrior& theta_prior, HMCConfig hmc_config, Rng& rng);

}  // namespace nplme
