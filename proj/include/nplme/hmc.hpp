#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nplme/models.hpp"
#include "nplme/rng.hpp"

namespace nplme {

/// Log-density over a flat position vector. For the measurement-error
/// posterior the layout is [theta (p), x_1..x_n].
struct TargetLogDensity {
  std::size_t dim = 0;
  /// Returns log p(q) and writes its gradient into `grad` (length dim).
  std::function<double(std::span<const double> q, std::span<double> grad)> log_density_grad;
  std::vector<std::string> names;

  double log_density(std::span<const double> q) const;
};

struct LeapfrogResult {
  std::vector<double> position;
  std::vector<double> momentum;
  double log_density = 0.0;
  bool finite = true;  // false flags a divergence
};

/// `n_steps` leapfrog steps with diagonal inverse mass `inv_mass` (unit when
/// empty). `grad_fn` writes the gradient of the log-density and returns it.
LeapfrogResult leapfrog(std::span<const double> position, std::span<const double> momentum,
                        const std::function<double(std::span<const double>, std::span<double>)>& grad_fn,
                        double step_size, std::size_t n_steps,
                        std::span<const double> inv_mass = {});

struct HMCConfig {
  std::size_t n_chains = 4;
  std::size_t warmup = 1000;
  std::size_t iters = 1000;
  double step_size = 0.1;  // initial value, dual-averaged during warmup
  std::size_t n_leapfrog = 32;
  double max_divergence_energy = 1000.0;
  double target_accept = 0.8;
  double step_jitter = 0.1;  // uniform +-10% step-size jitter after warmup
  std::uint64_t seed = 1;

  void validate() const;
};

struct ChainOutput {
  std::size_t dim = 0;
  std::vector<double> draws;  // iters x dim, row-major, post-warmup only
  std::size_t divergence_count = 0;
  double accept_rate = 0.0;
  double step_size = 0.0;
  std::vector<double> inv_mass;

  std::size_t iters() const noexcept { return dim == 0 ? 0 : draws.size() / dim; }
  double at(std::size_t iter, std::size_t param) const { return draws[iter * dim + param]; }
  std::span<const double> row(std::size_t iter) const { return {draws.data() + iter * dim, dim}; }
};

struct Diagnostics {
  std::vector<double> r_hat;
  std::vector<double> ess_bulk;
  std::vector<double> ess_tail;
  std::size_t divergences = 0;
};

struct HMCResult {
  std::vector<ChainOutput> chains;
  Diagnostics diagnostics;
};

/// Draws of parameter `param` from every chain, chain-major.
std::vector<std::vector<double>> chain_columns(const std::vector<ChainOutput>& chains,
                                               std::size_t param);

/// Rank-normalised split-R-hat (max of bulk and folded) for one parameter.
double split_rhat(const std::vector<std::vector<double>>& chains);
/// Rank-normalised bulk effective sample size.
double ess_bulk(const std::vector<std::vector<double>>& chains);
/// Tail ESS: min over the 5% and 95% quantile indicators.
double ess_tail(const std::vector<std::vector<double>>& chains);

/// Diagnostics over the first `n_params` coordinates (all when 0).
Diagnostics compute_diagnostics(const std::vector<ChainOutput>& chains, std::size_t n_params = 0);

/// Runs `config.n_chains` independent chains. Chain c uses the stream
/// Rng::stream(config.seed, {c}) and starts from inits[c] (or inits[0], or a
/// uniform(-2, 2) draw when inits is empty). Diagnostics cover the first
/// `diag_params` coordinates (all when 0).
HMCResult run_hmc(const TargetLogDensity& target, const HMCConfig& config,
                  const std::vector<std::vector<double>>& inits = {},
                  std::size_t diag_params = 0);

/// Log posterior of (theta, x_1..x_n) under the working measurement-error model:
/// classical: -(w - x)^2/(2 sN^2) - (y - g)^2/(2 sE^2) - (x - mu)^2/(2 sX^2);
/// Berkson:   -(x - w)^2/(2 sN^2) - (y - g)^2/(2 sE^2); plus log f(theta).
/// `prior_x` is required for classical error (defaults to working_prior_x).
TargetLogDensity joint_neg_log_posterior(const Dataset& data, FamilyPtr model, const MEConfig& me,
                                         const ThetaPrior& theta_prior,
                                         std::optional<GaussianLaw> prior_x = std::nullopt);

/// Writes chain,iter,param_name,value rows.
void write_draws_csv(std::ostream& out, const std::vector<ChainOutput>& chains,
                     const std::vector<std::string>& names);

}  // namespace nplme
