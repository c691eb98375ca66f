#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nplme/dp.hpp"
#include "nplme/hmc.hpp"
#include "nplme/kernels.hpp"
#include "nplme/mmd_objective.hpp"
#include "nplme/models.hpp"
#include "nplme/pseudo_sampling.hpp"
#include "nplme/rng.hpp"

namespace nplme {

/// Adam with best-iterate tracking. After `patience` iterations without an
/// improvement larger than `tol` the step size is halved and the iterate is
/// reset to the best one. The run counts as converged when a further halving
/// would exceed `max_halvings`.
struct AdamSettings {
  double step_size = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t iters = 300;
  double tol = 1e-10;
  std::size_t patience = 5;
  std::size_t max_halvings = 4;

  void validate() const;
};

struct NPLConfig {
  double c = 1e-4;
  std::size_t m = 3;
  std::size_t truncation = 100;
  std::size_t B_boot = 200;
  bool pseudo = true;  // false: raw (w, y) atoms with m = 1
  PseudoRegime regime = PseudoRegime::C_spaced;
  double prune_threshold = 1e-12;  // per-observation DP weights below this are dropped
  double theta_prior_sd = 10.0;
  AdamSettings optimizer;
  HMCConfig hmc;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  /// m actually used: 1 for the no-pseudo variant.
  std::size_t effective_m() const noexcept { return pseudo ? m : 1; }
  void validate() const;
};

/// Centring measures Q_{X,i} and the joint Q_{XY,i} built on them.
struct CentringFactory {
  std::function<CentringMeasure(std::size_t i)> x_measure;
  ThetaPrior theta_prior;
  FamilyPtr model;
  double working_sigma_E = 0.0;

  JointSampler joint(std::size_t i) const;
};

/// Berkson: N(w_i, sigma_N^2). Classical: the conditional law of X given
/// W = w_i under the moment-matched working law of X.
CentringFactory make_centring_factory(const Dataset& data, FamilyPtr model, const MEConfig& me,
                                      const ThetaPrior& theta_prior);

struct ObservationSpecs {
  DPPosteriorSpec<XY> joint;
  DPPosteriorSpec<double> marginal;
};

std::vector<ObservationSpecs> build_dp_specs(const Dataset& data, const PseudoSampleSet* pseudo,
                                             const CentringFactory& centring, const NPLConfig& config);

struct ReplicateResult {
  std::vector<double> theta;
  double objective = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Adam on an objective returning (value, gradient), keeping the best iterate.
ReplicateResult minimize_adam(const std::function<ObjectiveValue(std::span<const double>)>& f,
                              std::vector<double> theta0, const AdamSettings& opt);

/// One posterior-bootstrap replicate: DP draws per observation sharing
/// weights and prior x-atoms between the joint and marginal, pooled with
/// weight 1/n, frozen model noise, Adam from `theta_init`.
ReplicateResult fit_one_replicate(const std::vector<ObservationSpecs>& specs, FamilyPtr model,
                                  double working_sigma_E, const ProductKernelSpec& kernel,
                                  const AdamSettings& opt, std::span<const double> theta_init, Rng& rng,
                                  double prune_threshold = 1e-12);

struct BootstrapEnsemble {
  std::size_t dim_theta = 0;
  std::vector<double> theta_draws;  // B x dim_theta
  std::vector<double> objective_values;
  std::vector<bool> converged_flags;
  std::string config_hash;
  ProductKernelSpec kernel;
  std::vector<double> theta_init_center;

  std::size_t size() const noexcept { return objective_values.size(); }
  std::span<const double> theta(std::size_t b) const { return {theta_draws.data() + b * dim_theta, dim_theta}; }
  std::vector<double> mean() const;
};

/// Gaussian product kernel with median-heuristic bandwidths of w and y.
ProductKernelSpec default_kernel(const Dataset& data);

/// Runs pseudo-sampling once (unless `pseudo` is supplied or config.pseudo is
/// false), then B_boot replicates on split streams. Replicates start near the
/// minimiser of the objective on the pooled pseudo-sample measure, searched
/// from NLS on (w, y), the default start and, with pseudo-samples, NLS on the
/// pseudo covariates and the HMC posterior mean. Results do not depend on
/// config.threads.
BootstrapEnsemble fit(const Dataset& data, FamilyPtr model, const MEConfig& me, const NPLConfig& config,
                      Rng& rng, const PseudoSampleSet* pseudo = nullptr);

/// MMD fit on the latent (x, y) pairs with no DP layer.
ReplicateResult oracle_fit(const Dataset& data, FamilyPtr model, double working_sigma_E,
                           const ProductKernelSpec& kernel, const AdamSettings& opt, Rng& rng,
                           std::optional<std::vector<double>> theta_init = std::nullopt);

struct EnsembleSummary {
  std::vector<double> theta_mean;
  std::vector<double> theta_sd;
  std::vector<double> x_grid;
  std::vector<double> curve_median;
  std::vector<double> curve_lo;  // 2.5%
  std::vector<double> curve_hi;  // 97.5%
};

/// Linear-interpolation quantile of unsorted values.
double quantile(std::vector<double> values, double q);

EnsembleSummary summarize(const BootstrapEnsemble& ensemble, const RegressionFamily& model,
                          std::span<const double> x_grid);

struct BoundTerms {
  double pseudo_joint_mmd = 0.0;
  double pseudo_marginal_mmd = 0.0;
  double prior_joint_mmd = 0.0;
  double prior_marginal_mmd = 0.0;
  double weight_prior = 0.0;   // c / (c + m)
  double weight_pseudo = 0.0;  // m / (c + m)
};

/// Draws `n` (x, y) pairs from the true data-generating process.
using TruthSampler = std::function<std::vector<XY>(std::size_t n, Rng& rng)>;

/// MMDs (square roots of clamped U-statistics) between the pseudo-sample
/// joint law {(x_tilde_ij, y_i)} and a fresh truth sample, and between pooled
/// centring draws and the truth.
BoundTerms bound_terms(const Dataset& data, const PseudoSampleSet& pseudo, const CentringFactory& centring,
                       const ProductKernelSpec& kernel, std::size_t n_oracle, const TruthSampler& truth,
                       double c, Rng& rng);

void write_ensemble_csv(std::ostream& out, const BootstrapEnsemble& e, std::uint64_t seed);

}  // namespace nplme
