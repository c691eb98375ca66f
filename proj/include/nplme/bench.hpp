#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nplme/experiment_config.hpp"
#include "nplme/kernels.hpp"
#include "nplme/pseudo_sampling.hpp"

#include "json.hpp"

namespace nplme {

struct MethodEstimate {
  std::string method;
  bool ok = false;
  std::vector<double> theta;
  std::string error;
};

/// Fits each requested method on one dataset. Every method draws from its own
/// stream of `rng`, so a method's estimate does not depend on which others
/// run. npl_hmc and hmc share one posterior run when both are requested
/// (regimes B and C). With a zero working sigma_N the latent draws are the
/// observed covariates and the hmc method is reported as failed.
std::vector<MethodEstimate> estimate_methods(const Dataset& data, FamilyPtr model, const MEConfig& me,
                                             const ExperimentConfig& cfg, const std::vector<std::string>& methods,
                                             Rng& rng);

struct RmseReplication {
  std::string method;
  double me_scale = 0.0;
  std::size_t replication = 0;
  bool ok = false;
  double theta_error = 0.0;  // Euclidean norm of theta_hat - theta_true
  double y_error = 0.0;      // RMS of g(x, theta_hat) - g(x, theta_true) over the dataset
  std::string error;
};

struct RmseRow {
  std::string method;
  double me_scale = 0.0;
  double theta_rmse = 0.0;
  double y_rmse = 0.0;
  std::size_t count = 0;
  std::size_t failures = 0;
};

struct RmseTable {
  std::vector<RmseRow> rows;                // ordered by (me_scale, method)
  std::vector<RmseReplication> replications;  // ordered by (me_scale, replication, method)

  const RmseRow* find(const std::string& method, double me_scale) const;
};

/// Replication sweep over cfg.me_scale_grid. Replication r at scale index s
/// draws its dataset from Rng::stream(cfg.seed, {s, r, 0}).
RmseTable run_bench(const ExperimentConfig& cfg,
                    const std::function<void(const std::string&)>& progress = {});

Dataset simulate_from_config(const ExperimentConfig& cfg, double sigma_N, std::size_t n, Rng& rng);

struct ContaminationRow {
  double r_y = 0.0;
  std::string method;
  bool ok = false;
  double theta_rmse = 0.0;  // RMS over coordinates of theta_hat - theta_oracle
  double y_rmse = 0.0;      // RMS of y_clean - g(x, theta_hat)
  std::size_t n_contaminated = 0;
  std::vector<double> theta;
  std::string error;
};

struct ContaminationReport {
  std::vector<double> oracle_theta;
  double sigma_N = 0.0;
  double sigma_E = 0.0;
  std::vector<ContaminationRow> rows;
};

/// Standardises x (or w) and y, bins the covariate when requested, shifts
/// floor(r n) responses per r and fits the configured methods.
ContaminationReport run_contamination_protocol(const Dataset& data, const std::vector<double>& r_grid,
                                               const ExperimentConfig& cfg);

struct StabilityMethodReport {
  std::string method;
  double S_hat = 0.0;
  std::vector<std::vector<double>> within_rho_sd;  // rho x parameter
  std::vector<double> across_rho_var;              // per parameter
  std::vector<std::vector<double>> full_theta;     // rho x parameter, full-data fits
  std::size_t failures = 0;
};

struct StabilityReport {
  std::vector<double> rho_grid;
  std::vector<StabilityMethodReport> methods;
};

/// Weighted curve deviation across fits: sqrt(mean over fits of
/// sum_x w(x) (g(x) - mean g(x))^2) with histogram weights of `w_obs`.
double curve_deviation(const RegressionFamily& model, const std::vector<std::vector<double>>& thetas,
                       std::span<const double> w_obs, std::size_t grid_points, std::size_t hist_bins);

/// Histogram weights of `w_obs` evaluated at `grid`, normalised to sum to one.
std::vector<double> histogram_weights(std::span<const double> w_obs, std::span<const double> grid,
                                      std::size_t bins);

/// Log-quadratic curves under classical error on log w with
/// sigma_N^2 = rho * sigma_X^2, refitted on subsamples.
StabilityReport run_stability_protocol(const Dataset& data, const std::vector<double>& rho_grid,
                                       std::size_t n_subsamples, double subsample_frac,
                                       const ExperimentConfig& cfg);

struct RegimeComparison {
  TwoSampleTestResult test;
  PseudoSampleSet a;
  PseudoSampleSet b;
};

/// Two-sample MMD test between the joint laws {(x_tilde_ij, y_i)} of two
/// pseudo-sampling regimes, coordinates standardised with pooled moments.
RegimeComparison compare_pseudo_regimes(const Dataset& data, FamilyPtr model, const MEConfig& me,
                                        const ThetaPrior& prior, std::size_t m, PseudoRegime regime_a,
                                        PseudoRegime regime_b, const HMCConfig& hmc, std::size_t n_perm,
                                        std::size_t n_boot, Rng& rng);

/// Working model of the diagnostics and regime-comparison presets.
MEConfig preset_me(const ExperimentConfig& cfg, double sigma_N);

struct DiagnoseReport {
  std::vector<std::string> names;
  std::vector<double> mean, sd, r_hat, ess_bulk, ess_tail;
  std::size_t divergences = 0;
  std::vector<double> accept_rate;
};

DiagnoseReport run_diagnose(const ExperimentConfig& cfg);

std::string csv_field(const std::string& s);
std::string output_header(const ExperimentConfig& cfg);  // "# seed=...,config_hash=..."

void write_rmse_csv(std::ostream& out, const RmseTable& t, const ExperimentConfig& cfg);
void write_rmse_replications_csv(std::ostream& out, const RmseTable& t, const ExperimentConfig& cfg);
void write_contamination_csv(std::ostream& out, const ContaminationReport& r, const ExperimentConfig& cfg);
void write_diagnostics_csv(std::ostream& out, const DiagnoseReport& r, const ExperimentConfig& cfg);
nlohmann::json stability_json(const StabilityReport& r, const ExperimentConfig& cfg);

}  // namespace nplme
