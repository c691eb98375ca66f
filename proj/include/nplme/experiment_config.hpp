#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nplme/baselines.hpp"
#include "nplme/estimator.hpp"
#include "nplme/hmc.hpp"
#include "nplme/models.hpp"

#include "json.hpp"

namespace nplme {

struct DgpBlock {
  std::string model = "sigmoid";
  std::vector<double> theta_true{5.0, 1.0, 0.02};
  MEConfig me;
  std::size_t n = 300;
  DesignConfig design;
};

struct ContaminationBlock {
  std::vector<double> r_grid{0.05, 0.10, 0.15, 0.20, 0.25};
  double shift_sds = 6.0;
  std::size_t n_bins = 15;   // 0 keeps w as given
  std::string model = "quadratic";
  double sigma_N = -1.0;     // negative: pooled within-bin sd of x
  double sigma_E = -1.0;     // negative: residual sd of the clean NLS fit
  std::vector<std::string> methods{"npl_hmc", "nls", "simex"};
};

struct StabilityBlock {
  std::vector<double> rho_grid{0.0, 0.4, 0.8};
  std::size_t subsamples = 20;
  double subsample_frac = 0.8;
  std::size_t grid_points = 100;
  std::size_t hist_bins = 20;
  std::vector<std::string> methods{"npl_hmc", "simex"};
};

struct DiagnoseBlock {
  double sigma_N = 1.5;
  double eps = 0.1;
  double eta_E = 9.0;
  double tau_N = 0.7;
  std::size_t warmup = 5000;
  std::size_t iters = 5000;
};

struct TwoSampleBlock {
  std::string regime_a = "A";
  std::string regime_b = "C";
  std::size_t n = 100;
  double sigma_N = 1.5;
  std::size_t n_perm = 1000;
  std::size_t n_boot = 200;
};

/// Experiment document. Every key is optional; unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  bool seed_given = false;  // seed key present in the document
  std::string output_dir = "out";
  std::size_t replications = 20;
  std::size_t threads = 1;
  std::vector<double> me_scale_grid{1.0, 2.0, 3.0};
  DgpBlock dgp;
  std::vector<std::string> methods{"npl_hmc", "nls", "hmc"};
  NPLConfig npl;
  HMCConfig hmc;
  SimexConfig simex;
  ContaminationBlock contamination;
  StabilityBlock stability;
  DiagnoseBlock diagnose;
  TwoSampleBlock two_sample;
};

inline const std::vector<std::string> kMethodNames{"npl_hmc", "npl_nopseudo", "nls", "simex", "hmc", "oracle"};

/// Throws ConfigError naming the JSON path of the first offending value.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::string& path);

/// Canonical form with every default filled in.
nlohmann::json to_json(const ExperimentConfig& cfg);

/// 16 hex digits of FNV-1a over the canonical dump.
std::string config_hash(const ExperimentConfig& cfg);

/// Comma-separated method list, validated against kMethodNames.
std::vector<std::string> parse_method_list(const std::string& list);

}  // namespace nplme
