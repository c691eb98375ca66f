#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nplme/rng.hpp"

namespace nplme {

/// Parametric regression function g(x, theta) with first derivatives.
class RegressionFamily {
 public:
  virtual ~RegressionFamily() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim_theta() const = 0;
  virtual double g(double x, std::span<const double> theta) const = 0;
  /// Writes dg/dtheta into `out` (length dim_theta) and returns g.
  virtual double g_and_dtheta(double x, std::span<const double> theta,
                              std::span<double> out) const = 0;
  virtual double dg_dx(double x, std::span<const double> theta) const = 0;

  std::vector<double> dg_dtheta(double x, std::span<const double> theta) const;
  /// Whether x must be strictly positive (log-quadratic).
  virtual bool positive_domain() const { return false; }
};

using FamilyPtr = std::shared_ptr<const RegressionFamily>;

/// theta1 / (1 + exp(-theta2 (x - theta3))), exponent clamped to [-500, 500].
class SigmoidFamily final : public RegressionFamily {
 public:
  std::string name() const override { return "sigmoid"; }
  std::size_t dim_theta() const override { return 3; }
  double g(double x, std::span<const double> theta) const override;
  double g_and_dtheta(double x, std::span<const double> theta,
                      std::span<double> out) const override;
  double dg_dx(double x, std::span<const double> theta) const override;
};

/// theta0 + theta1 x.
class LinearFamily final : public RegressionFamily {
 public:
  std::string name() const override { return "linear"; }
  std::size_t dim_theta() const override { return 2; }
  double g(double x, std::span<const double> theta) const override;
  double g_and_dtheta(double x, std::span<const double> theta,
                      std::span<double> out) const override;
  double dg_dx(double x, std::span<const double> theta) const override;
};

/// theta x (no intercept).
class ProportionalFamily final : public RegressionFamily {
 public:
  std::string name() const override { return "proportional"; }
  std::size_t dim_theta() const override { return 1; }
  double g(double x, std::span<const double> theta) const override;
  double g_and_dtheta(double x, std::span<const double> theta,
                      std::span<double> out) const override;
  double dg_dx(double x, std::span<const double> theta) const override;
};

/// theta0 + theta1 x + theta2 x^2.
class QuadraticFamily final : public RegressionFamily {
 public:
  std::string name() const override { return "quadratic"; }
  std::size_t dim_theta() const override { return 3; }
  double g(double x, std::span<const double> theta) const override;
  double g_and_dtheta(double x, std::span<const double> theta,
                      std::span<double> out) const override;
  double dg_dx(double x, std::span<const double> theta) const override;
};

/// theta0 + theta1 log x + theta2 (log x)^2, for x > 0.
class LogQuadraticFamily final : public RegressionFamily {
 public:
  std::string name() const override { return "log_quadratic"; }
  std::size_t dim_theta() const override { return 3; }
  double g(double x, std::span<const double> theta) const override;
  double g_and_dtheta(double x, std::span<const double> theta,
                      std::span<double> out) const override;
  double dg_dx(double x, std::span<const double> theta) const override;
  bool positive_domain() const override { return true; }
};

/// Looks up a family by name: sigmoid, linear, proportional, quadratic, log_quadratic.
FamilyPtr make_family(const std::string& name);

double sigmoid_g(double x, std::span<const double> theta);

enum class MEKind { classical, berkson };

std::string to_string(MEKind kind);
MEKind me_kind_from_string(const std::string& s);

/// True and working measurement-error / outcome-noise scales.
struct MEConfig {
  MEKind kind = MEKind::classical;
  double sigma_N_true = 1.0;
  double tau_N = 1.0;
  double sigma_E_true = 0.5;
  double tau_E = 1.0;
  double eps = 0.0;    // outcome contamination fraction
  double eta_E = 1.0;  // contamination scale inflation

  double working_sigma_N() const { return tau_N * sigma_N_true; }
  double working_sigma_E() const { return tau_E * sigma_E_true; }
  void validate() const;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string source;
};

/// Observed (w, y) pairs, optionally with the latent covariate.
struct Dataset {
  std::vector<double> w;
  std::vector<double> y;
  std::optional<std::vector<double>> x_latent;
  std::optional<std::vector<int>> group_ids;
  Provenance meta;

  std::size_t size() const noexcept { return w.size(); }
  bool has_latent() const noexcept { return x_latent.has_value(); }
  void validate() const;
  /// Rows in `idx`, in that order.
  Dataset subset(std::span<const std::size_t> idx) const;
};

/// Gaussian law N(mean, sd^2) on the latent covariate.
struct GaussianLaw {
  double mean = 0.0;
  double sd = 1.0;
};

/// Sampling-only centring measure Q_{X,i}.
struct CentringMeasure {
  std::function<double(Rng&)> sampler;
  std::string description;

  double operator()(Rng& rng) const { return sampler(rng); }
};

struct XY {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const XY&) const = default;
};

using JointSampler = std::function<XY(Rng&)>;

/// Independent Gaussian prior on theta, N(mean_k, sd_k^2) per coordinate.
struct ThetaPrior {
  std::vector<double> mean;
  std::vector<double> sd;

  static ThetaPrior isotropic(std::size_t dim, double sd = 10.0, double mean = 0.0);
  std::vector<double> sample(Rng& rng) const;
  /// log f(theta) up to a constant; adds d/dtheta into `grad` when non-empty.
  double log_density(std::span<const double> theta, std::span<double> grad = {}) const;
  std::size_t dim() const noexcept { return mean.size(); }
};

CentringMeasure centring_berkson(double w, double working_sigma_N);
CentringMeasure centring_classical(double w, double working_sigma_N, const GaussianLaw& prior_x);
/// Moments of N(mu, s^2) after conditioning on W = w under W = X + N(0, sigma_N^2).
GaussianLaw classical_conditional(double w, double working_sigma_N, const GaussianLaw& prior_x);

/// Draws x ~ cx, theta ~ prior, y = g(x, theta) + N(0, sigma_E^2).
JointSampler centring_joint(CentringMeasure cx, ThetaPrior theta_prior, FamilyPtr model,
                            double working_sigma_E);

/// Moment-matched working law of X from the observed covariates: mean of w,
/// variance var(w) - sigma_N^2 clamped below at 10% of var(w).
GaussianLaw working_prior_x(std::span<const double> w, double working_sigma_N);

enum class Design { berkson_grouped, classical_iid };

std::string to_string(Design d);
Design design_from_string(const std::string& s);

struct DesignConfig {
  Design design = Design::classical_iid;
  std::size_t group_size = 3;
  double w_variance = 2.0;  // Berkson group values ~ N(0, w_variance)
  double x_variance = 3.0;  // classical latent X ~ N(0, x_variance)
};

/// One outcome-noise draw from (1 - eps) N(0, s^2) + eps N(0, eta^2 s^2).
double draw_outcome_noise(const MEConfig& me, Rng& rng);

Dataset simulate_dgp(const RegressionFamily& model, std::span<const double> theta_true,
                     const MEConfig& me, std::size_t n, const DesignConfig& design, Rng& rng);

struct BinnedValues {
  std::vector<double> w;
  std::vector<double> edges;  // n_bins + 1
  std::vector<int> bin;       // bin index per value
};

/// Replaces every value by the mean of its equal-width bin.
BinnedValues bin_means_transform(std::span<const double> values, std::size_t n_bins);

/// Raises floor(r_y * n) uniformly chosen responses by shift_sds * sd(y).
std::vector<double> contaminate_responses(std::span<const double> y, double r_y, double shift_sds,
                                          Rng& rng, std::vector<std::size_t>* chosen = nullptr);

double sample_mean(std::span<const double> v);
double sample_variance(std::span<const double> v);  // n - 1 denominator
double sample_median(std::vector<double> v);

}  // namespace nplme
