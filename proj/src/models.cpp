#include "nplme/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nplme/error.hpp"

namespace nplme {

namespace {

constexpr double kExpClamp = 500.0;

void require_theta(std::span<const double> theta, std::size_t dim, const char* family) {
  if (theta.size() != dim)
    throw InvalidInput(std::string(family) + ": expected theta of length " + std::to_string(dim));
}

}  // namespace

std::vector<double> RegressionFamily::dg_dtheta(double x, std::span<const double> theta) const {
  std::vector<double> out(dim_theta());
  g_and_dtheta(x, theta, out);
  return out;
}

// sigmoid

double SigmoidFamily::g(double x, std::span<const double> theta) const {
  require_theta(theta, 3, "sigmoid");
  return sigmoid_g(x, theta);
}

double sigmoid_g(double x, std::span<const double> theta) {
  const double z = std::clamp(theta[1] * (x - theta[2]), -kExpClamp, kExpClamp);
  return theta[0] / (1.0 + std::exp(-z));
}

double SigmoidFamily::g_and_dtheta(double x, std::span<const double> theta,
                                   std::span<double> out) const {
  require_theta(theta, 3, "sigmoid");
  const double z = std::clamp(theta[1] * (x - theta[2]), -kExpClamp, kExpClamp);
  const double e = std::exp(-z);
  const double s = 1.0 / (1.0 + e);
  const double ds = s * (e / (1.0 + e));
  out[0] = s;
  out[1] = theta[0] * ds * (x - theta[2]);
  out[2] = -theta[0] * ds * theta[1];
  return theta[0] * s;
}

double SigmoidFamily::dg_dx(double x, std::span<const double> theta) const {
  require_theta(theta, 3, "sigmoid");
  const double z = std::clamp(theta[1] * (x - theta[2]), -kExpClamp, kExpClamp);
  const double e = std::exp(-z);
  const double s = 1.0 / (1.0 + e);
  return theta[0] * s * (e / (1.0 + e)) * theta[1];
}

// linear

double LinearFamily::g(double x, std::span<const double> theta) const {
  require_theta(theta, 2, "linear");
  return theta[0] + theta[1] * x;
}

double LinearFamily::g_and_dtheta(double x, std::span<const double> theta,
                                  std::span<double> out) const {
  require_theta(theta, 2, "linear");
  out[0] = 1.0;
  out[1] = x;
  return theta[0] + theta[1] * x;
}

double LinearFamily::dg_dx(double, std::span<const double> theta) const {
  require_theta(theta, 2, "linear");
  return theta[1];
}

// proportional

double ProportionalFamily::g(double x, std::span<const double> theta) const {
  require_theta(theta, 1, "proportional");
  return theta[0] * x;
}

double ProportionalFamily::g_and_dtheta(double x, std::span<const double> theta,
                                        std::span<double> out) const {
  require_theta(theta, 1, "proportional");
  out[0] = x;
  return theta[0] * x;
}

double ProportionalFamily::dg_dx(double, std::span<const double> theta) const {
  require_theta(theta, 1, "proportional");
  return theta[0];
}

// quadratic

double QuadraticFamily::g(double x, std::span<const double> theta) const {
  require_theta(theta, 3, "quadratic");
  return theta[0] + theta[1] * x + theta[2] * x * x;
}

double QuadraticFamily::g_and_dtheta(double x, std::span<const double> theta,
                                     std::span<double> out) const {
  require_theta(theta, 3, "quadratic");
  out[0] = 1.0;
  out[1] = x;
  out[2] = x * x;
  return theta[0] + theta[1] * x + theta[2] * x * x;
}

double QuadraticFamily::dg_dx(double x, std::span<const double> theta) const {
  require_theta(theta, 3, "quadratic");
  return theta[1] + 2.0 * theta[2] * x;
}

// log-quadratic

double LogQuadraticFamily::g(double x, std::span<const double> theta) const {
  require_theta(theta, 3, "log_quadratic");
  if (!(x > 0.0)) throw InvalidInput("log_quadratic: x must be positive");
  const double l = std::log(x);
  return theta[0] + theta[1] * l + theta[2] * l * l;
}

double LogQuadraticFamily::g_and_dtheta(double x, std::span<const double> theta,
                                        std::span<double> out) const {
  require_theta(theta, 3, "log_quadratic");
  if (!(x > 0.0)) throw InvalidInput("log_quadratic: x must be positive");
  const double l = std::log(x);
  out[0] = 1.0;
  out[1] = l;
  out[2] = l * l;
  return theta[0] + theta[1] * l + theta[2] * l * l;
}

double LogQuadraticFamily::dg_dx(double x, std::span<const double> theta) const {
  require_theta(theta, 3, "log_quadratic");
  if (!(x > 0.0)) throw InvalidInput("log_quadratic: x must be positive");
  return (theta[1] + 2.0 * theta[2] * std::log(x)) / x;
}

FamilyPtr make_family(const std::string& name) {
  if (name == "sigmoid") return std::make_shared<SigmoidFamily>();
  if (name == "linear") return std::make_shared<LinearFamily>();
  if (name == "proportional") return std::make_shared<ProportionalFamily>();
  if (name == "quadratic") return std::make_shared<QuadraticFamily>();
  if (name == "log_quadratic") return std::make_shared<LogQuadraticFamily>();
  throw InvalidInput("unknown regression family '" + name + "'");
}

// measurement error configuration

std::string to_string(MEKind kind) { return kind == MEKind::classical ? "classical" : "berkson"; }

MEKind me_kind_from_string(const std::string& s) {
  if (s == "classical") return MEKind::classical;
  if (s == "berkson") return MEKind::berkson;
  throw InvalidInput("unknown measurement-error kind '" + s + "'");
}

void MEConfig::validate() const {
  auto nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
  if (!nonneg(sigma_N_true) || !nonneg(sigma_E_true))
    throw InvalidParameter("MEConfig: noise scales must be finite and nonnegative");
  if (!(tau_N > 0.0) || !(tau_E > 0.0))
    throw InvalidParameter("MEConfig: working scale multipliers must be positive");
  if (!(eps >= 0.0 && eps < 1.0)) throw InvalidParameter("MEConfig: eps must lie in [0, 1)");
  if (!(eta_E >= 1.0)) throw InvalidParameter("MEConfig: eta_E must be at least 1");
}

void Dataset::validate() const {
  if (w.size() != y.size()) throw InvalidInput("dataset: w and y differ in length");
  if (x_latent && x_latent->size() != w.size())
    throw InvalidInput("dataset: x_latent length differs from w");
  if (group_ids && group_ids->size() != w.size())
    throw InvalidInput("dataset: group length differs from w");
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out;
  out.meta = meta;
  out.w.reserve(idx.size());
  out.y.reserve(idx.size());
  for (auto i : idx) {
    out.w.push_back(w.at(i));
    out.y.push_back(y.at(i));
  }
  if (x_latent) {
    std::vector<double> xs;
    for (auto i : idx) xs.push_back((*x_latent)[i]);
    out.x_latent = std::move(xs);
  }
  if (group_ids) {
    std::vector<int> gs;
    for (auto i : idx) gs.push_back((*group_ids)[i]);
    out.group_ids = std::move(gs);
  }
  return out;
}

// priors and centring measures

ThetaPrior ThetaPrior::isotropic(std::size_t dim, double sd, double mean) {
  if (!(sd > 0.0)) throw InvalidParameter("theta prior sd must be positive");
  return {std::vector<double>(dim, mean), std::vector<double>(dim, sd)};
}

std::vector<double> ThetaPrior::sample(Rng& rng) const {
  std::vector<double> t(mean.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = rng.normal(mean[k], sd[k]);
  return t;
}

double ThetaPrior::log_density(std::span<const double> theta, std::span<double> grad) const {
  double lp = 0.0;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    const double z = (theta[k] - mean[k]) / sd[k];
    lp -= 0.5 * z * z;
    if (!grad.empty()) grad[k] -= z / sd[k];
  }
  return lp;
}

CentringMeasure centring_berkson(double w, double working_sigma_N) {
  if (!(working_sigma_N > 0.0)) throw InvalidParameter("centring_berkson: sigma_N must be positive");
  return {[w, working_sigma_N](Rng& rng) { return w + working_sigma_N * rng.normal(); },
          "berkson: w + N(0, sigma_N^2)"};
}

GaussianLaw classical_conditional(double w, double working_sigma_N, const GaussianLaw& prior_x) {
  if (!(prior_x.sd > 0.0)) throw InvalidParameter("classical centring: prior sd must be positive");
  if (!(working_sigma_N >= 0.0)) throw InvalidParameter("classical centring: sigma_N must be >= 0");
  const double vx = prior_x.sd * prior_x.sd;
  const double vn = working_sigma_N * working_sigma_N;
  const double mean = (vx * w + vn * prior_x.mean) / (vx + vn);
  const double var = vx * vn / (vx + vn);
  return {mean, std::sqrt(var)};
}

CentringMeasure centring_classical(double w, double working_sigma_N, const GaussianLaw& prior_x) {
  if (!(working_sigma_N >= 0.0))
    throw InvalidParameter("centring_classical: sigma_N must be nonnegative");
  const GaussianLaw post = classical_conditional(w, working_sigma_N, prior_x);
  return {[post](Rng& rng) { return post.mean + post.sd * rng.normal(); },
          "classical: Gaussian conjugate posterior of X given w"};
}

JointSampler centring_joint(CentringMeasure cx, ThetaPrior theta_prior, FamilyPtr model,
                            double working_sigma_E) {
  if (!model) throw InvalidInput("centring_joint: missing model");
  if (theta_prior.dim() != model->dim_theta())
    throw InvalidInput("centring_joint: prior dimension differs from model");
  if (!(working_sigma_E >= 0.0)) throw InvalidParameter("centring_joint: sigma_E must be >= 0");
  return [cx = std::move(cx), prior = std::move(theta_prior), model = std::move(model),
          working_sigma_E](Rng& rng) {
    const double x = cx(rng);
    const auto theta = prior.sample(rng);
    const double noise = working_sigma_E > 0.0 ? working_sigma_E * rng.normal() : 0.0;
    return XY{x, model->g(x, theta) + noise};
  };
}

GaussianLaw working_prior_x(std::span<const double> w, double working_sigma_N) {
  if (w.size() < 2) throw PreconditionError("working_prior_x: need at least 2 covariates");
  const double var_w = sample_variance(w);
  const double var_x = std::max(var_w - working_sigma_N * working_sigma_N, 0.1 * var_w);
  if (!(var_x > 0.0)) throw DegenerateSample("working_prior_x: covariates have zero variance");
  return {sample_mean(w), std::sqrt(var_x)};
}

// synthetic data

std::string to_string(Design d) {
  return d == Design::berkson_grouped ? "berkson_grouped" : "classical_iid";
}

Design design_from_string(const std::string& s) {
  if (s == "berkson_grouped") return Design::berkson_grouped;
  if (s == "classical_iid") return Design::classical_iid;
  throw InvalidInput("unknown design '" + s + "'");
}

double draw_outcome_noise(const MEConfig& me, Rng& rng) {
  const bool outlier = me.eps > 0.0 && rng.uniform() < me.eps;
  const double scale = outlier ? me.eta_E * me.sigma_E_true : me.sigma_E_true;
  return scale * rng.normal();
}

Dataset simulate_dgp(const RegressionFamily& model, std::span<const double> theta_true,
                     const MEConfig& me, std::size_t n, const DesignConfig& design, Rng& rng) {
  me.validate();
  if (theta_true.size() != model.dim_theta())
    throw InvalidInput("simulate_dgp: theta_true has the wrong length");
  if (n == 0) throw PreconditionError("simulate_dgp: n must be positive");

  Dataset d;
  d.meta.seed = rng.seed();
  d.meta.source = "simulate_dgp";
  d.w.resize(n);
  d.y.resize(n);
  std::vector<double> x(n);

  if (design.design == Design::berkson_grouped) {
    if (design.group_size == 0) throw PreconditionError("simulate_dgp: group size must be positive");
    // the last group is short when n is not a multiple of the group size
    const std::size_t groups = (n + design.group_size - 1) / design.group_size;
    const double sd_w = std::sqrt(design.w_variance);
    std::vector<int> gid(n);
    for (std::size_t g = 0; g < groups; ++g) {
      const double value = sd_w * rng.normal();
      for (std::size_t r = 0; r < design.group_size && g * design.group_size + r < n; ++r) {
        const std::size_t i = g * design.group_size + r;
        d.w[i] = value;
        gid[i] = static_cast<int>(g);
      }
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = d.w[i] + me.sigma_N_true * rng.normal();
    d.group_ids = std::move(gid);
  } else {
    const double sd_x = std::sqrt(design.x_variance);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = sd_x * rng.normal();
      d.w[i] = me.sigma_N_true > 0.0 ? x[i] + me.sigma_N_true * rng.normal() : x[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) d.y[i] = model.g(x[i], theta_true) + draw_outcome_noise(me, rng);
  d.x_latent = std::move(x);
  return d;
}

BinnedValues bin_means_transform(std::span<const double> values, std::size_t n_bins) {
  if (n_bins < 2) throw PreconditionError("bin_means_transform: need at least 2 bins");
  if (values.empty()) throw PreconditionError("bin_means_transform: no values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw DegenerateSample("bin_means_transform: all values are identical");

  BinnedValues out;
  const double width = (hi - lo) / static_cast<double>(n_bins);
  out.edges.resize(n_bins + 1);
  for (std::size_t b = 0; b <= n_bins; ++b) out.edges[b] = lo + width * static_cast<double>(b);
  out.edges.back() = hi;

  std::vector<double> sums(n_bins, 0.0);
  std::vector<std::size_t> counts(n_bins, 0);
  out.bin.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto b = static_cast<std::size_t>(std::floor((values[i] - lo) / width));
    b = std::min(b, n_bins - 1);
    out.bin[i] = static_cast<int>(b);
    sums[b] += values[i];
    ++counts[b];
  }
  out.w.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto b = static_cast<std::size_t>(out.bin[i]);
    out.w[i] = sums[b] / static_cast<double>(counts[b]);
  }
  return out;
}

std::vector<double> contaminate_responses(std::span<const double> y, double r_y, double shift_sds,
                                          Rng& rng, std::vector<std::size_t>* chosen) {
  if (!(r_y >= 0.0 && r_y < 1.0)) throw PreconditionError("contaminate_responses: r_Y must be in [0, 1)");
  std::vector<double> out(y.begin(), y.end());
  const auto k = static_cast<std::size_t>(std::floor(r_y * static_cast<double>(y.size())));
  if (chosen) chosen->clear();
  if (k == 0) return out;
  const double shift = shift_sds * std::sqrt(sample_variance(y));

  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t j = t + rng.index(idx.size() - t);
    std::swap(idx[t], idx[j]);
    out[idx[t]] += shift;
  }
  if (chosen) chosen->assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  return out;
}

double sample_mean(std::span<const double> v) {
  if (v.empty()) throw PreconditionError("sample_mean: empty input");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw PreconditionError("sample_variance: need at least 2 values");
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double sample_median(std::vector<double> v) {
  if (v.empty()) throw PreconditionError("sample_median: empty input");
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  if (v.size() % 2 == 1) return v[m];
  const double upper = v[m];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (lower + upper);
}

}  // namespace nplme
