#include "nplme/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "nplme/dataset_io.hpp"
#include "nplme/error.hpp"

namespace nplme {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Hoffman & Gelman (2014) dual averaging of log step size.
class DualAveraging {
 public:
  DualAveraging(double step, double target) : target_(target) { restart(step); }

  void restart(double step) {
    mu_ = std::log(10.0 * step);
    log_step_ = std::log(step);
    log_step_bar_ = 0.0;
    h_bar_ = 0.0;
    count_ = 0.0;
  }

  void update(double accept_prob) {
    count_ += 1.0;
    const double eta = 1.0 / (count_ + kT0);
    h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_prob);
    log_step_ = mu_ - std::sqrt(count_) / kGamma * h_bar_;
    const double weight = std::pow(count_, -kKappa);
    log_step_bar_ = weight * log_step_ + (1.0 - weight) * log_step_bar_;
  }

  double step() const { return std::exp(log_step_); }
  double final_step() const { return std::exp(log_step_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double target_;
  double mu_ = 0.0;
  double log_step_ = 0.0;
  double log_step_bar_ = 0.0;
  double h_bar_ = 0.0;
  double count_ = 0.0;
};

struct Transition {
  double accept_prob = 0.0;
  bool divergent = false;
  bool finite = true;
};

class ChainRunner {
 public:
  ChainRunner(const TargetLogDensity& target, const HMCConfig& cfg, std::size_t chain, Rng rng)
      : target_(target), cfg_(cfg), chain_(chain), rng_(std::move(rng)),
        inv_mass_(target.dim, 1.0), grad_(target.dim) {}

  ChainOutput run(std::vector<double> init) {
    q_ = std::move(init);
    if (q_.size() != target_.dim) throw ChainFailure(chain_, "initial position has the wrong length");
    logp_ = target_.log_density_grad(q_, grad_);
    if (!std::isfinite(logp_) || !all_finite(grad_))
      throw ChainFailure(chain_, "non-finite log-density or gradient at the initial position");

    double step = find_reasonable_step(cfg_.step_size);
    DualAveraging da(step, cfg_.target_accept);

    const std::size_t warmup = cfg_.warmup;
    const bool adapt_mass = warmup >= 40;
    const std::size_t window_begin = warmup / 2;
    const std::size_t window_end = warmup - std::max<std::size_t>(warmup * 15 / 100, 1);
    std::vector<double> wsum(target_.dim, 0.0), wsq(target_.dim, 0.0);
    std::size_t wcount = 0;

    for (std::size_t it = 0; it < warmup; ++it) {
      const Transition t = transition(da.step());
      da.update(t.accept_prob);
      if (adapt_mass && it >= window_begin && it < window_end) {
        // Welford accumulation of the per-coordinate variance
        ++wcount;
        for (std::size_t d = 0; d < q_.size(); ++d) {
          const double delta = q_[d] - wsum[d];
          wsum[d] += delta / static_cast<double>(wcount);
          wsq[d] += delta * (q_[d] - wsum[d]);
        }
      }
      if (adapt_mass && it + 1 == window_end && wcount > 2) {
        const double n = static_cast<double>(wcount);
        for (std::size_t d = 0; d < q_.size(); ++d) {
          const double var = wsq[d] / (n - 1.0);
          inv_mass_[d] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
        }
        da.restart(find_reasonable_step(da.step()));
      }
    }
    if (warmup > 0) step = da.final_step();

    ChainOutput out;
    out.dim = target_.dim;
    out.draws.reserve(cfg_.iters * target_.dim);
    double accept_sum = 0.0;
    for (std::size_t it = 0; it < cfg_.iters; ++it) {
      const double jitter = cfg_.step_jitter > 0.0
                                ? 1.0 + cfg_.step_jitter * (2.0 * rng_.uniform() - 1.0)
                                : 1.0;
      const Transition t = transition(step * jitter);
      accept_sum += t.accept_prob;
      if (t.divergent) ++out.divergence_count;
      out.draws.insert(out.draws.end(), q_.begin(), q_.end());
    }
    out.accept_rate = cfg_.iters > 0 ? accept_sum / static_cast<double>(cfg_.iters) : 0.0;
    out.step_size = step;
    out.inv_mass = inv_mass_;
    return out;
  }

 private:
  std::vector<double> draw_momentum() {
    std::vector<double> p(target_.dim);
    for (std::size_t d = 0; d < p.size(); ++d) p[d] = rng_.normal() / std::sqrt(inv_mass_[d]);
    return p;
  }

  double kinetic(std::span<const double> p) const {
    double k = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d) k += p[d] * p[d] * inv_mass_[d];
    return 0.5 * k;
  }

  Transition transition(double step) {
    const auto p0 = draw_momentum();
    const double h0 = -logp_ + kinetic(p0);
    LeapfrogResult lf = leapfrog(q_, p0, target_.log_density_grad, step, cfg_.n_leapfrog, inv_mass_);

    Transition t;
    const double h1 = lf.finite ? -lf.log_density + kinetic(lf.momentum) : std::numeric_limits<double>::infinity();
    const double dh = h1 - h0;
    if (!lf.finite || !std::isfinite(dh)) {
      t.finite = false;
      t.divergent = true;
      if (++nonfinite_streak_ >= kMaxNonFiniteStreak)
        throw ChainFailure(chain_, "persistent non-finite gradients");
      return t;
    }
    nonfinite_streak_ = 0;
    if (dh > cfg_.max_divergence_energy) {
      t.divergent = true;
      return t;
    }
    t.accept_prob = dh <= 0.0 ? 1.0 : std::exp(-dh);
    if (rng_.uniform() < t.accept_prob) {
      q_ = std::move(lf.position);
      logp_ = lf.log_density;
    }
    return t;
  }

  // Doubles or halves the step until a single leapfrog step's acceptance
  // probability crosses 0.5.
  double find_reasonable_step(double step) {
    step = std::clamp(step, 1e-8, 1e3);
    auto accept = [&](double e) {
      const auto p = draw_momentum();
      const double h0 = -logp_ + kinetic(p);
      auto lf = leapfrog(q_, p, target_.log_density_grad, e, 1, inv_mass_);
      if (!lf.finite) return 0.0;
      const double dh = -lf.log_density + kinetic(lf.momentum) - h0;
      return std::isfinite(dh) ? std::min(1.0, std::exp(-dh)) : 0.0;
    };
    const double a0 = accept(step);
    const double dir = a0 > 0.5 ? 2.0 : 0.5;
    for (int k = 0; k < 50; ++k) {
      const double next = step * dir;
      const double a = accept(next);
      if ((dir > 1.0 && a < 0.5) || (dir < 1.0 && a > 0.5) || next < 1e-8 || next > 1e3) {
        return dir > 1.0 ? step : next;
      }
      step = next;
    }
    return step;
  }

  static constexpr std::size_t kMaxNonFiniteStreak = 100;

  const TargetLogDensity& target_;
  const HMCConfig& cfg_;
  std::size_t chain_;
  Rng rng_;
  std::vector<double> inv_mass_;
  std::vector<double> grad_;
  std::vector<double> q_;
  double logp_ = 0.0;
  std::size_t nonfinite_streak_ = 0;
};

}  // namespace

double TargetLogDensity::log_density(std::span<const double> q) const {
  std::vector<double> g(dim);
  return log_density_grad(q, g);
}

LeapfrogResult leapfrog(std::span<const double> position, std::span<const double> momentum,
                        const std::function<double(std::span<const double>, std::span<double>)>& grad_fn,
                        double step_size, std::size_t n_steps, std::span<const double> inv_mass) {
  if (n_steps < 1) throw PreconditionError("leapfrog: n_steps must be at least 1");
  const std::size_t dim = position.size();
  if (momentum.size() != dim || (!inv_mass.empty() && inv_mass.size() != dim))
    throw InvalidInput("leapfrog: dimension mismatch");

  LeapfrogResult r;
  r.position.assign(position.begin(), position.end());
  r.momentum.assign(momentum.begin(), momentum.end());
  std::vector<double> grad(dim);
  auto im = [&](std::size_t d) { return inv_mass.empty() ? 1.0 : inv_mass[d]; };

  r.log_density = grad_fn(r.position, grad);
  if (!std::isfinite(r.log_density) || !all_finite(grad)) {
    r.finite = false;
    return r;
  }
  for (std::size_t d = 0; d < dim; ++d) r.momentum[d] += 0.5 * step_size * grad[d];
  for (std::size_t s = 0; s < n_steps; ++s) {
    for (std::size_t d = 0; d < dim; ++d) r.position[d] += step_size * im(d) * r.momentum[d];
    r.log_density = grad_fn(r.position, grad);
    if (!std::isfinite(r.log_density) || !all_finite(grad)) {
      r.finite = false;
      return r;
    }
    const double scale = s + 1 == n_steps ? 0.5 * step_size : step_size;
    for (std::size_t d = 0; d < dim; ++d) r.momentum[d] += scale * grad[d];
  }
  return r;
}

void HMCConfig::validate() const {
  if (n_chains < 1) throw InvalidParameter("HMC: n_chains must be at least 1");
  if (iters < 1) throw InvalidParameter("HMC: iters must be positive");
  if (n_leapfrog < 1) throw InvalidParameter("HMC: n_leapfrog must be positive");
  if (!(step_size > 0.0)) throw InvalidParameter("HMC: step_size must be positive");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw InvalidParameter("HMC: target_accept must lie in (0, 1)");
  if (!(step_jitter >= 0.0 && step_jitter < 1.0))
    throw InvalidParameter("HMC: step_jitter must lie in [0, 1)");
}

HMCResult run_hmc(const TargetLogDensity& target, const HMCConfig& config,
                  const std::vector<std::vector<double>>& inits, std::size_t diag_params) {
  config.validate();
  if (target.dim == 0 || !target.log_density_grad) throw InvalidInput("run_hmc: empty target");

  HMCResult result;
  result.chains.reserve(config.n_chains);
  for (std::size_t c = 0; c < config.n_chains; ++c) {
    Rng rng = Rng::stream(config.seed, {c});
    std::vector<double> init;
    if (!inits.empty()) {
      init = inits[std::min(c, inits.size() - 1)];
    } else {
      init.resize(target.dim);
      for (auto& v : init) v = 4.0 * rng.uniform() - 2.0;
    }
    ChainRunner runner(target, config, c, rng.split({0xC4A1}));
    result.chains.push_back(runner.run(std::move(init)));
  }
  result.diagnostics = compute_diagnostics(result.chains, diag_params);
  return result;
}

TargetLogDensity joint_neg_log_posterior(const Dataset& data, FamilyPtr model, const MEConfig& me,
                                         const ThetaPrior& theta_prior,
                                         std::optional<GaussianLaw> prior_x) {
  data.validate();
  if (!model) throw InvalidInput("joint posterior: missing model");
  if (theta_prior.dim() != model->dim_theta())
    throw InvalidInput("joint posterior: prior dimension differs from model");
  const double sn = me.working_sigma_N();
  const double se = me.working_sigma_E();
  if (!(sn > 0.0) || !(se > 0.0))
    throw InvalidParameter("joint posterior: working noise scales must be positive");

  const bool classical = me.kind == MEKind::classical;
  GaussianLaw px{0.0, 1.0};
  if (classical) px = prior_x ? *prior_x : working_prior_x(data.w, sn);

  const std::size_t p = model->dim_theta();
  const std::size_t n = data.size();
  TargetLogDensity t;
  t.dim = p + n;
  for (std::size_t k = 0; k < p; ++k) t.names.push_back("theta_" + std::to_string(k + 1));
  for (std::size_t i = 0; i < n; ++i) t.names.push_back("x_" + std::to_string(i + 1));

  const double inv_n2 = 1.0 / (sn * sn);
  const double inv_e2 = 1.0 / (se * se);
  const double inv_x2 = 1.0 / (px.sd * px.sd);
  t.log_density_grad = [=, w = data.w, y = data.y, prior = theta_prior](
                           std::span<const double> q, std::span<double> grad) -> double {
    std::fill(grad.begin(), grad.end(), 0.0);
    const auto theta = q.subspan(0, p);
    double lp = prior.log_density(theta, grad.subspan(0, p));
    std::vector<double> dtheta(p);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = q[p + i];
      if (model->positive_domain() && !(x > 0.0)) return kNegInf;
      const double g = model->g_and_dtheta(x, theta, dtheta);
      const double dx = model->dg_dx(x, theta);
      const double rn = w[i] - x;
      const double re = y[i] - g;
      lp -= 0.5 * (rn * rn * inv_n2 + re * re * inv_e2);
      double gx = rn * inv_n2 + re * inv_e2 * dx;
      if (classical) {
        const double rx = x - px.mean;
        lp -= 0.5 * rx * rx * inv_x2;
        gx -= rx * inv_x2;
      }
      grad[p + i] = gx;
      for (std::size_t k = 0; k < p; ++k) grad[k] += re * inv_e2 * dtheta[k];
    }
    return lp;
  };
  return t;
}

std::vector<std::vector<double>> chain_columns(const std::vector<ChainOutput>& chains,
                                               std::size_t param) {
  std::vector<std::vector<double>> cols;
  cols.reserve(chains.size());
  for (const auto& c : chains) {
    std::vector<double> v(c.iters());
    for (std::size_t it = 0; it < v.size(); ++it) v[it] = c.at(it, param);
    cols.push_back(std::move(v));
  }
  return cols;
}

void write_draws_csv(std::ostream& out, const std::vector<ChainOutput>& chains,
                     const std::vector<std::string>& names) {
  out << "chain,iter,param_name,value\n";
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& ch = chains[c];
    for (std::size_t it = 0; it < ch.iters(); ++it) {
      for (std::size_t d = 0; d < ch.dim; ++d) {
        const std::string name = d < names.size() ? names[d] : "q_" + std::to_string(d + 1);
        out << c << ',' << it << ',' << name << ',' << format_double(ch.at(it, d)) << '\n';
      }
    }
  }
}

}  // namespace nplme
