#include "nplme/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "nplme/baselines.hpp"
#include "nplme/dataset_io.hpp"
#include "nplme/error.hpp"
#include "nplme/mmd_objective.hpp"
#include "nplme/parallel.hpp"

namespace nplme {

void AdamSettings::validate() const {
  if (!(step_size > 0.0)) throw InvalidParameter("optimizer: step_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw InvalidParameter("optimizer: beta1 and beta2 must lie in [0, 1)");
  if (iters < 1) throw InvalidParameter("optimizer: iters must be positive");
  if (!(tol >= 0.0)) throw InvalidParameter("optimizer: tol must be nonnegative");
  if (patience < 1) throw InvalidParameter("optimizer: patience must be positive");
}

void NPLConfig::validate() const {
  if (!(c >= 0.0)) throw InvalidParameter("npl: c must be nonnegative");
  if (m < 1) throw InvalidParameter("npl: m must be at least 1");
  if (truncation < 1) throw InvalidParameter("npl: truncation must be positive");
  if (B_boot < 1) throw InvalidParameter("npl: B_boot must be positive");
  if (!(prune_threshold >= 0.0 && prune_threshold < 1e-3))
    throw InvalidParameter("npl: prune_threshold must lie in [0, 1e-3)");
  if (!(theta_prior_sd > 0.0)) throw InvalidParameter("npl: theta_prior_sd must be positive");
  optimizer.validate();
  if (pseudo) hmc.validate();
}

JointSampler CentringFactory::joint(std::size_t i) const {
  return centring_joint(x_measure(i), theta_prior, model, working_sigma_E);
}

CentringFactory make_centring_factory(const Dataset& data, FamilyPtr model, const MEConfig& me,
                                      const ThetaPrior& theta_prior) {
  data.validate();
  CentringFactory f;
  f.theta_prior = theta_prior;
  f.model = model;
  f.working_sigma_E = me.working_sigma_E();
  const double sn = me.working_sigma_N();
  if (me.kind == MEKind::berkson) {
    f.x_measure = [w = data.w, sn](std::size_t i) { return centring_berkson(w.at(i), sn); };
  } else {
    const GaussianLaw px = working_prior_x(data.w, sn);
    f.x_measure = [w = data.w, sn, px](std::size_t i) { return centring_classical(w.at(i), sn, px); };
  }
  return f;
}

std::vector<ObservationSpecs> build_dp_specs(const Dataset& data, const PseudoSampleSet* pseudo,
                                             const CentringFactory& centring, const NPLConfig& config) {
  data.validate();
  if (config.pseudo != (pseudo != nullptr))
    throw ConfigError("npl: pseudo-samples must be supplied exactly when pseudo sampling is enabled");
  const std::size_t n = data.size();
  if (pseudo && (pseudo->n != n || pseudo->m != config.m))
    throw ConfigError("npl: pseudo-sample set is " + std::to_string(pseudo->n) + " x " +
                      std::to_string(pseudo->m) + ", expected " + std::to_string(n) + " x " +
                      std::to_string(config.m));
  std::vector<ObservationSpecs> specs(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = specs[i];
    s.joint.c = s.marginal.c = config.c;
    s.joint.truncation = s.marginal.truncation = config.truncation;
    if (pseudo) {
      for (std::size_t j = 0; j < pseudo->m; ++j) {
        s.joint.pseudo_atoms.push_back({pseudo->at(i, j), data.y[i]});
        s.marginal.pseudo_atoms.push_back(pseudo->at(i, j));
      }
    } else {
      s.joint.pseudo_atoms.push_back({data.w[i], data.y[i]});
      s.marginal.pseudo_atoms.push_back(data.w[i]);
    }
    if (centring.x_measure) {
      s.joint.prior_sampler = centring.joint(i);
      s.marginal.prior_sampler = centring.x_measure(i).sampler;
    }
  }
  return specs;
}

ReplicateResult minimize_adam(const std::function<ObjectiveValue(std::span<const double>)>& f,
                              std::vector<double> theta0, const AdamSettings& opt) {
  opt.validate();
  const std::size_t p = theta0.size();
  ReplicateResult best;
  best.theta = theta0;
  ObjectiveValue cur = f(theta0);
  if (!std::isfinite(cur.value)) throw InvalidInput("optimizer: non-finite objective at the initial point");
  best.objective = cur.value;
  std::vector<double> best_grad = cur.grad;

  std::vector<double> theta = theta0;
  std::vector<double> m(p, 0.0), v(p, 0.0);
  double lr = opt.step_size;
  std::size_t t = 0;
  std::size_t since_best = 0;
  std::size_t halvings = 0;
  for (std::size_t it = 0; it < opt.iters; ++it) {
    ++best.iterations;
    ++t;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < p; ++k) {
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * cur.grad[k];
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * cur.grad[k] * cur.grad[k];
      theta[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + opt.eps);
    }
    cur = f(theta);
    const bool finite = std::isfinite(cur.value);
    if (finite && cur.value < best.objective) {
      const bool significant = best.objective - cur.value > opt.tol;
      best.objective = cur.value;
      best.theta = theta;
      best_grad = cur.grad;
      since_best = significant ? 0 : since_best + 1;
    } else {
      ++since_best;
    }
    if (!finite || since_best >= opt.patience) {
      if (++halvings > opt.max_halvings) {
        best.converged = true;
        break;
      }
      lr *= 0.5;
      theta = best.theta;
      cur.value = best.objective;
      cur.grad = best_grad;
      std::fill(m.begin(), m.end(), 0.0);
      std::fill(v.begin(), v.end(), 0.0);
      t = 0;
      since_best = 0;
    }
  }
  return best;
}

ReplicateResult fit_one_replicate(const std::vector<ObservationSpecs>& specs, FamilyPtr model,
                                  double working_sigma_E, const ProductKernelSpec& kernel,
                                  const AdamSettings& opt, std::span<const double> theta_init, Rng& rng,
                                  double prune_threshold) {
  if (specs.empty()) throw PreconditionError("replicate: no observations");
  if (!model) throw InvalidInput("replicate: missing model");
  if (!(working_sigma_E >= 0.0)) throw InvalidParameter("replicate: working sigma_E must be nonnegative");
  const double share = 1.0 / static_cast<double>(specs.size());

  PointSet joint_atoms(2), marginal_atoms(1);
  std::vector<double> weights;
  for (const auto& s : specs) {
    s.joint.validate();
    s.marginal.validate();
    if (s.joint.m() != s.marginal.m() || s.joint.truncation != s.marginal.truncation)
      throw ConfigError("replicate: joint and marginal specs disagree in shape");
    const std::size_t T = s.joint.truncation;
    const auto w = sample_dp_weights(s.joint.c, T, s.joint.m(), rng);
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (!(w[k] > prune_threshold)) continue;
      // prior atoms are drawn only where they carry weight; the x-atom is
      // shared between the joint and marginal measures
      const XY a = k < T ? s.joint.prior_sampler(rng) : s.joint.pseudo_atoms[k - T];
      joint_atoms.push_back({a.x, a.y});
      marginal_atoms.push_back({k < T ? a.x : s.marginal.pseudo_atoms[k - T]});
      weights.push_back(share * w[k]);
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;

  std::vector<double> noise(weights.size());
  for (auto& e : noise) e = working_sigma_E * rng.normal();

  const MmdObjective obj({std::move(joint_atoms), weights}, {std::move(marginal_atoms), weights}, model,
                         std::move(noise), kernel);
  return minimize_adam([&](std::span<const double> th) { return obj.evaluate(th); },
                       std::vector<double>(theta_init.begin(), theta_init.end()), opt);
}

std::vector<double> BootstrapEnsemble::mean() const {
  std::vector<double> out(dim_theta, 0.0);
  for (std::size_t b = 0; b < size(); ++b)
    for (std::size_t k = 0; k < dim_theta; ++k) out[k] += theta_draws[b * dim_theta + k];
  for (auto& v : out) v /= static_cast<double>(size());
  return out;
}

ProductKernelSpec default_kernel(const Dataset& data) {
  data.validate();
  ProductKernelSpec k;
  k.kx = KernelSpec::gaussian(median_heuristic(PointSet::scalars(data.w)));
  k.ky = KernelSpec::gaussian(median_heuristic(PointSet::scalars(data.y)));
  return k;
}

namespace {

std::vector<double> nls_start(std::span<const double> w, std::span<const double> y, const RegressionFamily& model) {
  try {
    return nls_fit(w, y, model).theta_hat;
  } catch (const Error&) {
    return default_nls_init(w, y, model);
  }
}

// Minimises the objective on the pooled pseudo-sample measure (every atom
// weight 1/(n m), no prior block) from each candidate and keeps the best end
// point. Guards against NLS starts that drift into a degenerate regime.
std::vector<double> pooled_center(const std::vector<ObservationSpecs>& specs, FamilyPtr model,
                                  double working_sigma_E, const ProductKernelSpec& kernel,
                                  const AdamSettings& opt, const std::vector<std::vector<double>>& candidates,
                                  Rng& rng) {
  PointSet joint_atoms(2), marginal_atoms(1);
  for (const auto& s : specs) {
    for (std::size_t j = 0; j < s.joint.m(); ++j) {
      joint_atoms.push_back({s.joint.pseudo_atoms[j].x, s.joint.pseudo_atoms[j].y});
      marginal_atoms.push_back({s.marginal.pseudo_atoms[j]});
    }
  }
  const std::vector<double> weights(joint_atoms.size(), 1.0 / static_cast<double>(joint_atoms.size()));
  std::vector<double> noise(weights.size());
  for (auto& e : noise) e = working_sigma_E * rng.normal();
  const MmdObjective obj({std::move(joint_atoms), weights}, {std::move(marginal_atoms), weights}, model,
                         std::move(noise), kernel);

  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    bool finite = c.size() == model->dim_theta();
    for (double v : c) finite = finite && std::isfinite(v);
    if (!finite || !std::isfinite(obj.value(c))) continue;
    const ReplicateResult r = minimize_adam([&](std::span<const double> th) { return obj.evaluate(th); }, c, opt);
    if (r.objective < best_value) best_value = r.objective, best = r.theta;
  }
  return best.empty() ? candidates.front() : best;
}

}  // namespace

BootstrapEnsemble fit(const Dataset& data, FamilyPtr model, const MEConfig& me, const NPLConfig& config,
                      Rng& rng, const PseudoSampleSet* pseudo) {
  config.validate();
  data.validate();
  if (!model) throw InvalidInput("fit: missing model");
  const std::uint64_t base = rng.engine()();
  const std::size_t p = model->dim_theta();
  const ThetaPrior prior = ThetaPrior::isotropic(p, config.theta_prior_sd);

  NPLConfig cfg = config;
  std::optional<PseudoSampleSet> own;
  if (cfg.pseudo && !pseudo) {
    Rng prng = Rng::stream(base, {0});
    own = pseudo_sample(data, model, me, prior, cfg.m, cfg.regime, cfg.hmc, prng);
    pseudo = &*own;
  }
  if (!cfg.pseudo) pseudo = nullptr;

  const CentringFactory centring = make_centring_factory(data, model, me, prior);
  const auto specs = build_dp_specs(data, pseudo, centring, cfg);

  BootstrapEnsemble e;
  e.dim_theta = p;
  e.kernel = default_kernel(data);
  {
    std::vector<std::vector<double>> candidates{nls_start(data.w, data.y, *model),
                                                default_nls_init(data.w, data.y, *model)};
    if (pseudo) {
      std::vector<double> xs, ys, mean(p, 0.0);
      for (std::size_t i = 0; i < pseudo->n; ++i)
        for (std::size_t j = 0; j < pseudo->m; ++j) xs.push_back(pseudo->at(i, j)), ys.push_back(data.y[i]);
      candidates.push_back(nls_start(xs, ys, *model));
      const std::size_t rows = pseudo->theta_rows();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < p; ++k) mean[k] += pseudo->theta_draws[r * p + k] / static_cast<double>(rows);
      if (rows > 0) candidates.push_back(mean);
    }
    Rng crng = Rng::stream(base, {2});
    e.theta_init_center = pooled_center(specs, model, me.working_sigma_E(), e.kernel, cfg.optimizer, candidates, crng);
  }
  e.theta_draws.assign(cfg.B_boot * p, 0.0);
  e.objective_values.assign(cfg.B_boot, 0.0);
  std::vector<char> conv(cfg.B_boot, 0);
  const double se = me.working_sigma_E();

  parallel_for(cfg.B_boot, cfg.threads, [&](std::size_t b) {
    Rng r = Rng::stream(base, {1, b});
    std::vector<double> init = e.theta_init_center;
    for (auto& v : init) v += 0.1 * r.normal();
    try {
      const ReplicateResult res = fit_one_replicate(specs, model, se, e.kernel, cfg.optimizer, init, r,
                                                    cfg.prune_threshold);
      std::copy(res.theta.begin(), res.theta.end(), e.theta_draws.begin() + static_cast<std::ptrdiff_t>(b * p));
      e.objective_values[b] = res.objective;
      conv[b] = res.converged ? 1 : 0;
    } catch (const Error& ex) {
      throw Error("replicate " + std::to_string(b) + ": " + ex.what());
    }
  });
  e.converged_flags.assign(conv.begin(), conv.end());
  return e;
}

ReplicateResult oracle_fit(const Dataset& data, FamilyPtr model, double working_sigma_E,
                           const ProductKernelSpec& kernel, const AdamSettings& opt, Rng& rng,
                           std::optional<std::vector<double>> theta_init) {
  data.validate();
  if (!data.has_latent()) throw MissingLatent("oracle fit: dataset has no latent covariate");
  if (!model) throw InvalidInput("oracle fit: missing model");
  const auto& x = *data.x_latent;
  std::vector<ObservationSpecs> specs(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    specs[i].joint.c = specs[i].marginal.c = 0.0;
    specs[i].joint.pseudo_atoms = {{x[i], data.y[i]}};
    specs[i].marginal.pseudo_atoms = {x[i]};
  }
  const std::vector<double> init = theta_init ? *theta_init : nls_start(x, data.y, *model);
  return fit_one_replicate(specs, model, working_sigma_E, kernel, opt, init, rng, 0.0);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw PreconditionError("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidParameter("quantile: level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

EnsembleSummary summarize(const BootstrapEnsemble& ensemble, const RegressionFamily& model,
                          std::span<const double> x_grid) {
  const std::size_t B = ensemble.size();
  if (B == 0) throw PreconditionError("summarize: empty ensemble");
  const std::size_t p = ensemble.dim_theta;
  EnsembleSummary s;
  s.theta_mean = ensemble.mean();
  s.theta_sd.assign(p, 0.0);
  if (B > 1) {
    for (std::size_t k = 0; k < p; ++k) {
      std::vector<double> col(B);
      for (std::size_t b = 0; b < B; ++b) col[b] = ensemble.theta(b)[k];
      s.theta_sd[k] = std::sqrt(sample_variance(col));
    }
  }
  s.x_grid.assign(x_grid.begin(), x_grid.end());
  std::vector<double> vals(B);
  for (double x : x_grid) {
    for (std::size_t b = 0; b < B; ++b) vals[b] = model.g(x, ensemble.theta(b));
    s.curve_median.push_back(quantile(vals, 0.5));
    s.curve_lo.push_back(quantile(vals, 0.025));
    s.curve_hi.push_back(quantile(vals, 0.975));
  }
  return s;
}

BoundTerms bound_terms(const Dataset& data, const PseudoSampleSet& pseudo, const CentringFactory& centring,
                       const ProductKernelSpec& kernel, std::size_t n_oracle, const TruthSampler& truth,
                       double c, Rng& rng) {
  data.validate();
  if (!data.has_latent()) throw MissingLatent("bound terms: dataset has no latent covariate");
  pseudo.validate();
  if (pseudo.n != data.size()) throw InvalidInput("bound terms: pseudo-samples do not match the dataset");
  if (n_oracle < 2) throw PreconditionError("bound terms: need at least 2 oracle draws");
  if (!(c >= 0.0)) throw InvalidParameter("bound terms: c must be nonnegative");

  const auto oracle = truth(n_oracle, rng);
  PointSet tj(2), tx(1);
  for (const auto& a : oracle) {
    tj.push_back({a.x, a.y});
    tx.push_back({a.x});
  }
  PointSet pj(2), px(1), qj(2), qx(1);
  for (std::size_t i = 0; i < pseudo.n; ++i) {
    const JointSampler q = centring.joint(i);
    for (std::size_t j = 0; j < pseudo.m; ++j) {
      pj.push_back({pseudo.at(i, j), data.y[i]});
      px.push_back({pseudo.at(i, j)});
      const XY d = q(rng);
      qj.push_back({d.x, d.y});
      qx.push_back({d.x});
    }
  }
  auto root = [](double v) { return std::sqrt(std::max(v, 0.0)); };
  BoundTerms b;
  b.pseudo_joint_mmd = root(mmd2_unbiased(pj, tj, kernel));
  b.pseudo_marginal_mmd = root(mmd2_unbiased(px, tx, kernel.kx));
  b.prior_joint_mmd = root(mmd2_unbiased(qj, tj, kernel));
  b.prior_marginal_mmd = root(mmd2_unbiased(qx, tx, kernel.kx));
  const double m = static_cast<double>(pseudo.m);
  b.weight_prior = c / (c + m);
  b.weight_pseudo = m / (c + m);
  return b;
}

void write_ensemble_csv(std::ostream& out, const BootstrapEnsemble& e, std::uint64_t seed) {
  out << "# seed=" << seed << ",config_hash=" << e.config_hash << '\n';
  out << 'b';
  for (std::size_t k = 0; k < e.dim_theta; ++k) out << ",theta_" << k + 1;
  out << ",objective,converged\n";
  for (std::size_t b = 0; b < e.size(); ++b) {
    out << b;
    for (double v : e.theta(b)) out << ',' << format_double(v);
    out << ',' << format_double(e.objective_values[b]) << ',' << (e.converged_flags[b] ? 1 : 0) << '\n';
  }
}

}  // namespace nplme
