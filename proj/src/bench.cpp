#include "nplme/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>

#include "nplme/baselines.hpp"
#include "nplme/dataset_io.hpp"
#include "nplme/error.hpp"
#include "nplme/estimator.hpp"
#include "nplme/parallel.hpp"

namespace nplme {

using nlohmann::json;

namespace {

std::uint64_t method_id(const std::string& m) {
  const auto it = std::find(kMethodNames.begin(), kMethodNames.end(), m);
  if (it == kMethodNames.end()) throw ConfigError("unknown method '" + m + "'");
  return static_cast<std::uint64_t>(it - kMethodNames.begin()) + 1;
}

bool has(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::vector<double> theta_block_mean(const std::vector<ChainOutput>& chains, std::size_t p) {
  std::vector<double> mean(p, 0.0);
  std::size_t count = 0;
  for (const auto& c : chains) {
    for (std::size_t it = 0; it < c.iters(); ++it) {
      for (std::size_t k = 0; k < p; ++k) mean[k] += c.at(it, k);
      ++count;
    }
  }
  for (auto& v : mean) v /= static_cast<double>(count);
  return mean;
}

PseudoSampleSet exact_pseudo(const Dataset& data, std::size_t m, const std::vector<double>& theta) {
  PseudoSampleSet s;
  s.n = data.size();
  s.m = m;
  s.dim_theta = theta.size();
  s.regime = PseudoRegime::C_spaced;
  for (double w : data.w) s.x_tilde.insert(s.x_tilde.end(), m, w);
  for (std::size_t j = 0; j < m; ++j) s.theta_draws.insert(s.theta_draws.end(), theta.begin(), theta.end());
  return s;
}

double rms(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<double> zscore(std::span<const double> v, double mean, double sd) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
  return out;
}

double residual_sd(std::span<const double> w, std::span<const double> y, const RegressionFamily& model) {
  const NLSResult r = nls_fit(w, y, model);
  const double dof = static_cast<double>(w.size() - model.dim_theta());
  return std::sqrt(r.residual_ss / dof);
}

}  // namespace

std::vector<MethodEstimate> estimate_methods(const Dataset& data, FamilyPtr model, const MEConfig& me,
                                             const ExperimentConfig& cfg, const std::vector<std::string>& methods,
                                             Rng& rng) {
  data.validate();
  const std::uint64_t base = rng.engine()();
  const std::size_t p = model->dim_theta();
  const ThetaPrior prior = ThetaPrior::isotropic(p, cfg.npl.theta_prior_sd);
  const bool no_error = !(me.working_sigma_N() > 0.0);

  // one posterior run shared by hmc and npl_hmc
  std::optional<HMCResult> shared;
  std::string shared_error;
  const bool want_run = has(methods, "hmc") || (has(methods, "npl_hmc") && cfg.npl.regime != PseudoRegime::A_independent);
  if (want_run && !no_error) {
    try {
      const TargetLogDensity target = joint_neg_log_posterior(data, model, me, prior);
      HMCConfig h = cfg.hmc;
      h.seed = Rng::stream(base, {100}).seed();
      Rng init_rng = Rng::stream(base, {101});
      shared = run_hmc(target, h, default_hmc_inits(data, *model, h.n_chains, init_rng, &target), p);
    } catch (const std::exception& e) {
      shared_error = e.what();
    }
  }

  std::vector<MethodEstimate> out;
  for (const auto& name : methods) {
    MethodEstimate est;
    est.method = name;
    Rng r = Rng::stream(base, {method_id(name)});
    try {
      if (name == "nls") {
        est.theta = nls_fit(data.w, data.y, *model).theta_hat;
      } else if (name == "simex") {
        SimexConfig s = cfg.simex;
        s.sigma_N_assumed = me.working_sigma_N();
        est.theta = simex_fit(data.w, data.y, *model, s, r).theta_hat;
      } else if (name == "hmc") {
        if (no_error) throw InvalidParameter("hmc: the working measurement-error scale is zero");
        if (!shared) throw Error(shared_error);
        est.theta = theta_block_mean(shared->chains, p);
      } else if (name == "oracle") {
        est.theta = oracle_fit(data, model, me.working_sigma_E(), default_kernel(data), cfg.npl.optimizer, r).theta;
      } else {
        NPLConfig npl = cfg.npl;
        npl.threads = cfg.threads;
        npl.pseudo = name == "npl_hmc";
        std::optional<PseudoSampleSet> pseudo;
        if (npl.pseudo) {
          if (no_error) {
            pseudo = exact_pseudo(data, npl.m, nls_fit(data.w, data.y, *model).theta_hat);
          } else if (npl.regime == PseudoRegime::A_independent) {
            Rng pr = r.split({1});
            pseudo = pseudo_sample(data, model, me, prior, npl.m, npl.regime, cfg.hmc, pr);
          } else {
            if (!shared) throw Error(shared_error);
            pseudo = pseudo_from_chains(shared->chains, p, data.size(), npl.m, npl.regime);
          }
        }
        const BootstrapEnsemble e = fit(data, model, me, npl, r, pseudo ? &*pseudo : nullptr);
        est.theta = e.mean();
      }
      est.ok = std::all_of(est.theta.begin(), est.theta.end(), [](double v) { return std::isfinite(v); });
      if (!est.ok) est.error = "non-finite estimate";
    } catch (const std::exception& e) {
      est.ok = false;
      est.error = e.what();
    }
    out.push_back(std::move(est));
  }
  return out;
}

const RmseRow* RmseTable::find(const std::string& method, double me_scale) const {
  for (const auto& r : rows)
    if (r.method == method && r.me_scale == me_scale) return &r;
  return nullptr;
}

Dataset simulate_from_config(const ExperimentConfig& cfg, double sigma_N, std::size_t n, Rng& rng) {
  const FamilyPtr model = make_family(cfg.dgp.model);
  MEConfig me = cfg.dgp.me;
  me.sigma_N_true = sigma_N;
  Dataset d = simulate_dgp(*model, cfg.dgp.theta_true, me, n, cfg.dgp.design, rng);
  d.meta.seed = cfg.seed;
  d.meta.config_hash = config_hash(cfg);
  return d;
}

RmseTable run_bench(const ExperimentConfig& cfg, const std::function<void(const std::string&)>& progress) {
  const FamilyPtr model = make_family(cfg.dgp.model);
  const std::size_t S = cfg.me_scale_grid.size();
  const std::size_t R = cfg.replications;
  const std::size_t M = cfg.methods.size();
  std::vector<RmseReplication> reps(S * R * M);

  ExperimentConfig inner = cfg;
  inner.threads = 1;  // parallelism is across replications
  parallel_for(S * R, cfg.threads, [&](std::size_t task) {
    const std::size_t s = task / R;
    const std::size_t r = task % R;
    const double scale = cfg.me_scale_grid[s];
    Rng data_rng = Rng::stream(cfg.seed, {s, r, 0});
    Rng fit_rng = Rng::stream(cfg.seed, {s, r, 1});
    MEConfig me = cfg.dgp.me;
    me.sigma_N_true = scale;
    const Dataset data = simulate_from_config(cfg, scale, cfg.dgp.n, data_rng);
    const auto est = estimate_methods(data, model, me, inner, cfg.methods, fit_rng);
    const auto& x = *data.x_latent;
    for (std::size_t k = 0; k < M; ++k) {
      RmseReplication& rep = reps[task * M + k];
      rep.method = cfg.methods[k];
      rep.me_scale = scale;
      rep.replication = r;
      rep.ok = est[k].ok;
      rep.error = est[k].error;
      if (!rep.ok) continue;
      double ss = 0.0;
      for (std::size_t d = 0; d < est[k].theta.size(); ++d) {
        const double diff = est[k].theta[d] - cfg.dgp.theta_true[d];
        ss += diff * diff;
      }
      rep.theta_error = std::sqrt(ss);
      std::vector<double> dy(x.size());
      for (std::size_t i = 0; i < x.size(); ++i)
        dy[i] = model->g(x[i], est[k].theta) - model->g(x[i], cfg.dgp.theta_true);
      rep.y_error = rms(dy);
    }
    if (progress) progress("me_scale=" + format_double(scale) + " replication=" + std::to_string(r) + " done");
  });

  RmseTable t;
  t.replications = reps;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t k = 0; k < M; ++k) {
      RmseRow row;
      row.method = cfg.methods[k];
      row.me_scale = cfg.me_scale_grid[s];
      double st = 0.0, sy = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const auto& rep = reps[(s * R + r) * M + k];
        if (!rep.ok) {
          ++row.failures;
          continue;
        }
        ++row.count;
        st += rep.theta_error * rep.theta_error;
        sy += rep.y_error * rep.y_error;
      }
      if (row.count > 0) {
        row.theta_rmse = std::sqrt(st / static_cast<double>(row.count));
        row.y_rmse = std::sqrt(sy / static_cast<double>(row.count));
      } else {
        row.theta_rmse = row.y_rmse = std::numeric_limits<double>::quiet_NaN();
      }
      t.rows.push_back(row);
    }
  }
  return t;
}

ContaminationReport run_contamination_protocol(const Dataset& data, const std::vector<double>& r_grid,
                                               const ExperimentConfig& cfg) {
  data.validate();
  const auto& cc = cfg.contamination;
  const FamilyPtr model = make_family(cc.model);
  const std::size_t n = data.size();
  if (n < 4 * model->dim_theta()) throw PreconditionError("contamination: too few rows");

  const std::vector<double>& x_src = data.has_latent() ? *data.x_latent : data.w;
  const double mx = sample_mean(x_src), sx = std::sqrt(sample_variance(x_src));
  const double my = sample_mean(data.y), sy = std::sqrt(sample_variance(data.y));
  if (!(sx > 0.0) || !(sy > 0.0)) throw DegenerateSample("contamination: constant covariate or response");
  const std::vector<double> x = zscore(x_src, mx, sx);
  const std::vector<double> y = zscore(data.y, my, sy);

  ContaminationReport rep;
  std::vector<double> w;
  if (cc.n_bins > 0) {
    const BinnedValues b = bin_means_transform(x, cc.n_bins);
    w = b.w;
    double ss = 0.0;
    std::vector<int> used(cc.n_bins, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ss += (x[i] - w[i]) * (x[i] - w[i]);
      used[static_cast<std::size_t>(b.bin[i])] = 1;
    }
    const double groups = std::accumulate(used.begin(), used.end(), 0.0);
    rep.sigma_N = std::sqrt(ss / std::max(1.0, static_cast<double>(n) - groups));
  } else {
    w = zscore(data.w, mx, sx);
    if (!(cc.sigma_N >= 0.0))
      throw ConfigError("$.contamination.sigma_N: required when the covariate is not binned");
  }
  if (cc.sigma_N >= 0.0) rep.sigma_N = cc.sigma_N;
  rep.sigma_E = cc.sigma_E >= 0.0 ? cc.sigma_E : residual_sd(w, y, *model);

  MEConfig me;
  me.kind = cfg.dgp.me.kind;
  me.sigma_N_true = rep.sigma_N;
  me.tau_N = 1.0;
  me.sigma_E_true = rep.sigma_E;
  me.tau_E = 1.0;

  Dataset clean;
  clean.w = w;
  clean.y = y;
  clean.x_latent = x;
  Rng orng = Rng::stream(cfg.seed, {0xC0});
  rep.oracle_theta = oracle_fit(clean, model, rep.sigma_E, default_kernel(clean), cfg.npl.optimizer, orng).theta;

  for (std::size_t k = 0; k < r_grid.size(); ++k) {
    Rng crng = Rng::stream(cfg.seed, {0xC1, k});
    std::vector<std::size_t> chosen;
    Dataset d = clean;
    d.y = contaminate_responses(y, r_grid[k], cc.shift_sds, crng, &chosen);
    Rng frng = Rng::stream(cfg.seed, {0xC2, k});
    const auto est = estimate_methods(d, model, me, cfg, cc.methods, frng);
    for (const auto& e : est) {
      ContaminationRow row;
      row.r_y = r_grid[k];
      row.method = e.method;
      row.ok = e.ok;
      row.error = e.error;
      row.n_contaminated = chosen.size();
      row.theta = e.theta;
      if (e.ok) {
        std::vector<double> dt(e.theta.size()), dy(n);
        for (std::size_t d2 = 0; d2 < dt.size(); ++d2) dt[d2] = e.theta[d2] - rep.oracle_theta[d2];
        for (std::size_t i = 0; i < n; ++i) dy[i] = y[i] - model->g(x[i], e.theta);
        row.theta_rmse = rms(dt);
        row.y_rmse = rms(dy);
      }
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

std::vector<double> histogram_weights(std::span<const double> w_obs, std::span<const double> grid,
                                      std::size_t bins) {
  if (w_obs.empty() || grid.empty() || bins < 1) throw PreconditionError("histogram weights: empty input");
  const auto [lo_it, hi_it] = std::minmax_element(w_obs.begin(), w_obs.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = (hi - lo) / static_cast<double>(bins);
  auto bin_of = [&](double v) -> std::size_t {
    if (!(width > 0.0)) return 0;
    const double b = std::floor((v - lo) / width);
    return static_cast<std::size_t>(std::clamp(b, 0.0, static_cast<double>(bins - 1)));
  };
  std::vector<double> counts(bins, 0.0);
  for (double v : w_obs) counts[bin_of(v)] += 1.0;
  std::vector<double> out(grid.size());
  double total = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out[g] = counts[bin_of(grid[g])];
    total += out[g];
  }
  for (auto& v : out) v /= total;
  return out;
}

double curve_deviation(const RegressionFamily& model, const std::vector<std::vector<double>>& thetas,
                       std::span<const double> w_obs, std::size_t grid_points, std::size_t hist_bins) {
  if (thetas.empty()) throw PreconditionError("curve deviation: no fits");
  const auto [lo_it, hi_it] = std::minmax_element(w_obs.begin(), w_obs.end());
  std::vector<double> grid(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g)
    grid[g] = *lo_it + (*hi_it - *lo_it) * static_cast<double>(g) / static_cast<double>(grid_points - 1);
  const auto wts = histogram_weights(w_obs, grid, hist_bins);
  double total = 0.0;
  for (std::size_t g = 0; g < grid_points; ++g) {
    std::vector<double> vals;
    for (const auto& th : thetas) vals.push_back(model.g(grid[g], th));
    const double mean = sample_mean(vals);
    double dev = 0.0;
    for (double v : vals) dev += (v - mean) * (v - mean);
    total += wts[g] * dev / static_cast<double>(thetas.size());
  }
  return std::sqrt(total);
}

StabilityReport run_stability_protocol(const Dataset& data, const std::vector<double>& rho_grid,
                                       std::size_t n_subsamples, double subsample_frac,
                                       const ExperimentConfig& cfg) {
  data.validate();
  if (rho_grid.empty()) throw PreconditionError("stability: empty rho grid");
  if (!(subsample_frac > 0.0 && subsample_frac <= 1.0))
    throw PreconditionError("stability: subsample fraction must lie in (0, 1]");
  if (n_subsamples < 1) throw PreconditionError("stability: need at least one subsample");
  const std::size_t n = data.size();
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(data.w[i] > 0.0)) throw InvalidInput("stability: covariate must be positive");
    u[i] = std::log(data.w[i]);
  }
  const FamilyPtr quad = make_family("quadratic");
  const FamilyPtr logquad = make_family("log_quadratic");
  const std::size_t p = quad->dim_theta();
  const double var_u = sample_variance(u);
  const double sigma_E = residual_sd(u, data.y, *quad);
  const std::size_t n_sub = static_cast<std::size_t>(std::llround(subsample_frac * static_cast<double>(n)));

  std::vector<std::vector<std::size_t>> subsets(n_subsamples);
  for (std::size_t s = 0; s < n_subsamples; ++s) {
    Rng r = Rng::stream(cfg.seed, {0x5B, s});
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n_sub; ++i) std::swap(idx[i], idx[i + r.index(n - i)]);
    idx.resize(n_sub);
    std::sort(idx.begin(), idx.end());
    subsets[s] = std::move(idx);
  }

  Dataset full;
  full.w = u;
  full.y = data.y;
  const auto& methods = cfg.stability.methods;
  const std::size_t R = rho_grid.size();
  const std::size_t K = methods.size();
  // fits[rho][sub + 1][method]; slot 0 is the full-data fit
  std::vector<std::vector<std::vector<MethodEstimate>>> fits(R, std::vector<std::vector<MethodEstimate>>(n_subsamples + 1));
  ExperimentConfig inner = cfg;
  inner.threads = 1;
  parallel_for(R * (n_subsamples + 1), cfg.threads, [&](std::size_t task) {
    const std::size_t ri = task / (n_subsamples + 1);
    const std::size_t s = task % (n_subsamples + 1);
    const double rho = rho_grid[ri];
    MEConfig me;
    me.kind = MEKind::classical;
    const double sx2 = std::max(var_u / (1.0 + rho), 0.1 * var_u);
    me.sigma_N_true = std::sqrt(rho * sx2);
    me.tau_N = 1.0;
    me.sigma_E_true = sigma_E;
    me.tau_E = 1.0;
    const Dataset d = s == 0 ? full : full.subset(subsets[s - 1]);
    Rng r = Rng::stream(cfg.seed, {0x5C, ri, s});
    try {
      fits[ri][s] = estimate_methods(d, quad, me, inner, methods, r);
    } catch (const std::exception& e) {
      for (const auto& m : methods) fits[ri][s].push_back({m, false, {}, e.what()});
    }
  });

  StabilityReport rep;
  rep.rho_grid = rho_grid;
  for (std::size_t k = 0; k < K; ++k) {
    StabilityMethodReport mr;
    mr.method = methods[k];
    std::vector<std::vector<double>> curves;
    for (std::size_t ri = 0; ri < R; ++ri) {
      const auto& f = fits[ri][0][k];
      mr.full_theta.push_back(f.ok ? f.theta : std::vector<double>(p, std::numeric_limits<double>::quiet_NaN()));
      if (f.ok) curves.push_back(f.theta);
      else ++mr.failures;
    }
    mr.S_hat = curves.empty() ? std::numeric_limits<double>::quiet_NaN()
                              : curve_deviation(*logquad, curves, data.w, cfg.stability.grid_points,
                                                cfg.stability.hist_bins);
    for (std::size_t ri = 0; ri < R; ++ri) {
      std::vector<double> sd(p, std::numeric_limits<double>::quiet_NaN());
      for (std::size_t d = 0; d < p; ++d) {
        std::vector<double> vals;
        for (std::size_t s = 1; s <= n_subsamples; ++s)
          if (fits[ri][s][k].ok) vals.push_back(fits[ri][s][k].theta[d]);
        if (vals.size() >= 2) sd[d] = std::sqrt(sample_variance(vals));
      }
      mr.within_rho_sd.push_back(sd);
      for (std::size_t s = 1; s <= n_subsamples; ++s)
        if (!fits[ri][s][k].ok) ++mr.failures;
    }
    mr.across_rho_var.assign(p, 0.0);
    for (std::size_t d = 0; d < p; ++d) {
      double acc = 0.0;
      std::size_t used = 0;
      for (std::size_t s = 1; s <= n_subsamples; ++s) {
        std::vector<double> vals;
        bool all_ok = true;
        for (std::size_t ri = 0; ri < R; ++ri) {
          if (!fits[ri][s][k].ok) all_ok = false;
          else vals.push_back(fits[ri][s][k].theta[d]);
        }
        if (!all_ok) continue;
        acc += vals.size() >= 2 ? sample_variance(vals) : 0.0;
        ++used;
      }
      mr.across_rho_var[d] = used > 0 ? acc / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
    }
    rep.methods.push_back(std::move(mr));
  }
  return rep;
}

RegimeComparison compare_pseudo_regimes(const Dataset& data, FamilyPtr model, const MEConfig& me,
                                        const ThetaPrior& prior, std::size_t m, PseudoRegime regime_a,
                                        PseudoRegime regime_b, const HMCConfig& hmc, std::size_t n_perm,
                                        std::size_t n_boot, Rng& rng) {
  Rng ra = rng.split({1});
  Rng rb = rng.split({2});
  Rng rt = rng.split({3});
  RegimeComparison out;
  out.a = pseudo_sample(data, model, me, prior, m, regime_a, hmc, ra);
  out.b = pseudo_sample(data, model, me, prior, m, regime_b, hmc, rb);

  std::vector<double> xs;
  for (const auto* s : {&out.a, &out.b}) xs.insert(xs.end(), s->x_tilde.begin(), s->x_tilde.end());
  const double mx = sample_mean(xs), sx = std::sqrt(sample_variance(xs));
  const double my = sample_mean(data.y), sy = std::sqrt(sample_variance(data.y));
  auto points = [&](const PseudoSampleSet& s) {
    PointSet ps(2);
    for (std::size_t i = 0; i < s.n; ++i)
      for (std::size_t j = 0; j < s.m; ++j) ps.push_back({(s.at(i, j) - mx) / sx, (data.y[i] - my) / sy});
    return ps;
  };
  out.test = two_sample_test(points(out.a), points(out.b), n_perm, n_boot, rt);
  return out;
}

MEConfig preset_me(const ExperimentConfig& cfg, double sigma_N) {
  MEConfig me = cfg.dgp.me;
  me.sigma_N_true = sigma_N;
  me.eps = cfg.diagnose.eps;
  me.eta_E = cfg.diagnose.eta_E;
  me.tau_N = cfg.diagnose.tau_N;
  me.validate();
  return me;
}

DiagnoseReport run_diagnose(const ExperimentConfig& cfg) {
  const FamilyPtr model = make_family(cfg.dgp.model);
  ExperimentConfig c = cfg;
  c.dgp.me = preset_me(cfg, cfg.diagnose.sigma_N);
  Rng data_rng = Rng::stream(cfg.seed, {0xD0});
  const Dataset data = simulate_from_config(c, cfg.diagnose.sigma_N, cfg.dgp.n, data_rng);
  HMCConfig h = cfg.hmc;
  h.warmup = cfg.diagnose.warmup;
  h.iters = cfg.diagnose.iters;
  Rng fit_rng = Rng::stream(cfg.seed, {0xD1});
  const auto res = hmc_posterior_mean(data, model, c.dgp.me,
                                      ThetaPrior::isotropic(model->dim_theta(), cfg.npl.theta_prior_sd), h, fit_rng);
  DiagnoseReport rep;
  const std::size_t p = model->dim_theta();
  for (std::size_t k = 0; k < p; ++k) {
    rep.names.push_back(res.names[k]);
    std::vector<double> all;
    for (const auto& col : chain_columns(res.run.chains, k)) all.insert(all.end(), col.begin(), col.end());
    rep.mean.push_back(sample_mean(all));
    rep.sd.push_back(std::sqrt(sample_variance(all)));
  }
  rep.r_hat = res.diagnostics.r_hat;
  rep.ess_bulk = res.diagnostics.ess_bulk;
  rep.ess_tail = res.diagnostics.ess_tail;
  rep.divergences = res.diagnostics.divergences;
  for (const auto& ch : res.run.chains) rep.accept_rate.push_back(ch.accept_rate);
  return rep;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

std::string output_header(const ExperimentConfig& cfg) {
  return "# seed=" + std::to_string(cfg.seed) + ",config_hash=" + config_hash(cfg);
}

void write_rmse_csv(std::ostream& out, const RmseTable& t, const ExperimentConfig& cfg) {
  out << output_header(cfg) << '\n';
  out << "method,me_scale,theta_rmse,y_rmse,replications,failures\n";
  for (const auto& r : t.rows) {
    out << csv_field(r.method) << ',' << format_double(r.me_scale) << ',' << format_double(r.theta_rmse) << ','
        << format_double(r.y_rmse) << ',' << r.count << ',' << r.failures << '\n';
  }
}

void write_rmse_replications_csv(std::ostream& out, const RmseTable& t, const ExperimentConfig& cfg) {
  out << output_header(cfg) << '\n';
  out << "method,me_scale,replication,theta_error,y_error,status\n";
  for (const auto& r : t.replications) {
    out << csv_field(r.method) << ',' << format_double(r.me_scale) << ',' << r.replication << ',';
    if (r.ok) {
      out << format_double(r.theta_error) << ',' << format_double(r.y_error) << ",ok\n";
    } else {
      out << ",," << csv_field("failed: " + r.error) << '\n';
    }
  }
}

void write_contamination_csv(std::ostream& out, const ContaminationReport& r, const ExperimentConfig& cfg) {
  out << output_header(cfg) << '\n';
  out << "r_y,method,theta_rmse,y_rmse,n_contaminated,status\n";
  for (const auto& row : r.rows) {
    out << format_double(row.r_y) << ',' << csv_field(row.method) << ',';
    if (row.ok) {
      out << format_double(row.theta_rmse) << ',' << format_double(row.y_rmse) << ',' << row.n_contaminated << ",ok\n";
    } else {
      out << ",," << row.n_contaminated << ',' << csv_field("failed: " + row.error) << '\n';
    }
  }
}

void write_diagnostics_csv(std::ostream& out, const DiagnoseReport& r, const ExperimentConfig& cfg) {
  out << output_header(cfg) << '\n';
  out << "param,mean,sd,r_hat,ess_bulk,ess_tail\n";
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    out << r.names[k] << ',' << format_double(r.mean[k]) << ',' << format_double(r.sd[k]) << ','
        << format_double(r.r_hat[k]) << ',' << format_double(r.ess_bulk[k]) << ',' << format_double(r.ess_tail[k])
        << '\n';
  }
  out << "# divergences=" << r.divergences << '\n';
}

json stability_json(const StabilityReport& r, const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["config_hash"] = config_hash(cfg);
  j["rho_grid"] = r.rho_grid;
  j["methods"] = json::array();
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  auto nums = [&](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
  };
  for (const auto& m : r.methods) {
    json jm;
    jm["method"] = m.method;
    jm["S_hat"] = num(m.S_hat);
    jm["within_rho_sd"] = json::array();
    for (const auto& row : m.within_rho_sd) jm["within_rho_sd"].push_back(nums(row));
    jm["across_rho_var"] = nums(m.across_rho_var);
    jm["full_theta"] = json::array();
    for (const auto& row : m.full_theta) jm["full_theta"].push_back(nums(row));
    jm["failures"] = m.failures;
    j["methods"].push_back(jm);
  }
  return j;
}

}  // namespace nplme
