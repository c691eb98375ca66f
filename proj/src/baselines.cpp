#include "nplme/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "nplme/dataset_io.hpp"
#include "nplme/error.hpp"

namespace nplme {

namespace {

double residual_ss(std::span<const double> w, std::span<const double> y, const RegressionFamily& model,
                   std::span<const double> theta) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double r = y[i] - model.g(w[i], theta);
    s += r * r;
  }
  return s;
}

void check_xy(std::span<const double> w, std::span<const double> y, const RegressionFamily& model) {
  if (w.size() != y.size()) throw InvalidInput("nls: w and y differ in length");
  if (w.size() <= model.dim_theta()) throw PreconditionError("nls: need more observations than parameters");
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!std::isfinite(w[i]) || !std::isfinite(y[i])) throw InvalidInput("nls: non-finite data");
}

}  // namespace

std::vector<double> default_nls_init(std::span<const double> w, std::span<const double> y,
                                     const RegressionFamily& model) {
  check_xy(w, y, model);
  const std::size_t p = model.dim_theta();
  if (model.name() == "sigmoid") {
    return {*std::max_element(y.begin(), y.end()), 1.0,
            sample_median(std::vector<double>(w.begin(), w.end()))};
  }
  // Remaining families are linear in theta: y ~ J theta with J = dg/dtheta.
  Eigen::MatrixXd J(w.size(), p);
  Eigen::VectorXd rhs(w.size());
  const std::vector<double> zero(p, 0.0);
  std::vector<double> row(p);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (model.positive_domain() && !(w[i] > 0.0)) throw InvalidInput("nls: covariate must be positive");
    rhs(static_cast<Eigen::Index>(i)) = y[i] - model.g_and_dtheta(w[i], zero, row);
    for (std::size_t k = 0; k < p; ++k) J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
  }
  const Eigen::VectorXd sol = J.colPivHouseholderQr().solve(rhs);
  return {sol.data(), sol.data() + sol.size()};
}

NLSResult nls_fit(std::span<const double> w, std::span<const double> y, const RegressionFamily& model,
                  std::span<const double> theta_init, const NLSSettings& settings) {
  check_xy(w, y, model);
  const std::size_t n = w.size();
  const std::size_t p = model.dim_theta();
  if (theta_init.size() != p) throw InvalidInput("nls: theta_init has the wrong length");

  NLSResult res;
  res.theta_hat.assign(theta_init.begin(), theta_init.end());
  res.residual_ss = residual_ss(w, y, model, res.theta_hat);
  if (!std::isfinite(res.residual_ss)) throw InvalidInput("nls: non-finite residuals at the initial point");

  double damping = settings.initial_damping;
  Eigen::MatrixXd J(n, p);
  Eigen::VectorXd r(n);
  std::vector<double> row(p);
  std::vector<double> cand(p);
  while (res.iterations < settings.max_iters) {
    ++res.iterations;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      r(ii) = y[i] - model.g_and_dtheta(w[i], res.theta_hat, row);
      for (std::size_t k = 0; k < p; ++k) J(ii, static_cast<Eigen::Index>(k)) = row[k];
    }
    const Eigen::VectorXd g = J.transpose() * r;
    if (g.norm() < settings.grad_tol) {
      res.converged = true;
      break;
    }
    const Eigen::MatrixXd A = J.transpose() * J;
    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd M = A;
      for (Eigen::Index k = 0; k < M.rows(); ++k) M(k, k) += damping * std::max(A(k, k), 1e-12);
      const Eigen::VectorXd delta = M.ldlt().solve(g);
      if (delta.allFinite()) {
        for (std::size_t k = 0; k < p; ++k) cand[k] = res.theta_hat[k] + delta(static_cast<Eigen::Index>(k));
        const double ssr = residual_ss(w, y, model, cand);
        if (std::isfinite(ssr) && ssr <= res.residual_ss) {
          const bool stalled = res.residual_ss - ssr <= 1e-15 * res.residual_ss;
          res.theta_hat = cand;
          res.residual_ss = ssr;
          res.trace.push_back(ssr);
          damping = std::max(damping / 3.0, 1e-12);
          accepted = true;
          if (stalled && delta.norm() <= 1e-12 * (1.0 + Eigen::Map<Eigen::VectorXd>(cand.data(), p).norm())) {
            res.converged = g.norm() <= 1e-6 * (1.0 + std::sqrt(res.residual_ss) * J.norm());
            return res;
          }
          continue;
        }
      }
      damping *= 4.0;
      if (damping > 1e16) {
        // no decrease possible within floating-point resolution
        res.converged = g.norm() <= 1e-6 * (1.0 + std::sqrt(res.residual_ss) * J.norm());
        return res;
      }
    }
  }
  return res;
}

NLSResult nls_fit(std::span<const double> w, std::span<const double> y, const RegressionFamily& model) {
  const auto init = default_nls_init(w, y, model);
  return nls_fit(w, y, model, init);
}

void SimexConfig::validate() const {
  if (lambda_grid.size() < 3) throw InvalidParameter("simex: lambda grid needs at least 3 points");
  if (std::find(lambda_grid.begin(), lambda_grid.end(), 0.0) == lambda_grid.end())
    throw InvalidParameter("simex: lambda grid must contain 0");
  for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
    if (!(lambda_grid[k] >= 0.0)) throw InvalidParameter("simex: lambdas must be nonnegative");
    if (k > 0 && !(lambda_grid[k] > lambda_grid[k - 1]))
      throw InvalidParameter("simex: lambda grid must be increasing");
  }
  if (B_sim < 1) throw InvalidParameter("simex: B_sim must be positive");
  if (!(sigma_N_assumed >= 0.0)) throw InvalidParameter("simex: sigma_N_assumed must be nonnegative");
}

double quadratic_extrapolate(std::span<const double> lambdas, std::span<const double> values, double at) {
  if (lambdas.size() != values.size() || lambdas.size() < 3)
    throw InvalidInput("quadratic_extrapolate: need at least 3 aligned points");
  const auto n = static_cast<Eigen::Index>(lambdas.size());
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double l = lambdas[static_cast<std::size_t>(i)];
    X(i, 0) = 1.0;
    X(i, 1) = l;
    X(i, 2) = l * l;
    v(i) = values[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d c = X.colPivHouseholderQr().solve(v);
  return c(0) + c(1) * at + c(2) * at * at;
}

SimexResult simex_fit(std::span<const double> w, std::span<const double> y, const RegressionFamily& model,
                      const SimexConfig& cfg, Rng& rng) {
  cfg.validate();
  check_xy(w, y, model);
  const std::size_t p = model.dim_theta();
  const std::uint64_t base = rng.engine()();
  const NLSResult naive = nls_fit(w, y, model);

  SimexResult res;
  std::vector<double> wl(w.size());
  for (std::size_t k = 0; k < cfg.lambda_grid.size(); ++k) {
    const double lambda = cfg.lambda_grid[k];
    const double scale = std::sqrt(lambda) * cfg.sigma_N_assumed;
    std::vector<double> mean(p, 0.0);
    std::size_t ok = 0;
    for (std::size_t s = 0; s < cfg.B_sim; ++s) {
      Rng sim_rng = Rng::stream(base, {k, s});
      for (std::size_t i = 0; i < w.size(); ++i) wl[i] = w[i] + scale * sim_rng.normal();
      SimexTraceRow row{lambda, s, {}, false};
      try {
        const NLSResult f = nls_fit(wl, y, model, naive.theta_hat);
        row.theta = f.theta_hat;
        row.converged = f.converged;
      } catch (const Error&) {
        row.theta.assign(p, std::numeric_limits<double>::quiet_NaN());
      }
      if (row.converged) {
        ++ok;
        for (std::size_t d = 0; d < p; ++d) mean[d] += row.theta[d];
      }
      res.trace.push_back(std::move(row));
    }
    if (2 * ok < cfg.B_sim)
      throw SimexUnstable(lambda, "fewer than half of the NLS fits converged");
    for (auto& v : mean) v /= static_cast<double>(ok);
    res.theta_by_lambda.push_back(std::move(mean));
  }
  res.theta_hat.resize(p);
  std::vector<double> vals(cfg.lambda_grid.size());
  for (std::size_t d = 0; d < p; ++d) {
    for (std::size_t k = 0; k < vals.size(); ++k) vals[k] = res.theta_by_lambda[k][d];
    res.theta_hat[d] = quadratic_extrapolate(cfg.lambda_grid, vals, -1.0);
  }
  return res;
}

void write_simex_trace_csv(std::ostream& out, const SimexResult& r) {
  const std::size_t p = r.theta_hat.size();
  out << "lambda,sim";
  for (std::size_t d = 0; d < p; ++d) out << ",theta_" << d + 1;
  out << '\n';
  for (const auto& row : r.trace) {
    out << format_double(row.lambda) << ',' << row.sim;
    for (double v : row.theta) out << ',' << format_double(v);
    out << '\n';
  }
}

std::vector<std::vector<double>> default_hmc_inits(const Dataset& data, const RegressionFamily& model,
                                                   std::size_t n_chains, Rng& rng,
                                                   const TargetLogDensity* target) {
  std::vector<double> theta = default_nls_init(data.w, data.y, model);
  try {
    std::vector<double> fitted = nls_fit(data.w, data.y, model).theta_hat;
    if (target) {
      auto at_w = [&](const std::vector<double>& t) {
        std::vector<double> q(t);
        q.insert(q.end(), data.w.begin(), data.w.end());
        const double v = target->log_density(q);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
      };
      if (at_w(fitted) >= at_w(theta)) theta = std::move(fitted);
    } else {
      theta = std::move(fitted);
    }
  } catch (const Error&) {
  }
  std::vector<std::vector<double>> inits;
  for (std::size_t c = 0; c < n_chains; ++c) {
    std::vector<double> q;
    for (double t : theta) q.push_back(t + 0.1 * rng.normal());
    q.insert(q.end(), data.w.begin(), data.w.end());
    inits.push_back(std::move(q));
  }
  return inits;
}

HMCBaselineResult hmc_posterior_mean(const Dataset& data, FamilyPtr model, const MEConfig& me,
                                     const ThetaPrior& theta_prior, HMCConfig hmc_config, Rng& rng) {
  const TargetLogDensity target = joint_neg_log_posterior(data, model, me, theta_prior);
  hmc_config.seed = rng.engine()();
  const auto inits = default_hmc_inits(data, *model, hmc_config.n_chains, rng, &target);
  const std::size_t p = model->dim_theta();

  HMCBaselineResult res;
  res.run = run_hmc(target, hmc_config, inits, p);
  res.names = target.names;
  res.diagnostics = res.run.diagnostics;
  res.theta_hat.assign(p, 0.0);
  std::size_t count = 0;
  for (const auto& c : res.run.chains) {
    for (std::size_t it = 0; it < c.iters(); ++it) {
      for (std::size_t k = 0; k < p; ++k) res.theta_hat[k] += c.at(it, k);
      ++count;
    }
  }
  for (auto& v : res.theta_hat) v /= static_cast<double>(count);
  for (double r : res.diagnostics.r_hat)
    if (!(r <= 1.1)) res.rhat_warning = true;
  return res;
}

}  // namespace nplme
