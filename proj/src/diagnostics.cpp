#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "nplme/error.hpp"
#include "nplme/hmc.hpp"

namespace nplme {

namespace {

using Chains = std::vector<std::vector<double>>;

// Each chain cut into two halves; an odd middle draw is dropped.
Chains split_chains(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half < 2) throw PreconditionError("diagnostics: chains need at least 4 draws");
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.end() - half, c.end());
  }
  return out;
}

// Normal scores of pooled ranks, (r - 3/8) / (S + 1/4), average ranks for ties.
Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (std::size_t i = 0; i < chains[c].size(); ++i) all.emplace_back(chains[c][i], all.size());
  std::vector<double> ranks(all.size());
  auto order = all;
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && order[j].first == order[i].first) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k].second] = r;
    i = j;
  }
  const boost::math::normal_distribution<double> stdnorm;
  const double s = static_cast<double>(all.size());
  Chains out;
  std::size_t k = 0;
  for (const auto& c : chains) {
    std::vector<double> z(c.size());
    for (auto& v : z) v = boost::math::quantile(stdnorm, (ranks[k++] - 0.375) / (s + 0.25));
    out.push_back(std::move(z));
  }
  return out;
}

Chains fold(const Chains& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  const double med = sample_median(all);
  Chains out = chains;
  for (auto& c : out)
    for (auto& v : c) v = std::abs(v - med);
  return out;
}

bool is_constant(const Chains& chains) {
  const double first = chains.front().front();
  for (const auto& c : chains)
    for (double v : c)
      if (v != first) return false;
  return true;
}

// Classic R-hat on equal-length chains.
double rhat_raw(const Chains& chains) {
  const std::size_t m = chains.size();
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = sample_mean(chains[c]);
    vars[c] = sample_variance(chains[c]);
  }
  const double w = sample_mean(vars);
  const double b = m > 1 ? n * sample_variance(means) : 0.0;
  if (!(w > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double autocov(const std::vector<double>& x, double mean, std::size_t lag) {
  double s = 0.0;
  for (std::size_t t = 0; t + lag < x.size(); ++t) s += (x[t] - mean) * (x[t + lag] - mean);
  return s / static_cast<double>(x.size());
}

// Multi-chain ESS with Geyer's initial positive and monotone sequence.
double ess_raw(const Chains& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  const double nd = static_cast<double>(n);
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = sample_mean(chains[c]);
    vars[c] = sample_variance(chains[c]);
  }
  const double w = sample_mean(vars);
  const double b_over_n = m > 1 ? sample_variance(means) : 0.0;
  const double var_plus = (nd - 1.0) / nd * w + b_over_n;
  if (!(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();

  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) acov += autocov(chains[c], means[c], lag);
    acov /= static_cast<double>(m);
    // lag 0 autocovariance uses the biased per-chain variance
    return 1.0 - (w - acov) / var_plus;
  };

  std::vector<double> rhos;
  rhos.push_back(1.0);
  rhos.push_back(rho(1));
  std::size_t t = 1;
  while (t + 2 < n) {
    const double r1 = rho(t + 1);
    const double r2 = rho(t + 2);
    if (r1 + r2 < 0.0) break;
    rhos.push_back(r1);
    rhos.push_back(r2);
    t += 2;
  }
  // pairs P_k = rho_{2k} + rho_{2k+1}, forced monotone
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < rhos.size(); k += 2) {
    double pk = rhos[k] + rhos[k + 1];
    if (pk < 0.0) break;
    pk = std::min(pk, prev);
    prev = pk;
    sum += pk;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(static_cast<double>(m) * nd));
  return static_cast<double>(m) * nd / tau;
}

double quantile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double ess_indicator(const Chains& chains, double q) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  const double cut = quantile_of(all, q);
  Chains ind = chains;
  for (auto& c : ind)
    for (auto& v : c) v = v <= cut ? 1.0 : 0.0;
  if (is_constant(ind)) return static_cast<double>(all.size());
  return ess_raw(split_chains(ind));
}

void check_chains(const Chains& chains) {
  if (chains.empty()) throw PreconditionError("diagnostics: no chains");
  for (const auto& c : chains)
    if (c.size() != chains.front().size())
      throw PreconditionError("diagnostics: chains must have equal length");
}

}  // namespace

double split_rhat(const Chains& chains) {
  check_chains(chains);
  if (is_constant(chains)) return 1.0;
  const Chains split = split_chains(chains);
  const double bulk = rhat_raw(rank_normalize(split));
  const double tail = rhat_raw(rank_normalize(fold(split)));
  return std::max(bulk, tail);
}

double ess_bulk(const Chains& chains) {
  check_chains(chains);
  const std::size_t total = chains.size() * chains.front().size();
  if (is_constant(chains)) return static_cast<double>(total);
  return ess_raw(rank_normalize(split_chains(chains)));
}

double ess_tail(const Chains& chains) {
  check_chains(chains);
  return std::min(ess_indicator(chains, 0.05), ess_indicator(chains, 0.95));
}

Diagnostics compute_diagnostics(const std::vector<ChainOutput>& chains, std::size_t n_params) {
  Diagnostics d;
  if (chains.empty()) return d;
  for (const auto& c : chains) d.divergences += c.divergence_count;
  if (chains.front().iters() < 4) return d;  // too short for split statistics
  const std::size_t dim = chains.front().dim;
  const std::size_t np = n_params == 0 ? dim : std::min(n_params, dim);
  for (std::size_t k = 0; k < np; ++k) {
    const auto cols = chain_columns(chains, k);
    d.r_hat.push_back(split_rhat(cols));
    d.ess_bulk.push_back(ess_bulk(cols));
    d.ess_tail.push_back(ess_tail(cols));
  }
  return d;
}

}  // namespace nplme
