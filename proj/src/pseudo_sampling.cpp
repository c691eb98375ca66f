#include "nplme/pseudo_sampling.hpp"

#include <cmath>

#include "nplme/baselines.hpp"
#include "nplme/error.hpp"

namespace nplme {

std::string to_string(PseudoRegime r) {
  switch (r) {
    case PseudoRegime::A_independent: return "A";
    case PseudoRegime::B_thinned: return "B";
    case PseudoRegime::C_spaced: return "C";
  }
  return "C";
}

PseudoRegime pseudo_regime_from_string(const std::string& s) {
  if (s == "A" || s == "A_independent") return PseudoRegime::A_independent;
  if (s == "B" || s == "B_thinned") return PseudoRegime::B_thinned;
  if (s == "C" || s == "C_spaced") return PseudoRegime::C_spaced;
  throw ConfigError("unknown pseudo-sampling regime '" + s + "'");
}

void PseudoSampleSet::validate() const {
  if (x_tilde.size() != n * m) throw InvalidInput("pseudo samples: x_tilde is not n x m");
  const std::size_t rows = regime == PseudoRegime::A_independent ? n * m : m;
  if (theta_draws.size() != rows * dim_theta) throw InvalidInput("pseudo samples: theta draws have the wrong shape");
  for (double v : x_tilde)
    if (!std::isfinite(v)) throw InvalidInput("pseudo samples: non-finite latent draw");
}

PseudoSampleSet pseudo_from_chains(const std::vector<ChainOutput>& chains, std::size_t dim_theta,
                                   std::size_t n, std::size_t m, PseudoRegime regime, std::size_t thin) {
  if (m < 1) throw PreconditionError("pseudo samples: m must be at least 1");
  if (regime == PseudoRegime::A_independent)
    throw InvalidInput("pseudo samples: regime A needs independent chains");
  if (chains.empty()) throw InvalidInput("pseudo samples: no chains");
  std::vector<std::span<const double>> states;
  for (const auto& c : chains) {
    if (c.dim != dim_theta + n) throw InvalidInput("pseudo samples: chain dimension differs from theta + n");
    for (std::size_t it = 0; it < c.iters(); ++it) states.push_back(c.row(it));
  }
  const std::size_t total = states.size();

  std::vector<std::size_t> idx(m);
  if (regime == PseudoRegime::B_thinned) {
    if (thin < 1) throw ConfigError("pseudo samples: thinning interval must be positive");
    if (m * thin > total)
      throw ConfigError("pseudo samples: " + std::to_string(total) + " post-warmup draws cannot supply " +
                        std::to_string(m) + " states at spacing " + std::to_string(thin));
    for (std::size_t j = 0; j < m; ++j) idx[j] = (j + 1) * thin - 1;
  } else {
    if (total < m)
      throw ConfigError("pseudo samples: " + std::to_string(total) + " post-warmup draws cannot supply " +
                        std::to_string(m) + " spaced states");
    for (std::size_t j = 0; j < m; ++j) {
      const double q = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
      idx[j] = static_cast<std::size_t>(std::llround(q * static_cast<double>(total - 1)));
    }
  }

  PseudoSampleSet out;
  out.n = n;
  out.m = m;
  out.dim_theta = dim_theta;
  out.regime = regime;
  out.x_tilde.resize(n * m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto s = states[idx[j]];
    out.theta_draws.insert(out.theta_draws.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(dim_theta));
    for (std::size_t i = 0; i < n; ++i) out.x_tilde[i * m + j] = s[dim_theta + i];
  }
  out.validate();
  return out;
}

PseudoSampleSet pseudo_sample(const Dataset& data, FamilyPtr model, const MEConfig& me,
                              const ThetaPrior& theta_prior, std::size_t m, PseudoRegime regime,
                              HMCConfig config, Rng& rng) {
  if (m < 1) throw PreconditionError("pseudo samples: m must be at least 1");
  const TargetLogDensity target = joint_neg_log_posterior(data, model, me, theta_prior);
  const std::size_t n = data.size();
  const std::size_t p = model->dim_theta();
  config.seed = rng.engine()();

  if (regime != PseudoRegime::A_independent) {
    const auto inits = default_hmc_inits(data, *model, config.n_chains, rng, &target);
    const HMCResult run = run_hmc(target, config, inits, p);
    return pseudo_from_chains(run.chains, p, n, m, regime);
  }

  PseudoSampleSet out;
  out.n = n;
  out.m = m;
  out.dim_theta = p;
  out.regime = regime;
  out.x_tilde.resize(n * m);
  out.theta_draws.resize(n * m * p);
  HMCConfig single = config;
  single.n_chains = 1;
  single.iters = 1;
  const auto base_inits = default_hmc_inits(data, *model, 1, rng, &target);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t k = i * m + j;
      single.seed = Rng::stream(config.seed, {k}).seed();
      const HMCResult run = run_hmc(target, single, base_inits, p);
      const auto s = run.chains.front().row(0);
      out.x_tilde[k] = s[p + i];
      std::copy(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(p), out.theta_draws.begin() + static_cast<std::ptrdiff_t>(k * p));
    }
  }
  out.validate();
  return out;
}

}  // namespace nplme
