#pragma once

#include <string>
#include <vector>

#include "nplme/hmc.hpp"
#include "nplme/models.hpp"
#include "nplme/rng.hpp"

namespace nplme {

/// A: n*m independent single-state chains. B: every 50th post-warmup state of
/// one multi-chain run. C: m maximally spaced post-warmup states.
enum class PseudoRegime { A_independent, B_thinned, C_spaced };

std::string to_string(PseudoRegime r);
PseudoRegime pseudo_regime_from_string(const std::string& s);

/// Latent draws x_tilde(i, j), i < n, j < m.
struct PseudoSampleSet {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t dim_theta = 0;
  PseudoRegime regime = PseudoRegime::C_spaced;
  std::vector<double> x_tilde;       // n x m, row-major
  std::vector<double> theta_draws;   // rows x dim_theta; m rows (B, C) or n*m rows (A, row i*m + j)

  double at(std::size_t i, std::size_t j) const { return x_tilde[i * m + j]; }
  std::size_t theta_rows() const noexcept { return dim_theta == 0 ? 0 : theta_draws.size() / dim_theta; }
  void validate() const;
};

inline constexpr std::size_t kThinInterval = 50;

/// Regime B or C pseudo-samples from an existing run over (theta, x). Regime
/// B uses the states numbered L, 2L, ..., mL (1-based) of the concatenated
/// post-warmup draws; regime C uses indices round(q (S - 1)) with
/// q = (j - 0.5) / m. Too few draws raises ConfigError.
PseudoSampleSet pseudo_from_chains(const std::vector<ChainOutput>& chains, std::size_t dim_theta,
                                   std::size_t n, std::size_t m, PseudoRegime regime,
                                   std::size_t thin = kThinInterval);

/// Posterior-predictive latent draws under the working model. `config.seed`
/// is replaced by a draw from `rng`.
PseudoSampleSet pseudo_sample(const Dataset& data, FamilyPtr model, const MEConfig& me,
                              const ThetaPrior& theta_prior, std::size_t m, PseudoRegime regime,
                              HMCConfig config, Rng& rng);

}  // namespace nplme
