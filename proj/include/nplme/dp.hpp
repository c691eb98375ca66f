#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "nplme/error.hpp"
#include "nplme/kernels.hpp"
#include "nplme/models.hpp"
#include "nplme/rng.hpp"

namespace nplme {

/// Dirichlet(c/T, ..., c/T, 1, ..., 1) with T prior slots and m pseudo slots.
/// With c = 0 the prior block is exactly zero.
std::vector<double> sample_dp_weights(double c, std::size_t truncation, std::size_t m, Rng& rng);

/// Per-observation DP posterior DP(c + m, c/(c+m) Q + 1/(c+m) sum_j delta(atom_j)).
template <class Atom>
struct DPPosteriorSpec {
  double c = 1e-4;
  std::vector<Atom> pseudo_atoms;
  std::function<Atom(Rng&)> prior_sampler;
  std::size_t truncation = 100;

  std::size_t m() const noexcept { return pseudo_atoms.size(); }

  void validate() const {
    if (!(c >= 0.0)) throw InvalidParameter("DP spec: concentration must be nonnegative");
    if (truncation < 1) throw InvalidParameter("DP spec: truncation must be at least 1");
    if (pseudo_atoms.empty()) throw PreconditionError("DP spec: at least one pseudo atom is required");
    if (c > 0.0 && !prior_sampler) throw PreconditionError("DP spec: missing prior sampler");
  }
};

/// Truncated DP realisation: `truncation` prior atoms followed by the pseudo atoms.
template <class Atom>
struct DPDraw {
  std::vector<Atom> atoms;
  std::vector<double> weights;
};

template <class Atom>
DPDraw<Atom> draw_dp_posterior(const DPPosteriorSpec<Atom>& spec, Rng& rng) {
  spec.validate();
  DPDraw<Atom> d;
  d.atoms.reserve(spec.truncation + spec.m());
  for (std::size_t k = 0; k < spec.truncation; ++k) {
    if (spec.prior_sampler) {
      d.atoms.push_back(spec.prior_sampler(rng));
    } else {
      d.atoms.push_back(spec.pseudo_atoms.front());  // weight is exactly zero when c = 0
    }
  }
  d.atoms.insert(d.atoms.end(), spec.pseudo_atoms.begin(), spec.pseudo_atoms.end());
  d.weights = sample_dp_weights(spec.c, spec.truncation, spec.m(), rng);
  return d;
}

/// Weighted-sample views of DP draws (scalar atoms or (x, y) pairs).
WeightedSample to_weighted_sample(const DPDraw<double>& d);
WeightedSample to_weighted_sample(const DPDraw<XY>& d);

/// Equal-weight mixture (1/k) sum_r P_r of weighted samples of the same dimension.
WeightedSample pool_measures(const std::vector<WeightedSample>& parts);

/// Drops atoms whose weight is below `threshold` and renormalises.
WeightedSample prune_weights(const WeightedSample& s, double threshold);

}  // namespace nplme
