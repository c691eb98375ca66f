#include "nplme/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nplme {

std::vector<double> sample_dp_weights(double c, std::size_t truncation, std::size_t m, Rng& rng) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidParameter("sample_dp_weights: c must be >= 0");
  if (truncation < 1) throw InvalidParameter("sample_dp_weights: truncation must be >= 1");
  if (c == 0.0 && m == 0) throw PreconditionError("sample_dp_weights: c = 0 requires m >= 1");

  const std::size_t total = truncation + m;
  std::vector<double> logs(total, -std::numeric_limits<double>::infinity());
  if (c > 0.0) {
    const double shape = c / static_cast<double>(truncation);
    for (std::size_t k = 0; k < truncation; ++k) logs[k] = rng.log_gamma_variate(shape);
  }
  for (std::size_t j = 0; j < m; ++j) logs[truncation + j] = rng.log_gamma_variate(1.0);

  // Normalise in log space; Gamma draws that underflow simply carry zero mass.
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> w(total);
  double sum = 0.0;
  for (std::size_t k = 0; k < total; ++k) {
    w[k] = std::exp(logs[k] - top);
    sum += w[k];
  }
  for (double& v : w) v /= sum;
  return w;
}

WeightedSample to_weighted_sample(const DPDraw<double>& d) {
  return {PointSet::scalars(d.atoms), d.weights};
}

WeightedSample to_weighted_sample(const DPDraw<XY>& d) {
  PointSet atoms(2);
  atoms.reserve(d.atoms.size());
  for (const auto& a : d.atoms) atoms.push_back({a.x, a.y});
  return {std::move(atoms), d.weights};
}

WeightedSample pool_measures(const std::vector<WeightedSample>& parts) {
  if (parts.empty()) throw InvalidMeasure("pool_measures: nothing to pool");
  const std::size_t dim = parts.front().atoms.dim();
  const double share = 1.0 / static_cast<double>(parts.size());
  WeightedSample out{PointSet(dim), {}};
  std::size_t total = 0;
  for (const auto& p : parts) total += p.weights.size();
  out.atoms.reserve(total);
  out.weights.reserve(total);
  for (const auto& p : parts) {
    if (p.atoms.dim() != dim) throw InvalidMeasure("pool_measures: dimension mismatch");
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      out.atoms.push_back(p.atoms[i]);
      out.weights.push_back(share * p.weights[i]);
    }
  }
  return out;
}

WeightedSample prune_weights(const WeightedSample& s, double threshold) {
  WeightedSample out{PointSet(s.atoms.dim()), {}};
  double kept = 0.0;
  for (std::size_t i = 0; i < s.weights.size(); ++i) {
    if (s.weights[i] > threshold) {
      out.atoms.push_back(s.atoms[i]);
      out.weights.push_back(s.weights[i]);
      kept += s.weights[i];
    }
  }
  if (out.weights.empty()) throw InvalidMeasure("prune_weights: every atom fell below the threshold");
  for (double& w : out.weights) w /= kept;
  return out;
}

}  // namespace nplme
