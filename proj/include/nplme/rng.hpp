#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nplme {

/// Seeded random stream.
///
/// Streams are derived from a master seed by hashing a path of counters
/// (`Rng::stream(seed, {i, b})`), so the stream for replicate b of
/// observation i does not depend on how many other streams were consumed
/// before it. Not thread-safe; give every worker its own stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  static Rng stream(std::uint64_t master, std::initializer_list<std::uint64_t> path);

  /// Child stream keyed by `path`, derived from this stream's seed only.
  Rng split(std::initializer_list<std::uint64_t> path) const;

  std::uint64_t seed() const noexcept { return seed_; }

  double uniform();                // [0, 1)
  double uniform_open();           // (0, 1)
  double normal();                 // N(0, 1)
  double normal(double mean, double sd);
  /// log of a Gamma(shape, 1) variate; stays finite for shapes down to 1e-300.
  double log_gamma_variate(double shape);
  std::size_t index(std::size_t n);  // uniform on {0, ..., n-1}

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace nplme
