#include "nplme/rng.hpp"

#include <cmath>

namespace nplme {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master ^ 0x6a09e667f3bcc908ULL);
  for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x3c6ef372fe94f82bULL));
  return Rng(h);
}

Rng Rng::split(std::initializer_list<std::uint64_t> path) const {
  return stream(seed_, path);
}

double Rng::uniform() {
  return std::generate_canonical<double, 53>(engine_);
}

double Rng::uniform_open() {
  double u = 0.0;
  while (u == 0.0) u = uniform();
  return u;
}

double Rng::normal() { return normal_(engine_); }

double Rng::normal(double mean, double sd) { return mean + sd * normal(); }

double Rng::log_gamma_variate(double shape) {
  // Shape augmentation: G(a) = G(a + 1) * U^(1/a), kept in log space so that
  // shapes like 1e-6 do not underflow to an exact zero before normalisation.
  if (shape < 0.1) {
    std::gamma_distribution<double> g(shape + 1.0, 1.0);
    const double log_u = std::log(uniform_open());
    return std::log(g(engine_)) + log_u / shape;
  }
  std::gamma_distribution<double> g(shape, 1.0);
  double v = g(engine_);
  while (v <= 0.0) v = g(engine_);
  return std::log(v);
}

std::size_t Rng::index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(engine_);
}

}  // namespace nplme
