#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace deconf {

/// Seeded pseudo-random source used by every sampler in the library.
///
/// All stochastic operations take an explicit seed (or an Rng) so that a run
/// is a pure function of its inputs. Sub-streams are obtained with
/// derive_seed() rather than by sharing an engine across components.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return normal_(engine_); }

  /// Gamma with the given shape and scale (mean = shape * scale).
  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }

  /// Inverse-gamma with shape a and scale b: the reciprocal of Gamma(a, rate b).
  double inverse_gamma(double shape, double scale) { return 1.0 / gamma(shape, 1.0 / scale); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// splitmix64 finalizer; the mixing step behind derive_seed().
std::uint64_t mix64(std::uint64_t x);

/// Seed for a named stage of a run: mix64(master ^ fnv1a(stage)).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

/// Seed for an indexed sub-stream (row, replicate, simulation, ...).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

}  // namespace deconf
