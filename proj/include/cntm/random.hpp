#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace cntm {

using Rng = std::mt19937_64;

// Distribution objects are constructed per draw: none of them may carry
// cached state across draws, otherwise checkpoint/resume would diverge.

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool bernoulli(double p, Rng& rng) { return uniform01(rng) < p; }

/// Gamma with shape/rate parameterisation.
inline double sample_gamma(double shape, double rate, Rng& rng) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

/// Returns (x, 1 - x) for x ~ Beta(a, b); the complement is computed from the
/// two gamma draws so it keeps precision when x is close to 1.
struct BetaDraw {
  double value;
  double complement;
};

inline BetaDraw sample_beta(double a, double b, Rng& rng) {
  const double x = sample_gamma(a, 1.0, rng);
  const double y = sample_gamma(b, 1.0, rng);
  const double sum = x + y;
  if (!(sum > 0.0)) return {0.5, 0.5};
  return {x / sum, y / sum};
}

/// Index drawn proportionally to non-negative weights summing to `total`.
inline std::size_t sample_index(std::span<const double> weights, double total, Rng& rng) {
  double u = uniform01(rng) * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return last_positive;
}

std::string serialize_rng(const Rng& rng);
void deserialize_rng(Rng& rng, const std::string& text);

}  // namespace cntm
