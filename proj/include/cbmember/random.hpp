#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace cbmember {

/// Random stream type used everywhere. One stream is owned by one task.
using RngStream = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based seed derivation: the stream for a key path such as
/// (trial, tick, purpose) depends only on the master seed and that path.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = mix64(master);
  for (const std::uint64_t k : keys) h = mix64(h ^ mix64(k));
  return h;
}

inline RngStream make_stream(std::uint64_t master,
                             std::initializer_list<std::uint64_t> keys) {
  return RngStream(derive_seed(master, keys));
}

inline double uniform01(RngStream& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(RngStream& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Inverse-CDF draw from unnormalized cumulative weights.
inline std::size_t sample_cumulative(std::span<const double> cumulative, RngStream& rng) {
  const double u = uniform01(rng) * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

/// Systematic resampling: one uniform offset, `count` evenly spaced pointers.
/// Weights need not be normalized but must have a positive sum.
inline std::vector<std::size_t> systematic_resample(std::span<const double> weights,
                                                    std::size_t count, RngStream& rng) {
  double total = 0.0;
  for (const double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("systematic_resample: weights sum to zero");
  std::vector<std::size_t> indices;
  indices.reserve(count);
  const double step = total / static_cast<double>(count);
  double pointer = uniform01(rng) * step;
  double running = weights[0];
  std::size_t i = 0;
  for (std::size_t n = 0; n < count; ++n) {
    while (pointer > running && i + 1 < weights.size()) running += weights[++i];
    indices.push_back(i);
    pointer += step;
  }
  return indices;
}

inline std::vector<std::size_t> multinomial_resample(std::span<const double> weights,
                                                     std::size_t count, RngStream& rng) {
  std::vector<double> cumulative(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) cumulative[i] = (total += weights[i]);
  if (!(total > 0.0)) throw std::invalid_argument("multinomial_resample: weights sum to zero");
  std::vector<std::size_t> indices(count);
  for (auto& idx : indices) idx = sample_cumulative(cumulative, rng);
  return indices;
}

}  // namespace cbmember
