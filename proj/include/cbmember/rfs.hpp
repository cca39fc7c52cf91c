#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbmember/random.hpp"

namespace cbmember {

/// Single-object state [x, y, vx, vy] in metres and metres per second.
using StateVector = Eigen::Vector4d;

inline Eigen::Vector2d position(const StateVector& x) { return x.head<2>(); }

/// Existence probabilities live in [0, 1 - kExistenceEpsilon]. The update
/// divides by (1 - r), so r is never allowed to reach 1.
inline constexpr double kExistenceEpsilon = 1e-6;
inline constexpr double kMaxExistence = 1.0 - kExistenceEpsilon;

inline double clamp_existence(double r) { return std::clamp(r, 0.0, kMaxExistence); }

struct Particle {
  double weight = 0.0;
  StateVector state = StateVector::Zero();
};

/// One hypothesized track: existence probability plus a weighted particle cloud.
struct BernoulliComponent {
  double existence = 0.0;
  std::vector<Particle> particles;

  void normalize_weights() {
    double total = 0.0;
    for (const auto& p : particles) total += p.weight;
    if (!(total > 0.0) || !std::isfinite(total))
      throw std::domain_error("BernoulliComponent: particle weights sum to zero");
    for (auto& p : particles) p.weight /= total;
  }

  /// Weighted particle mean.
  StateVector mean() const {
    StateVector m = StateVector::Zero();
    double total = 0.0;
    for (const auto& p : particles) {
      m += p.weight * p.state;
      total += p.weight;
    }
    return total > 0.0 ? StateVector(m / total) : m;
  }
};

struct MultiBernoulliDensity {
  std::vector<BernoulliComponent> components;

  std::size_t size() const { return components.size(); }
  bool empty() const { return components.empty(); }

  std::vector<double> existences() const {
    std::vector<double> r;
    r.reserve(components.size());
    for (const auto& c : components) r.push_back(c.existence);
    return r;
  }
};

/// Throws std::domain_error if any component breaks the density invariants.
inline void validate(const MultiBernoulliDensity& density, double weight_tolerance = 1e-9) {
  for (const auto& c : density.components) {
    if (!(c.existence >= 0.0 && c.existence <= kMaxExistence))
      throw std::domain_error("existence probability outside [0, 1 - eps]");
    if (c.particles.empty()) throw std::domain_error("Bernoulli component without particles");
    double total = 0.0;
    for (const auto& p : c.particles) {
      if (!(p.weight >= 0.0) || !std::isfinite(p.weight))
        throw std::domain_error("negative or non-finite particle weight");
      if (!p.state.allFinite()) throw std::domain_error("non-finite particle state");
      total += p.weight;
    }
    if (std::abs(total - 1.0) > weight_tolerance)
      throw std::domain_error("particle weights do not sum to one");
  }
}

struct CardinalityStats {
  std::vector<double> pmf;
  double n_eap = 0.0;
  double var_eap = 0.0;
  std::size_t n_map = 0;
  double var_map = 0.0;
};

namespace detail {
inline void check_existences(std::span<const double> existences) {
  for (const double r : existences)
    if (!std::isfinite(r) || r < 0.0 || r > 1.0)
      throw std::invalid_argument("existence probability outside [0, 1]: " + std::to_string(r));
}
}  // namespace detail

/// Cardinality distribution of a multi-Bernoulli set: B(n) = P(exactly n of the
/// independent Bernoulli trials succeed). Convolution recurrence, O(M^2).
inline std::vector<double> cardinality_pmf(std::span<const double> existences) {
  detail::check_existences(existences);
  std::vector<double> pmf(existences.size() + 1, 0.0);
  pmf[0] = 1.0;
  std::size_t used = 0;
  for (const double r : existences) {
    ++used;
    for (std::size_t n = used; n > 0; --n) pmf[n] = pmf[n] * (1.0 - r) + pmf[n - 1] * r;
    pmf[0] *= 1.0 - r;
  }
  return pmf;
}

/// EAP and MAP cardinality estimates with their variances. The MAP mode takes
/// the smallest maximizing index; the MAP variance is var_eap + (n_map - n_eap)^2.
inline CardinalityStats cardinality_stats(std::span<const double> existences) {
  CardinalityStats s;
  s.pmf = cardinality_pmf(existences);
  for (const double r : existences) {
    s.n_eap += r;
    s.var_eap += r * (1.0 - r);
  }
  s.n_map = static_cast<std::size_t>(std::max_element(s.pmf.begin(), s.pmf.end()) - s.pmf.begin());
  const double offset = static_cast<double>(s.n_map) - s.n_eap;
  s.var_map = s.var_eap + offset * offset;
  return s;
}

inline CardinalityStats cardinality_stats(const MultiBernoulliDensity& density) {
  const auto r = density.existences();
  return cardinality_stats(std::span<const double>(r));
}

/// A weighted multi-object particle: one realization of the whole target set.
struct MultiObjectSample {
  double weight = 0.0;
  std::vector<StateVector> states;
};

/// Draws `count` multi-object realizations. Each component contributes a
/// state with probability r, drawn from its particle cloud.
inline std::vector<MultiObjectSample> sample_multi_object(const MultiBernoulliDensity& density,
                                                          std::size_t count, RngStream& rng) {
  if (count == 0) throw std::invalid_argument("sample_multi_object: count must be positive");
  std::vector<std::vector<double>> cumulative(density.size());
  for (std::size_t i = 0; i < density.size(); ++i) {
    const auto& particles = density.components[i].particles;
    auto& cdf = cumulative[i];
    cdf.resize(particles.size());
    double running = 0.0;
    for (std::size_t j = 0; j < particles.size(); ++j) cdf[j] = (running += particles[j].weight);
  }
  const double weight = 1.0 / static_cast<double>(count);
  std::vector<MultiObjectSample> samples(count);
  for (auto& sample : samples) {
    sample.weight = weight;
    for (std::size_t i = 0; i < density.size(); ++i) {
      if (uniform01(rng) < density.components[i].existence) {
        const std::size_t j = sample_cumulative(cumulative[i], rng);
        sample.states.push_back(density.components[i].particles[j].state);
      }
    }
  }
  return samples;
}

/// Indices of the `n` highest-existence components; ties keep component order.
inline std::vector<std::size_t> top_components(const MultiBernoulliDensity& density, std::size_t n) {
  std::vector<std::size_t> order(density.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return density.components[a].existence > density.components[b].existence;
  });
  order.resize(std::min(n, order.size()));
  return order;
}

struct MapEstimate {
  std::size_t cardinality = 0;
  std::vector<StateVector> states;
  std::vector<std::size_t> components;  // source component of each state
};

/// MAP cardinality plus the particle means of that many most likely components.
inline MapEstimate extract_map_estimate(const MultiBernoulliDensity& density) {
  MapEstimate est;
  est.cardinality = cardinality_stats(density).n_map;
  est.components = top_components(density, est.cardinality);
  for (const std::size_t i : est.components) est.states.push_back(density.components[i].mean());
  return est;
}

}  // namespace cbmember
