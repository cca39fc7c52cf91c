#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbmember/models.hpp"
#include "cbmember/rfs.hpp"

namespace cbmember {

/// A target alive on ticks [birth_tick, death_tick), moving at constant
/// velocity from `initial` (its state at birth_tick).
struct TargetScript {
  StateVector initial = StateVector::Zero();
  int birth_tick = 1;
  int death_tick = -1;  // negative: never dies

  bool alive_at(int tick) const { return tick >= birth_tick && (death_tick < 0 || tick < death_tick); }
};

struct TruthConfig {
  int horizon = 40;
  double period = 1.0;
  Area area;
  std::vector<TargetScript> targets;
};

/// Alive target states per tick; ticks run 1..horizon.
class GroundTruth {
 public:
  explicit GroundTruth(std::vector<std::vector<StateVector>> per_tick) : per_tick_(std::move(per_tick)) {}

  int horizon() const { return static_cast<int>(per_tick_.size()); }
  const std::vector<StateVector>& at(int tick) const { return per_tick_.at(static_cast<std::size_t>(tick - 1)); }
  std::size_t cardinality(int tick) const { return at(tick).size(); }

 private:
  std::vector<std::vector<StateVector>> per_tick_;
};

inline void validate(const TruthConfig& config) {
  if (config.horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (!(config.period > 0.0)) throw std::invalid_argument("period must be positive");
  for (std::size_t i = 0; i < config.targets.size(); ++i) {
    const auto& t = config.targets[i];
    const std::string tag = "target " + std::to_string(i) + ": ";
    if (t.birth_tick < 1) throw std::invalid_argument(tag + "birth tick must be at least 1");
    if (t.birth_tick > config.horizon) throw std::invalid_argument(tag + "birth tick beyond the horizon");
    if (t.death_tick >= 0 && t.death_tick <= t.birth_tick)
      throw std::invalid_argument(tag + "death tick must follow birth tick");
    if (!t.initial.allFinite()) throw std::invalid_argument(tag + "non-finite initial state");
  }
}

/// Deterministic constant-velocity trajectories. Throws if a living target
/// leaves the surveillance area.
inline GroundTruth scripted_truth(const TruthConfig& config) {
  validate(config);
  std::vector<std::vector<StateVector>> per_tick(static_cast<std::size_t>(config.horizon));
  for (std::size_t i = 0; i < config.targets.size(); ++i) {
    const auto& t = config.targets[i];
    for (int k = 1; k <= config.horizon; ++k) {
      if (!t.alive_at(k)) continue;
      StateVector x = t.initial;
      const double dt = config.period * (k - t.birth_tick);
      x[0] += dt * x[2];
      x[1] += dt * x[3];
      if (!config.area.contains(position(x)))
        throw std::invalid_argument("target " + std::to_string(i) + " leaves the surveillance area at tick " +
                                    std::to_string(k));
      per_tick[static_cast<std::size_t>(k - 1)].push_back(x);
    }
  }
  return GroundTruth(std::move(per_tick));
}

}  // namespace cbmember
