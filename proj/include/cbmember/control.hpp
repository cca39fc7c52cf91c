#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cbmember/filter.hpp"
#include "cbmember/models.hpp"
#include "cbmember/random.hpp"
#include "cbmember/rfs.hpp"

namespace cbmember {

/// Polar grid of one-step sensor moves around the current pose.
struct ControlGrid {
  double radial_step = 50.0;  // Delta_R (m)
  int radial_steps = 2;       // N_R
  int angular_steps = 8;      // N_theta
  Area area;

  void validate() const {
    if (!(radial_step > 0.0)) throw std::invalid_argument("control grid: radial step must be positive");
    if (radial_steps < 1 || angular_steps < 1) throw std::invalid_argument("control grid: N_R and N_theta must be >= 1");
  }
};

struct ControlCommand {
  SensorPose pose;
  int radial_index = 0;   // j
  int angular_index = 0;  // l
  bool in_area = true;
};

/// Stay-put first, then j = 1..N_R, l = 0..N_theta-1. Angle N_theta * Delta_theta
/// coincides with angle 0 and j = 0 collapses to one command, so the grid has
/// 1 + N_R * N_theta entries. Out-of-area commands are kept and flagged.
inline std::vector<ControlCommand> admissible_commands(const ControlGrid& grid, const SensorPose& s) {
  grid.validate();
  std::vector<ControlCommand> out;
  out.reserve(1 + static_cast<std::size_t>(grid.radial_steps * grid.angular_steps));
  out.push_back({s, 0, 0, grid.area.contains(s.x, s.y)});
  const double dtheta = 2.0 * std::numbers::pi / grid.angular_steps;
  for (int j = 1; j <= grid.radial_steps; ++j) {
    for (int l = 0; l < grid.angular_steps; ++l) {
      const SensorPose p{s.x + j * grid.radial_step * std::cos(l * dtheta), s.y + j * grid.radial_step * std::sin(l * dtheta)};
      out.push_back({p, j, l, grid.area.contains(p.x, p.y)});
    }
  }
  return out;
}

/// Largest min(|X|, |Z|) for which the exact association sum is evaluated.
inline constexpr std::size_t kMaxAssociationSide = 16;

/// Standard detection/clutter multi-object likelihood g(Z | X; s):
///   e^{-lambda} * sum over partial one-to-one associations of
///   prod_{missed x}(1 - p_D) * prod_{(x,z)} p_D g(z|x) * prod_{unassigned z} kappa(z).
/// Evaluated exactly by a subset recursion over the smaller of the two sets.
inline double multi_object_likelihood(const MeasurementSet& z, std::span<const StateVector> x,
                                      const SensorModel& sensor, const SensorPose& s) {
  for (const auto& m : z)
    if (m.kind != sensor.kind) throw std::invalid_argument("measurement kind does not match sensor model");
  const std::size_t nx = x.size();
  const std::size_t nz = z.size();
  if (std::min(nx, nz) > kMaxAssociationSide)
    throw std::invalid_argument("multi_object_likelihood: too many targets and measurements for exact association");

  const double r_max = max_clutter_range(sensor, s);
  std::vector<double> kappa(nz), miss(nx);
  for (std::size_t k = 0; k < nz; ++k) kappa[k] = sensor.clutter_rate * clutter_density(sensor, z[k], r_max);
  // hit[i * nz + k] = p_D(x_i) g(z_k | x_i)
  std::vector<double> hit(nx * nz, 0.0);
  for (std::size_t i = 0; i < nx; ++i) {
    const auto pred = predict_return(sensor, x[i], s);
    miss[i] = 1.0 - pred.detection;
    if (pred.detection == 0.0) continue;
    for (std::size_t k = 0; k < nz; ++k) hit[i * nz + k] = pred.detection * measurement_likelihood(sensor, z[k], pred);
  }

  const bool mask_measurements = nz <= nx;
  const std::size_t outer = mask_measurements ? nx : nz;
  const std::size_t side = mask_measurements ? nz : nx;
  const std::size_t states = std::size_t{1} << side;
  std::vector<double> dp(states, 0.0), next(states);
  dp[0] = 1.0;
  for (std::size_t a = 0; a < outer; ++a) {
    // An outer element either stays unassigned or takes one free inner element.
    const double alone = mask_measurements ? miss[a] : kappa[a];
    for (std::size_t mask = 0; mask < states; ++mask) {
      double v = dp[mask] * alone;
      for (std::size_t b = 0; b < side; ++b) {
        if (!(mask >> b & 1U)) continue;
        const double pair = mask_measurements ? hit[a * nz + b] : hit[b * nz + a];
        if (pair != 0.0) v += dp[mask ^ (std::size_t{1} << b)] * pair;
      }
      next[mask] = v;
    }
    dp.swap(next);
  }
  double total = 0.0;
  for (std::size_t mask = 0; mask < states; ++mask) {
    if (dp[mask] == 0.0) continue;
    double rest = 1.0;
    for (std::size_t b = 0; b < side; ++b)
      if (!(mask >> b & 1U)) rest *= mask_measurements ? kappa[b] : miss[b];
    total += dp[mask] * rest;
  }
  return std::exp(-sensor.clutter_rate) * total;
}

namespace detail {
inline double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (const double a : v) hi = std::max(hi, a);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (const double a : v) acc += std::exp(a - hi);
  return hi + std::log(acc);
}
}  // namespace detail

/// Particle Renyi divergence between predicted and updated densities:
///   1/(alpha-1) * log[ sum_i w_i g_i^alpha / (sum_i w_i g_i)^alpha ],
/// evaluated in log space. Zero-likelihood samples drop out of both sums.
/// Returns -inf when every likelihood is zero.
inline double renyi_reward_from_likelihoods(std::span<const double> weights, std::span<const double> likelihoods,
                                            double alpha) {
  if (!(alpha >= 0.0) || alpha == 1.0) throw std::invalid_argument("Renyi alpha must be >= 0 and != 1");
  if (weights.size() != likelihoods.size()) throw std::invalid_argument("Renyi: weight/likelihood size mismatch");
  std::vector<double> powered, plain;
  powered.reserve(weights.size());
  plain.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(likelihoods[i] > 0.0) || !(weights[i] > 0.0)) continue;
    const double lw = std::log(weights[i]);
    const double lg = std::log(likelihoods[i]);
    powered.push_back(lw + alpha * lg);
    plain.push_back(lw + lg);
  }
  if (plain.empty()) return -std::numeric_limits<double>::infinity();
  return (detail::log_sum_exp(powered) - alpha * detail::log_sum_exp(plain)) / (alpha - 1.0);
}

inline double renyi_reward(std::span<const MultiObjectSample> samples, const MeasurementSet& z, double alpha,
                           const SensorModel& sensor, const SensorPose& s) {
  std::vector<double> w, g;
  w.reserve(samples.size());
  g.reserve(samples.size());
  for (const auto& sample : samples) {
    w.push_back(sample.weight);
    g.push_back(multi_object_likelihood(z, sample.states, sensor, s));
  }
  return renyi_reward_from_likelihoods(w, g, alpha);
}

struct RenyiConfig {
  double alpha = 0.5;
  std::size_t state_samples = 1000;  // S

  void validate() const {
    if (!(alpha >= 0.0) || alpha == 1.0) throw std::invalid_argument("Renyi alpha must be >= 0 and != 1");
    if (state_samples < 1) throw std::invalid_argument("Renyi: state sample count must be >= 1");
  }
};

struct CardVarConfig {
  std::size_t measurement_samples = 25;  // T
  std::size_t state_samples = 1000;      // S

  void validate() const {
    if (measurement_samples < 1) throw std::invalid_argument("cardvar: measurement sample count must be >= 1");
    if (state_samples < 1) throw std::invalid_argument("cardvar: state sample count must be >= 1");
  }
};

/// Selected command plus the objective value of every grid entry
/// (+-inf for out-of-area commands).
struct ControlDecision {
  std::size_t index = 0;
  ControlCommand command;
  std::vector<double> objective;
};

namespace detail {

inline ControlDecision pick(std::vector<ControlCommand> commands, std::vector<double> objective, bool maximize) {
  ControlDecision d;
  d.index = 0;
  bool found = false;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!commands[i].in_area) continue;
    if (!found || (maximize ? objective[i] > objective[d.index] : objective[i] < objective[d.index])) {
      d.index = i;
      found = true;
    }
  }
  d.command = commands[d.index];
  d.objective = std::move(objective);
  return d;
}

inline ControlDecision stay_put(std::vector<ControlCommand> commands, bool maximize) {
  const double out_value = maximize ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  std::vector<double> objective(commands.size(), 0.0);
  for (std::size_t i = 0; i < commands.size(); ++i)
    if (!commands[i].in_area) objective[i] = out_value;
  ControlDecision d;
  d.command = commands[0];
  d.objective = std::move(objective);
  return d;
}

}  // namespace detail

/// Expected Renyi divergence with the predicted ideal measurement set: sample
/// the predicted density, form noise-free unit-detection returns of the MAP
/// estimates from each candidate pose, and maximize the particle divergence.
inline ControlDecision select_control_renyi(const PredictedDensity& predicted, const ControlGrid& grid,
                                            const SensorModel& sensor, const SensorPose& s, const RenyiConfig& cfg,
                                            RngStream& rng) {
  cfg.validate();
  auto commands = admissible_commands(grid, s);
  const auto samples = sample_multi_object(predicted.density, cfg.state_samples, rng);
  const auto estimate = extract_map_estimate(predicted.density);
  if (estimate.states.empty()) return detail::stay_put(std::move(commands), true);

  std::vector<double> reward(commands.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < commands.size(); ++c) {
    if (!commands[c].in_area) continue;
    const auto z = ideal_measurements(sensor, estimate.states, commands[c].pose);
    reward[c] = renyi_reward(samples, z, cfg.alpha, sensor, commands[c].pose);
  }
  return detail::pick(std::move(commands), std::move(reward), true);
}

/// Expected MAP cardinality variance by measurement sampling. Measurement set
/// zeta at every pose is drawn from the stream keyed by zeta, so all candidate
/// poses see common random numbers.
inline ControlDecision select_control_cardvar_sampling(const PredictedDensity& predicted, const ControlGrid& grid,
                                                       const SensorModel& sensor, const SensorPose& s,
                                                       const CardVarConfig& cfg, RngStream& rng) {
  cfg.validate();
  auto commands = admissible_commands(grid, s);
  const auto samples = sample_multi_object(predicted.density, cfg.state_samples, rng);
  const std::uint64_t base = rng();
  std::vector<double> expected(commands.size(), std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < commands.size(); ++c) {
    if (!commands[c].in_area) continue;
    const auto returns = particle_returns(predicted.density, sensor, commands[c].pose);
    double sum = 0.0;
    for (std::size_t zeta = 0; zeta < cfg.measurement_samples; ++zeta) {
      auto stream = make_stream(base, {zeta});
      const auto pick = std::uniform_int_distribution<std::size_t>(0, samples.size() - 1)(stream);
      const auto z = generate_measurements(sensor, samples[pick].states, commands[c].pose, stream);
      const auto r = posterior_existences(predicted.density, returns, z, sensor, commands[c].pose);
      sum += cardinality_stats(std::span<const double>(r)).var_map;
    }
    expected[c] = sum / static_cast<double>(cfg.measurement_samples);
  }
  return detail::pick(std::move(commands), std::move(expected), false);
}

/// Density reduced to the MAP-many most likely components, each a single
/// unit-weight particle at its mean.
inline MultiBernoulliDensity truncate_to_map(const MultiBernoulliDensity& density) {
  const auto estimate = extract_map_estimate(density);
  MultiBernoulliDensity out;
  for (std::size_t k = 0; k < estimate.components.size(); ++k)
    out.components.push_back({density.components[estimate.components[k]].existence, {{1.0, estimate.states[k]}}});
  return out;
}

/// Non-sampling cardinality-variance control on the truncated density with the
/// ideal measurement set of its states.
inline ControlDecision select_control_cardvar_pims(const PredictedDensity& predicted, const ControlGrid& grid,
                                                   const SensorModel& sensor, const SensorPose& s) {
  auto commands = admissible_commands(grid, s);
  const auto truncated = truncate_to_map(predicted.density);
  if (truncated.empty()) return detail::stay_put(std::move(commands), false);
  std::vector<StateVector> states;
  for (const auto& c : truncated.components) states.push_back(c.particles.front().state);

  std::vector<double> variance(commands.size(), std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < commands.size(); ++c) {
    if (!commands[c].in_area) continue;
    const auto z = ideal_measurements(sensor, states, commands[c].pose);
    const auto r = posterior_existences(truncated, z, sensor, commands[c].pose);
    variance[c] = cardinality_stats(std::span<const double>(r)).var_map;
  }
  return detail::pick(std::move(commands), std::move(variance), false);
}

enum class Policy { renyi, cardvar_sampling, cardvar_pims, static_sensor, random };

inline std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::renyi: return "renyi";
    case Policy::cardvar_sampling: return "cardvar-sampling";
    case Policy::cardvar_pims: return "cardvar-pims";
    case Policy::static_sensor: return "static";
    case Policy::random: return "random";
  }
  return "unknown";
}

inline Policy parse_policy(std::string_view s) {
  for (const auto p : {Policy::renyi, Policy::cardvar_sampling, Policy::cardvar_pims, Policy::static_sensor, Policy::random})
    if (to_string(p) == s) return p;
  throw std::invalid_argument("unknown policy: " + std::string(s));
}

struct ControlSettings {
  ControlGrid grid;
  RenyiConfig renyi;
  CardVarConfig cardvar;
};

inline ControlDecision select_control(Policy policy, const PredictedDensity& predicted, const ControlSettings& settings,
                                      const SensorModel& sensor, const SensorPose& s, RngStream& rng) {
  switch (policy) {
    case Policy::renyi: return select_control_renyi(predicted, settings.grid, sensor, s, settings.renyi, rng);
    case Policy::cardvar_sampling:
      return select_control_cardvar_sampling(predicted, settings.grid, sensor, s, settings.cardvar, rng);
    case Policy::cardvar_pims: return select_control_cardvar_pims(predicted, settings.grid, sensor, s);
    case Policy::static_sensor: return detail::stay_put(admissible_commands(settings.grid, s), false);
    case Policy::random: {
      auto commands = admissible_commands(settings.grid, s);
      std::vector<std::size_t> inside;
      for (std::size_t i = 0; i < commands.size(); ++i)
        if (commands[i].in_area) inside.push_back(i);
      auto d = detail::stay_put(commands, false);
      if (!inside.empty()) {
        d.index = inside[std::uniform_int_distribution<std::size_t>(0, inside.size() - 1)(rng)];
        d.command = commands[d.index];
      }
      return d;
    }
  }
  throw std::invalid_argument("unknown policy");
}

}  // namespace cbmember
