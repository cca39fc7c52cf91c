#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cbmember/models.hpp"
#include "cbmember/random.hpp"
#include "cbmember/rfs.hpp"

namespace cbmember {

/// Floor on the clutter intensity in the measurement-updated existence
/// denominator, so that returns outside the clutter support stay finite.
inline constexpr double kClutterFloor = 1e-12;

/// One Gaussian birth hypothesis appended at every prediction.
struct BirthComponentSpec {
  double existence = 0.03;
  StateVector mean = StateVector::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  std::size_t particles = 1000;
};

struct BirthModel {
  std::vector<BirthComponentSpec> components;

  void validate() const {
    for (const auto& b : components) {
      if (!(b.existence >= 0.0 && b.existence <= 1.0))
        throw std::invalid_argument("birth existence outside [0, 1]");
      if (b.particles == 0) throw std::invalid_argument("birth component needs at least one particle");
      detail::psd_square_root(b.covariance, "birth covariance");
    }
  }
};

enum class ResamplingScheme { systematic, multinomial };

inline ResamplingScheme parse_resampling_scheme(std::string_view s) {
  if (s == "systematic") return ResamplingScheme::systematic;
  if (s == "multinomial") return ResamplingScheme::multinomial;
  throw std::invalid_argument("unknown resampling scheme: " + std::string(s));
}

inline std::string_view to_string(ResamplingScheme s) {
  return s == ResamplingScheme::systematic ? "systematic" : "multinomial";
}

struct FilterConfig {
  std::size_t particles = 300;        // L, particles per component after resampling
  std::size_t max_components = 100;  // M_max
  double prune_threshold = 1e-3;     // r_min
  ResamplingScheme resampling = ResamplingScheme::systematic;

  void validate() const {
    if (particles < 1) throw std::invalid_argument("filter: particles per component must be >= 1");
    if (max_components < 1) throw std::invalid_argument("filter: max components must be >= 1");
    if (!(prune_threshold > 0.0 && prune_threshold < 1.0))
      throw std::invalid_argument("filter: prune threshold must lie in (0, 1)");
  }
};

/// Multi-Bernoulli density at time k|k-1.
struct PredictedDensity {
  MultiBernoulliDensity density;
};

/// Survival-weighted prediction of every component through the transition
/// prior, followed by the union with the birth components.
inline PredictedDensity predict(const MultiBernoulliDensity& posterior, const MotionModel& motion,
                                const BirthModel& birth, RngStream& rng) {
  PredictedDensity out;
  out.density.components.reserve(posterior.size() + birth.components.size());
  for (const auto& c : posterior.components) {
    BernoulliComponent next;
    double survival_mass = 0.0;
    next.particles.reserve(c.particles.size());
    for (const auto& p : c.particles) {
      survival_mass += p.weight * motion.survival_probability(p.state);
      next.particles.push_back({p.weight, transition_sample(motion, p.state, rng)});
    }
    next.existence = clamp_existence(c.existence * survival_mass);
    out.density.components.push_back(std::move(next));
  }
  for (const auto& b : birth.components) {
    const Eigen::Matrix4d factor = detail::psd_square_root(b.covariance, "birth covariance");
    BernoulliComponent born;
    born.existence = clamp_existence(b.existence);
    born.particles.reserve(b.particles);
    const double w = 1.0 / static_cast<double>(b.particles);
    for (std::size_t j = 0; j < b.particles; ++j) born.particles.push_back({w, detail::gaussian_draw(b.mean, factor, rng)});
    out.density.components.push_back(std::move(born));
  }
  return out;
}

/// Inner products shared by every update-side quantity:
///   detection_mass[i] = <p_i, p_D>,  psi(i, z) = <p_i, g(z|.) p_D>.
/// With `per_particle` the unweighted kernel values p_D(x) g(z|x) are kept
/// for building the measurement-updated particle clouds.
struct UpdateTerms {
  std::vector<double> detection_mass;
  Eigen::MatrixXd psi;
  std::vector<double> clutter;  // kappa(z), before flooring
  std::vector<std::size_t> offsets;
  std::vector<double> particle_detection;
  Eigen::MatrixXd particle_psi;  // rows: all particles, component-major
};

/// Noise-free return of every predicted particle seen from `s`, component-major.
/// Depends only on the pose, so callers that update one density against many
/// measurement sets from the same pose can compute it once.
inline std::vector<PredictedReturn> particle_returns(const MultiBernoulliDensity& predicted, const SensorModel& sensor,
                                                     const SensorPose& s) {
  std::vector<PredictedReturn> out;
  for (const auto& c : predicted.components)
    for (const auto& p : c.particles) out.push_back(predict_return(sensor, p.state, s));
  return out;
}

inline UpdateTerms compute_update_terms(const MultiBernoulliDensity& predicted, std::span<const PredictedReturn> returns,
                                        const MeasurementSet& z, const SensorModel& sensor, const SensorPose& s,
                                        bool per_particle) {
  for (const auto& m : z)
    if (m.kind != sensor.kind) throw std::invalid_argument("measurement kind does not match sensor model");
  const auto n_z = static_cast<Eigen::Index>(z.size());
  UpdateTerms t;
  t.detection_mass.assign(predicted.size(), 0.0);
  t.psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(predicted.size()), n_z);
  const double r_max = max_clutter_range(sensor, s);
  for (const auto& m : z) t.clutter.push_back(sensor.clutter_rate * clutter_density(sensor, m, r_max));

  std::size_t total = 0;
  t.offsets.reserve(predicted.size() + 1);
  for (const auto& c : predicted.components) {
    t.offsets.push_back(total);
    total += c.particles.size();
  }
  t.offsets.push_back(total);
  if (returns.size() != total) throw std::invalid_argument("particle return count does not match the density");
  if (per_particle) {
    t.particle_detection.assign(total, 0.0);
    t.particle_psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(total), n_z);
  }

  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto& particles = predicted.components[i].particles;
    for (std::size_t j = 0; j < particles.size(); ++j) {
      const auto& pred = returns[t.offsets[i] + j];
      const double w = particles[j].weight;
      t.detection_mass[i] += w * pred.detection;
      if (per_particle) t.particle_detection[t.offsets[i] + j] = pred.detection;
      if (pred.detection == 0.0) continue;
      for (Eigen::Index k = 0; k < n_z; ++k) {
        const double kernel = pred.detection * measurement_likelihood(sensor, z[static_cast<std::size_t>(k)], pred);
        t.psi(static_cast<Eigen::Index>(i), k) += w * kernel;
        if (per_particle) t.particle_psi(static_cast<Eigen::Index>(t.offsets[i] + j), k) = kernel;
      }
    }
  }
  return t;
}

inline UpdateTerms compute_update_terms(const MultiBernoulliDensity& predicted, const MeasurementSet& z,
                                        const SensorModel& sensor, const SensorPose& s, bool per_particle) {
  return compute_update_terms(predicted, particle_returns(predicted, sensor, s), z, sensor, s, per_particle);
}

/// Legacy (missed-detection) existence r (1 - <p,pD>) / (1 - r <p,pD>).
inline double legacy_existence(double r, double detection_mass) {
  const double den = 1.0 - r * detection_mass;
  return den > 0.0 ? clamp_existence(r * (1.0 - detection_mass) / den) : 0.0;
}

/// Existence of the component created by measurement column `k`.
inline double updated_existence(std::span<const double> r, const UpdateTerms& t, Eigen::Index k) {
  double num = 0.0;
  double den = std::max(t.clutter[static_cast<std::size_t>(k)], kClutterFloor);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double miss = 1.0 - r[i] * t.detection_mass[i];
    const double psi = t.psi(static_cast<Eigen::Index>(i), k);
    num += r[i] * (1.0 - r[i]) * psi / (miss * miss);
    den += r[i] * psi / miss;
  }
  return clamp_existence(num / den);
}

/// Existence probabilities of the updated density (legacy components first,
/// then one per measurement) without building particle clouds. This is all the
/// cardinality-variance objectives need.
inline std::vector<double> posterior_existences(const MultiBernoulliDensity& predicted,
                                                std::span<const PredictedReturn> returns, const MeasurementSet& z,
                                                const SensorModel& sensor, const SensorPose& s) {
  const auto t = compute_update_terms(predicted, returns, z, sensor, s, false);
  const auto r = predicted.existences();
  std::vector<double> out;
  out.reserve(r.size() + z.size());
  for (std::size_t i = 0; i < r.size(); ++i) out.push_back(legacy_existence(r[i], t.detection_mass[i]));
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(z.size()); ++k) out.push_back(updated_existence(r, t, k));
  return out;
}

inline std::vector<double> posterior_existences(const MultiBernoulliDensity& predicted, const MeasurementSet& z,
                                                const SensorModel& sensor, const SensorPose& s) {
  return posterior_existences(predicted, particle_returns(predicted, sensor, s), z, sensor, s);
}

/// Cardinality-balanced multi-Bernoulli update before resampling and pruning.
/// Legacy clouds are reweighted by 1 - p_D; each measurement-updated cloud is
/// the r/(1-r)-weighted mixture of all predicted clouds times p_D g(z|.).
/// Components whose clouds carry no weight (r = 0) are dropped.
inline MultiBernoulliDensity cardinality_balanced_update(const PredictedDensity& predicted, const MeasurementSet& z,
                                                         const SensorModel& sensor, const SensorPose& s) {
  const auto& prior = predicted.density;
  const auto t = compute_update_terms(prior, z, sensor, s, true);
  const auto r = prior.existences();
  MultiBernoulliDensity out;
  out.components.reserve(prior.size() + z.size());

  for (std::size_t i = 0; i < prior.size(); ++i) {
    BernoulliComponent legacy;
    legacy.existence = legacy_existence(r[i], t.detection_mass[i]);
    legacy.particles = prior.components[i].particles;
    double total = 0.0;
    for (std::size_t j = 0; j < legacy.particles.size(); ++j) {
      legacy.particles[j].weight *= 1.0 - t.particle_detection[t.offsets[i] + j];
      total += legacy.particles[j].weight;
    }
    if (total > 0.0) {
      legacy.normalize_weights();
    } else {
      legacy.particles = prior.components[i].particles;  // p_D == 1 on the whole cloud, r_L == 0
      legacy.existence = 0.0;
    }
    out.components.push_back(std::move(legacy));
  }

  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(z.size()); ++k) {
    BernoulliComponent updated;
    updated.existence = updated_existence(r, t, k);
    for (std::size_t i = 0; i < prior.size(); ++i) {
      const double odds = r[i] / (1.0 - r[i]);
      const auto& particles = prior.components[i].particles;
      for (std::size_t j = 0; j < particles.size(); ++j) {
        const double w = odds * particles[j].weight * t.particle_psi(static_cast<Eigen::Index>(t.offsets[i] + j), k);
        if (w > 0.0) updated.particles.push_back({w, particles[j].state});
      }
    }
    if (updated.particles.empty() || updated.existence == 0.0) continue;
    updated.normalize_weights();
    out.components.push_back(std::move(updated));
  }
  return out;
}

inline BernoulliComponent resample_component(const BernoulliComponent& c, std::size_t count,
                                             ResamplingScheme scheme, RngStream& rng) {
  std::vector<double> weights;
  weights.reserve(c.particles.size());
  for (const auto& p : c.particles) weights.push_back(p.weight);
  const auto idx = scheme == ResamplingScheme::systematic ? systematic_resample(weights, count, rng)
                                                          : multinomial_resample(weights, count, rng);
  BernoulliComponent out;
  out.existence = c.existence;
  out.particles.reserve(count);
  const double w = 1.0 / static_cast<double>(count);
  for (const auto i : idx) out.particles.push_back({w, c.particles[i].state});
  return out;
}

/// Drops components below r_min, then keeps the M_max most likely (stable).
inline MultiBernoulliDensity prune(MultiBernoulliDensity density, const FilterConfig& config) {
  std::erase_if(density.components, [&](const BernoulliComponent& c) { return c.existence < config.prune_threshold; });
  if (density.size() > config.max_components) {
    auto keep = top_components(density, config.max_components);
    std::sort(keep.begin(), keep.end());
    MultiBernoulliDensity capped;
    capped.components.reserve(keep.size());
    for (const auto i : keep) capped.components.push_back(std::move(density.components[i]));
    return capped;
  }
  return density;
}

/// Full measurement update: cardinality-balanced update, pruning, and
/// resampling of every surviving component back to L particles.
inline MultiBernoulliDensity update(const PredictedDensity& predicted, const MeasurementSet& z,
                                    const SensorModel& sensor, const SensorPose& s, const FilterConfig& config,
                                    RngStream& rng) {
  auto pruned = prune(cardinality_balanced_update(predicted, z, sensor, s), config);
  for (auto& c : pruned.components) c = resample_component(c, config.particles, config.resampling, rng);
  return pruned;
}

struct StepResult {
  MultiBernoulliDensity posterior;
  CardinalityStats stats;
  MapEstimate estimate;
};

/// Bundles the models a filter run needs.
class CbMemberFilter {
 public:
  CbMemberFilter(MotionModel motion, BirthModel birth, SensorModel sensor, FilterConfig config)
      : motion_(std::move(motion)), birth_(std::move(birth)), sensor_(std::move(sensor)), config_(config) {
    birth_.validate();
    sensor_.validate();
    config_.validate();
  }

  PredictedDensity predict(const MultiBernoulliDensity& posterior, RngStream& rng) const {
    return cbmember::predict(posterior, motion_, birth_, rng);
  }

  MultiBernoulliDensity update(const PredictedDensity& predicted, const MeasurementSet& z, const SensorPose& s,
                               RngStream& rng) const {
    return cbmember::update(predicted, z, sensor_, s, config_, rng);
  }

  /// Predict then update; also reports cardinality statistics and MAP estimates.
  StepResult step(const MultiBernoulliDensity& posterior, const MeasurementSet& z, const SensorPose& s,
                  RngStream& rng) const {
    StepResult out;
    out.posterior = update(predict(posterior, rng), z, s, rng);
    out.stats = cardinality_stats(out.posterior);
    out.estimate = extract_map_estimate(out.posterior);
    return out;
  }

  const MotionModel& motion() const { return motion_; }
  const BirthModel& birth() const { return birth_; }
  const SensorModel& sensor() const { return sensor_; }
  const FilterConfig& config() const { return config_; }

 private:
  MotionModel motion_;
  BirthModel birth_;
  SensorModel sensor_;
  FilterConfig config_;
};

}  // namespace cbmember
