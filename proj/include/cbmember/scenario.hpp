#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbmember/control.hpp"
#include "cbmember/filter.hpp"
#include "cbmember/models.hpp"
#include "cbmember/ospa.hpp"
#include "cbmember/truth.hpp"

namespace cbmember {

/// Everything one experiment needs: truth script, models, filter and control
/// parameters, scoring, and run bookkeeping.
struct ScenarioConfig {
  std::string name = "scenario";
  TruthConfig truth;
  SensorModel sensor;
  double q_scale = 27.0;
  double survival_probability = 0.99;
  SensorPose sensor_start{100.0, 100.0};
  BirthModel birth;
  FilterConfig filter;
  ControlSettings control;
  OspaParams ospa;
  Policy policy = Policy::cardvar_pims;
  std::uint64_t seed = 1;
  std::size_t runs = 1;

  MotionModel motion() const {
    return MotionModel::constant_velocity(truth.period, q_scale, survival_probability);
  }

  /// Throws std::invalid_argument describing the first problem found.
  void validate() const {
    validate_truth();
    sensor.validate();
    motion();
    birth.validate();
    filter.validate();
    control.grid.validate();
    control.renyi.validate();
    control.cardvar.validate();
    ospa.validate();
    if (runs < 1) throw std::invalid_argument("run count must be >= 1");
    if (!truth.area.contains(sensor_start.x, sensor_start.y))
      throw std::invalid_argument("sensor start pose lies outside the surveillance area");
  }

 private:
  void validate_truth() const { scripted_truth(truth); }
};

namespace detail {

inline StateVector vector4(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument(std::string(what) + " must be an array of 4 numbers");
  return StateVector(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

/// Parses the scenario JSON format; missing blocks and keys keep their defaults.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  using detail::read_optional;
  ScenarioConfig c;
  try {
    read_optional(j, "name", c.name);
    if (j.contains("area")) {
      const auto& a = j.at("area");
      read_optional(a, "x_min", c.truth.area.x_min);
      read_optional(a, "x_max", c.truth.area.x_max);
      read_optional(a, "y_min", c.truth.area.y_min);
      read_optional(a, "y_max", c.truth.area.y_max);
    }
    read_optional(j, "horizon", c.truth.horizon);
    if (j.contains("targets")) {
      for (const auto& t : j.at("targets")) {
        TargetScript s;
        s.initial = detail::vector4(t.at("initial"), "target initial state");
        read_optional(t, "birth", s.birth_tick);
        read_optional(t, "death", s.death_tick);
        c.truth.targets.push_back(s);
      }
    }
    if (j.contains("sensor")) {
      const auto& s = j.at("sensor");
      if (s.contains("kind")) c.sensor.kind = parse_sensor_kind(s.at("kind").get<std::string>());
      read_optional(s, "R0", c.sensor.full_detection_radius);
      read_optional(s, "hbar", c.sensor.detection_falloff);
      read_optional(s, "pd_max", c.sensor.max_detection);
      read_optional(s, "sigma0", c.sensor.range_sigma0);
      read_optional(s, "beta_range", c.sensor.range_sigma_slope);
      read_optional(s, "phi0", c.sensor.bearing_sigma0);
      read_optional(s, "beta_bearing", c.sensor.bearing_sigma_slope);
      read_optional(s, "clutter_rate", c.sensor.clutter_rate);
    }
    if (j.contains("motion")) {
      const auto& m = j.at("motion");
      read_optional(m, "T", c.truth.period);
      read_optional(m, "q_scale", c.q_scale);
      read_optional(m, "p_survival", c.survival_probability);
    }
    if (j.contains("sensor_start")) {
      const auto& s = j.at("sensor_start");
      c.sensor_start = {s.at(0).get<double>(), s.at(1).get<double>()};
    }
    if (j.contains("birth")) {
      for (const auto& b : j.at("birth").at("components")) {
        BirthComponentSpec spec;
        read_optional(b, "existence", spec.existence);
        read_optional(b, "particles", spec.particles);
        spec.mean = detail::vector4(b.at("mean"), "birth mean");
        const StateVector sd = detail::vector4(b.at("std"), "birth std");
        spec.covariance = sd.cwiseProduct(sd).asDiagonal();
        c.birth.components.push_back(spec);
      }
    }
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      read_optional(f, "particles", c.filter.particles);
      read_optional(f, "max_components", c.filter.max_components);
      read_optional(f, "prune_threshold", c.filter.prune_threshold);
      if (f.contains("resampling")) c.filter.resampling = parse_resampling_scheme(f.at("resampling").get<std::string>());
    }
    if (j.contains("control")) {
      const auto& k = j.at("control");
      read_optional(k, "delta_r", c.control.grid.radial_step);
      read_optional(k, "n_r", c.control.grid.radial_steps);
      read_optional(k, "n_theta", c.control.grid.angular_steps);
      read_optional(k, "alpha", c.control.renyi.alpha);
      read_optional(k, "state_samples", c.control.renyi.state_samples);
      c.control.cardvar.state_samples = c.control.renyi.state_samples;
      read_optional(k, "measurement_samples", c.control.cardvar.measurement_samples);
    }
    if (j.contains("ospa")) {
      read_optional(j.at("ospa"), "p", c.ospa.order);
      read_optional(j.at("ospa"), "c", c.ospa.cutoff);
    }
    if (j.contains("policy")) c.policy = parse_policy(j.at("policy").get<std::string>());
    read_optional(j, "seed", c.seed);
    read_optional(j, "runs", c.runs);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  c.sensor.area = c.truth.area;
  c.control.grid.area = c.truth.area;
  return c;
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["area"] = {{"x_min", c.truth.area.x_min}, {"x_max", c.truth.area.x_max},
               {"y_min", c.truth.area.y_min}, {"y_max", c.truth.area.y_max}};
  j["horizon"] = c.truth.horizon;
  j["targets"] = nlohmann::json::array();
  for (const auto& t : c.truth.targets)
    j["targets"].push_back({{"initial", {t.initial[0], t.initial[1], t.initial[2], t.initial[3]}},
                            {"birth", t.birth_tick},
                            {"death", t.death_tick}});
  const auto& s = c.sensor;
  j["sensor"] = {{"kind", std::string(to_string(s.kind))}, {"R0", s.full_detection_radius},
                 {"hbar", s.detection_falloff}, {"pd_max", s.max_detection},
                 {"sigma0", s.range_sigma0}, {"beta_range", s.range_sigma_slope},
                 {"phi0", s.bearing_sigma0}, {"beta_bearing", s.bearing_sigma_slope},
                 {"clutter_rate", s.clutter_rate}};
  j["motion"] = {{"T", c.truth.period}, {"q_scale", c.q_scale}, {"p_survival", c.survival_probability}};
  j["sensor_start"] = {c.sensor_start.x, c.sensor_start.y};
  j["birth"]["components"] = nlohmann::json::array();
  for (const auto& b : c.birth.components) {
    const StateVector sd = b.covariance.diagonal().cwiseSqrt();
    j["birth"]["components"].push_back({{"existence", b.existence},
                                        {"particles", b.particles},
                                        {"mean", {b.mean[0], b.mean[1], b.mean[2], b.mean[3]}},
                                        {"std", {sd[0], sd[1], sd[2], sd[3]}}});
  }
  j["filter"] = {{"particles", c.filter.particles}, {"max_components", c.filter.max_components},
                 {"prune_threshold", c.filter.prune_threshold},
                 {"resampling", std::string(to_string(c.filter.resampling))}};
  j["control"] = {{"delta_r", c.control.grid.radial_step}, {"n_r", c.control.grid.radial_steps},
                  {"n_theta", c.control.grid.angular_steps}, {"alpha", c.control.renyi.alpha},
                  {"state_samples", c.control.renyi.state_samples},
                  {"measurement_samples", c.control.cardvar.measurement_samples}};
  j["ospa"] = {{"p", c.ospa.order}, {"c", c.ospa.cutoff}};
  j["policy"] = std::string(to_string(c.policy));
  j["seed"] = c.seed;
  j["runs"] = c.runs;
  return j;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("scenario " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace cbmember
