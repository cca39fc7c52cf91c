#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cbmember/random.hpp"
#include "cbmember/rfs.hpp"

namespace cbmember {

/// Axis-aligned surveillance rectangle (metres). Boundary points are inside.
struct Area {
  double x_min = 0.0;
  double x_max = 1000.0;
  double y_min = 0.0;
  double y_max = 1000.0;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  bool contains(const Eigen::Vector2d& p) const { return contains(p.x(), p.y()); }

  std::array<Eigen::Vector2d, 4> vertices() const {
    return {Eigen::Vector2d(x_min, y_min), Eigen::Vector2d(x_max, y_min),
            Eigen::Vector2d(x_max, y_max), Eigen::Vector2d(x_min, y_max)};
  }
};

namespace detail {

/// Square-root factor A with A * A^T = M for a symmetric PSD matrix, via LDLT
/// so that singular (e.g. zero) covariances are accepted.
inline Eigen::Matrix4d psd_square_root(const Eigen::Matrix4d& m, const char* what) {
  if (!m.allFinite() || !m.isApprox(m.transpose(), 1e-12))
    throw std::domain_error(std::string(what) + ": matrix is not symmetric");
  if (m.isZero(0.0)) return Eigen::Matrix4d::Zero();
  Eigen::LDLT<Eigen::Matrix4d> ldlt(m);
  if (ldlt.info() != Eigen::Success)
    throw std::domain_error(std::string(what) + ": Cholesky factorization failed");
  const Eigen::Vector4d d = ldlt.vectorD();
  const double tol = 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((d.array() < -tol).any())
    throw std::domain_error(std::string(what) + ": matrix is not positive semidefinite");
  const Eigen::Matrix4d lower = ldlt.matrixL();
  Eigen::Matrix4d factor = lower * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return ldlt.transpositionsP().transpose() * factor;
}

inline StateVector gaussian_draw(const StateVector& mean, const Eigen::Matrix4d& sqrt_cov,
                                 RngStream& rng) {
  StateVector n;
  for (int i = 0; i < 4; ++i) n[i] = standard_normal(rng);
  return mean + sqrt_cov * n;
}

}  // namespace detail

/// Linear-Gaussian single-object dynamics x' = F x + w, w ~ N(0, Q), with a
/// constant survival probability.
class MotionModel {
 public:
  MotionModel(double period, const Eigen::Matrix4d& transition, const Eigen::Matrix4d& process_noise,
              double survival_probability)
      : period_(period),
        transition_(transition),
        process_noise_(process_noise),
        noise_factor_(detail::psd_square_root(process_noise, "process noise")),
        survival_(survival_probability) {
    if (!(survival_probability >= 0.0 && survival_probability <= 1.0))
      throw std::invalid_argument("survival probability outside [0, 1]");
    if (!transition.allFinite()) throw std::invalid_argument("non-finite transition matrix");
  }

  /// Nearly-constant-velocity model with Q = q_scale * [T^3, T^2/54; T^2/54, T/81]
  /// per axis.
  static MotionModel constant_velocity(double period, double q_scale, double survival_probability) {
    const double t = period;
    Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
    f(0, 2) = t;
    f(1, 3) = t;
    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    q(0, 0) = q(1, 1) = t * t * t;
    q(0, 2) = q(2, 0) = q(1, 3) = q(3, 1) = t * t / 54.0;
    q(2, 2) = q(3, 3) = t / 81.0;
    return MotionModel(period, f, q_scale * q, survival_probability);
  }

  double period() const { return period_; }
  const Eigen::Matrix4d& transition() const { return transition_; }
  const Eigen::Matrix4d& process_noise() const { return process_noise_; }
  const Eigen::Matrix4d& noise_factor() const { return noise_factor_; }
  double survival_probability() const { return survival_; }
  double survival_probability(const StateVector&) const { return survival_; }

 private:
  double period_;
  Eigen::Matrix4d transition_;
  Eigen::Matrix4d process_noise_;
  Eigen::Matrix4d noise_factor_;
  double survival_;
};

inline StateVector transition_sample(const MotionModel& model, const StateVector& x, RngStream& rng) {
  return detail::gaussian_draw(model.transition() * x, model.noise_factor(), rng);
}

struct SensorPose {
  double x = 0.0;
  double y = 0.0;

  Eigen::Vector2d position() const { return {x, y}; }
  friend bool operator==(const SensorPose&, const SensorPose&) = default;
};

enum class SensorKind { range_bearing, range_only };

inline std::string_view to_string(SensorKind kind) {
  return kind == SensorKind::range_bearing ? "range-bearing" : "range-only";
}

inline SensorKind parse_sensor_kind(std::string_view s) {
  if (s == "range-bearing") return SensorKind::range_bearing;
  if (s == "range-only") return SensorKind::range_only;
  throw std::invalid_argument("unknown sensor kind: " + std::string(s));
}

/// One sensor return. `bearing` is ignored for range-only returns.
struct Measurement {
  SensorKind kind = SensorKind::range_bearing;
  double range = 0.0;
  double bearing = 0.0;
};

using MeasurementSet = std::vector<Measurement>;

/// Distance-dependent detection and noise model with Poisson clutter.
struct SensorModel {
  SensorKind kind = SensorKind::range_bearing;
  double full_detection_radius = 300.0;  // R0 (m)
  double detection_falloff = 0.0005;     // hbar (1/m)
  double max_detection = 0.99;
  double range_sigma0 = 1.0;             // sigma_0 (m)
  double range_sigma_slope = 5e-5;       // beta_zeta (1/m)
  double bearing_sigma0 = std::numbers::pi / 180.0;  // phi_0 (rad)
  double bearing_sigma_slope = 1e-5;     // beta_phi (rad/m)
  double clutter_rate = 5.0;             // lambda, expected false returns per scan
  Area area;

  void validate() const {
    if (!(max_detection > 0.0 && max_detection <= 1.0))
      throw std::invalid_argument("max detection probability outside (0, 1]");
    if (!(full_detection_radius >= 0.0) || !(detection_falloff > 0.0) || !(range_sigma0 > 0.0) ||
        !(range_sigma_slope >= 0.0) || !(bearing_sigma0 > 0.0) || !(bearing_sigma_slope >= 0.0) ||
        !(clutter_rate >= 0.0))
      throw std::invalid_argument("sensor model: rates and noise floors must be positive");
    if (!(area.x_max > area.x_min && area.y_max > area.y_min))
      throw std::invalid_argument("sensor model: empty surveillance area");
  }

  double range_sigma(double distance) const { return range_sigma0 + range_sigma_slope * distance * distance; }
  double bearing_sigma(double distance) const { return bearing_sigma0 + bearing_sigma_slope * distance; }
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  a = std::remainder(a, two_pi);  // [-pi, pi]
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

inline double detection_probability(const SensorModel& model, double distance) {
  if (distance <= model.full_detection_radius) return model.max_detection;
  return std::max(0.0, model.max_detection - (distance - model.full_detection_radius) * model.detection_falloff);
}

inline double detection_probability(const SensorModel& model, const StateVector& x, const SensorPose& s) {
  return detection_probability(model, (position(x) - s.position()).norm());
}

/// Noise-free return of a state seen from a pose, with the noise levels and
/// detection probability that go with it.
struct PredictedReturn {
  double range = 0.0;
  double bearing = 0.0;
  double range_sigma = 1.0;
  double bearing_sigma = 1.0;
  double detection = 0.0;
};

inline PredictedReturn predict_return(const SensorModel& model, const StateVector& x, const SensorPose& s) {
  const double dx = x[0] - s.x;
  const double dy = x[1] - s.y;
  const double d = std::hypot(dx, dy);
  return {d, std::atan2(dy, dx), model.range_sigma(d), model.bearing_sigma(d), detection_probability(model, d)};
}

/// Gaussian exponents beyond this underflow exp() to exactly zero.
inline constexpr double kUnderflowExponent = 750.0;

inline double measurement_likelihood(const SensorModel& model, const Measurement& z, const PredictedReturn& pred) {
  constexpr double inv_sqrt_two_pi = 0.3989422804014327;
  const double er = (z.range - pred.range) / pred.range_sigma;
  if (0.5 * er * er > kUnderflowExponent) return 0.0;
  if (model.kind == SensorKind::range_only)
    return inv_sqrt_two_pi / pred.range_sigma * std::exp(-0.5 * er * er);
  const double eb = wrap_angle(z.bearing - pred.bearing) / pred.bearing_sigma;
  return 1.0 / (2.0 * std::numbers::pi * pred.range_sigma * pred.bearing_sigma) *
         std::exp(-0.5 * (er * er + eb * eb));
}

/// Single-object likelihood g(z | x; s).
inline double measurement_likelihood(const SensorModel& model, const Measurement& z, const StateVector& x,
                                     const SensorPose& s) {
  if (z.kind != model.kind) throw std::invalid_argument("measurement kind does not match sensor model");
  return measurement_likelihood(model, z, predict_return(model, x, s));
}

/// Largest distance from the sensor to a surveillance-area vertex.
inline double max_clutter_range(const SensorModel& model, const SensorPose& s) {
  double r = 0.0;
  for (const auto& v : model.area.vertices()) r = std::max(r, (v - s.position()).norm());
  return r;
}

/// Clutter spatial density c(z): uniform on [0, Rmax] x [0, pi/2] for
/// range-bearing, [0, Rmax] for range-only.
inline double clutter_density(const SensorModel& model, const Measurement& z, double max_range) {
  if (!(max_range > 0.0) || z.range < 0.0 || z.range > max_range) return 0.0;
  if (model.kind == SensorKind::range_only) return 1.0 / max_range;
  if (z.bearing < 0.0 || z.bearing > std::numbers::pi / 2.0) return 0.0;
  return 1.0 / (max_range * std::numbers::pi / 2.0);
}

/// Clutter intensity kappa(z) = lambda * c(z).
inline double clutter_intensity(const SensorModel& model, const Measurement& z, const SensorPose& s) {
  return model.clutter_rate * clutter_density(model, z, max_clutter_range(model, s));
}

/// Simulates one scan: independent detections with noisy returns plus Poisson
/// clutter. Each target consumes the same number of draws whether or not it is
/// detected, so streams stay aligned across sensor poses.
inline MeasurementSet generate_measurements(const SensorModel& model, std::span<const StateVector> truth,
                                            const SensorPose& s, RngStream& rng) {
  MeasurementSet z;
  for (const auto& x : truth) {
    const auto pred = predict_return(model, x, s);
    const double u = uniform01(rng);
    const double nr = standard_normal(rng);
    const double nb = standard_normal(rng);
    if (u >= pred.detection) continue;
    Measurement m{model.kind, std::max(0.0, pred.range + pred.range_sigma * nr), 0.0};
    if (model.kind == SensorKind::range_bearing) m.bearing = wrap_angle(pred.bearing + pred.bearing_sigma * nb);
    z.push_back(m);
  }
  if (model.clutter_rate > 0.0) {
    const double r_max = max_clutter_range(model, s);
    const auto n_clutter = std::poisson_distribution<int>(model.clutter_rate)(rng);
    for (int i = 0; i < n_clutter; ++i) {
      Measurement m{model.kind, uniform01(rng) * r_max, 0.0};
      if (model.kind == SensorKind::range_bearing) m.bearing = uniform01(rng) * std::numbers::pi / 2.0;
      z.push_back(m);
    }
  }
  return z;
}

/// Noise-free, clutter-free returns with unit detection: one per state.
inline MeasurementSet ideal_measurements(const SensorModel& model, std::span<const StateVector> states,
                                         const SensorPose& s) {
  MeasurementSet z;
  z.reserve(states.size());
  for (const auto& x : states) {
    const auto pred = predict_return(model, x, s);
    z.push_back({model.kind, pred.range, model.kind == SensorKind::range_bearing ? pred.bearing : 0.0});
  }
  return z;
}

}  // namespace cbmember
