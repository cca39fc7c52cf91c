#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "cbmember/control.hpp"
#include "cbmember/filter.hpp"
#include "cbmember/ospa.hpp"
#include "cbmember/random.hpp"
#include "cbmember/scenario.hpp"
#include "cbmember/truth.hpp"

namespace cbmember {

/// Stream purposes inside one tick of a trial.
enum class StreamPurpose : std::uint64_t { predict = 1, control = 2, measure = 3, update = 4 };

inline RngStream tick_stream(std::uint64_t trial_seed, int tick, StreamPurpose purpose) {
  return make_stream(trial_seed, {static_cast<std::uint64_t>(tick), static_cast<std::uint64_t>(purpose)});
}

struct TickRecord {
  int tick = 0;
  SensorPose sensor;
  int command_radial = 0;
  int command_angular = 0;
  std::size_t n_map = 0;
  double n_eap = 0.0;
  double var_map = 0.0;
  OspaResult ospa;
  std::size_t true_cardinality = 0;
  double decision_seconds = 0.0;
};

struct RunLog {
  Policy policy = Policy::static_sensor;
  std::uint64_t seed = 0;
  std::vector<TickRecord> ticks;
};

/// One closed-loop run: predict, choose a command, move, observe the truth,
/// update, score. Deterministic in (config, policy, seed) apart from timing.
inline RunLog run_trial(const ScenarioConfig& config, Policy policy, std::uint64_t seed) {
  config.validate();
  const auto truth = scripted_truth(config.truth);
  const auto motion = config.motion();
  RunLog log{policy, seed, {}};
  log.ticks.reserve(static_cast<std::size_t>(config.truth.horizon));

  MultiBernoulliDensity posterior;
  SensorPose sensor = config.sensor_start;
  for (int k = 1; k <= config.truth.horizon; ++k) {
    auto predict_rng = tick_stream(seed, k, StreamPurpose::predict);
    const auto predicted = predict(posterior, motion, config.birth, predict_rng);

    auto control_rng = tick_stream(seed, k, StreamPurpose::control);
    const auto t0 = std::chrono::steady_clock::now();
    const auto decision = select_control(policy, predicted, config.control, config.sensor, sensor, control_rng);
    const auto t1 = std::chrono::steady_clock::now();
    sensor = decision.command.pose;

    auto measure_rng = tick_stream(seed, k, StreamPurpose::measure);
    const auto z = generate_measurements(config.sensor, truth.at(k), sensor, measure_rng);

    auto update_rng = tick_stream(seed, k, StreamPurpose::update);
    posterior = update(predicted, z, config.sensor, sensor, config.filter, update_rng);

    const auto stats = cardinality_stats(posterior);
    const auto estimate = extract_map_estimate(posterior);
    TickRecord rec;
    rec.tick = k;
    rec.sensor = sensor;
    rec.command_radial = decision.command.radial_index;
    rec.command_angular = decision.command.angular_index;
    rec.n_map = stats.n_map;
    rec.n_eap = stats.n_eap;
    rec.var_map = stats.var_map;
    rec.ospa = ospa(std::span<const StateVector>(estimate.states), std::span<const StateVector>(truth.at(k)), config.ospa);
    rec.true_cardinality = truth.cardinality(k);
    rec.decision_seconds = std::chrono::duration<double>(t1 - t0).count();
    log.ticks.push_back(rec);
  }
  return log;
}

/// Seed of trial `index`: reproducible in isolation from the master seed.
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t index) {
  return derive_seed(master, {static_cast<std::uint64_t>(index)});
}

/// Unpaired runs additionally key the seed on the policy position.
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t index, std::size_t policy_index, bool paired) {
  return paired ? trial_seed(master, index)
                : derive_seed(master, {static_cast<std::uint64_t>(index), 0x9000ULL + policy_index});
}

struct PolicySummary {
  Policy policy = Policy::static_sensor;
  std::vector<double> ospa_mean;    // per tick, across trials
  std::vector<double> ospa_stddev;  // population stddev per tick
  std::vector<double> n_map_mean;
  double mean_decision_seconds = 0.0;
  std::vector<RunLog> runs;  // in trial order

  /// Mean OSPA over the last `ticks` ticks.
  double final_window_ospa(std::size_t ticks) const {
    const std::size_t n = std::min(ticks, ospa_mean.size());
    double s = 0.0;
    for (std::size_t k = ospa_mean.size() - n; k < ospa_mean.size(); ++k) s += ospa_mean[k];
    return n > 0 ? s / static_cast<double>(n) : 0.0;
  }
};

struct ExperimentResult {
  std::vector<PolicySummary> policies;
};

/// Failure of one trial; aborts the experiment.
class TrialFailure : public std::runtime_error {
 public:
  TrialFailure(Policy policy, std::size_t trial, std::uint64_t seed, const std::string& what)
      : std::runtime_error("trial " + std::to_string(trial) + " (" + std::string(to_string(policy)) + ", seed " +
                           std::to_string(seed) + ") failed: " + what),
        policy_(policy), trial_(trial), seed_(seed) {}

  Policy policy() const { return policy_; }
  std::size_t trial() const { return trial_; }
  std::uint64_t seed() const { return seed_; }

 private:
  Policy policy_;
  std::size_t trial_;
  std::uint64_t seed_;
};

/// Per-tick mean/stddev of OSPA across runs, in trial order.
inline PolicySummary summarize(Policy policy, std::vector<RunLog> runs) {
  PolicySummary s;
  s.policy = policy;
  const std::size_t horizon = runs.empty() ? 0 : runs.front().ticks.size();
  s.ospa_mean.assign(horizon, 0.0);
  s.ospa_stddev.assign(horizon, 0.0);
  s.n_map_mean.assign(horizon, 0.0);
  const double n = static_cast<double>(runs.size());
  double decision = 0.0;
  std::size_t decisions = 0;
  for (const auto& run : runs) {
    for (std::size_t k = 0; k < horizon; ++k) {
      s.ospa_mean[k] += run.ticks[k].ospa.total / n;
      s.n_map_mean[k] += static_cast<double>(run.ticks[k].n_map) / n;
      decision += run.ticks[k].decision_seconds;
      ++decisions;
    }
  }
  for (const auto& run : runs)
    for (std::size_t k = 0; k < horizon; ++k) {
      const double d = run.ticks[k].ospa.total - s.ospa_mean[k];
      s.ospa_stddev[k] += d * d / n;
    }
  for (auto& v : s.ospa_stddev) v = std::sqrt(v);
  s.mean_decision_seconds = decisions > 0 ? decision / static_cast<double>(decisions) : 0.0;
  s.runs = std::move(runs);
  return s;
}

/// Runs `runs` trials of every policy on up to `jobs` threads. Results do not
/// depend on `jobs`: each trial owns its derived seed and its output slot.
inline ExperimentResult run_experiment(const ScenarioConfig& config, const std::vector<Policy>& policies,
                                       std::size_t runs, std::uint64_t master_seed, bool paired = true,
                                       std::size_t jobs = 1) {
  config.validate();
  if (runs < 1) throw std::invalid_argument("run count must be >= 1");
  if (policies.empty()) throw std::invalid_argument("no policies given");
  const std::size_t tasks = runs * policies.size();
  std::vector<RunLog> logs(tasks);
  std::vector<std::exception_ptr> errors(tasks);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t p = t / runs;
      const std::size_t trial = t % runs;
      try {
        logs[t] = run_trial(config, policies[p], trial_seed(master_seed, trial, p, paired));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, tasks);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
  }
  for (std::size_t t = 0; t < tasks; ++t) {
    if (!errors[t]) continue;
    const std::size_t p = t / runs;
    const std::size_t trial = t % runs;
    std::string what = "unknown error";
    try {
      std::rethrow_exception(errors[t]);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    throw TrialFailure(policies[p], trial, trial_seed(master_seed, trial, p, paired), what);
  }
  ExperimentResult result;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    std::vector<RunLog> mine(std::make_move_iterator(logs.begin() + static_cast<std::ptrdiff_t>(p * runs)),
                             std::make_move_iterator(logs.begin() + static_cast<std::ptrdiff_t>((p + 1) * runs)));
    result.policies.push_back(summarize(policies[p], std::move(mine)));
  }
  return result;
}

namespace detail {
/// Shortest round-trip decimal form; identical bits give identical text.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}
}  // namespace detail

inline constexpr const char* kRunCsvHeader =
    "tick,sensor_x,sensor_y,command_j,command_l,n_map,n_eap,var_map,ospa,ospa_localization,ospa_cardinality,"
    "true_cardinality";

/// Per-tick CSV. Decision time is left out so that reruns are byte-identical;
/// it is reported in the summary instead.
inline void write_run_csv(std::ostream& out, const RunLog& log) {
  using detail::format_number;
  out << kRunCsvHeader << '\n';
  for (const auto& r : log.ticks) {
    out << r.tick << ',' << format_number(r.sensor.x) << ',' << format_number(r.sensor.y) << ','
        << r.command_radial << ',' << r.command_angular << ',' << r.n_map << ',' << format_number(r.n_eap) << ','
        << format_number(r.var_map) << ',' << format_number(r.ospa.total) << ','
        << format_number(r.ospa.localization) << ',' << format_number(r.ospa.cardinality) << ','
        << r.true_cardinality << '\n';
  }
}

inline nlohmann::json summary_json(const ScenarioConfig& config, const ExperimentResult& result, std::size_t runs,
                                   std::uint64_t master_seed, bool paired) {
  nlohmann::json j;
  j["scenario"] = scenario_to_json(config);
  j["runs"] = runs;
  j["seed"] = master_seed;
  j["paired"] = paired;
  j["policies"] = nlohmann::json::array();
  for (const auto& p : result.policies) {
    nlohmann::json e;
    e["policy"] = std::string(to_string(p.policy));
    e["ospa_mean"] = p.ospa_mean;
    e["ospa_stddev"] = p.ospa_stddev;
    e["n_map_mean"] = p.n_map_mean;
    e["final10_ospa_mean"] = p.final_window_ospa(10);
    e["mean_decision_seconds"] = p.mean_decision_seconds;
    std::vector<std::uint64_t> seeds;
    for (const auto& r : p.runs) seeds.push_back(r.seed);
    e["trial_seeds"] = seeds;
    j["policies"].push_back(std::move(e));
  }
  return j;
}

/// Writes <out>/<policy>/trial_NNNN.csv for every run and <out>/summary.json.
inline void write_experiment(const std::filesystem::path& out, const ScenarioConfig& config,
                             const ExperimentResult& result, std::size_t runs, std::uint64_t master_seed, bool paired) {
  for (const auto& p : result.policies) {
    const auto dir = out / std::string(to_string(p.policy));
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < p.runs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "trial_%04zu.csv", i);
      std::ofstream f(dir / name, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
      write_run_csv(f, p.runs[i]);
    }
  }
  std::ofstream f(out / "summary.json", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (out / "summary.json").string());
  f << summary_json(config, result, runs, master_seed, paired).dump(2) << '\n';
}

}  // namespace cbmember
