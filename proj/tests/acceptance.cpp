// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any selected criterion fails.
//
//   cbmember_acceptance                 all criteria
//   cbmember_acceptance --criterion 6   one criterion

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "cbmember/cbmember.hpp"
#include "test_support.hpp"

using namespace cbmember;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

ScenarioConfig scenario(const char* file) { return load_scenario(std::string(CBMEMBER_SCENARIO_DIR) + "/" + file); }

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

Outcome cardinality_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(1001);
  std::uniform_int_distribution<std::size_t> size(0, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double pmf_err = 0.0, identity_err = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> r(size(gen));
    for (auto& v : r) v = unit(gen);
    const auto pmf = cardinality_pmf(r);
    const auto oracle = testing::brute_force_pmf(r);
    for (std::size_t n = 0; n < pmf.size(); ++n) pmf_err = std::max(pmf_err, std::abs(pmf[n] - oracle[n]));
    const auto s = cardinality_stats(r);
    double sum = 0.0, var = 0.0;
    for (const double v : r) sum += v, var += v * (1 - v);
    const double d = static_cast<double>(s.n_map) - s.n_eap;
    identity_err = std::max({identity_err, std::abs(s.n_eap - sum), std::abs(s.var_eap - var),
                             std::abs(s.var_map - (s.var_eap + d * d))});
  }
  const double elapsed = seconds_since(t0);
  return {pmf_err <= 1e-10 && identity_err <= 1e-9 && elapsed < 5.0,
          fmt("max pmf error %.2e (<= 1e-10), max identity error %.2e (<= 1e-9), %.2f s (< 5 s)", pmf_err,
              identity_err, elapsed)};
}

Outcome update_oracle() {
  std::mt19937_64 gen(1002);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double legacy_err = 0.0, empty_err = 0.0, updated_err = 0.0;
  for (int t = 0; t < 500; ++t) {
    const double r = unit(gen) * kMaxExistence, pd = unit(gen), clutter = 5.0 * unit(gen);
    SensorModel sensor = testing::constant_detection_sensor(pd, clutter);
    const SensorPose s{100, 100};
    PredictedDensity pred;
    RngStream rng(t);
    BernoulliComponent c{r, {}};
    for (int j = 0; j < 50; ++j)
      c.particles.push_back({0.02, StateVector(500 + 30 * standard_normal(rng), 500 + 30 * standard_normal(rng), 0, 0)});
    pred.density.components.push_back(c);
    const double closed = r * (1 - pd) / (1 - r * pd);

    const auto none = cardinality_balanced_update(pred, {}, sensor, s);
    empty_err = std::max(empty_err, none.empty() ? 1.0 : std::abs(none.components[0].existence - closed));

    const auto z = generate_measurements(sensor, std::vector<StateVector>{StateVector(500, 500, 0, 0)}, s, rng);
    const auto full = cardinality_balanced_update(pred, z, sensor, s);
    legacy_err = std::max(legacy_err, full.empty() ? 1.0 : std::abs(full.components[0].existence - closed));
    // the measurement-updated existence against its single-component closed form
    const double r_max = max_clutter_range(sensor, s);
    std::size_t next = 1;
    for (const auto& m : z) {
      double psi = 0.0;
      for (const auto& p : c.particles) psi += p.weight * pd * measurement_likelihood(sensor, m, p.state, s);
      const double kappa = std::max(clutter * clutter_density(sensor, m, r_max), kClutterFloor);
      const double miss = 1 - r * pd;
      const double expected = std::min(r * (1 - r) * psi / (miss * miss) / (kappa + r * psi / miss), kMaxExistence);
      if (expected == 0.0 || psi == 0.0) continue;
      updated_err = std::max(updated_err, next < full.size() ? std::abs(full.components[next].existence - expected) : 1.0);
      ++next;
    }
  }

  double like_abs = 0.0, like_rel = 0.0;
  SensorModel rb, ro;
  ro.kind = SensorKind::range_only;
  std::uniform_real_distribution<double> coord(0.0, 1000.0);
  for (int t = 0; t < 2000; ++t) {
    const SensorModel& m = t % 2 ? rb : ro;
    const SensorPose s{coord(gen), coord(gen)};
    std::vector<StateVector> x(static_cast<std::size_t>(t % 4));
    for (auto& v : x) v = StateVector(coord(gen), coord(gen), 0, 0);
    RngStream rng(t);
    MeasurementSet z = generate_measurements(m, x, s, rng);
    z.resize(std::min<std::size_t>(z.size(), (t / 4) % 4));
    const double fast = multi_object_likelihood(z, x, m, s);
    const double slow = testing::brute_force_multi_object_likelihood(z, x, m, s);
    like_abs = std::max(like_abs, std::abs(fast - slow));
    if (slow > 0.0) like_rel = std::max(like_rel, std::abs(fast - slow) / slow);
  }
  const bool pass = legacy_err <= 1e-12 && empty_err <= 1e-12 && updated_err <= 1e-12 && like_abs <= 1e-12;
  return {pass, fmt("missed-detection existence error %.2e, empty-scan error %.2e, updated existence error %.2e "
                    "(all <= 1e-12); multi-object likelihood abs error %.2e (<= 1e-12, rel %.2e)",
                    legacy_err, empty_err, updated_err, like_abs, like_rel)};
}

Outcome ospa_oracle() {
  std::mt19937_64 gen(1003);
  std::uniform_int_distribution<std::size_t> small(0, 6), large(0, 12);
  std::uniform_real_distribution<double> coord(0.0, 400.0);
  auto draw = [&](std::size_t n) {
    std::vector<Eigen::Vector2d> p(n);
    for (auto& v : p) v = {coord(gen), coord(gen)};
    return p;
  };
  double brute_err = 0.0;
  for (int t = 0; t < 2000; ++t) {
    const auto x = draw(small(gen)), y = draw(small(gen));
    const double p = 1.0 + t % 3;
    const double fast = ospa(std::span<const Eigen::Vector2d>(x), std::span<const Eigen::Vector2d>(y), OspaParams{p, 100}).total;
    brute_err = std::max(brute_err, std::abs(fast - testing::brute_force_ospa(x, y, p, 100)));
  }
  std::size_t asymmetric = 0, out_of_bounds = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto x = draw(large(gen)), y = draw(large(gen));
    const OspaParams params{1.0 + (t % 4), 20.0 + 10.0 * (t % 10)};
    const double a = ospa(std::span<const Eigen::Vector2d>(x), std::span<const Eigen::Vector2d>(y), params).total;
    const double b = ospa(std::span<const Eigen::Vector2d>(y), std::span<const Eigen::Vector2d>(x), params).total;
    asymmetric += a != b;
    out_of_bounds += !(a >= 0.0 && a <= params.cutoff);
  }
  return {brute_err <= 1e-10 && asymmetric == 0 && out_of_bounds == 0,
          fmt("brute-force error %.2e (<= 1e-10); %zu asymmetric and %zu out-of-bound results in 10000 pairs",
              brute_err, asymmetric, out_of_bounds)};
}

Outcome renyi_properties() {
  std::mt19937_64 gen(1004);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double constant_err = 0.0, rescale_err = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + t % 50;
    std::vector<double> w(n), g(n), scaled(n), flat(n, std::exp(-400 * unit(gen)));
    double total = 0.0;
    for (auto& v : w) total += (v = unit(gen) + 1e-3);
    for (auto& v : w) v /= total;
    const double c = std::exp(300 * (unit(gen) - 0.5));
    for (std::size_t i = 0; i < n; ++i) scaled[i] = c * (g[i] = unit(gen) * std::exp(-30 * unit(gen)));
    const double alpha = t % 4 == 0 ? 0.5 : 2.0 * unit(gen);
    if (alpha == 1.0) continue;
    constant_err = std::max(constant_err, std::abs(renyi_reward_from_likelihoods(w, flat, alpha)));
    rescale_err = std::max(rescale_err, std::abs(renyi_reward_from_likelihoods(w, g, alpha) -
                                                 renyi_reward_from_likelihoods(w, scaled, alpha)));
  }
  const std::vector<double> w{0.5, 0.5}, g{1.0, 0.0};
  const double worked_err = std::abs(renyi_reward_from_likelihoods(w, g, 0.5) - std::log(2.0));
  return {constant_err <= 1e-12 && rescale_err <= 1e-9 && worked_err <= 1e-12,
          fmt("constant-likelihood reward %.2e (zero), rescaling difference %.2e (<= 1e-9), worked example error "
              "%.2e (<= 1e-12)",
              constant_err, rescale_err, worked_err)};
}

Outcome filter_sanity() {
  const auto t0 = Clock::now();
  auto config = scenario("single_target.json");
  config.truth.horizon = 40;
  const auto result = run_experiment(config, {Policy::static_sensor}, 50, config.seed, true, worker_count());
  std::size_t hits = 0, total = 0;
  for (const auto& run : result.policies[0].runs)
    for (const auto& r : run.ticks) {
      if (r.tick <= 5) continue;
      hits += r.n_map == 1;
      ++total;
    }
  const double fraction = static_cast<double>(hits) / static_cast<double>(total);
  const double elapsed = seconds_since(t0);
  return {fraction >= 0.9 && elapsed < 120.0,
          fmt("n_map = 1 in %.1f%% of %zu post-burn-in ticks (>= 90%%), %.1f s (< 120 s)", 100 * fraction, total, elapsed)};
}

Outcome range_bearing_ordering() {
  const auto t0 = Clock::now();
  const auto config = scenario("range_bearing.json");
  const std::vector<Policy> policies{Policy::static_sensor, Policy::cardvar_pims, Policy::renyi};
  const auto result = run_experiment(config, policies, 20, config.seed, true, worker_count());
  const double stat = result.policies[0].final_window_ospa(10);
  const double pims = result.policies[1].final_window_ospa(10);
  const double renyi = result.policies[2].final_window_ospa(10);
  const double elapsed = seconds_since(t0);
  return {pims <= stat - 10.0 && renyi <= stat - 10.0 && elapsed < 900.0,
          fmt("final-10 mean OSPA static %.2f m, cardvar-pims %.2f m, renyi %.2f m (controlled <= static - 10 m), "
              "%.0f s (< 900 s)",
              stat, pims, renyi, elapsed)};
}

Outcome range_only_ordering() {
  const auto t0 = Clock::now();
  const auto config = scenario("range_only.json");
  const auto result = run_experiment(config, {Policy::cardvar_pims, Policy::renyi}, 20, config.seed, true, worker_count());
  const double pims = result.policies[0].final_window_ospa(10);
  const double renyi = result.policies[1].final_window_ospa(10);
  return {renyi <= pims, fmt("final-10 mean OSPA renyi %.2f m <= cardvar-pims %.2f m, %.0f s", renyi, pims, seconds_since(t0))};
}

Outcome runtime_ordering() {
  const auto config = scenario("range_bearing.json");
  const CardVarConfig sampling_cfg{25, 1000};
  const auto truth = scripted_truth(config.truth);
  const auto motion = config.motion();
  const std::uint64_t seed = trial_seed(config.seed, 0);
  MultiBernoulliDensity posterior;
  SensorPose sensor = config.sensor_start;
  double pims_time = 0.0, sampling_time = 0.0;
  const int ticks = 12;
  for (int k = 1; k <= ticks; ++k) {
    auto prng = tick_stream(seed, k, StreamPurpose::predict);
    const auto predicted = predict(posterior, motion, config.birth, prng);

    auto t0 = Clock::now();
    const auto pims = select_control_cardvar_pims(predicted, config.control.grid, config.sensor, sensor);
    pims_time += seconds_since(t0);

    auto crng = tick_stream(seed, k, StreamPurpose::control);
    t0 = Clock::now();
    select_control_cardvar_sampling(predicted, config.control.grid, config.sensor, sensor, sampling_cfg, crng);
    sampling_time += seconds_since(t0);

    sensor = pims.command.pose;
    auto mrng = tick_stream(seed, k, StreamPurpose::measure);
    const auto z = generate_measurements(config.sensor, truth.at(k), sensor, mrng);
    auto urng = tick_stream(seed, k, StreamPurpose::update);
    posterior = update(predicted, z, config.sensor, sensor, config.filter, urng);
  }
  pims_time /= ticks;
  sampling_time /= ticks;
  return {pims_time <= 0.1 * sampling_time,
          fmt("mean decision time cardvar-pims %.3g s vs cardvar-sampling %.3g s (ratio %.2e <= 0.1), S = 1000, T = 25",
              pims_time, sampling_time, pims_time / sampling_time)};
}

std::vector<std::pair<std::string, std::string>> tree_contents(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    std::ifstream f(e.path(), std::ios::binary);
    out.emplace_back(fs::relative(e.path(), root).string(),
                     std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "cbmember_acceptance_determinism";
  fs::remove_all(base);
  const std::string scenario_file = std::string(CBMEMBER_SCENARIO_DIR) + "/range_bearing.json";
  const std::vector<std::pair<std::string, int>> invocations{{"serial", 1}, {"parallel_a", 4}, {"parallel_b", 4}};
  for (const auto& [name, jobs] : invocations) {
    const std::string cmd = std::string("\"") + CBMEMBER_SIM + "\" compare --scenario \"" + scenario_file +
                            "\" --policies static,cardvar-pims,renyi,random --runs 4 --seed 99 --jobs " +
                            std::to_string(jobs) + " --out \"" + (base / name).string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "simulator invocation failed: " + cmd};
  }
  const auto reference = tree_contents(base / "serial");
  bool same = !reference.empty();
  for (const auto& [name, jobs] : invocations) same = same && tree_contents(base / name) == reference;
  const std::size_t files = reference.size();
  fs::remove_all(base);
  return {same, fmt("%zu per-trial CSV files byte-identical across 3 invocations (1 and 4 worker threads): %s", files,
                    same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"cardinality statistics oracle", cardinality_oracle},
      {"update formula oracle", update_oracle},
      {"OSPA oracle", ospa_oracle},
      {"Renyi reward properties", renyi_properties},
      {"single-target filter sanity", filter_sanity},
      {"range-bearing control beats static sensor", range_bearing_ordering},
      {"range-only Renyi at least as good as cardvar-pims", range_only_ordering},
      {"PIMS decision time at most a tenth of sampling", runtime_ordering},
      {"byte-identical reruns", determinism},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i + 1) != only) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
