// Command-line driver for seeded sensor-control experiments.
//
//   cbmember_sim simulate --scenario s.json --policy renyi --runs 20 --seed 1 --out out/
//   cbmember_sim compare  --scenario s.json --policies renyi,cardvar-pims,static --runs 20 --seed 1 --out out/
//   cbmember_sim validate --scenario s.json

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cbmember/harness.hpp"
#include "cbmember/scenario.hpp"

namespace {

int fail(const std::string& kind, const std::string& message, std::optional<std::uint64_t> seed = std::nullopt,
         int code = 1) {
  nlohmann::json j{{"error", kind}, {"message", message}};
  if (seed) j["seed"] = *seed;
  std::cerr << j.dump() << '\n';
  return code;
}

std::vector<cbmember::Policy> parse_policies(const std::string& list) {
  std::vector<cbmember::Policy> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(cbmember::parse_policy(item));
  if (out.empty()) throw std::invalid_argument("no policies given");
  return out;
}

void print_summary(const cbmember::ExperimentResult& result) {
  for (const auto& p : result.policies) {
    nlohmann::json j{{"policy", std::string(cbmember::to_string(p.policy))},
                     {"runs", p.runs.size()},
                     {"final10_ospa_mean", p.final_window_ospa(10)},
                     {"mean_decision_seconds", p.mean_decision_seconds}};
    std::cout << j.dump() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-Bernoulli sensor-control simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string policy;
  std::string policies;
  std::string out_dir;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  bool unpaired = false;

  auto* simulate = app.add_subcommand("simulate", "run one policy over seeded Monte-Carlo trials");
  simulate->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  simulate->add_option("--policy", policy, "renyi | cardvar-sampling | cardvar-pims | static | random");
  simulate->add_option("--runs", runs, "number of trials (default: scenario value)");
  simulate->add_option("--seed", seed, "master seed (default: scenario value)");
  simulate->add_option("--out", out_dir, "output directory")->required();
  simulate->add_option("--jobs", jobs, "parallel trials");

  auto* compare = app.add_subcommand("compare", "run several policies on paired trials");
  compare->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  compare->add_option("--policies", policies, "comma-separated policy ids")->required();
  compare->add_option("--runs", runs, "number of trials (default: scenario value)");
  compare->add_option("--seed", seed, "master seed (default: scenario value)");
  compare->add_option("--out", out_dir, "output directory")->required();
  compare->add_option("--jobs", jobs, "parallel trials");
  compare->add_flag("--unpaired", unpaired, "independent randomness per policy");

  auto* validate = app.add_subcommand("validate", "check a scenario file");
  validate->add_option("--scenario", scenario_path, "scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), std::nullopt, 2);
  }

  cbmember::ScenarioConfig config;
  try {
    config = cbmember::load_scenario(scenario_path);
    if (!policy.empty()) config.policy = cbmember::parse_policy(policy);
    if (runs) config.runs = *runs;
    if (seed) config.seed = *seed;
    config.validate();
  } catch (const std::exception& e) {
    return fail("invalid-scenario", e.what(), std::nullopt, 2);
  }

  if (*validate) {
    std::cout << nlohmann::json{{"valid", true}, {"scenario", config.name}}.dump() << '\n';
    return 0;
  }

  try {
    const auto list = *compare ? parse_policies(policies) : std::vector<cbmember::Policy>{config.policy};
    const bool paired = !unpaired;
    const auto result = cbmember::run_experiment(config, list, config.runs, config.seed, paired, jobs);
    cbmember::write_experiment(out_dir, config, result, config.runs, config.seed, paired);
    print_summary(result);
  } catch (const cbmember::TrialFailure& e) {
    return fail("trial-failed", e.what(), e.seed());
  } catch (const std::exception& e) {
    return fail("experiment-failed", e.what());
  }
  return 0;
}
