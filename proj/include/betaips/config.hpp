#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "betaips/evaluation.hpp"
#include "betaips/learning.hpp"
#include "betaips/simulator.hpp"

namespace betaips {

// BanditNet translation: a number, or the mean logged reward of the
// training data.
struct MeanLoggedReward {
  friend bool operator==(MeanLoggedReward, MeanLoggedReward) { return true; }
};
using LambdaSetting = std::variant<double, MeanLoggedReward>;

struct TrainSettings {
  std::string estimator = "beta_ips_grad";
  LambdaSetting lambda = MeanLoggedReward{};
  std::size_t runs = 1;
  std::size_t test_contexts = 100000;
  // Optional path for the final policy of run 0.
  std::string policy_out;
};

struct SweepSettings {
  std::vector<double> lambda_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  double validation_fraction = 0.2;
};

struct EvaluateSettings {
  std::string dataset;
  std::string policy;
  std::optional<double> reference_value;
  std::vector<std::string> estimators{"ips", "snips", "dr", "beta_ips"};
};

// Every experiment knob. `seed` is the single source of randomness and is
// copied into the environment, optimizer and OPE sections on load.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  EnvironmentConfig environment;
  OptimizerConfig optimizer;
  TrainSettings train;
  SweepSettings sweep;
  OpeExperimentConfig ope;
  EvaluateSettings evaluate;

  // Propagates seed/threads into the nested sections.
  void apply_globals();
};

// Throws ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
// Every field, defaults included.
nlohmann::json config_to_json(const ExperimentConfig& config);
std::string dump_config(const ExperimentConfig& config);
// FNV-1a 64 over the dumped effective config, as 16 hex digits.
std::string config_digest(const ExperimentConfig& config);

}  // namespace betaips
