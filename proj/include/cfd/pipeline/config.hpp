#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfd/dppr/dppr.hpp"
#include "cfd/gan/bicogan.hpp"
#include "cfd/reward/reward_model.hpp"
#include "cfd/rl/policy.hpp"
#include "cfd/world/synthworld.hpp"

namespace cfd::pipeline {

using json = nlohmann::json;

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct DataConfig {
  std::size_t episodes = 997;
  double test_fraction = 0.2;
  double max_outcome = 20.0;
};

struct DpprStageConfig {
  dppr::DpprConfig model;
  std::vector<std::size_t> report_windows{1, 2, 4, 8};
  std::size_t folds = 5;
};

enum class CfSource { train, test, all };

struct CounterfactualConfig {
  std::size_t databases = 100;  // kept after balancing
  std::size_t pool_limit = 400;  // most databases generated while seeking a balanced split
  int strategy = 2;
  bool without_replacement = false;
  gan::NoiseMode noise = gan::NoiseMode::abducted;
  bool reestimate_traits = true;
  CfSource source = CfSource::test;
};

struct PolicyStageConfig {
  rl::D3qnConfig model;
  std::size_t batch = 60;  // recorded only; updates follow the rollout order
  std::vector<int> cases{1, 2};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  world::WorldConfig world;
  DataConfig data;
  DpprStageConfig dppr;
  gan::BiCoGanConfig bicogan;
  reward::RewardConfig reward;
  CounterfactualConfig counterfactual;
  PolicyStageConfig policy;

  /// Sub-seeds derived from the master seed.
  void derive_seeds();
  void validate() const;
};

/// Defaults for every field; unknown keys and type mismatches throw ConfigError.
ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" to the tree. The value is parsed as JSON when possible
/// and kept as a string otherwise.
void apply_override(json& tree, const std::string& assignment);

std::string to_string(CfSource s);
std::string to_string(gan::NoiseMode m);
std::string to_string(world::BehaviorMode m);

}  // namespace cfd::pipeline
