#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfd/pipeline/config.hpp"

namespace cfd::pipeline {

enum class Stage { gen_world, train_dppr, train_bicogan, train_reward, gen_cf, train_policy, evaluate, report };

/// Pipeline order used by "all".
const std::vector<Stage>& pipeline_order();
std::string stage_name(Stage s);   // "gen-world", ...
std::string stage_dir(Stage s);    // "world", ...
/// Throws std::invalid_argument for an unknown name.
Stage stage_from_name(const std::string& name);

/// A stage ran before the stage it depends on.
class MissingUpstream : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunContext {
  ExperimentConfig config;
  std::filesystem::path root;
  bool force = false;  // allow replacing a completed stage directory
  std::ostream* log = nullptr;
};

void run_stage(Stage stage, const RunContext& ctx);
void run_all(const RunContext& ctx);

/// FNV digest of the canonical config dump; recorded in every manifest.
std::string config_checksum(const ExperimentConfig& config);

}  // namespace cfd::pipeline
