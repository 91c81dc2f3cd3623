#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfd/rl/environments.hpp"
#include "cfd/rl/q_network.hpp"

namespace cfd::rl {

enum class UpdateScheme {
  per_dialogue,  // one update per dialogue on the mean squared TD error
  per_step,      // one update after every step
};

std::string to_string(UpdateScheme s);
UpdateScheme update_scheme_from_string(const std::string& s);

struct D3qnConfig {
  std::size_t hidden = 256;
  double lr = 1e-3;
  std::size_t epochs = 20;
  double gamma = 0.9;
  double epsilon_start = 0.3;
  double epsilon_end = 0.01;
  std::size_t target_sync = 50;
  // Dialogues per epoch; 0 means one pass over the environment's starts.
  std::size_t dialogues_per_epoch = 0;
  UpdateScheme scheme = UpdateScheme::per_step;
  // per_dialogue only: sum the squared TD errors instead of averaging them.
  bool dialogue_loss_sum = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct D3qnHistory {
  std::vector<double> epoch_loss;    // mean squared TD error
  std::vector<double> epoch_return;  // mean undiscounted return
};

struct TrainedD3qn {
  QNetwork main;
  QNetwork target;
  D3qnHistory history;
  std::size_t updates = 0;
};

/// Linear epsilon schedule from start to end over `total` dialogues.
double epsilon_at(const D3qnConfig& config, std::size_t dialogue, std::size_t total);

/// Called after every epoch with (epoch index, main network).
using EpochHook = std::function<void(std::size_t, const QNetwork&)>;

TrainedD3qn train_d3qn(CandidateEnvironment& env, const D3qnConfig& config,
                       const EpochHook& on_epoch = {});

struct DialogueEvaluation {
  std::size_t start = 0;
  double reward = 0.0;  // undiscounted return of the greedy rollout
  double max_q = 0.0;
  double mean_q = 0.0;  // over chosen actions
  std::vector<std::size_t> path;
  std::optional<data::Episode> assembled;
};

struct PolicyEvaluation {
  std::vector<DialogueEvaluation> dialogues;
  double mean_reward() const;
  std::vector<double> rewards() const;
};

/// Greedy rollout from every start.
PolicyEvaluation evaluate_policy(const QNetwork& net, CandidateEnvironment& env);

}  // namespace cfd::rl
