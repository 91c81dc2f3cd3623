#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cfd/data/episode.hpp"
#include "cfd/nn/layers.hpp"
#include "cfd/nn/recurrent.hpp"

// Terminal-only reward: a recurrent pass over a dialogue's (state, action)
// steps, read out once from the final hidden state.
namespace cfd::reward {

struct RewardConfig {
  std::size_t hidden = 256;
  std::size_t batch = 64;
  double lr = 1e-4;
  std::size_t epochs = 1000;
  double max_outcome = 20.0;
  std::uint64_t seed = 0;

  void validate() const;
};

class RewardModel {
 public:
  RewardModel() = default;
  /// `initial_output` seeds the readout bias (e.g. the mean training outcome).
  RewardModel(std::size_t dim, std::size_t hidden, std::uint64_t seed,
              double initial_output = 0.0, double max_outcome = 20.0);

  std::size_t dim() const { return dim_; }
  std::size_t hidden() const { return hidden_; }
  double max_outcome() const { return max_outcome_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  /// Unclamped [B x 1] scores. Episodes in a batch must share their padded length.
  /// Step i consumes concat(s_i, a_i); the last state is paired with a zero
  /// action; padded steps leave the hidden state untouched.
  nn::Var forward(nn::Tape& tape, const std::vector<const data::Episode*>& batch) const;
  double raw_score(const data::Episode& episode) const;
  /// Score clamped to [0, max_outcome].
  double predict(const data::Episode& episode) const;
  std::vector<double> predict(const std::vector<data::Episode>& episodes) const;

  void save(const std::filesystem::path& path) const;
  static RewardModel load(const std::filesystem::path& path);

 private:
  std::size_t dim_ = 0;
  std::size_t hidden_ = 0;
  double max_outcome_ = 20.0;
  nn::GatedCell cell_;
  nn::Dense readout_;
  mutable nn::ParamSet params_;

  void build_layers();
};

struct RewardHistory {
  std::vector<double> epoch_loss;
  std::vector<double> validation_loss;  // empty without a validation set
};

struct TrainedReward {
  RewardModel model;
  RewardHistory history;
};

/// Squared-error regression of outcomes. Throws std::invalid_argument for an
/// empty set or outcomes above max_outcome.
TrainedReward train_reward(const std::vector<data::Episode>& episodes, const RewardConfig& config,
                           const std::vector<data::Episode>* validation = nullptr);

/// Mean squared error of clamped predictions.
double reward_mse(const RewardModel& model, const std::vector<data::Episode>& episodes);

/// Utterance index of the terminal state, where the only non-zero reward sits.
std::size_t terminal_index(const data::Episode& episode);

/// 0 for every t before the terminal index, the model's clamped score at it.
/// Throws std::out_of_range beyond the terminal index.
double step_reward(const RewardModel& model, const data::Episode& episode, std::size_t t);

/// out[k] = sum of the terminal rewards of episodes 0..k.
std::vector<double> cumulative_rewards(const RewardModel& model,
                                       const std::vector<data::Episode>& episodes);
std::vector<double> cumulative_sum(const std::vector<double>& values);

}  // namespace cfd::reward
