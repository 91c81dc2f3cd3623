#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <vector>

#include "cfd/data/dataset_ops.hpp"
#include "cfd/dppr/regression_metrics.hpp"
#include "cfd/nn/layers.hpp"

// Trait regression from dialogue turns. Each utterance becomes a 2d token with
// the state in the first d slots and the action in the last d, a learned query
// attends over the tokens, and three dense layers map the pooled vector to the
// five trait values.
namespace cfd::dppr {

using data::TraitVector;
using data::TurnWindow;
using data::Vector;

struct DpprConfig {
  std::size_t attention = 64;  // key/value width
  std::size_t hidden = 1024;
  std::size_t batch = 64;
  double lr = 1e-4;
  std::size_t epochs = 100;
  std::size_t window = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

class DpprModel {
 public:
  DpprModel() = default;
  DpprModel(std::size_t dim, std::size_t attention, std::size_t hidden, std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  std::size_t attention() const { return attention_; }
  std::size_t hidden() const { return hidden_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  /// [B x 5] predictions for windows that all have the same number of turns.
  nn::Var forward(nn::Tape& tape, const std::vector<const TurnWindow*>& batch) const;
  TraitVector predict_turn(const TurnWindow& window) const;
  std::vector<TraitVector> predict(const std::vector<TurnWindow>& windows) const;

  void save(const std::filesystem::path& path) const;
  static DpprModel load(const std::filesystem::path& path);

 private:
  std::size_t dim_ = 0;
  std::size_t attention_ = 0;
  std::size_t hidden_ = 0;
  nn::Dense keys_, values_;
  nn::Mlp head_;
  mutable nn::ParamSet params_;

  void build_layers();
};

struct TrainHistory {
  std::vector<double> epoch_loss;  // mean squared error averaged over the epoch's batches
};

struct TrainedDppr {
  DpprModel model;
  TrainHistory history;
};

/// Mini-batch Adam on mean squared error. Throws std::invalid_argument for an
/// empty window list or windows of inconsistent dimension or length.
TrainedDppr train_dppr(const std::vector<TurnWindow>& windows, const DpprConfig& config);

/// Continues training an existing model.
TrainHistory fit(DpprModel& model, const std::vector<TurnWindow>& windows,
                 const DpprConfig& config);

RegressionMetrics evaluate(const DpprModel& model, const std::vector<TurnWindow>& windows);

struct CrossValidation {
  std::vector<RegressionMetrics> folds;
  RegressionMetrics mean;
};

/// k-fold cross-validation with folds grouped by source episode, so no episode
/// contributes windows to both sides of a fold.
CrossValidation cross_validate(const std::vector<TurnWindow>& windows, const DpprConfig& config,
                               std::size_t folds = 5);

/// Running trait estimate over a conversation. Turn i uses the window of up to
/// `window` turns ending at i; L_t is the mean of the per-turn predictions so far.
class ProgressiveEstimator {
 public:
  ProgressiveEstimator(const DpprModel& model, std::size_t window);

  /// Current estimate; the midpoint prior before any turn.
  TraitVector estimate() const;
  std::size_t turns() const { return count_; }
  /// Adds one (state, action) exchange and returns the updated estimate.
  TraitVector add_turn(const Vector& state, const Vector& action);
  const std::vector<TraitVector>& per_turn() const { return per_turn_; }

 private:
  const DpprModel* model_;
  std::size_t window_;
  std::deque<std::pair<Vector, Vector>> recent_;
  std::vector<TraitVector> per_turn_;
  TraitVector sum_{};
  std::size_t count_ = 0;
};

/// L_t after turns 0..t-1 of the episode (t = 0 gives the prior). Throws
/// std::out_of_range past the episode's unpadded turns.
TraitVector progressive_estimate(const DpprModel& model, const data::Episode& episode,
                                 std::size_t t, std::size_t window = 1);

struct TraitEstimateTrace {
  std::vector<TraitVector> per_turn;
  std::vector<TraitVector> running;  // running[i] = mean of per_turn[0..i]
};

TraitEstimateTrace progressive_trace(const DpprModel& model, const data::Episode& episode,
                                     std::size_t window = 1);

}  // namespace cfd::dppr
