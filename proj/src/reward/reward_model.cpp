#include "cfd/reward/reward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cfd/nn/adam.hpp"
#include "cfd/nn/errors.hpp"

namespace cfd::reward {

using nn::Tensor;
using nn::Var;

void RewardConfig::validate() const {
  auto bad = [](const std::string& m) { throw std::invalid_argument("reward." + m); };
  if (hidden == 0) bad("hidden must be positive");
  if (batch == 0) bad("batch must be positive");
  if (!(lr > 0.0)) bad("lr must be positive");
  if (!(max_outcome > 0.0)) bad("max_outcome must be positive");
}

RewardModel::RewardModel(std::size_t dim, std::size_t hidden, std::uint64_t seed,
                         double initial_output, double max_outcome)
    : dim_(dim), hidden_(hidden), max_outcome_(max_outcome) {
  if (dim == 0 || hidden == 0) throw std::invalid_argument("reward model dimensions must be positive");
  build_layers();
  Rng rng(seed);
  cell_.init(params_, rng);
  readout_.init(params_, rng);
  params_.value("reward.readout.bias").fill(initial_output);
}

void RewardModel::build_layers() {
  cell_ = nn::GatedCell{"reward.cell", 2 * dim_, hidden_};
  readout_ = nn::Dense{"reward.readout", hidden_, 1};
}

Var RewardModel::forward(nn::Tape& tape, const std::vector<const data::Episode*>& batch) const {
  if (batch.empty()) throw std::invalid_argument("empty reward batch");
  nn::Tape::Scope scope(tape, "reward");
  const std::size_t steps = batch.front()->states.size();
  const std::size_t b = batch.size();
  for (const auto* e : batch) {
    if (e->states.size() != steps)
      throw nn::DimensionError("reward: episodes in a batch differ in padded length");
    if (e->dim() != dim_)
      throw nn::DimensionError("reward: episode dimension " + std::to_string(e->dim()) +
                               " does not match model dimension " + std::to_string(dim_));
  }
  Var h = tape.constant(Tensor::zeros(b, hidden_));
  for (std::size_t i = 0; i < steps; ++i) {
    Tensor x = Tensor::zeros(b, 2 * dim_);
    Tensor mask = Tensor::zeros(b, hidden_);
    bool any = false;
    for (std::size_t r = 0; r < b; ++r) {
      const data::Episode& e = *batch[r];
      if (!e.state_valid(i)) continue;
      any = true;
      std::copy(e.states[i].begin(), e.states[i].end(), &x(r, 0));
      if (i < e.actions.size() && e.action_valid(i))
        std::copy(e.actions[i].begin(), e.actions[i].end(), &x(r, dim_));
      std::fill(&mask(r, 0), &mask(r, 0) + hidden_, 1.0);
    }
    if (!any) break;
    h = cell_.masked_step(tape, params_, h, tape.constant(std::move(x)), tape.constant(std::move(mask)));
  }
  return readout_(tape, params_, h);
}

double RewardModel::raw_score(const data::Episode& episode) const {
  nn::Tape tape;
  return forward(tape, {&episode}).value().item();
}

double RewardModel::predict(const data::Episode& episode) const {
  return std::clamp(raw_score(episode), 0.0, max_outcome_);
}

std::vector<double> RewardModel::predict(const std::vector<data::Episode>& episodes) const {
  std::vector<double> out;
  out.reserve(episodes.size());
  constexpr std::size_t kChunk = 128;
  std::size_t i = 0;
  while (i < episodes.size()) {
    std::vector<const data::Episode*> batch;
    const std::size_t len = episodes[i].states.size();
    while (i < episodes.size() && batch.size() < kChunk && episodes[i].states.size() == len)
      batch.push_back(&episodes[i++]);
    nn::Tape tape;
    const Tensor& y = forward(tape, batch).value();
    for (double v : y.values()) out.push_back(std::clamp(v, 0.0, max_outcome_));
  }
  return out;
}

void RewardModel::save(const std::filesystem::path& path) const {
  nn::ParamSet all;
  for (const auto& e : params_) all.add(e.name, e.value);
  all.add("meta.max_outcome", Tensor::scalar(max_outcome_));
  nn::save_params(all, path);
}

RewardModel RewardModel::load(const std::filesystem::path& path) {
  nn::ParamSet all = nn::load_params(path);
  if (!all.contains("reward.cell.Wz") || !all.contains("meta.max_outcome"))
    throw std::runtime_error(path.string() + " is not a reward model checkpoint");
  RewardModel m;
  m.dim_ = all.value("reward.cell.Wz").rows() / 2;
  m.hidden_ = all.value("reward.cell.Wz").cols();
  m.max_outcome_ = all.value("meta.max_outcome").item();
  m.build_layers();
  for (const auto& e : all)
    if (e.name.rfind("meta.", 0) != 0) m.params_.add(e.name, e.value);
  return m;
}

namespace {

double batch_loss(const RewardModel& model, const std::vector<data::Episode>& episodes,
                  bool clamp) {
  if (episodes.empty()) return 0.0;
  std::vector<double> pred;
  if (clamp) {
    pred = model.predict(episodes);
  } else {
    for (const auto& e : episodes) pred.push_back(model.raw_score(e));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < episodes.size(); ++i)
    sq += (pred[i] - episodes[i].outcome) * (pred[i] - episodes[i].outcome);
  return sq / double(episodes.size());
}

}  // namespace

TrainedReward train_reward(const std::vector<data::Episode>& episodes, const RewardConfig& config,
                           const std::vector<data::Episode>* validation) {
  config.validate();
  if (episodes.empty()) throw std::invalid_argument("no episodes to train the reward model on");
  const std::size_t d = episodes.front().dim();
  double mean = 0.0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    if (e.dim() != d) throw std::invalid_argument("episode " + std::to_string(i) + " has inconsistent dimension");
    if (e.outcome > config.max_outcome || e.outcome < 0.0)
      throw std::invalid_argument("episode '" + e.id + "' outcome " + std::to_string(e.outcome) +
                                  " outside [0, " + std::to_string(config.max_outcome) + "]");
    mean += e.outcome;
  }
  mean /= double(episodes.size());

  TrainedReward out{RewardModel(d, config.hidden, derive_seed(config.seed, "reward.init"), mean,
                                config.max_outcome),
                    {}};
  nn::AdamState adam(config.lr);
  Rng rng(derive_seed(config.seed, "reward.batches"));
  std::vector<std::size_t> order(episodes.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      std::vector<const data::Episode*> batch;
      Tensor target = Tensor::zeros(end - start, 1);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&episodes[order[i]]);
        target(i - start, 0) = episodes[order[i]].outcome;
      }
      nn::Tape tape;
      Var loss = nn::mse(out.model.forward(tape, batch), tape.constant(std::move(target)));
      const double l = loss.value().item();
      if (!std::isfinite(l)) throw std::runtime_error("reward loss became non-finite");
      tape.backward(loss);
      nn::adam_step(out.model.params(), adam);
      total += l;
      ++batches;
    }
    out.history.epoch_loss.push_back(total / double(batches));
    if (validation) out.history.validation_loss.push_back(batch_loss(out.model, *validation, true));
  }
  return out;
}

double reward_mse(const RewardModel& model, const std::vector<data::Episode>& episodes) {
  return batch_loss(model, episodes, true);
}

std::size_t terminal_index(const data::Episode& episode) { return episode.terminal_position(); }

double step_reward(const RewardModel& model, const data::Episode& episode, std::size_t t) {
  const std::size_t terminal = terminal_index(episode);
  if (t > terminal)
    throw std::out_of_range("step " + std::to_string(t) + " beyond terminal index " +
                            std::to_string(terminal));
  if (t < terminal) return 0.0;
  return model.predict(episode);
}

std::vector<double> cumulative_sum(const std::vector<double>& values) {
  std::vector<double> out(values.size());
  std::partial_sum(values.begin(), values.end(), out.begin());
  return out;
}

std::vector<double> cumulative_rewards(const RewardModel& model,
                                       const std::vector<data::Episode>& episodes) {
  return cumulative_sum(model.predict(episodes));
}

}  // namespace cfd::reward
