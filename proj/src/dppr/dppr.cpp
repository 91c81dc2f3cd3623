#include "cfd/dppr/dppr.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "cfd/nn/adam.hpp"
#include "cfd/nn/errors.hpp"

namespace cfd::dppr {

using nn::Tensor;
using nn::Var;

void DpprConfig::validate() const {
  auto bad = [](const std::string& m) { throw std::invalid_argument("dppr." + m); };
  if (attention == 0) bad("attention must be positive");
  if (hidden == 0) bad("hidden must be positive");
  if (batch == 0) bad("batch must be positive");
  if (!(lr > 0.0)) bad("lr must be positive");
  if (window == 0) bad("window must be at least 1");
}

DpprModel::DpprModel(std::size_t dim, std::size_t attention, std::size_t hidden,
                     std::uint64_t seed)
    : dim_(dim), attention_(attention), hidden_(hidden) {
  if (dim == 0 || attention == 0 || hidden == 0)
    throw std::invalid_argument("DPPR dimensions must be positive");
  build_layers();
  Rng rng(seed);
  keys_.init(params_, rng);
  values_.init(params_, rng);
  params_.add_uniform("dppr.query", attention_, 1, attention_, rng);
  head_.init(params_, rng);
  params_.value(head_.layers.back().name + ".bias").fill(data::kTraitMidpoint);
}

void DpprModel::build_layers() {
  keys_ = nn::Dense{"dppr.keys", 2 * dim_, attention_};
  values_ = nn::Dense{"dppr.values", 2 * dim_, attention_};
  head_ = nn::Mlp::make("dppr.head", {attention_, hidden_, hidden_, data::kTraitDim},
                        nn::Activation::tanh);
}

Var DpprModel::forward(nn::Tape& tape, const std::vector<const TurnWindow*>& batch) const {
  if (batch.empty()) throw std::invalid_argument("empty DPPR batch");
  nn::Tape::Scope scope(tape, "dppr");
  const std::size_t n = batch.front()->utterances.size();
  if (n == 0 || n % 2 != 0) throw nn::DimensionError("dppr: window must hold whole turns");
  Tensor tokens = Tensor::zeros(batch.size() * n, 2 * dim_);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& u = batch[b]->utterances;
    if (u.size() != n) throw nn::DimensionError("dppr: windows in a batch differ in length");
    for (std::size_t j = 0; j < n; ++j) {
      if (u[j].size() != dim_)
        throw nn::DimensionError("dppr: utterance has dimension " + std::to_string(u[j].size()) +
                                 ", model expects " + std::to_string(dim_));
      // Even positions are states, odd positions actions.
      const std::size_t offset = (j % 2 == 0) ? 0 : dim_;
      std::copy(u[j].begin(), u[j].end(), &tokens((b * n) + j, offset));
    }
  }
  Var x = tape.constant(std::move(tokens));
  Var k = keys_(tape, params_, x);
  Var scores = nn::scale(nn::matmul(k, tape.parameter(params_, "dppr.query")),
                         1.0 / std::sqrt(double(attention_)));
  Var weights = nn::softmax_rows(nn::reshape(scores, batch.size(), n));
  Var pooled = nn::weighted_pool(weights, values_(tape, params_, x));
  return head_(tape, params_, pooled);
}

std::vector<TraitVector> DpprModel::predict(const std::vector<TurnWindow>& windows) const {
  std::vector<TraitVector> out;
  out.reserve(windows.size());
  constexpr std::size_t kChunk = 256;
  std::size_t i = 0;
  while (i < windows.size()) {
    std::vector<const TurnWindow*> batch;
    const std::size_t len = windows[i].utterances.size();
    while (i < windows.size() && batch.size() < kChunk && windows[i].utterances.size() == len)
      batch.push_back(&windows[i++]);
    nn::Tape tape;
    const Tensor& y = forward(tape, batch).value();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      TraitVector t{};
      for (std::size_t k = 0; k < data::kTraitDim; ++k) t[k] = y(b, k);
      out.push_back(t);
    }
  }
  return out;
}

TraitVector DpprModel::predict_turn(const TurnWindow& window) const {
  return predict({window}).front();
}

void DpprModel::save(const std::filesystem::path& path) const { nn::save_params(params_, path); }

DpprModel DpprModel::load(const std::filesystem::path& path) {
  DpprModel m;
  nn::ParamSet p = nn::load_params(path);
  if (!p.contains("dppr.keys.weight") || !p.contains("dppr.head.fc1.weight"))
    throw std::runtime_error(path.string() + " is not a DPPR checkpoint");
  m.dim_ = p.value("dppr.keys.weight").rows() / 2;
  m.attention_ = p.value("dppr.keys.weight").cols();
  m.hidden_ = p.value("dppr.head.fc1.weight").cols();
  m.build_layers();
  m.params_ = std::move(p);
  return m;
}

namespace {

void check_windows(const std::vector<TurnWindow>& windows) {
  if (windows.empty()) throw std::invalid_argument("no training windows");
  const std::size_t len = windows.front().utterances.size();
  const std::size_t d = windows.front().utterances.front().size();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].utterances.size() != len)
      throw std::invalid_argument("window " + std::to_string(i) + " has a different turn count");
    for (const auto& u : windows[i].utterances)
      if (u.size() != d)
        throw std::invalid_argument("window " + std::to_string(i) + " has inconsistent dimension");
  }
}

}  // namespace

TrainHistory fit(DpprModel& model, const std::vector<TurnWindow>& windows,
                 const DpprConfig& config) {
  config.validate();
  check_windows(windows);
  if (windows.front().utterances.front().size() != model.dim())
    throw std::invalid_argument("window dimension does not match the model");
  TrainHistory history;
  nn::AdamState adam(config.lr);
  Rng rng(derive_seed(config.seed, "dppr.batches"));
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      std::vector<const TurnWindow*> batch;
      Tensor target = Tensor::zeros(end - start, data::kTraitDim);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&windows[order[i]]);
        for (std::size_t k = 0; k < data::kTraitDim; ++k)
          target(i - start, k) = windows[order[i]].target[k];
      }
      nn::Tape tape;
      Var loss = nn::mse(model.forward(tape, batch), tape.constant(std::move(target)));
      const double l = loss.value().item();
      if (!std::isfinite(l)) throw std::runtime_error("DPPR loss became non-finite");
      tape.backward(loss);
      nn::adam_step(model.params(), adam);
      total += l;
      ++batches;
    }
    history.epoch_loss.push_back(total / double(batches));
  }
  return history;
}

TrainedDppr train_dppr(const std::vector<TurnWindow>& windows, const DpprConfig& config) {
  config.validate();
  check_windows(windows);
  TrainedDppr out{DpprModel(windows.front().utterances.front().size(), config.attention,
                            config.hidden, derive_seed(config.seed, "dppr.init")),
                  {}};
  out.history = fit(out.model, windows, config);
  return out;
}

RegressionMetrics evaluate(const DpprModel& model, const std::vector<TurnWindow>& windows) {
  std::vector<TraitVector> targets;
  targets.reserve(windows.size());
  for (const auto& w : windows) targets.push_back(w.target);
  return regression_metrics(model.predict(windows), targets);
}

CrossValidation cross_validate(const std::vector<TurnWindow>& windows, const DpprConfig& config,
                               std::size_t folds) {
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least two folds");
  check_windows(windows);
  std::vector<std::size_t> episodes;
  for (const auto& w : windows) episodes.push_back(w.episode);
  std::sort(episodes.begin(), episodes.end());
  episodes.erase(std::unique(episodes.begin(), episodes.end()), episodes.end());
  if (episodes.size() < folds)
    throw std::invalid_argument("fewer episodes than cross-validation folds");
  Rng rng(derive_seed(config.seed, "dppr.folds"));
  std::shuffle(episodes.begin(), episodes.end(), rng);
  std::map<std::size_t, std::size_t> fold_of;
  for (std::size_t i = 0; i < episodes.size(); ++i) fold_of[episodes[i]] = i % folds;

  CrossValidation cv;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<TurnWindow> train, test;
    for (const auto& w : windows) (fold_of[w.episode] == f ? test : train).push_back(w);
    DpprConfig c = config;
    c.seed = derive_seed(config.seed, f);
    TrainedDppr t = train_dppr(train, c);
    cv.folds.push_back(evaluate(t.model, test));
  }
  for (const auto& m : cv.folds) {
    cv.mean.mse += m.mse / double(folds);
    cv.mean.rmse += m.rmse / double(folds);
    cv.mean.mape += m.mape / double(folds);
    cv.mean.r2 += m.r2 / double(folds);
    cv.mean.mae += m.mae / double(folds);
  }
  return cv;
}

ProgressiveEstimator::ProgressiveEstimator(const DpprModel& model, std::size_t window)
    : model_(&model), window_(window) {
  if (window == 0) throw std::invalid_argument("window size must be at least 1");
}

TraitVector ProgressiveEstimator::estimate() const {
  if (count_ == 0) return data::prior_traits();
  TraitVector out{};
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = sum_[k] / double(count_);
  return out;
}

TraitVector ProgressiveEstimator::add_turn(const Vector& state, const Vector& action) {
  recent_.emplace_back(state, action);
  if (recent_.size() > window_) recent_.pop_front();
  TurnWindow w;
  for (const auto& [s, a] : recent_) {
    w.utterances.push_back(s);
    w.utterances.push_back(a);
  }
  TraitVector p = model_->predict_turn(w);
  per_turn_.push_back(p);
  for (std::size_t k = 0; k < p.size(); ++k) sum_[k] += p[k];
  ++count_;
  return estimate();
}

TraitEstimateTrace progressive_trace(const DpprModel& model, const data::Episode& episode,
                                     std::size_t window) {
  ProgressiveEstimator est(model, window);
  TraitEstimateTrace trace;
  for (std::size_t i = 0; i < episode.turns(); ++i)
    trace.running.push_back(est.add_turn(episode.states[i], episode.actions[i]));
  trace.per_turn = est.per_turn();
  return trace;
}

TraitVector progressive_estimate(const DpprModel& model, const data::Episode& episode,
                                 std::size_t t, std::size_t window) {
  if (t > episode.turns())
    throw std::out_of_range("turn " + std::to_string(t) + " beyond episode '" + episode.id +
                            "' with " + std::to_string(episode.turns()) + " turns");
  ProgressiveEstimator est(model, window);
  for (std::size_t i = 0; i < t; ++i) est.add_turn(episode.states[i], episode.actions[i]);
  return est.estimate();
}

}  // namespace cfd::dppr
