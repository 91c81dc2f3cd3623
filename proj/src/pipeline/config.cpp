#include "cfd/pipeline/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cfd/common/rng.hpp"

namespace cfd::pipeline {

std::string to_string(CfSource s) {
  switch (s) {
    case CfSource::train: return "train";
    case CfSource::test: return "test";
    case CfSource::all: return "all";
  }
  return "test";
}

std::string to_string(gan::NoiseMode m) {
  switch (m) {
    case gan::NoiseMode::abducted: return "abducted";
    case gan::NoiseMode::zero: return "zero";
    case gan::NoiseMode::sampled: return "sampled";
  }
  return "abducted";
}

std::string to_string(world::BehaviorMode m) {
  return m == world::BehaviorMode::linear ? "linear" : "state_gated";
}

namespace {

// Reads the keys of one section, remembering which ones were consumed.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError(field(key), "expected true or false");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<long long>() >= 0))
          throw ConfigError(field(key), "expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError(field(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError(field(key), "expected a string");
      }
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  std::string read_string(const std::string& key, const std::string& fallback) {
    std::string s = fallback;
    read(key, s);
    return s;
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    static const json empty = json::object();
    return Section(it == node_.end() ? empty : *it, field(key));
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

gan::NoiseMode noise_from(const std::string& s, const std::string& path) {
  if (s == "abducted") return gan::NoiseMode::abducted;
  if (s == "zero") return gan::NoiseMode::zero;
  if (s == "sampled") return gan::NoiseMode::sampled;
  throw ConfigError(path, "unknown noise mode '" + s + "' (abducted, zero or sampled)");
}

CfSource source_from(const std::string& s, const std::string& path) {
  if (s == "train") return CfSource::train;
  if (s == "test") return CfSource::test;
  if (s == "all") return CfSource::all;
  throw ConfigError(path, "unknown source '" + s + "' (train, test or all)");
}

world::BehaviorMode behavior_from(const std::string& s, const std::string& path) {
  if (s == "linear") return world::BehaviorMode::linear;
  if (s == "state_gated") return world::BehaviorMode::state_gated;
  throw ConfigError(path, "unknown behavior '" + s + "' (linear or state_gated)");
}

// Validation messages from module configs name their own fields ("d3qn.lr ...");
// keep them but attach the config section.
template <typename F>
void check(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

void ExperimentConfig::derive_seeds() {
  world.seed = derive_seed(seed, "world");
  dppr.model.seed = derive_seed(seed, "dppr");
  bicogan.seed = derive_seed(seed, "bicogan");
  reward.seed = derive_seed(seed, "reward");
  policy.model.seed = derive_seed(seed, "policy");
}

void ExperimentConfig::validate() const {
  check("world", [&] { world.validate(); });
  if (data.episodes < 10) throw ConfigError("data.episodes", "must be at least 10");
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0))
    throw ConfigError("data.test_fraction", "must lie in (0, 1)");
  if (!(data.max_outcome > 0.0)) throw ConfigError("data.max_outcome", "must be positive");
  check("dppr", [&] { dppr.model.validate(); });
  if (dppr.report_windows.empty()) throw ConfigError("dppr.report_windows", "must not be empty");
  for (std::size_t i = 0; i < dppr.report_windows.size(); ++i) {
    const auto w = dppr.report_windows[i];
    if (w == 0 || w > world.actions())
      throw ConfigError("dppr.report_windows[" + std::to_string(i) + "]",
                        "window must lie in [1, " + std::to_string(world.actions()) + "]");
  }
  if (dppr.model.window > world.actions())
    throw ConfigError("dppr.window", "exceeds the " + std::to_string(world.actions()) + " turns per dialogue");
  if (dppr.folds < 2) throw ConfigError("dppr.folds", "must be at least 2");
  check("bicogan", [&] { bicogan.validate(); });
  if (reward.hidden == 0 || reward.batch == 0) throw ConfigError("reward", "hidden and batch must be positive");
  if (!(reward.lr > 0.0)) throw ConfigError("reward.lr", "must be positive");
  if (counterfactual.databases < 2) throw ConfigError("counterfactual.databases", "must be at least 2");
  if (counterfactual.pool_limit < counterfactual.databases)
    throw ConfigError("counterfactual.pool_limit", "must be at least counterfactual.databases");
  if (counterfactual.strategy < 1 || counterfactual.strategy > 3)
    throw ConfigError("counterfactual.strategy", "must be 1, 2 or 3");
  check("policy", [&] { policy.model.validate(); });
  if (policy.cases.empty()) throw ConfigError("policy.cases", "must not be empty");
  for (std::size_t i = 0; i < policy.cases.size(); ++i)
    if (policy.cases[i] != 1 && policy.cases[i] != 2)
      throw ConfigError("policy.cases[" + std::to_string(i) + "]", "must be 1 or 2");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Section root(j, "");
  root.read("seed", c.seed);

  {
    Section s = root.child("world");
    auto& w = c.world;
    s.read("d", w.d);
    s.read("T", w.T);
    s.read("noise_scale", w.noise_scale);
    s.read("nonlinearity_gain", w.nonlinearity_gain);
    s.read("state_norm", w.state_norm);
    s.read("action_gain", w.action_gain);
    s.read("trait_gain", w.trait_gain);
    s.read("outcome_gain", w.outcome_gain);
    s.read("initial_state_scale", w.initial_state_scale);
    s.read("trait_scale", w.trait_scale);
    w.behavior = behavior_from(s.read_string("behavior", to_string(w.behavior)), s.field("behavior"));
    s.read("policy_state_gain", w.policy_state_gain);
    s.read("policy_trait_gain", w.policy_trait_gain);
    s.read("behavior_noise", w.behavior_noise);
    s.read("behavior_bias_scale", w.behavior_bias_scale);
    s.read("gate_sharpness", w.gate_sharpness);
    s.finish();
  }
  {
    Section s = root.child("data");
    s.read("episodes", c.data.episodes);
    s.read("test_fraction", c.data.test_fraction);
    s.read("max_outcome", c.data.max_outcome);
    s.finish();
  }
  {
    Section s = root.child("dppr");
    auto& m = c.dppr.model;
    s.read("attention", m.attention);
    s.read("hidden", m.hidden);
    s.read("batch", m.batch);
    s.read("lr", m.lr);
    s.read("epochs", m.epochs);
    s.read("window", m.window);
    s.read("report_windows", c.dppr.report_windows);
    s.read("folds", c.dppr.folds);
    s.finish();
  }
  {
    Section s = root.child("bicogan");
    auto& m = c.bicogan;
    s.read("hidden", m.hidden);
    s.read("batch", m.batch);
    s.read("lr", m.lr);
    s.read("epochs", m.epochs);
    s.read("lambda", m.lambda);
    s.read("reconstruction", m.reconstruction);
    s.read("non_saturating", m.non_saturating);
    s.read("tolerance_quantile", m.tolerance_quantile);
    s.finish();
  }
  {
    Section s = root.child("reward");
    auto& m = c.reward;
    s.read("hidden", m.hidden);
    s.read("batch", m.batch);
    s.read("lr", m.lr);
    s.read("epochs", m.epochs);
    s.finish();
  }
  {
    Section s = root.child("counterfactual");
    auto& m = c.counterfactual;
    s.read("databases", m.databases);
    s.read("pool_limit", m.pool_limit);
    s.read("strategy", m.strategy);
    s.read("without_replacement", m.without_replacement);
    m.noise = noise_from(s.read_string("noise", to_string(m.noise)), s.field("noise"));
    s.read("reestimate_traits", m.reestimate_traits);
    m.source = source_from(s.read_string("source", to_string(m.source)), s.field("source"));
    s.finish();
  }
  {
    Section s = root.child("policy");
    auto& m = c.policy.model;
    s.read("hidden", m.hidden);
    s.read("batch", c.policy.batch);
    s.read("lr", m.lr);
    s.read("epochs", m.epochs);
    s.read("gamma", m.gamma);
    s.read("epsilon_start", m.epsilon_start);
    s.read("epsilon_end", m.epsilon_end);
    s.read("target_sync", m.target_sync);
    s.read("dialogues_per_epoch", m.dialogues_per_epoch);
    const std::string reduction = s.read_string("dialogue_loss", "mean");
    if (reduction != "mean" && reduction != "sum")
      throw ConfigError(s.field("dialogue_loss"), "must be \"mean\" or \"sum\"");
    m.dialogue_loss_sum = reduction == "sum";
    s.read("cases", c.policy.cases);
    s.finish();
  }
  root.finish();
  c.reward.max_outcome = c.data.max_outcome;
  c.derive_seeds();
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  const auto& w = c.world;
  const auto& p = c.policy.model;
  return json{
      {"seed", c.seed},
      {"world",
       {{"d", w.d}, {"T", w.T}, {"noise_scale", w.noise_scale},
        {"nonlinearity_gain", w.nonlinearity_gain}, {"state_norm", w.state_norm},
        {"action_gain", w.action_gain}, {"trait_gain", w.trait_gain},
        {"outcome_gain", w.outcome_gain}, {"initial_state_scale", w.initial_state_scale},
        {"trait_scale", w.trait_scale}, {"behavior", to_string(w.behavior)},
        {"policy_state_gain", w.policy_state_gain}, {"policy_trait_gain", w.policy_trait_gain},
        {"behavior_noise", w.behavior_noise}, {"behavior_bias_scale", w.behavior_bias_scale},
        {"gate_sharpness", w.gate_sharpness}}},
      {"data",
       {{"episodes", c.data.episodes}, {"test_fraction", c.data.test_fraction},
        {"max_outcome", c.data.max_outcome}}},
      {"dppr",
       {{"attention", c.dppr.model.attention}, {"hidden", c.dppr.model.hidden},
        {"batch", c.dppr.model.batch}, {"lr", c.dppr.model.lr}, {"epochs", c.dppr.model.epochs},
        {"window", c.dppr.model.window}, {"report_windows", c.dppr.report_windows},
        {"folds", c.dppr.folds}}},
      {"bicogan",
       {{"hidden", c.bicogan.hidden}, {"batch", c.bicogan.batch}, {"lr", c.bicogan.lr},
        {"epochs", c.bicogan.epochs}, {"lambda", c.bicogan.lambda},
        {"reconstruction", c.bicogan.reconstruction}, {"non_saturating", c.bicogan.non_saturating},
        {"tolerance_quantile", c.bicogan.tolerance_quantile}}},
      {"reward",
       {{"hidden", c.reward.hidden}, {"batch", c.reward.batch}, {"lr", c.reward.lr},
        {"epochs", c.reward.epochs}}},
      {"counterfactual",
       {{"databases", c.counterfactual.databases}, {"pool_limit", c.counterfactual.pool_limit},
        {"strategy", c.counterfactual.strategy},
        {"without_replacement", c.counterfactual.without_replacement},
        {"noise", to_string(c.counterfactual.noise)},
        {"reestimate_traits", c.counterfactual.reestimate_traits},
        {"source", to_string(c.counterfactual.source)}}},
      {"policy",
       {{"hidden", p.hidden}, {"batch", c.policy.batch}, {"lr", p.lr}, {"epochs", p.epochs},
        {"gamma", p.gamma}, {"epsilon_start", p.epsilon_start}, {"epsilon_end", p.epsilon_end},
        {"target_sync", p.target_sync}, {"dialogues_per_epoch", p.dialogues_per_epoch},
        {"dialogue_loss", p.dialogue_loss_sum ? "sum" : "mean"}, {"cases", c.policy.cases}}},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("parse error: ") + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override must look like section.key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &tree;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path[i].empty()) throw ConfigError(key, "empty path component");
    if (!node->is_object()) throw ConfigError(key, "'" + path[i] + "' is not inside a section");
    if (i + 1 == path.size()) (*node)[path[i]] = value;
    else node = &(*node)[path[i]];
  }
}

}  // namespace cfd::pipeline
