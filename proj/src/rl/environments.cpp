#include "cfd/rl/environments.hpp"

#include <stdexcept>
#include <string>

namespace cfd::rl {

CounterfactualEnvironment::CounterfactualEnvironment(std::vector<const cf::CfDatabase*> databases,
                                                     const reward::RewardModel& reward_model)
    : databases_(std::move(databases)), reward_model_(&reward_model) {
  if (databases_.empty()) throw std::invalid_argument("environment needs at least one database");
  const auto& first = databases_.front()->episodes;
  if (first.empty()) throw std::invalid_argument("database " + std::to_string(databases_.front()->index) + " is empty");
  dialogues_ = first.size();
  dim_ = first.front().dim();
  for (const auto* db : databases_) {
    if (db->episodes.size() != dialogues_)
      throw std::invalid_argument("database " + std::to_string(db->index) + " holds " +
                                  std::to_string(db->episodes.size()) + " dialogues, expected " +
                                  std::to_string(dialogues_));
    for (std::size_t j = 0; j < dialogues_; ++j) {
      const auto& e = db->episodes[j];
      if (e.dim() != dim_ || e.turns() != first[j].turns() || e.states.size() != first[j].states.size())
        throw std::invalid_argument("database " + std::to_string(db->index) + " dialogue " +
                                    std::to_string(j) + " does not line up with database " +
                                    std::to_string(databases_.front()->index));
    }
  }
}

void CounterfactualEnvironment::reset(std::size_t start) {
  if (start >= dialogues_) throw std::out_of_range("dialogue " + std::to_string(start) + " out of range");
  dialogue_ = start;
  t_ = 0;
  assembled_ = databases_.front()->episodes[start];
  turns_ = assembled_.turns();
  current_ = assembled_.states[0];
  path_.clear();
}

std::vector<Vector> CounterfactualEnvironment::candidates() const {
  if (done()) return {};
  std::vector<Vector> out;
  out.reserve(databases_.size());
  for (const auto* db : databases_) out.push_back(db->episodes[dialogue_].actions[t_]);
  return out;
}

StepResult CounterfactualEnvironment::step(std::size_t choice) {
  if (done()) throw std::logic_error("step after the dialogue ended");
  if (choice >= databases_.size()) throw std::out_of_range("candidate " + std::to_string(choice) + " out of range");
  const auto& source = databases_[choice]->episodes[dialogue_];
  assembled_.actions[t_] = source.actions[t_];
  if (t_ + 1 < source.states.size()) {
    assembled_.states[t_ + 1] = source.states[t_ + 1];
    current_ = source.states[t_ + 1];
  }
  path_.push_back(choice);
  ++t_;
  StepResult r;
  r.done = r.terminal = done();
  if (r.done) r.reward = reward_model_->predict(assembled_);
  return r;
}

void FiniteMdp::validate() const {
  if (states == 0 || actions == 0) throw std::invalid_argument("MDP needs states and actions");
  if (next.size() != states || reward.size() != states || terminal.size() != states)
    throw std::invalid_argument("MDP tables must have one row per state");
  for (std::size_t s = 0; s < states; ++s) {
    if (next[s].size() != actions || reward[s].size() != actions)
      throw std::invalid_argument("MDP row " + std::to_string(s) + " must have one entry per action");
    for (auto n : next[s])
      if (n >= states) throw std::invalid_argument("MDP transition out of range");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
}

std::vector<std::size_t> FiniteMdp::start_states() const {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < states; ++s)
    if (!terminal[s]) out.push_back(s);
  return out;
}

FiniteMdp chain_mdp(std::size_t n, double gamma) {
  if (n < 2) throw std::invalid_argument("chain needs at least two states");
  FiniteMdp m;
  m.states = n;
  m.actions = 2;
  m.gamma = gamma;
  m.next.assign(n, std::vector<std::size_t>(2));
  m.reward.assign(n, std::vector<double>(2, 0.0));
  m.terminal.assign(n, false);
  m.terminal[n - 1] = true;
  for (std::size_t s = 0; s < n; ++s) {
    m.next[s][0] = s == 0 ? 0 : s - 1;
    m.next[s][1] = std::min(s + 1, n - 1);
    if (s + 1 == n - 1) m.reward[s][1] = 1.0;
  }
  return m;
}

DiscreteMdpEnvironment::DiscreteMdpEnvironment(FiniteMdp mdp, std::size_t max_steps)
    : mdp_(std::move(mdp)), max_steps_(max_steps) {
  mdp_.validate();
  starts_ = mdp_.start_states();
  if (starts_.empty()) throw std::invalid_argument("MDP has no non-terminal state");
}

Vector DiscreteMdpEnvironment::one_hot(std::size_t i, std::size_t n) {
  Vector v(n, 0.0);
  v.at(i) = 1.0;
  return v;
}

void DiscreteMdpEnvironment::reset(std::size_t start) {
  state_ = starts_.at(start);
  steps_ = 0;
}

std::vector<Vector> DiscreteMdpEnvironment::candidates() const {
  if (mdp_.terminal[state_]) return {};
  std::vector<Vector> out;
  for (std::size_t a = 0; a < mdp_.actions; ++a) out.push_back(one_hot(a, mdp_.actions));
  return out;
}

StepResult DiscreteMdpEnvironment::step(std::size_t choice) {
  if (done()) throw std::logic_error("step after the episode ended");
  if (choice >= mdp_.actions) throw std::out_of_range("action " + std::to_string(choice) + " out of range");
  StepResult r;
  r.reward = mdp_.reward[state_][choice];
  state_ = mdp_.next[state_][choice];
  ++steps_;
  r.done = done();
  r.terminal = mdp_.terminal[state_];
  return r;
}

}  // namespace cfd::rl
