#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cfd/cf/counterfactual.hpp"
#include "cfd/data/episode.hpp"
#include "cfd/reward/reward_model.hpp"

namespace cfd::rl {

using data::Vector;

struct StepResult {
  double reward = 0.0;
  bool done = false;
  // False when the episode was cut off by a step limit.
  bool terminal = false;
};

/// Episodic environment where each step offers a finite list of candidate actions.
class CandidateEnvironment {
 public:
  virtual ~CandidateEnvironment() = default;

  /// Number of distinct start configurations (dialogues).
  virtual std::size_t starts() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;

  virtual void reset(std::size_t start) = 0;
  virtual Vector state() const = 0;
  virtual std::vector<Vector> candidates() const = 0;
  virtual StepResult step(std::size_t choice) = 0;
  virtual bool done() const = 0;
};

/// Dialogue assembly over counterfactual databases. At step t the candidates are
/// the t-th actions of dialogue j in each database; choosing database k moves to
/// that database's state t+1. The reward is zero until the last turn, where it is
/// the reward model's score of the assembled dialogue.
class CounterfactualEnvironment : public CandidateEnvironment {
 public:
  /// All databases must hold the same dialogues in the same order.
  CounterfactualEnvironment(std::vector<const cf::CfDatabase*> databases,
                            const reward::RewardModel& reward_model);

  std::size_t starts() const override { return dialogues_; }
  std::size_t state_dim() const override { return dim_; }
  std::size_t action_dim() const override { return dim_; }

  void reset(std::size_t start) override;
  Vector state() const override { return current_; }
  std::vector<Vector> candidates() const override;
  StepResult step(std::size_t choice) override;
  bool done() const override { return t_ >= turns_; }

  std::size_t databases() const { return databases_.size(); }
  /// Dialogue built so far; complete once done().
  const data::Episode& assembled() const { return assembled_; }
  const std::vector<std::size_t>& path() const { return path_; }

 private:
  std::vector<const cf::CfDatabase*> databases_;
  const reward::RewardModel* reward_model_;
  std::size_t dialogues_ = 0;
  std::size_t dim_ = 0;

  std::size_t dialogue_ = 0;
  std::size_t t_ = 0;
  std::size_t turns_ = 0;
  Vector current_;
  data::Episode assembled_;
  std::vector<std::size_t> path_;
};

/// Deterministic finite MDP with one-hot state and action encodings.
struct FiniteMdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<std::vector<std::size_t>> next;  // [state][action]
  std::vector<std::vector<double>> reward;     // [state][action]
  std::vector<bool> terminal;
  double gamma = 0.9;

  void validate() const;
  std::vector<std::size_t> start_states() const;
};

/// Chain 0..n-1; action 0 moves left (clamped at 0), action 1 moves right.
/// Entering the last state pays 1 and ends the episode.
FiniteMdp chain_mdp(std::size_t n = 5, double gamma = 0.9);

class DiscreteMdpEnvironment : public CandidateEnvironment {
 public:
  explicit DiscreteMdpEnvironment(FiniteMdp mdp, std::size_t max_steps = 50);

  std::size_t starts() const override { return starts_.size(); }
  std::size_t state_dim() const override { return mdp_.states; }
  std::size_t action_dim() const override { return mdp_.actions; }

  void reset(std::size_t start) override;
  Vector state() const override { return one_hot(state_, mdp_.states); }
  std::vector<Vector> candidates() const override;
  StepResult step(std::size_t choice) override;
  bool done() const override { return mdp_.terminal[state_] || steps_ >= max_steps_; }

  const FiniteMdp& mdp() const { return mdp_; }
  std::size_t current() const { return state_; }
  static Vector one_hot(std::size_t i, std::size_t n);

 private:
  FiniteMdp mdp_;
  std::size_t max_steps_;
  std::vector<std::size_t> starts_;
  std::size_t state_ = 0;
  std::size_t steps_ = 0;
};

}  // namespace cfd::rl
