#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cfd/data/episode.hpp"
#include "cfd/nn/layers.hpp"

// Dueling (state, action) scorer over a finite candidate set:
//   phi = trunk(s)
//   A(s, a) = advantage([phi, a]),  V(s) = value(phi)
//   Q(s, a_k) = V(s) + A(s, a_k) - mean_j A(s, a_j)
namespace cfd::rl {

using data::Vector;

class QNetwork {
 public:
  QNetwork() = default;
  QNetwork(std::size_t state_dim, std::size_t action_dim, std::size_t hidden, std::uint64_t seed);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t hidden() const { return hidden_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  /// s: [1 x state_dim], candidates: [K x action_dim] -> Q [K x 1].
  nn::Var q_values(nn::Tape& tape, nn::Var s, nn::Var candidates) const;
  nn::Var advantages(nn::Tape& tape, nn::Var s, nn::Var candidates) const;
  nn::Var value(nn::Tape& tape, nn::Var s) const;

  /// Throws std::invalid_argument for an empty candidate set.
  std::vector<double> q_values(const Vector& s, const std::vector<Vector>& candidates) const;
  double value(const Vector& s) const;
  std::vector<double> advantages(const Vector& s, const std::vector<Vector>& candidates) const;

  void copy_from(const QNetwork& other) { params_.copy_values_from(other.params_); }

  void save(const std::filesystem::path& path) const;
  static QNetwork load(const std::filesystem::path& path);

 private:
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  std::size_t hidden_ = 0;
  nn::Dense trunk_;
  nn::Mlp advantage_, value_;
  mutable nn::ParamSet params_;

  void build_layers();
};

/// v + a_k - mean(a) for every k.
std::vector<double> dueling_combine(double v, const std::vector<double>& a);

/// Index of the largest value; the lowest index wins ties.
std::size_t argmax(const std::vector<double>& values);

/// Greedy choice among candidates by Q.
std::size_t select_action(const QNetwork& net, const Vector& s,
                          const std::vector<Vector>& candidates);

/// r for terminal steps, otherwise r + gamma * Q_target(s', a+) where a+ is the
/// main network's greedy choice among the next candidates.
double td_target(const QNetwork& main, const QNetwork& target, double r, const Vector& s_next,
                 const std::vector<Vector>& candidates_next, double gamma, bool terminal);

nn::Tensor stack_rows(const std::vector<Vector>& rows);

}  // namespace cfd::rl
