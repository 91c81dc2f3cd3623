#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfd/common/rng.hpp"
#include "cfd/data/episode.hpp"
#include "cfd/nn/tensor.hpp"

// Synthetic persuasion world with a known transition law
//   s_{t+1} = phi(A_s s_t + A_a a_t + A_L (L - 3)) + eps_{t+1},  phi(x) = tanh(g x) / g
// so that every counterfactual query has an exact answer.
namespace cfd::world {

using data::TraitVector;
using data::Vector;
using nn::Tensor;

enum class BehaviorMode {
  // a = P_s s + P_L (L - 3) + bias + noise
  linear,
  // a = tanh(gate_sharpness * s[0]) * P_L (L - 3) + noise: the trait signal shows
  // up only in turns whose state has a large first coordinate.
  state_gated,
};

struct WorldConfig {
  std::size_t d = 768;
  std::size_t T = 25;
  double noise_scale = 0.1;        // sigma
  double nonlinearity_gain = 1.0;  // g; 0 gives a linear world
  std::uint64_t seed = 0;

  double state_norm = 0.5;  // spectral norm of A_s, at most 0.95
  double action_gain = 1.0;
  double trait_gain = 0.5;
  double outcome_gain = 2.0;
  double initial_state_scale = 0.5;
  double trait_scale = 0.8;

  BehaviorMode behavior = BehaviorMode::linear;
  double policy_state_gain = 0.5;
  double policy_trait_gain = 0.8;
  double behavior_noise = 0.3;
  double behavior_bias_scale = 0.1;
  double gate_sharpness = 4.0 / 0.3;

  void validate() const;
  std::size_t states() const { return data::state_slots(T); }
  std::size_t actions() const { return data::action_slots(T); }
};

struct GroundTruthScm {
  Tensor A_s;  // d x d
  Tensor A_a;  // d x d
  Tensor A_L;  // d x 5
  Vector w;    // outcome weights
  double gain = 1.0;
  double sigma = 0.0;

  static GroundTruthScm from_config(const WorldConfig& config);

  std::size_t dim() const { return w.size(); }
  /// phi(A_s s + A_a a + A_L (L - 3)), the noise-free part of the transition.
  Vector mean_next(const Vector& s, const Vector& a, const TraitVector& L) const;
  Vector next(const Vector& s, const Vector& a, const TraitVector& L, const Vector& eps) const;
  /// 20 * sigmoid(w . s)
  double outcome(const Vector& last_state) const;
};

inline constexpr double kMaxOutcome = 20.0;

struct SynthUser {
  TraitVector traits{};
  Vector bias;
};

struct BehaviorPolicy {
  BehaviorMode mode = BehaviorMode::linear;
  Tensor P_s;  // d x d
  Tensor P_L;  // d x 5
  double noise = 0.0;
  double gate_sharpness = 1.0;

  static BehaviorPolicy from_config(const WorldConfig& config);
  Vector act(const Vector& s, const SynthUser& user, Rng& rng) const;
};

/// An episode together with everything needed to replay it or answer
/// counterfactual queries exactly.
struct WorldEpisode {
  data::Episode episode;
  SynthUser user;
  std::vector<Vector> noises;  // noises[t] is eps_{t+1}, the noise of transition t
};

SynthUser sample_user(const WorldConfig& config, Rng& rng);

WorldEpisode rollout_episode(const SynthUser& user, const BehaviorPolicy& policy,
                             const GroundTruthScm& scm, const WorldConfig& config, Rng& rng,
                             std::string id = "");

/// n episodes; episode i uses the sub-seed derive_seed(seed, i).
std::vector<WorldEpisode> generate_episodes(const WorldConfig& config, std::size_t n,
                                            std::uint64_t seed);

/// States implied by s_0, the recorded actions, the traits and the recorded noises.
std::vector<Vector> replay_states(const GroundTruthScm& scm, const WorldEpisode& episode);

/// s'_{t+1} under action a_alt at step t, reusing the recorded noise eps_{t+1}.
Vector oracle_counterfactual(const GroundTruthScm& scm, const WorldEpisode& episode,
                             std::size_t t, const Vector& a_alt);

/// Ground-truth transition tuple (s_t, a_t, L, s_{t+1}, eps_{t+1}).
struct OracleTransition {
  Vector s;
  Vector a;
  TraitVector L{};
  Vector s_next;
  Vector eps;
  std::size_t episode = 0;
  std::size_t t = 0;
};

std::vector<OracleTransition> oracle_transitions(const std::vector<WorldEpisode>& episodes);

std::vector<data::Episode> episodes_only(const std::vector<WorldEpisode>& episodes);

/// JSON description of the matrices, for provenance.
std::string scm_to_json(const GroundTruthScm& scm);

}  // namespace cfd::world
