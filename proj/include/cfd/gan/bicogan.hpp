#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cfd/data/episode.hpp"
#include "cfd/nn/layers.hpp"

namespace cfd::dppr {
class DpprModel;
}

// Bidirectional conditional GAN over transitions (s_t, a_t, L_t, eps) -> s_{t+1}.
//   G: (s, a, L, eps) -> s'
//   E: s' -> (s, a, L, eps)
//   D: ((s, a, L, eps), s') -> P(pair came from the encoder side)
namespace cfd::gan {

using data::TraitVector;
using data::Vector;

struct ScmTransition {
  Vector s;
  Vector a;
  TraitVector L{};
  Vector s_next;
  std::optional<Vector> eps;  // known only for synthetic data
  std::size_t episode = 0;
  std::size_t t = 0;
};

/// Factual transitions of every unpadded step. L_t comes from the progressive
/// DPPR estimate over turns 0..t when a model is given, else from the episode's
/// trait labels (or the prior).
std::vector<ScmTransition> make_transitions(const std::vector<data::Episode>& episodes,
                                            const dppr::DpprModel* dppr = nullptr,
                                            std::size_t window = 1);

struct BiCoGanConfig {
  std::size_t hidden = 100;
  std::size_t batch = 100;
  double lr = 1e-4;
  std::size_t epochs = 10;
  double lambda = 1.0;          // cycle regularizer on (s, a)
  double reconstruction = 1.0;  // weight of |G(s, a, L, E_eps(s')) - s'|^2
  bool non_saturating = false;
  double tolerance_quantile = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Encoded {
  Vector s;
  Vector a;
  TraitVector L{};
  Vector eps;
};

enum class NoiseMode { abducted, zero, sampled };

struct NoiseSpec {
  NoiseMode mode = NoiseMode::abducted;
  std::uint64_t seed = 0;  // used by sampled mode
};

class BiCoGanModel {
 public:
  BiCoGanModel() = default;
  BiCoGanModel(std::size_t dim, std::size_t hidden, std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  std::size_t noise_dim() const { return dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t condition_dim() const { return 2 * dim_ + data::kTraitDim; }
  std::size_t latent_dim() const { return condition_dim() + noise_dim(); }

  nn::ParamSet& generator_encoder_params() { return ge_params_; }
  nn::ParamSet& discriminator_params() { return d_params_; }
  const nn::ParamSet& generator_encoder_params() const { return ge_params_; }
  const nn::ParamSet& discriminator_params() const { return d_params_; }

  /// z: [B x latent_dim] -> [B x d]
  nn::Var generator(nn::Tape& tape, nn::Var z) const;
  /// x: [B x d] -> [B x latent_dim]
  nn::Var encoder(nn::Tape& tape, nn::Var x) const;
  /// z: [B x latent_dim], x: [B x d] -> logits [B x 1]
  nn::Var discriminator_logit(nn::Tape& tape, nn::Var z, nn::Var x) const;

  Vector generate(const Vector& s, const Vector& a, const TraitVector& L, const Vector& eps) const;
  Encoded encode(const Vector& s_next) const;
  double discriminate(const Vector& s, const Vector& a, const TraitVector& L, const Vector& eps,
                      const Vector& s_next) const;

  /// Encoder's noise component for the factual next state.
  Vector abduct_noise(const ScmTransition& transition) const;
  /// G(s, a_alt, L, eps) with eps abducted from `factual_next`, zero, or sampled.
  /// Abducted mode without a factual next state throws std::invalid_argument.
  Vector generate_counterfactual(const Vector& s, const Vector& a_alt, const TraitVector& L,
                                 NoiseSpec noise, const Vector* factual_next = nullptr) const;

  /// |G(s, a, L, abducted eps) - s'|
  double consistency_error(const ScmTransition& transition) const;

  /// Held-out acceptance threshold for consistency_error, set by training.
  double consistency_tolerance() const { return tolerance_; }
  void set_consistency_tolerance(double t) { tolerance_ = t; }

  void save(const std::filesystem::path& path) const;
  static BiCoGanModel load(const std::filesystem::path& path);

 private:
  std::size_t dim_ = 0;
  std::size_t hidden_ = 0;
  nn::Mlp g_, e_, d_;
  mutable nn::ParamSet ge_params_;
  mutable nn::ParamSet d_params_;
  double tolerance_ = 0.0;

  void build_layers();
};

struct LossHistory {
  std::vector<double> discriminator;  // per update step
  std::vector<double> adversarial;    // G/E side of the minimax value
  std::vector<double> regularizer;    // R((s, a), E(s'))
  std::vector<double> reconstruction;
};

struct TrainedBiCoGan {
  BiCoGanModel model;
  LossHistory history;
};

/// Alternating D and G/E Adam updates. Throws std::invalid_argument for empty
/// input and std::runtime_error when a loss turns non-finite.
TrainedBiCoGan train_bicogan(const std::vector<ScmTransition>& transitions,
                             const BiCoGanConfig& config);

/// Fraction of pairs D labels correctly (threshold 0.5) over one batch of
/// encoder pairs and one of generator pairs with fresh noise.
double discriminator_accuracy(const BiCoGanModel& model,
                              const std::vector<ScmTransition>& transitions, std::uint64_t seed);

/// The q-quantile (linear interpolation) of a sample.
double quantile(std::vector<double> values, double q);

}  // namespace cfd::gan
