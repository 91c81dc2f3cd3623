#include "cfd/world/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cfd/common/linalg.hpp"

namespace cfd::world {

namespace {

Tensor gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Tensor m = Tensor::zeros(rows, cols);
  for (auto& v : m.values()) v = sample_normal(rng) * scale;
  return m;
}

Vector centred(const TraitVector& L) {
  Vector out(L.size());
  for (std::size_t k = 0; k < L.size(); ++k) out[k] = L[k] - data::kTraitMidpoint;
  return out;
}

void add_into(Vector& acc, const Vector& x) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

}  // namespace

void WorldConfig::validate() const {
  auto bad = [](const std::string& m) { throw std::invalid_argument("world." + m); };
  if (d == 0) bad("d must be positive");
  if (T < 3) bad("T must be at least 3 so an episode has one action");
  if (!(noise_scale >= 0.0)) bad("noise_scale must be >= 0");
  if (!(state_norm >= 0.0 && state_norm <= 0.95)) bad("state_norm must be in [0, 0.95]");
  if (!std::isfinite(nonlinearity_gain) || nonlinearity_gain < 0.0)
    bad("nonlinearity_gain must be finite and >= 0");
  if (!(behavior_noise >= 0.0)) bad("behavior_noise must be >= 0");
  if (!(trait_scale >= 0.0)) bad("trait_scale must be >= 0");
}

GroundTruthScm GroundTruthScm::from_config(const WorldConfig& c) {
  c.validate();
  Rng rng(derive_seed(c.seed, "world.scm"));
  GroundTruthScm scm;
  scm.A_s = gaussian_matrix(rng, c.d, c.d, 1.0);
  const double norm = la::spectral_norm(scm.A_s);
  for (auto& v : scm.A_s.values()) v *= norm > 0.0 ? c.state_norm / norm : 0.0;
  scm.A_a = gaussian_matrix(rng, c.d, c.d, c.action_gain / std::sqrt(double(c.d)));
  scm.A_L = gaussian_matrix(rng, c.d, data::kTraitDim,
                            c.trait_gain / std::sqrt(double(data::kTraitDim)));
  scm.w = normal_vector(rng, c.d, c.outcome_gain / std::sqrt(double(c.d)));
  scm.gain = c.nonlinearity_gain;
  scm.sigma = c.noise_scale;
  return scm;
}

Vector GroundTruthScm::mean_next(const Vector& s, const Vector& a, const TraitVector& L) const {
  if (s.size() != dim() || a.size() != dim())
    throw std::invalid_argument("state/action dimension does not match the world");
  Vector x = la::matvec(A_s, s);
  add_into(x, la::matvec(A_a, a));
  add_into(x, la::matvec(A_L, centred(L)));
  if (gain > 0.0)
    for (auto& v : x) v = std::tanh(gain * v) / gain;
  return x;
}

Vector GroundTruthScm::next(const Vector& s, const Vector& a, const TraitVector& L,
                            const Vector& eps) const {
  Vector x = mean_next(s, a, L);
  if (eps.size() != x.size()) throw std::invalid_argument("noise dimension does not match the world");
  add_into(x, eps);
  return x;
}

double GroundTruthScm::outcome(const Vector& last_state) const {
  return kMaxOutcome / (1.0 + std::exp(-la::dot(w, last_state)));
}

BehaviorPolicy BehaviorPolicy::from_config(const WorldConfig& c) {
  Rng rng(derive_seed(c.seed, "world.policy"));
  BehaviorPolicy p;
  p.mode = c.behavior;
  p.P_s = gaussian_matrix(rng, c.d, c.d, c.policy_state_gain / std::sqrt(double(c.d)));
  p.P_L = gaussian_matrix(rng, c.d, data::kTraitDim,
                          c.policy_trait_gain / std::sqrt(double(data::kTraitDim)));
  p.noise = c.behavior_noise;
  p.gate_sharpness = c.gate_sharpness;
  return p;
}

Vector BehaviorPolicy::act(const Vector& s, const SynthUser& user, Rng& rng) const {
  Vector trait_part = la::matvec(P_L, centred(user.traits));
  Vector a(s.size(), 0.0);
  if (mode == BehaviorMode::linear) {
    a = la::matvec(P_s, s);
    add_into(a, trait_part);
    if (!user.bias.empty()) add_into(a, user.bias);
  } else {
    const double gate = std::tanh(gate_sharpness * s[0]);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = gate * trait_part[i];
  }
  for (auto& v : a) v += noise * sample_normal(rng);
  return a;
}

SynthUser sample_user(const WorldConfig& c, Rng& rng) {
  SynthUser u;
  for (auto& t : u.traits)
    t = std::clamp(sample_normal(rng, data::kTraitMidpoint, c.trait_scale), 1.0, 5.0);
  u.bias = normal_vector(rng, c.d, c.behavior_bias_scale);
  return u;
}

WorldEpisode rollout_episode(const SynthUser& user, const BehaviorPolicy& policy,
                             const GroundTruthScm& scm, const WorldConfig& c, Rng& rng,
                             std::string id) {
  WorldEpisode we;
  we.user = user;
  data::Episode& e = we.episode;
  e.id = std::move(id);
  e.traits = user.traits;
  e.source = data::Source::synthetic;
  e.raw_length = c.T;
  Vector s = normal_vector(rng, c.d, c.initial_state_scale);
  e.states.push_back(s);
  for (std::size_t t = 0; t < c.actions(); ++t) {
    Vector a = policy.act(s, user, rng);
    Vector eps = normal_vector(rng, c.d, c.noise_scale);
    s = scm.next(s, a, user.traits, eps);
    e.actions.push_back(std::move(a));
    we.noises.push_back(std::move(eps));
    e.states.push_back(s);
  }
  e.outcome = scm.outcome(e.states.back());
  return we;
}

std::vector<WorldEpisode> generate_episodes(const WorldConfig& config, std::size_t n,
                                            std::uint64_t seed) {
  const GroundTruthScm scm = GroundTruthScm::from_config(config);
  const BehaviorPolicy policy = BehaviorPolicy::from_config(config);
  std::vector<WorldEpisode> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    SynthUser u = sample_user(config, rng);
    out.push_back(rollout_episode(u, policy, scm, config, rng, "synth-" + std::to_string(i)));
  }
  return out;
}

std::vector<Vector> replay_states(const GroundTruthScm& scm, const WorldEpisode& we) {
  const auto& e = we.episode;
  std::vector<Vector> states{e.states.front()};
  for (std::size_t t = 0; t < e.actions.size(); ++t)
    states.push_back(scm.next(states.back(), e.actions[t], we.user.traits, we.noises.at(t)));
  return states;
}

Vector oracle_counterfactual(const GroundTruthScm& scm, const WorldEpisode& we, std::size_t t,
                             const Vector& a_alt) {
  if (t >= we.episode.actions.size() || t >= we.noises.size())
    throw std::out_of_range("counterfactual step " + std::to_string(t) + " outside episode with " +
                            std::to_string(we.episode.actions.size()) + " actions");
  return scm.next(we.episode.states[t], a_alt, we.user.traits, we.noises[t]);
}

std::vector<OracleTransition> oracle_transitions(const std::vector<WorldEpisode>& episodes) {
  std::vector<OracleTransition> out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i].episode;
    for (std::size_t t = 0; t < e.actions.size(); ++t)
      out.push_back({e.states[t], e.actions[t], episodes[i].user.traits, e.states[t + 1],
                     episodes[i].noises[t], i, t});
  }
  return out;
}

std::vector<data::Episode> episodes_only(const std::vector<WorldEpisode>& episodes) {
  std::vector<data::Episode> out;
  out.reserve(episodes.size());
  for (const auto& we : episodes) out.push_back(we.episode);
  return out;
}

std::string scm_to_json(const GroundTruthScm& scm) {
  nlohmann::json j;
  auto mat = [](const Tensor& m) {
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
  };
  j["A_s"] = mat(scm.A_s);
  j["A_a"] = mat(scm.A_a);
  j["A_L"] = mat(scm.A_L);
  j["w"] = scm.w;
  j["gain"] = scm.gain;
  j["sigma"] = scm.sigma;
  return j.dump();
}

}  // namespace cfd::world
