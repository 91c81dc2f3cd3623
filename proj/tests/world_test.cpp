#include <gtest/gtest.h>

#include <cmath>

#include "cfd/common/linalg.hpp"
#include "cfd/world/synthworld.hpp"

using namespace cfd;
using namespace cfd::world;

namespace {

WorldConfig small_config(std::size_t d = 4, std::size_t T = 9) {
  WorldConfig c;
  c.d = d;
  c.T = T;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(SampleUser, SameSeedSameTraits) {
  WorldConfig c = small_config();
  Rng a(7), b(7);
  SynthUser u = sample_user(c, a);
  SynthUser v = sample_user(c, b);
  EXPECT_EQ(u.traits, v.traits);
  EXPECT_EQ(u.bias, v.bias);
}

TEST(SampleUser, MeansNearMidpointAndClamped) {
  WorldConfig c = small_config();
  Rng rng(11);
  std::array<double, 5> total{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    SynthUser u = sample_user(c, rng);
    for (std::size_t k = 0; k < 5; ++k) {
      EXPECT_GE(u.traits[k], 1.0);
      EXPECT_LE(u.traits[k], 5.0);
      total[k] += u.traits[k];
    }
  }
  for (double t : total) {
    EXPECT_GE(t / n, 2.8);
    EXPECT_LE(t / n, 3.2);
  }
}

TEST(SampleUser, WideSpreadStillInRange) {
  WorldConfig c = small_config();
  c.trait_scale = 5.0;
  Rng rng(1);
  for (int i = 0; i < 2000; ++i)
    for (double t : sample_user(c, rng).traits) {
      EXPECT_GE(t, 1.0);
      EXPECT_LE(t, 5.0);
    }
}

TEST(Scm, StateMatrixIsContractive) {
  for (double norm : {0.5, 0.95}) {
    WorldConfig c = small_config(16);
    c.state_norm = norm;
    GroundTruthScm scm = GroundTruthScm::from_config(c);
    EXPECT_LE(la::spectral_norm(scm.A_s), norm + 1e-9);
  }
  WorldConfig c = small_config();
  c.state_norm = 0.99;
  EXPECT_THROW(GroundTruthScm::from_config(c), std::invalid_argument);
}

TEST(Rollout, DegenerateDynamicsGiveZeroStates) {
  WorldConfig c = small_config(3, 7);
  c.noise_scale = 0.0;
  c.state_norm = 0.0;
  c.action_gain = 0.0;
  c.trait_gain = 0.0;
  auto eps = generate_episodes(c, 2, 5);
  for (const auto& we : eps)
    for (std::size_t i = 1; i < we.episode.states.size(); ++i)
      for (double v : we.episode.states[i]) EXPECT_EQ(v, 0.0);
}

TEST(Rollout, LinearWorldMatchesHandRecursion) {
  // s' = 0.5 s + a + A_L (L - 3) with A_L = 0, no noise, T = 5.
  GroundTruthScm scm;
  scm.A_s = nn::Tensor::matrix(2, 2, {0.5, 0, 0, 0.5});
  scm.A_a = nn::Tensor::identity(2);
  scm.A_L = nn::Tensor::zeros(2, 5);
  scm.w = {0.0, 0.0};
  scm.gain = 0.0;
  WorldConfig c = small_config(2, 5);
  c.noise_scale = 0.0;
  BehaviorPolicy pol = BehaviorPolicy::from_config(c);
  Rng rng(2);
  SynthUser u = sample_user(c, rng);
  WorldEpisode we = rollout_episode(u, pol, scm, c, rng);
  const auto& e = we.episode;
  ASSERT_EQ(e.states.size(), 3u);
  ASSERT_EQ(e.actions.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    double s1 = 0.5 * e.states[0][i] + e.actions[0][i];
    double s2 = 0.5 * s1 + e.actions[1][i];
    EXPECT_DOUBLE_EQ(e.states[1][i], s1);
    EXPECT_DOUBLE_EQ(e.states[2][i], s2);
  }
  EXPECT_DOUBLE_EQ(e.outcome, 10.0);
}

TEST(Rollout, ReplayWithRecordedNoiseIsExact) {
  WorldConfig c = small_config(5, 11);
  c.noise_scale = 0.4;
  GroundTruthScm scm = GroundTruthScm::from_config(c);
  for (const auto& we : generate_episodes(c, 5, 9)) EXPECT_EQ(replay_states(scm, we), we.episode.states);
}

TEST(Rollout, StructureCounts) {
  for (std::size_t T : {3u, 8u, 9u, 25u}) {
    WorldConfig c = small_config(3, T);
    auto we = generate_episodes(c, 1, 1).front();
    EXPECT_EQ(we.episode.states.size(), (T + 1) / 2);
    EXPECT_EQ(we.episode.actions.size(), (T + 1) / 2 - 1);
    EXPECT_EQ(we.noises.size(), we.episode.actions.size());
    EXPECT_GE(we.episode.outcome, 0.0);
    EXPECT_LE(we.episode.outcome, 20.0);
    ASSERT_TRUE(we.episode.traits.has_value());
  }
}

TEST(Rollout, DeterministicUnderSeed) {
  WorldConfig c = small_config();
  auto a = generate_episodes(c, 4, 21);
  auto b = generate_episodes(c, 4, 21);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].episode, b[i].episode);
    EXPECT_EQ(a[i].noises, b[i].noises);
  }
  auto other = generate_episodes(c, 1, 22);
  EXPECT_NE(other[0].episode.states, a[0].episode.states);
}

TEST(Oracle, FactualActionReproducesNextState) {
  WorldConfig c = small_config(6, 9);
  c.noise_scale = 0.3;
  GroundTruthScm scm = GroundTruthScm::from_config(c);
  for (const auto& we : generate_episodes(c, 3, 4))
    for (std::size_t t = 0; t < we.episode.actions.size(); ++t)
      EXPECT_EQ(oracle_counterfactual(scm, we, t, we.episode.actions[t]), we.episode.states[t + 1]);
}

TEST(Oracle, LinearDeltaByHand) {
  GroundTruthScm scm;
  scm.A_s = nn::Tensor::matrix(2, 2, {0.2, 0.1, -0.3, 0.4});
  scm.A_a = nn::Tensor::matrix(2, 2, {1.0, 2.0, 0.5, -1.0});
  scm.A_L = nn::Tensor::zeros(2, 5);
  scm.w = {1.0, 1.0};
  scm.gain = 0.0;
  WorldEpisode we;
  we.user.traits = data::prior_traits();
  we.episode.states = {{1.0, -1.0}, {0.0, 0.0}};
  we.episode.actions = {{0.5, 0.5}};
  we.noises = {{0.01, -0.02}};
  we.episode.states[1] = scm.next(we.episode.states[0], we.episode.actions[0], we.user.traits, we.noises[0]);
  // delta = (0.1, -0.2): A_a delta = (0.1 - 0.4, 0.05 + 0.2) = (-0.3, 0.25)
  Vector alt = {0.6, 0.3};
  Vector cf = oracle_counterfactual(scm, we, 0, alt);
  EXPECT_NEAR(cf[0] - we.episode.states[1][0], -0.3, 1e-12);
  EXPECT_NEAR(cf[1] - we.episode.states[1][1], 0.25, 1e-12);
  EXPECT_THROW(oracle_counterfactual(scm, we, 1, alt), std::out_of_range);
}

TEST(Oracle, DifferentActionsDifferentOutcomes) {
  WorldConfig c = small_config(4, 9);
  GroundTruthScm scm = GroundTruthScm::from_config(c);
  auto we = generate_episodes(c, 1, 8).front();
  Vector a1(4, 0.1), a2(4, -0.1);
  EXPECT_NE(oracle_counterfactual(scm, we, 2, a1), oracle_counterfactual(scm, we, 2, a2));
}

TEST(Behavior, GatedModeScalesTraitSignal) {
  WorldConfig c = small_config(3, 9);
  c.behavior = BehaviorMode::state_gated;
  c.behavior_noise = 0.0;
  BehaviorPolicy p = BehaviorPolicy::from_config(c);
  SynthUser u;
  u.traits = {4, 2, 3, 5, 1};
  Rng rng(0);
  Vector off = p.act({0.0, 1.0, 1.0}, u, rng);
  for (double v : off) EXPECT_EQ(v, 0.0);
  Vector on = p.act({1.0, 0.0, 0.0}, u, rng);
  Vector neg = p.act({-1.0, 0.0, 0.0}, u, rng);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(on[i], -neg[i]);
}
