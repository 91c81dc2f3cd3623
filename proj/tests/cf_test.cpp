#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "cfd/cf/counterfactual.hpp"
#include "cfd/common/linalg.hpp"
#include "cfd/common/rng.hpp"
#include "cfd/reward/reward_model.hpp"
#include "cfd/world/synthworld.hpp"
#include "support/oracles.hpp"

using namespace cfd;
using namespace cfd::cf;

namespace {

std::vector<data::Episode> world_episodes(std::size_t n, std::uint64_t seed, std::size_t T = 7,
                                          std::size_t d = 3) {
  world::WorldConfig c;
  c.d = d;
  c.T = T;
  c.seed = seed;
  return world::episodes_only(world::generate_episodes(c, n, seed + 3));
}

std::vector<std::vector<ActionRef>> factual_picks(const std::vector<data::Episode>& eps) {
  std::vector<std::vector<ActionRef>> picks(eps.size());
  for (std::size_t j = 0; j < eps.size(); ++j)
    for (std::size_t t = 0; t < eps[j].turns(); ++t) picks[j].push_back({j, t});
  return picks;
}

std::vector<ScoredDatabase> scored(const std::vector<double>& rewards) {
  std::vector<ScoredDatabase> out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out.push_back({i, rewards[i]});
  return out;
}

}  // namespace

TEST(ActionPool, StrategyExclusions) {
  auto eps = world_episodes(4, 1, 9);
  eps[3].raw_length = 5;  // two real actions
  EXPECT_EQ(action_pool(eps, 1).size(), 3u * 4 + 2);
  EXPECT_EQ(action_pool(eps, 2).size(), 3u * 3 + 1);
  EXPECT_EQ(action_pool(eps, 3).size(), 3u * 1);
  for (const auto& r : action_pool(eps, 2)) EXPECT_GE(r.t, 1u);
  for (const auto& r : action_pool(eps, 3)) {
    EXPECT_GE(r.t, 3u);
    EXPECT_NE(r.episode, 3u);
  }
  EXPECT_THROW(action_pool(eps, 4), std::invalid_argument);
  EXPECT_EQ(StrategySpec{3}.excluded_prefix(), 3u);
}

TEST(SelectActions, PicksCoverStepsFromPool) {
  const auto eps = world_episodes(6, 2);
  const StrategySpec spec{2, 9, false};
  const auto picks = select_counterfactual_actions(eps, spec);
  const auto pool = action_pool(eps, 2);
  ASSERT_EQ(picks.size(), eps.size());
  for (std::size_t j = 0; j < eps.size(); ++j) {
    EXPECT_EQ(picks[j].size(), eps[j].turns());
    for (const auto& r : picks[j]) EXPECT_NE(std::find(pool.begin(), pool.end(), r), pool.end());
  }
  EXPECT_EQ(select_counterfactual_actions(eps, spec), picks);
  EXPECT_NE(select_counterfactual_actions(eps, StrategySpec{2, 10, false}), picks);
}

TEST(SelectActions, WithoutReplacementHasNoRepeats) {
  const auto eps = world_episodes(3, 3, 9);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto picks = select_counterfactual_actions(eps, StrategySpec{1, seed, true});
    for (const auto& p : picks) {
      std::set<std::pair<std::size_t, std::size_t>> seen;
      for (const auto& r : p) EXPECT_TRUE(seen.insert({r.episode, r.t}).second);
    }
  }
}

TEST(SelectActions, EmptyPoolThrows) {
  const auto eps = world_episodes(3, 4, 5);  // two actions each
  EXPECT_THROW(select_counterfactual_actions(eps, StrategySpec{3, 0, false}), std::invalid_argument);
}

TEST(Rollout, FollowsGeneratorFromFactualStart) {
  const auto eps = world_episodes(4, 5);
  const gan::BiCoGanModel g(3, 8, 6);
  const auto picks = select_counterfactual_actions(eps, StrategySpec{1, 7, false});
  const auto db = rollout_database(g, eps, nullptr, picks);
  ASSERT_EQ(db.episodes.size(), eps.size());
  for (std::size_t j = 0; j < eps.size(); ++j) {
    const auto& cf = db.episodes[j];
    EXPECT_EQ(cf.states[0], eps[j].states[0]);
    EXPECT_EQ(cf.source, data::Source::counterfactual);
    EXPECT_EQ(cf.states.size(), eps[j].states.size());
    data::Vector s = eps[j].states[0];
    for (std::size_t t = 0; t < eps[j].turns(); ++t) {
      const auto& a = eps[picks[j][t].episode].actions[picks[j][t].t];
      EXPECT_EQ(cf.actions[t], a);
      s = g.generate(s, a, *eps[j].traits, g.abduct_noise({{}, {}, {}, eps[j].states[t + 1]}));
      EXPECT_EQ(cf.states[t + 1], s);
    }
  }
}

TEST(Rollout, SeededAndRepeatable) {
  const auto eps = world_episodes(5, 8);
  const gan::BiCoGanModel g(3, 8, 9);
  RolloutOptions sampled;
  sampled.noise = {gan::NoiseMode::sampled, 4};
  const auto a = build_cf_database(g, eps, nullptr, StrategySpec{2, 1, false}, 0, sampled);
  const auto b = build_cf_database(g, eps, nullptr, StrategySpec{2, 1, false}, 0, sampled);
  const auto c = build_cf_database(g, eps, nullptr, StrategySpec{2, 1, false}, 1, sampled);
  EXPECT_EQ(a.episodes, b.episodes);
  EXPECT_NE(a.episodes, c.episodes);
  EXPECT_EQ(a.strategy, 2);
  EXPECT_EQ(c.index, 1u);
}

TEST(Rollout, DimensionAndPickErrors) {
  const auto eps = world_episodes(2, 10);
  const gan::BiCoGanModel g(4, 8, 1);
  EXPECT_THROW(rollout_database(g, eps, nullptr, factual_picks(eps)), std::invalid_argument);
  const gan::BiCoGanModel g3(3, 8, 1);
  EXPECT_THROW(rollout_database(g3, eps, nullptr, {}), std::invalid_argument);
}

TEST(Rollout, FactualPicksTrackSourceAfterTraining) {
  world::WorldConfig c;
  c.d = 3;
  c.T = 7;
  c.seed = 11;
  const auto eps = world::episodes_only(world::generate_episodes(c, 120, 12));
  gan::BiCoGanConfig gc;
  gc.hidden = 32;
  gc.lr = 1e-3;
  gc.epochs = 60;
  gc.batch = 50;
  gc.seed = 13;
  const auto g = gan::train_bicogan(gan::make_transitions(eps, nullptr), gc).model;
  const auto factual = rollout_database(g, eps, nullptr, factual_picks(eps));
  const auto random = build_cf_database(g, eps, nullptr, StrategySpec{1, 14, false}, 0);
  EXPECT_LT(alignment_error(factual, eps), alignment_error(random, eps));
}

TEST(Alignment, ZeroForIdenticalData) {
  const auto eps = world_episodes(4, 15);
  EXPECT_EQ(alignment_error(eps, eps), 0.0);
  auto shifted = eps;
  shifted[0].states[1][0] += 2.0;
  EXPECT_NEAR(alignment_error(shifted, eps), 2.0 / double(4 * 3), 1e-12);
  EXPECT_THROW(alignment_error(std::vector<data::Episode>{}, eps), std::invalid_argument);
}

TEST(ScoreDatabase, StoresOutcomesAndSums) {
  CfDatabase db;
  db.episodes = world_episodes(5, 16);
  const reward::RewardModel rm(3, 8, 17, 6.0);
  const double total = score_database(db, rm);
  double s = 0.0;
  for (const auto& e : db.episodes) {
    EXPECT_DOUBLE_EQ(e.outcome, rm.predict(e));
    s += e.outcome;
  }
  EXPECT_NEAR(total, s, 1e-12);
  ASSERT_TRUE(db.predicted_cumulative);
  EXPECT_DOUBLE_EQ(*db.predicted_cumulative, total);
}

TEST(BalanceSelect, HandExample) {
  EXPECT_EQ(balance_select(scored({1, 2, 9, 10}), 5.0, 2), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(balance_select(scored({1, 2, 9, 10}), 5.0, 4), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(balance_select(scored({4, 6, 6, 4, 5}), 5.0, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(balance_select(scored({7, 1, 9}), 5.0, 1), (std::vector<std::size_t>{0}));
}

TEST(BalanceSelect, ShortSideThrows) {
  EXPECT_THROW(balance_select(scored({6, 7, 8, 9}), 5.0, 2), std::invalid_argument);
  EXPECT_THROW(balance_select(scored({5, 5, 6, 1}), 5.0, 4), std::invalid_argument);
  EXPECT_FALSE(balance_feasible(scored({6, 7, 8, 9}), 5.0, 2));
  EXPECT_TRUE(balance_feasible(scored({6, 7, 8, 1}), 5.0, 2));
  try {
    balance_select(scored({6, 7, 8, 9}), 5.0, 2);
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('4'), std::string::npos) << msg;
    EXPECT_NE(msg.find('0'), std::string::npos) << msg;
  }
}

TEST(BalanceSelect, MatchesBruteForceAndIsPermutationInvariant) {
  Rng rng(21);
  std::uniform_int_distribution<int> grid(0, 8);
  std::size_t checked = 0;
  for (std::size_t trial = 0; trial < 400; ++trial) {
    const std::size_t n = 1 + trial % 6;
    std::vector<double> rewards(n);
    for (auto& r : rewards) r = grid(rng);
    const double gt = 4.0;
    for (std::size_t keep = 1; keep <= n; ++keep) {
      const auto expected = check::brute_force_balance(rewards, gt, keep);
      auto input = scored(rewards);
      ASSERT_EQ(balance_feasible(input, gt, keep), expected.has_value());
      if (!expected) {
        EXPECT_THROW(balance_select(input, gt, keep), std::invalid_argument);
        continue;
      }
      ++checked;
      EXPECT_EQ(balance_select(input, gt, keep), *expected);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      for (int p = 0; p < 3; ++p) {
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<ScoredDatabase> shuffled;
        for (auto i : perm) shuffled.push_back(input[i]);
        EXPECT_EQ(balance_select(shuffled, gt, keep), *expected);
      }
      const auto chosen = *expected;
      std::size_t above = 0;
      for (auto i : chosen) above += rewards[i] > gt;
      EXPECT_EQ(above, (keep + 1) / 2);
      EXPECT_EQ(chosen.size() - above, keep / 2);
    }
  }
  EXPECT_GT(checked, 100u);
}
