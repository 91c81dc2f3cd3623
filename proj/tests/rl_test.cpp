#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "cfd/cf/counterfactual.hpp"
#include "cfd/common/rng.hpp"
#include "cfd/nn/ops.hpp"
#include "cfd/reward/reward_model.hpp"
#include "cfd/rl/policy.hpp"
#include "cfd/world/synthworld.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace cfd;
using namespace cfd::rl;

namespace {

std::vector<Vector> random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vector> out(n, Vector(d));
  for (auto& r : out)
    for (auto& v : r) v = g(rng);
  return out;
}

// Q(s, a) = c everywhere: zero output weights, value bias c.
void make_constant(QNetwork& q, double c) {
  auto& p = q.params();
  p.value("q.advantage.fc2.weight").fill(0.0);
  p.value("q.advantage.fc2.bias").fill(0.0);
  p.value("q.value.fc2.weight").fill(0.0);
  p.value("q.value.fc2.bias").fill(c);
}

struct ChainResult {
  double max_error = 0.0;
  bool policy_matches = false;
};

ChainResult chain_check(const QNetwork& q, const FiniteMdp& mdp) {
  const auto vi = check::value_iteration(mdp);
  std::vector<Vector> actions;
  for (std::size_t a = 0; a < mdp.actions; ++a) actions.push_back(DiscreteMdpEnvironment::one_hot(a, mdp.actions));
  ChainResult r{0.0, true};
  for (std::size_t s = 0; s < mdp.states; ++s) {
    if (mdp.terminal[s]) continue;
    const auto qs = q.q_values(DiscreteMdpEnvironment::one_hot(s, mdp.states), actions);
    for (std::size_t a = 0; a < mdp.actions; ++a) r.max_error = std::max(r.max_error, std::abs(qs[a] - vi.q[s][a]));
    if (argmax(qs) != vi.policy[s]) r.policy_matches = false;
  }
  return r;
}

D3qnConfig chain_config(UpdateScheme scheme, std::uint64_t seed) {
  D3qnConfig c;
  c.hidden = 32;
  c.lr = 1e-3;
  c.epochs = 20;
  c.dialogues_per_epoch = 200;
  c.scheme = scheme;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Dueling, CombineHandExample) {
  EXPECT_EQ(dueling_combine(5.0, {1.0, 3.0}), (std::vector<double>{4.0, 6.0}));
  EXPECT_EQ(dueling_combine(-1.0, {7.0}), (std::vector<double>{-1.0}));
  EXPECT_THROW(dueling_combine(0.0, {}), std::invalid_argument);
}

TEST(Dueling, SingleCandidateGivesValue) {
  const QNetwork q(4, 3, 8, 1);
  const auto s = random_rows(1, 4, 2)[0];
  const auto a = random_rows(1, 3, 3);
  EXPECT_NEAR(q.q_values(s, a)[0], q.value(s), 1e-12);
}

TEST(Dueling, MatchesCombinedHeads) {
  const QNetwork q(4, 3, 8, 4);
  const auto s = random_rows(1, 4, 5)[0];
  const auto cands = random_rows(6, 3, 6);
  const auto expected = dueling_combine(q.value(s), q.advantages(s, cands));
  const auto got = q.q_values(s, cands);
  for (std::size_t k = 0; k < cands.size(); ++k) EXPECT_NEAR(got[k], expected[k], 1e-12);
}

TEST(Dueling, AdvantageOffsetCancels) {
  QNetwork q(4, 3, 8, 7);
  const auto s = random_rows(1, 4, 8)[0];
  const auto cands = random_rows(5, 3, 9);
  const auto before = q.q_values(s, cands);
  q.params().value("q.advantage.fc2.bias")(0, 0) += 3.7;
  const auto after = q.q_values(s, cands);
  for (std::size_t k = 0; k < cands.size(); ++k) EXPECT_NEAR(after[k], before[k], 1e-12);
}

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax({2.0, 2.0}), 0u);
  EXPECT_EQ(argmax({1.0, 3.0, 3.0}), 1u);
  EXPECT_EQ(argmax({1.0, 3.0, 2.0, 5.0}), 3u);
  EXPECT_THROW(argmax({}), std::invalid_argument);
  QNetwork q(2, 2, 4, 1);
  make_constant(q, 1.5);
  EXPECT_EQ(select_action(q, {0.3, 0.1}, random_rows(4, 2, 2)), 0u);
}

TEST(QNetwork, EmptyCandidatesAndBadDimensions) {
  const QNetwork q(3, 2, 4, 1);
  EXPECT_THROW(q.q_values({1.0, 2.0, 3.0}, {}), std::invalid_argument);
  EXPECT_THROW(QNetwork(0, 2, 4, 1), std::invalid_argument);
  EXPECT_THROW(q.q_values({1.0, 2.0, 3.0}, random_rows(2, 5, 1)), std::exception);
}

TEST(QNetwork, GradientCheck) {
  QNetwork q(3, 2, 5, 11);
  check::randomize(q.params(), 12, -0.6, 0.6);
  const auto s = nn::Tensor::row(random_rows(1, 3, 13)[0]);
  const auto cands = stack_rows(random_rows(4, 2, 14));
  const auto target = stack_rows(random_rows(4, 1, 15));
  const auto r = check::grad_check(q.params(), [&](nn::Tape& tape, nn::ParamSet&) {
    return nn::mse(q.q_values(tape, tape.constant(s), tape.constant(cands)), tape.constant(target));
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(QNetwork, SaveLoadRoundTrip) {
  const QNetwork q(3, 2, 6, 21);
  const auto path = std::filesystem::temp_directory_path() / "cfd_qnet_roundtrip.params";
  q.save(path);
  const auto r = QNetwork::load(path);
  std::filesystem::remove(path);
  EXPECT_EQ(r.state_dim(), 3u);
  EXPECT_EQ(r.action_dim(), 2u);
  EXPECT_EQ(r.hidden(), 6u);
  const auto s = random_rows(1, 3, 22)[0];
  const auto c = random_rows(3, 2, 23);
  EXPECT_EQ(r.q_values(s, c), q.q_values(s, c));
}

TEST(TdTarget, TerminalAndZeroDiscount) {
  QNetwork main(2, 2, 4, 1), target(2, 2, 4, 2);
  make_constant(target, 2.0);
  const auto cands = random_rows(3, 2, 3);
  EXPECT_DOUBLE_EQ(td_target(main, target, 0.5, {0.0, 1.0}, cands, 0.9, true), 0.5);
  EXPECT_DOUBLE_EQ(td_target(main, target, 0.5, {0.0, 1.0}, cands, 0.0, false), 0.5);
  EXPECT_NEAR(td_target(main, target, 0.0, {0.0, 1.0}, cands, 0.9, false), 1.8, 1e-12);
}

TEST(TdTarget, MainSelectsTargetEvaluates) {
  std::size_t disagreements = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const QNetwork main(2, 2, 6, 100 + seed), target(2, 2, 6, 200 + seed);
    const auto s = random_rows(1, 2, seed)[0];
    const auto cands = random_rows(4, 2, 300 + seed);
    const auto qm = main.q_values(s, cands), qt = target.q_values(s, cands);
    const double expected = 1.0 + 0.9 * qt[argmax(qm)];
    EXPECT_NEAR(td_target(main, target, 1.0, s, cands, 0.9, false), expected, 1e-12);
    disagreements += argmax(qm) != argmax(qt);
  }
  EXPECT_GT(disagreements, 0u);
}

TEST(Epsilon, LinearSchedule) {
  D3qnConfig c;
  EXPECT_DOUBLE_EQ(epsilon_at(c, 0, 101), 0.3);
  EXPECT_DOUBLE_EQ(epsilon_at(c, 100, 101), 0.01);
  EXPECT_NEAR(epsilon_at(c, 50, 101), 0.155, 1e-12);
  EXPECT_DOUBLE_EQ(epsilon_at(c, 0, 1), 0.01);
}

TEST(UpdateSchemeNames, RoundTrip) {
  EXPECT_EQ(update_scheme_from_string("case1"), UpdateScheme::per_dialogue);
  EXPECT_EQ(update_scheme_from_string("case2"), UpdateScheme::per_step);
  EXPECT_EQ(update_scheme_from_string(to_string(UpdateScheme::per_dialogue)), UpdateScheme::per_dialogue);
  EXPECT_THROW(update_scheme_from_string("case3"), std::invalid_argument);
}

TEST(ChainMdp, Structure) {
  const auto mdp = chain_mdp(5, 0.9);
  EXPECT_NO_THROW(mdp.validate());
  EXPECT_EQ(mdp.next[0][0], 0u);
  EXPECT_EQ(mdp.next[3][1], 4u);
  EXPECT_DOUBLE_EQ(mdp.reward[3][1], 1.0);
  EXPECT_TRUE(mdp.terminal[4]);
  const auto vi = check::value_iteration(mdp);
  EXPECT_NEAR(vi.v[3], 1.0, 1e-12);
  EXPECT_NEAR(vi.v[0], 0.729, 1e-12);
  for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(vi.policy[s], 1u);
}

TEST(DiscreteEnvironment, StepsAndTruncates) {
  DiscreteMdpEnvironment env(chain_mdp(5, 0.9), 3);
  env.reset(0);
  EXPECT_EQ(env.state(), DiscreteMdpEnvironment::one_hot(0, 5));
  EXPECT_EQ(env.candidates().size(), 2u);
  auto r = env.step(0);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_FALSE(r.terminal);
  env.step(1);
  r = env.step(1);
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.terminal);
  EXPECT_TRUE(env.done());
}

TEST(D3qn, ZeroEpochsLeavesInitialNetwork) {
  DiscreteMdpEnvironment env(chain_mdp(), 10);
  D3qnConfig c = chain_config(UpdateScheme::per_step, 3);
  c.epochs = 0;
  const auto t = train_d3qn(env, c);
  const QNetwork ref(5, 2, 32, derive_seed(3, "d3qn.init"));
  EXPECT_TRUE(t.main.params().same_values(ref.params()));
  EXPECT_EQ(t.updates, 0u);
}

TEST(D3qn, Deterministic) {
  DiscreteMdpEnvironment env(chain_mdp(), 10);
  D3qnConfig c = chain_config(UpdateScheme::per_step, 4);
  c.epochs = 2;
  c.dialogues_per_epoch = 20;
  const auto a = train_d3qn(env, c);
  const auto b = train_d3qn(env, c);
  EXPECT_TRUE(a.main.params().same_values(b.main.params()));
  EXPECT_EQ(a.history.epoch_loss, b.history.epoch_loss);
  EXPECT_EQ(a.history.epoch_loss.size(), 2u);
}

TEST(D3qn, LearnsChainQValuesBothSchemes) {
  const auto mdp = chain_mdp(5, 0.9);
  for (auto scheme : {UpdateScheme::per_dialogue, UpdateScheme::per_step}) {
    DiscreteMdpEnvironment env(mdp, 20);
    std::size_t epochs_seen = 0;
    const auto t = train_d3qn(env, chain_config(scheme, 0), [&](std::size_t, const QNetwork&) { ++epochs_seen; });
    EXPECT_EQ(epochs_seen, 20u);
    const auto r = chain_check(t.main, mdp);
    EXPECT_TRUE(r.policy_matches) << to_string(scheme);
    EXPECT_LT(r.max_error, 0.05) << to_string(scheme);
  }
}

TEST(Evaluate, ConstantQHasEqualMaxAndMean) {
  QNetwork q(5, 2, 4, 1);
  make_constant(q, 0.25);
  DiscreteMdpEnvironment env(chain_mdp(), 6);
  const auto ev = evaluate_policy(q, env);
  ASSERT_EQ(ev.dialogues.size(), env.starts());
  for (const auto& d : ev.dialogues) {
    EXPECT_DOUBLE_EQ(d.max_q, 0.25);
    EXPECT_DOUBLE_EQ(d.mean_q, 0.25);
    EXPECT_EQ(d.reward, 0.0);  // ties go left
  }
}

TEST(CounterfactualEnvironment, FollowsChosenDatabase) {
  world::WorldConfig wc;
  wc.d = 3;
  wc.T = 7;
  wc.seed = 1;
  const auto eps = world::episodes_only(world::generate_episodes(wc, 4, 2));
  const gan::BiCoGanModel g(3, 8, 3);
  std::vector<cf::CfDatabase> dbs;
  for (std::size_t k = 0; k < 3; ++k)
    dbs.push_back(cf::build_cf_database(g, eps, nullptr, cf::StrategySpec{1, 10 + k, false}, k));
  const reward::RewardModel rm(3, 6, 4, 5.0);
  CounterfactualEnvironment env({&dbs[0], &dbs[1], &dbs[2]}, rm);
  EXPECT_EQ(env.starts(), 4u);
  env.reset(2);
  EXPECT_EQ(env.state(), eps[2].states[0]);
  const std::vector<std::size_t> path{1, 0, 2};
  for (std::size_t t = 0; t < path.size(); ++t) {
    const auto cands = env.candidates();
    ASSERT_EQ(cands.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(cands[k], dbs[k].episodes[2].actions[t]);
    const auto r = env.step(path[t]);
    EXPECT_EQ(env.state(), dbs[path[t]].episodes[2].states[t + 1]);
    if (t + 1 < path.size()) {
      EXPECT_EQ(r.reward, 0.0);
      EXPECT_FALSE(r.done);
    } else {
      EXPECT_TRUE(r.done);
      EXPECT_TRUE(r.terminal);
      EXPECT_DOUBLE_EQ(r.reward, rm.predict(env.assembled()));
    }
  }
  EXPECT_EQ(env.path(), path);
  auto short_db = dbs[1];
  short_db.episodes.pop_back();
  EXPECT_THROW(CounterfactualEnvironment({&dbs[0], &short_db}, rm), std::invalid_argument);
}
