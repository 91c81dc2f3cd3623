#include <gtest/gtest.h>

#include <sstream>

#include "cfd/dppr/dppr.hpp"
#include "cfd/nn/errors.hpp"
#include "cfd/world/synthworld.hpp"
#include "support/gradcheck.hpp"

using namespace cfd;
using namespace cfd::dppr;

namespace {

std::vector<data::Episode> linear_world(std::size_t n, std::uint64_t seed, std::size_t d = 6) {
  world::WorldConfig c;
  c.d = d;
  c.T = 9;
  c.noise_scale = 0.3;
  c.behavior_noise = 0.1;
  c.policy_trait_gain = 1.0;
  c.behavior_bias_scale = 0.0;
  c.seed = seed;
  return world::episodes_only(world::generate_episodes(c, n, seed + 1));
}

DpprConfig small(std::size_t epochs = 20) {
  DpprConfig c;
  c.attention = 16;
  c.hidden = 16;
  c.lr = 1e-3;
  c.epochs = epochs;
  c.seed = 4;
  return c;
}

}  // namespace

TEST(RegressionMetrics, HandExample) {
  const std::vector<Vector> target{{2.0}, {4.0}}, pred{{3.0}, {3.0}};
  const auto m = regression_metrics(pred, target);
  EXPECT_DOUBLE_EQ(m.mse, 1.0);
  EXPECT_DOUBLE_EQ(m.rmse, 1.0);
  EXPECT_DOUBLE_EQ(m.mae, 1.0);
  EXPECT_DOUBLE_EQ(m.r2, 0.0);
  EXPECT_DOUBLE_EQ(m.mape, (0.5 + 0.25) / 2.0);
}

TEST(RegressionMetrics, PerfectPredictionAndErrors) {
  const std::vector<Vector> t{{1.0, 2.0}, {3.0, 5.0}, {2.0, 4.0}};
  const auto m = regression_metrics(t, t);
  EXPECT_DOUBLE_EQ(m.mse, 0.0);
  EXPECT_DOUBLE_EQ(m.r2, 1.0);
  EXPECT_THROW(regression_metrics(std::vector<Vector>{{1.0}}, std::vector<Vector>{{1.0}}), std::invalid_argument);
  EXPECT_THROW(regression_metrics(std::vector<Vector>{{1.0}, {2.0}}, std::vector<Vector>{{0.0}, {2.0}}),
               std::invalid_argument);
  EXPECT_THROW(regression_metrics(std::vector<Vector>{{1.0}, {2.0}}, std::vector<Vector>{{2.0}, {2.0}}),
               std::invalid_argument);
}

TEST(RegressionTable, PublishedRowFormat) {
  RegressionMetrics m{0.166, 0.407, 0.092, 0.830, 0.254};
  std::ostringstream out;
  write_regression_table(out, {{1, m}, {8, m}}, 3);
  EXPECT_EQ(out.str(),
            "Win size\tMSE\tRMSE\tMAPE\tR2\tMAE\n"
            "1 turn\t0.166\t0.407\t0.092\t0.830\t0.254\n"
            "8 turns\t0.166\t0.407\t0.092\t0.830\t0.254\n");
}

TEST(DpprConfig, Validation) {
  DpprConfig c = small();
  c.window = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small();
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(DpprModel, ZeroEpochsLeavesInitialParameters) {
  const auto eps = linear_world(20, 1);
  auto windows = data::window_turns(eps, 1);
  auto trained = train_dppr(windows, small(0));
  DpprModel fresh(6, 16, 16, derive_seed(small(0).seed, "dppr.init"));
  EXPECT_TRUE(trained.model.params().same_values(fresh.params()));
  EXPECT_TRUE(trained.history.epoch_loss.empty());
}

TEST(DpprModel, InitialPredictionIsNearMidpoint) {
  const auto eps = linear_world(4, 2);
  DpprModel m(6, 16, 16, 9);
  m.params().value("dppr.head.fc3.weight").fill(0.0);
  for (const auto& w : data::window_turns(eps, 2)) {
    const auto p = m.predict_turn(w);
    for (double v : p) EXPECT_DOUBLE_EQ(v, 3.0);
  }
}

TEST(DpprModel, WrongDimensionNamesOperation) {
  DpprModel m(6, 8, 8, 1);
  data::TurnWindow w;
  w.utterances = {Vector(5, 0.0), Vector(5, 0.0)};
  try {
    m.predict_turn(w);
    FAIL() << "expected a dimension error";
  } catch (const nn::DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("dppr"), std::string::npos) << e.what();
  }
}

TEST(DpprModel, GradientsMatchFiniteDifferences) {
  const auto eps = linear_world(3, 5, 3);
  auto windows = data::window_turns(eps, 2);
  DpprModel m(3, 4, 5, 2);
  std::vector<const data::TurnWindow*> batch{&windows[0], &windows[1], &windows[4]};
  nn::Tensor target = nn::Tensor::zeros(3, 5);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 5; ++k) target(i, k) = batch[i]->target[k];
  check::randomize(m.params(), 8, -0.5, 0.5);
  const auto r = check::grad_check(m.params(), [&](nn::Tape& tape, nn::ParamSet&) {
    return nn::mse(m.forward(tape, batch), tape.constant(target));
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 20u);
}

TEST(DpprModel, SaveLoadRoundTrip) {
  const auto eps = linear_world(5, 6);
  auto windows = data::window_turns(eps, 1);
  DpprModel m(6, 8, 12, 3);
  const auto path = std::filesystem::temp_directory_path() / "cfd_dppr_roundtrip.params";
  m.save(path);
  const auto back = DpprModel::load(path);
  EXPECT_EQ(back.attention(), 8u);
  EXPECT_EQ(back.hidden(), 12u);
  for (const auto& w : windows) EXPECT_EQ(back.predict_turn(w), m.predict_turn(w));
  std::filesystem::remove(path);
}

TEST(DpprTraining, DeterministicForSeed) {
  const auto eps = linear_world(20, 7);
  auto windows = data::window_turns(eps, 1);
  auto a = train_dppr(windows, small(3));
  auto b = train_dppr(windows, small(3));
  EXPECT_EQ(a.history.epoch_loss, b.history.epoch_loss);
  EXPECT_TRUE(a.model.params().same_values(b.model.params()));
}

TEST(DpprTraining, RecoversTraitsOnHeldOutDialogues) {
  const auto eps = linear_world(200, 8);
  const auto s = data::split(eps, 0.8, 1);
  auto trained = train_dppr(data::window_turns(s.train, 1), small(25));
  const auto m = evaluate(trained.model, data::window_turns(s.test, 1));
  EXPECT_GT(m.r2, 0.6);
  EXPECT_LT(trained.history.epoch_loss.back(), trained.history.epoch_loss.front());
}

TEST(DpprTraining, RejectsMixedWindowLengths) {
  const auto eps = linear_world(3, 9);
  auto windows = data::window_turns(eps, 1);
  auto longer = data::window_turns(eps, 2);
  windows.push_back(longer.front());
  EXPECT_THROW(train_dppr(windows, small(1)), std::invalid_argument);
  EXPECT_THROW(train_dppr({}, small(1)), std::invalid_argument);
}

TEST(CrossValidation, FoldMeanIsAverage) {
  const auto eps = linear_world(30, 10);
  const auto cv = cross_validate(data::window_turns(eps, 1), small(2), 3);
  ASSERT_EQ(cv.folds.size(), 3u);
  double mse = 0.0;
  for (const auto& f : cv.folds) mse += f.mse;
  EXPECT_NEAR(cv.mean.mse, mse / 3.0, 1e-12);
  EXPECT_THROW(cross_validate(data::window_turns(eps, 1), small(1), 1), std::invalid_argument);
}

TEST(ProgressiveEstimator, PriorBeforeAnyTurn) {
  DpprModel m(6, 8, 8, 1);
  ProgressiveEstimator est(m, 2);
  EXPECT_EQ(est.turns(), 0u);
  for (double v : est.estimate()) EXPECT_DOUBLE_EQ(v, 3.0);
  const auto eps = linear_world(1, 11);
  for (double v : progressive_estimate(m, eps[0], 0, 2)) EXPECT_DOUBLE_EQ(v, 3.0);
}

TEST(ProgressiveEstimator, RunningMeanOfPerTurnPredictions) {
  DpprModel m(6, 8, 8, 1);
  const auto eps = linear_world(1, 12);
  const auto trace = progressive_trace(m, eps[0], 2);
  ASSERT_EQ(trace.per_turn.size(), eps[0].turns());
  for (std::size_t i = 0; i < trace.per_turn.size(); ++i) {
    const auto expected = m.predict_turn(data::window_ending_at(eps[0], i, std::min<std::size_t>(i + 1, 2)));
    for (std::size_t k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(trace.per_turn[i][k], expected[k]);
    for (std::size_t k = 0; k < 5; ++k) {
      double mean = 0.0;
      for (std::size_t j = 0; j <= i; ++j) mean += trace.per_turn[j][k];
      EXPECT_NEAR(trace.running[i][k], mean / double(i + 1), 1e-12);
    }
  }
}

TEST(ProgressiveEstimator, UsesOnlyPastTurns) {
  DpprModel m(6, 8, 8, 1);
  auto eps = linear_world(1, 13);
  const auto before = progressive_estimate(m, eps[0], 2, 1);
  for (std::size_t i = 2; i < eps[0].states.size(); ++i)
    for (auto& v : eps[0].states[i]) v += 5.0;
  for (std::size_t i = 2; i < eps[0].actions.size(); ++i)
    for (auto& v : eps[0].actions[i]) v -= 5.0;
  EXPECT_EQ(progressive_estimate(m, eps[0], 2, 1), before);
  EXPECT_THROW(progressive_estimate(m, eps[0], eps[0].turns() + 1, 1), std::out_of_range);
}
