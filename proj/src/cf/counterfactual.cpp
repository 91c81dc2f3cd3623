#include "cfd/cf/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cfd/common/linalg.hpp"
#include "cfd/dppr/dppr.hpp"
#include "cfd/reward/reward_model.hpp"

namespace cfd::cf {

std::size_t StrategySpec::excluded_prefix() const {
  switch (variant) {
    case 1: return 0;
    case 2: return 1;
    case 3: return 3;
    default: throw std::invalid_argument("strategy must be 1, 2 or 3, got " + std::to_string(variant));
  }
}

std::vector<ActionRef> action_pool(const std::vector<data::Episode>& episodes, int variant) {
  const std::size_t skip = StrategySpec{variant}.excluded_prefix();
  std::vector<ActionRef> pool;
  for (std::size_t j = 0; j < episodes.size(); ++j)
    for (std::size_t t = skip; t < episodes[j].actions.size(); ++t)
      if (episodes[j].action_valid(t)) pool.push_back({j, t});
  return pool;
}

std::vector<std::vector<ActionRef>> select_counterfactual_actions(
    const std::vector<data::Episode>& episodes, const StrategySpec& spec) {
  const auto pool = action_pool(episodes, spec.variant);
  if (pool.empty())
    throw std::invalid_argument("strategy " + std::to_string(spec.variant) +
                                " leaves no eligible actions; dialogues need more than " +
                                std::to_string(spec.excluded_prefix()) + " actions");
  Rng rng(spec.seed);
  std::vector<std::vector<ActionRef>> picks(episodes.size());
  for (std::size_t j = 0; j < episodes.size(); ++j) {
    const std::size_t steps = episodes[j].turns();
    if (spec.without_replacement) {
      if (steps > pool.size())
        throw std::invalid_argument("pool of " + std::to_string(pool.size()) +
                                    " actions is too small to sample without replacement");
      std::vector<std::size_t> idx(pool.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (std::size_t t = 0; t < steps; ++t) {
        std::swap(idx[t], idx[t + sample_index(rng, idx.size() - t)]);
        picks[j].push_back(pool[idx[t]]);
      }
    } else {
      for (std::size_t t = 0; t < steps; ++t) picks[j].push_back(pool[sample_index(rng, pool.size())]);
    }
  }
  return picks;
}

CfDatabase rollout_database(const gan::BiCoGanModel& model,
                            const std::vector<data::Episode>& source,
                            const dppr::DpprModel* dppr,
                            const std::vector<std::vector<ActionRef>>& picks,
                            const RolloutOptions& options) {
  if (picks.size() != source.size())
    throw std::invalid_argument("action picks do not cover every source dialogue");
  CfDatabase db;
  db.picks = picks;
  db.episodes.reserve(source.size());
  for (std::size_t j = 0; j < source.size(); ++j) {
    const data::Episode& e = source[j];
    if (e.dim() != model.dim())
      throw std::invalid_argument("dialogue '" + e.id + "' has dimension " + std::to_string(e.dim()) +
                                  ", model expects " + std::to_string(model.dim()));
    data::Episode cf;
    cf.id = e.id;
    cf.traits = e.traits;
    cf.source = data::Source::counterfactual;
    cf.raw_length = e.raw_length;
    cf.states.push_back(e.states[0]);

    std::optional<dppr::ProgressiveEstimator> cf_est, factual_est;
    if (dppr) (options.reestimate_traits ? cf_est : factual_est).emplace(*dppr, options.window);

    const std::size_t steps = e.turns();
    if (picks[j].size() < steps)
      throw std::invalid_argument("dialogue '" + e.id + "' has fewer picks than steps");
    for (std::size_t t = 0; t < steps; ++t) {
      const ActionRef& ref = picks[j][t];
      const data::Vector& a = source.at(ref.episode).actions.at(ref.t);
      const data::Vector& s = cf.states.back();
      data::TraitVector L;
      if (cf_est)
        L = cf_est->add_turn(s, a);
      else if (factual_est)
        L = factual_est->add_turn(e.states[t], e.actions[t]);
      else
        L = e.traits ? *e.traits : data::prior_traits();
      gan::NoiseSpec noise = options.noise;
      if (noise.mode == gan::NoiseMode::sampled) noise.seed = derive_seed(derive_seed(noise.seed, j), t);
      const data::Vector* factual_next = e.state_valid(t + 1) ? &e.states[t + 1] : nullptr;
      cf.actions.push_back(a);
      cf.states.push_back(model.generate_counterfactual(s, a, L, noise, factual_next));
    }
    while (cf.states.size() < e.states.size()) cf.states.emplace_back(e.dim(), 0.0);
    while (cf.actions.size() < e.actions.size()) cf.actions.emplace_back(e.dim(), 0.0);
    db.episodes.push_back(std::move(cf));
  }
  return db;
}

CfDatabase build_cf_database(const gan::BiCoGanModel& model,
                             const std::vector<data::Episode>& source,
                             const dppr::DpprModel* dppr, const StrategySpec& spec,
                             std::size_t index, const RolloutOptions& options) {
  RolloutOptions opts = options;
  if (opts.noise.mode == gan::NoiseMode::sampled)
    opts.noise.seed = derive_seed(opts.noise.seed, index);
  CfDatabase db = rollout_database(model, source, dppr, select_counterfactual_actions(source, spec), opts);
  db.index = index;
  db.strategy = spec.variant;
  return db;
}

double alignment_error(const std::vector<data::Episode>& cf,
                       const std::vector<data::Episode>& source) {
  if (cf.size() != source.size())
    throw std::invalid_argument("counterfactual and source dialogue counts differ");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < source.size(); ++j) {
    const std::size_t steps = source[j].turns();
    for (std::size_t t = 0; t < steps; ++t) {
      if (!source[j].state_valid(t + 1)) break;
      total += la::l2_distance(cf[j].states.at(t + 1), source[j].states[t + 1]);
      ++n;
    }
  }
  return n == 0 ? 0.0 : total / double(n);
}

double alignment_error(const CfDatabase& db, const std::vector<data::Episode>& source) {
  return alignment_error(db.episodes, source);
}

double score_database(CfDatabase& db, const reward::RewardModel& model) {
  const auto scores = model.predict(db.episodes);
  double total = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    db.episodes[j].outcome = scores[j];
    total += scores[j];
  }
  db.predicted_cumulative = total;
  return total;
}

namespace {

struct Sides {
  std::vector<ScoredDatabase> above;
  std::vector<ScoredDatabase> below;
};

Sides partition(const std::vector<ScoredDatabase>& dbs, double ground_truth) {
  Sides s;
  for (const auto& d : dbs) {
    if (!std::isfinite(d.reward)) throw std::invalid_argument("database reward is not finite");
    if (d.reward > ground_truth) s.above.push_back(d);
    if (d.reward < ground_truth) s.below.push_back(d);
  }
  auto nearest = [&](const ScoredDatabase& a, const ScoredDatabase& b) {
    const double da = std::abs(a.reward - ground_truth);
    const double db = std::abs(b.reward - ground_truth);
    return da != db ? da < db : a.index < b.index;
  };
  std::sort(s.above.begin(), s.above.end(), nearest);
  std::sort(s.below.begin(), s.below.end(), nearest);
  return s;
}

}  // namespace

bool balance_feasible(const std::vector<ScoredDatabase>& databases, double ground_truth,
                      std::size_t keep) {
  Sides s = partition(databases, ground_truth);
  return s.above.size() >= (keep + 1) / 2 && s.below.size() >= keep / 2;
}

std::vector<std::size_t> balance_select(const std::vector<ScoredDatabase>& databases,
                                        double ground_truth, std::size_t keep) {
  Sides s = partition(databases, ground_truth);
  const std::size_t n_above = (keep + 1) / 2;
  const std::size_t n_below = keep / 2;
  if (s.above.size() < n_above || s.below.size() < n_below)
    throw std::invalid_argument("cannot balance " + std::to_string(keep) + " databases: " +
                                std::to_string(s.above.size()) + " above and " +
                                std::to_string(s.below.size()) + " below the ground truth, need " +
                                std::to_string(n_above) + " and " + std::to_string(n_below));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_above; ++i) out.push_back(s.above[i].index);
  for (std::size_t i = 0; i < n_below; ++i) out.push_back(s.below[i].index);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cfd::cf
