#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cfd/data/episode.hpp"
#include "cfd/gan/bicogan.hpp"

namespace cfd::dppr {
class DpprModel;
}
namespace cfd::reward {
class RewardModel;
}

namespace cfd::cf {

/// 1: every real action is eligible; 2: each dialogue's a_0 is excluded;
/// 3: each dialogue's a_0, a_1, a_2 are excluded.
struct StrategySpec {
  int variant = 2;
  std::uint64_t seed = 0;
  bool without_replacement = false;

  std::size_t excluded_prefix() const;
};

/// Position of a real action in the source data.
struct ActionRef {
  std::size_t episode = 0;
  std::size_t t = 0;
  bool operator==(const ActionRef&) const = default;
};

/// Unpadded actions outside the strategy's excluded prefix, in source order.
std::vector<ActionRef> action_pool(const std::vector<data::Episode>& episodes, int variant);

/// One sampled action per unpadded step of every dialogue, drawn uniformly from
/// the pool (with replacement unless spec.without_replacement, which forbids
/// repeats inside a dialogue). Throws std::invalid_argument when the pool is empty.
std::vector<std::vector<ActionRef>> select_counterfactual_actions(
    const std::vector<data::Episode>& episodes, const StrategySpec& spec);

struct RolloutOptions {
  gan::NoiseSpec noise{};
  // Re-estimate L_t from the counterfactual prefix; otherwise use the estimate
  // from the factual dialogue (or its labels when no DPPR model is given).
  bool reestimate_traits = true;
  std::size_t window = 1;
};

struct CfDatabase {
  std::size_t index = 0;
  int strategy = 0;
  std::vector<data::Episode> episodes;
  std::vector<std::vector<ActionRef>> picks;
  std::optional<double> predicted_cumulative;
};

/// Rolls every source dialogue forward under the given action picks:
/// s'_0 = s_0, s'_{t+1} = G(s'_t, a'_t, L_t, eps) with eps from the noise mode
/// (abducted from the factual s_{t+1} by default).
CfDatabase rollout_database(const gan::BiCoGanModel& model,
                            const std::vector<data::Episode>& source,
                            const dppr::DpprModel* dppr,
                            const std::vector<std::vector<ActionRef>>& picks,
                            const RolloutOptions& options = {});

CfDatabase build_cf_database(const gan::BiCoGanModel& model,
                             const std::vector<data::Episode>& source,
                             const dppr::DpprModel* dppr, const StrategySpec& spec,
                             std::size_t index, const RolloutOptions& options = {});

/// Mean L2 distance between counterfactual and factual next states over all
/// unpadded transitions.
double alignment_error(const CfDatabase& db, const std::vector<data::Episode>& source);
double alignment_error(const std::vector<data::Episode>& cf,
                       const std::vector<data::Episode>& source);

/// Sums the reward model's clamped scores over the database's dialogues and
/// stores each dialogue's score as its outcome.
double score_database(CfDatabase& db, const reward::RewardModel& model);

struct ScoredDatabase {
  std::size_t index = 0;
  double reward = 0.0;
};

/// Picks ceil(keep/2) databases strictly above and floor(keep/2) strictly below
/// the ground truth, nearest first, ties broken by lower database index. Returns
/// the chosen database indices in ascending order. Throws std::invalid_argument
/// naming both side counts when either side is short.
std::vector<std::size_t> balance_select(const std::vector<ScoredDatabase>& databases,
                                        double ground_truth, std::size_t keep);

bool balance_feasible(const std::vector<ScoredDatabase>& databases, double ground_truth,
                      std::size_t keep);

}  // namespace cfd::cf
