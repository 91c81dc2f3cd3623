#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "cfd/data/episode.hpp"

namespace cfd::data {

/// Appends zero vectors until every episode has `length` utterances.
/// raw_length keeps the pre-padding count. Throws if an episode is longer.
std::vector<Episode> pad_episodes(std::vector<Episode> episodes, std::size_t length);

struct FilterResult {
  std::vector<Episode> kept;
  std::size_t removed = 0;
  // True when the input was non-empty and nothing survived.
  bool all_removed = false;
};

/// Keeps episodes with outcome <= max_outcome, in order.
FilterResult filter_by_outcome(std::vector<Episode> episodes,
                               double max_outcome = std::numeric_limits<double>::infinity());

/// w consecutive turns of one episode, flattened as s_i, a_i, s_{i+1}, a_{i+1}, ...
struct TurnWindow {
  std::size_t episode = 0;     // index into the windowed list
  std::size_t first_turn = 0;
  std::vector<Vector> utterances;  // 2w vectors
  TraitVector target{};

  std::size_t window() const { return utterances.size() / 2; }
};

/// Stride-1 windows inside each episode; an episode with fewer than w turns
/// yields none. Throws std::invalid_argument for w == 0 or unlabeled episodes.
std::vector<TurnWindow> window_turns(const std::vector<Episode>& episodes, std::size_t w);

/// Window ending at `last_turn` (inclusive) of a single episode; target is the
/// episode's traits or the prior when unlabeled.
TurnWindow window_ending_at(const Episode& episode, std::size_t last_turn, std::size_t w);

struct Split {
  std::vector<Episode> train;
  std::vector<Episode> test;
};

/// Seeded shuffle, then floor(n * ratio) episodes to train and the rest to test.
Split split(const std::vector<Episode>& episodes, double ratio, std::uint64_t seed);

/// Index form of split, for callers that keep side data aligned with episodes.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double ratio,
                                                                            std::uint64_t seed);

}  // namespace cfd::data
