#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cfd::data {

using Vector = std::vector<double>;

inline constexpr std::size_t kTraitDim = 5;
/// Midpoint of the 1..5 OCEAN scale.
inline constexpr double kTraitMidpoint = 3.0;

/// Openness, conscientiousness, extroversion, agreeableness, neuroticism.
using TraitVector = std::array<double, kTraitDim>;

inline TraitVector prior_traits() {
  return {kTraitMidpoint, kTraitMidpoint, kTraitMidpoint, kTraitMidpoint, kTraitMidpoint};
}

enum class Source { synthetic, corpus, counterfactual };

const char* to_string(Source s);
Source source_from_string(const std::string& s);

/// Number of states and actions for a sequence of T utterances that starts and
/// ends with a state: ceil(T/2) states, one fewer actions.
std::size_t state_slots(std::size_t utterances);
std::size_t action_slots(std::size_t utterances);

/// One dialogue: persuadee utterances are states, persuader utterances actions,
/// interleaved s0 a0 s1 a1 ... sK.
struct Episode {
  std::string id;
  std::vector<Vector> states;
  std::vector<Vector> actions;
  std::optional<TraitVector> traits;
  double outcome = 0.0;
  Source source = Source::synthetic;
  // Utterances before padding; positions >= raw_length are padding.
  std::size_t raw_length = 0;

  std::size_t utterances() const { return states.size() + actions.size(); }
  /// Turns are (state, action) exchanges; only unpadded turns count.
  std::size_t turns() const;
  bool utterance_valid(std::size_t position) const { return position < raw_length; }
  bool state_valid(std::size_t i) const { return utterance_valid(2 * i); }
  bool action_valid(std::size_t i) const { return utterance_valid(2 * i + 1); }
  /// Utterance position of the last state slot (T - 1 for odd T).
  std::size_t terminal_position() const { return 2 * actions.size(); }
  std::size_t dim() const { return states.empty() ? 0 : states.front().size(); }

  bool operator==(const Episode&) const = default;
};

/// Episodes plus the header shared by every record of an episode file.
struct Dataset {
  std::size_t dim = 0;
  std::size_t length = 0;  // T, utterances per padded episode
  std::vector<Episode> episodes;
  // Set for counterfactual databases.
  std::optional<std::size_t> database_index;
  std::optional<int> strategy;

  bool operator==(const Dataset&) const = default;
};

/// Validates structural invariants: alternation, vector dimensions, finite values.
/// Throws std::invalid_argument naming the episode.
void validate_episode(const Episode& e, std::size_t dim);

}  // namespace cfd::data
