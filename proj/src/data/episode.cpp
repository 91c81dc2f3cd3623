#include "cfd/data/episode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cfd/common/rng.hpp"
#include "cfd/data/dataset_ops.hpp"

namespace cfd::data {

const char* to_string(Source s) {
  switch (s) {
    case Source::synthetic: return "synthetic";
    case Source::corpus: return "corpus";
    case Source::counterfactual: return "counterfactual";
  }
  return "synthetic";
}

Source source_from_string(const std::string& s) {
  if (s == "synthetic") return Source::synthetic;
  if (s == "corpus") return Source::corpus;
  if (s == "counterfactual") return Source::counterfactual;
  throw std::invalid_argument("unknown episode source '" + s + "'");
}

std::size_t state_slots(std::size_t utterances) { return (utterances + 1) / 2; }

std::size_t action_slots(std::size_t utterances) {
  std::size_t s = state_slots(utterances);
  return s == 0 ? 0 : s - 1;
}

std::size_t Episode::turns() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < actions.size(); ++i)
    if (action_valid(i)) ++n;
  return n;
}

void validate_episode(const Episode& e, std::size_t dim) {
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("episode '" + e.id + "': " + what);
  };
  if (e.states.empty()) fail("no states");
  if (e.states.size() != e.actions.size() + 1) fail("expected one more state than actions");
  if (e.raw_length == 0 || e.raw_length > e.utterances()) fail("length out of range");
  auto check = [&](const Vector& v, const char* kind, std::size_t i) {
    if (v.size() != dim)
      fail(std::string(kind) + " " + std::to_string(i) + " has dimension " +
           std::to_string(v.size()) + ", expected " + std::to_string(dim));
    for (double x : v)
      if (!std::isfinite(x)) fail(std::string(kind) + " " + std::to_string(i) + " is not finite");
  };
  for (std::size_t i = 0; i < e.states.size(); ++i) check(e.states[i], "state", i);
  for (std::size_t i = 0; i < e.actions.size(); ++i) check(e.actions[i], "action", i);
  if (!std::isfinite(e.outcome)) fail("outcome is not finite");
  if (e.traits)
    for (double t : *e.traits)
      if (!std::isfinite(t)) fail("traits are not finite");
}

std::vector<Episode> pad_episodes(std::vector<Episode> episodes, std::size_t length) {
  const std::size_t ns = state_slots(length);
  const std::size_t na = action_slots(length);
  for (auto& e : episodes) {
    if (e.states.size() > ns || e.actions.size() > na)
      throw std::invalid_argument("episode '" + e.id + "' has " + std::to_string(e.utterances()) +
                                  " utterances, longer than " + std::to_string(length));
    if (e.raw_length == 0) e.raw_length = e.utterances();
    const std::size_t d = e.dim();
    while (e.states.size() < ns) e.states.emplace_back(d, 0.0);
    while (e.actions.size() < na) e.actions.emplace_back(d, 0.0);
  }
  return episodes;
}

FilterResult filter_by_outcome(std::vector<Episode> episodes, double max_outcome) {
  FilterResult r;
  const bool had_any = !episodes.empty();
  for (auto& e : episodes) {
    if (e.outcome <= max_outcome)
      r.kept.push_back(std::move(e));
    else
      ++r.removed;
  }
  r.all_removed = had_any && r.kept.empty();
  return r;
}

TurnWindow window_ending_at(const Episode& episode, std::size_t last_turn, std::size_t w) {
  if (w == 0) throw std::invalid_argument("window size must be at least 1");
  if (last_turn + 1 < w || last_turn >= episode.actions.size())
    throw std::out_of_range("window of " + std::to_string(w) + " turns ending at turn " +
                            std::to_string(last_turn) + " does not fit episode '" + episode.id +
                            "'");
  TurnWindow win;
  win.first_turn = last_turn + 1 - w;
  win.utterances.reserve(2 * w);
  for (std::size_t t = win.first_turn; t <= last_turn; ++t) {
    win.utterances.push_back(episode.states[t]);
    win.utterances.push_back(episode.actions[t]);
  }
  win.target = episode.traits ? *episode.traits : prior_traits();
  return win;
}

std::vector<TurnWindow> window_turns(const std::vector<Episode>& episodes, std::size_t w) {
  if (w == 0) throw std::invalid_argument("window size must be at least 1");
  std::vector<TurnWindow> out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const Episode& e = episodes[i];
    if (!e.traits) throw std::invalid_argument("episode '" + e.id + "' has no trait labels");
    const std::size_t turns = e.turns();
    if (turns < w) continue;
    for (std::size_t last = w - 1; last < turns; ++last) {
      TurnWindow win = window_ending_at(e, last, w);
      win.episode = i;
      out.push_back(std::move(win));
    }
  }
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double ratio,
                                                                            std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must be in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[sample_index(rng, i)]);
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio));
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<long>(n_train), order.end());
  return {std::move(train), std::move(test)};
}

Split split(const std::vector<Episode>& episodes, double ratio, std::uint64_t seed) {
  auto [tr, te] = split_indices(episodes.size(), ratio, seed);
  Split s;
  for (auto i : tr) s.train.push_back(episodes[i]);
  for (auto i : te) s.test.push_back(episodes[i]);
  return s;
}

}  // namespace cfd::data
