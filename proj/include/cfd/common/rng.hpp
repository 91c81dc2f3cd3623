#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cfd {

using Rng = std::mt19937_64;

/// Deterministic sub-seed for a named stage or component of a run.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

double sample_normal(Rng& rng, double mean = 0.0, double stddev = 1.0);
double sample_uniform(Rng& rng, double lo, double hi);
std::size_t sample_index(Rng& rng, std::size_t n);

std::vector<double> normal_vector(Rng& rng, std::size_t n, double stddev = 1.0);

}  // namespace cfd
