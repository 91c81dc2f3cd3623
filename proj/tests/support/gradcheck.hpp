#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "cfd/nn/tape.hpp"

namespace cfd::check {

using LossFn = std::function<nn::Var(nn::Tape&, nn::ParamSet&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "param[index]"
  std::size_t checked = 0;
};

/// Central finite differences against Tape::backward for every element of
/// every parameter (or a seeded sample of `max_per_param` elements each).
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(nn::ParamSet& params, const LossFn& loss, double h = 1e-5,
                           double floor = 1e-4, std::size_t max_per_param = 0,
                           std::uint64_t seed = 1);

/// Fills every parameter with U(lo, hi) values.
void randomize(nn::ParamSet& params, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

}  // namespace cfd::check
