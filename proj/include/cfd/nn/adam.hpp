#pragma once

#include <cstdint>
#include <vector>

#include "cfd/nn/param_set.hpp"

namespace cfd::nn {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  explicit AdamState(double learning_rate = 1e-4) : lr(learning_rate) {}
};

/// One bias-corrected Adam update. Every parameter must have a gradient from
/// Tape::backward since the last step (ContractError otherwise). Gradients are
/// cleared afterwards.
void adam_step(ParamSet& params, AdamState& state);

}  // namespace cfd::nn
