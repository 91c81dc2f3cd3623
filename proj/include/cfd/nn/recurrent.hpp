#pragma once

#include <cstddef>
#include <string>

#include "cfd/common/rng.hpp"
#include "cfd/nn/ops.hpp"

namespace cfd::nn {

/// Gated recurrent cell with one update gate z and one candidate state c:
///   z  = sigmoid(x Wz + h Uz + bz)
///   c  = tanh(x Wc + h Uc + bc)
///   h' = (1 - z) * h + z * c
/// At zero weights and biases this reduces to h' = h / 2.
struct GatedCell {
  std::string name;
  std::size_t input = 0;
  std::size_t hidden = 0;

  void init(ParamSet& params, Rng& rng) const;
  /// h: [B x hidden], x: [B x input] -> [B x hidden].
  Var step(Tape& tape, ParamSet& params, Var h, Var x) const;
  /// Like step, but rows whose mask entry is 0 keep their previous state.
  /// `mask` is [B x hidden] of 0/1 values (a constant on the tape).
  Var masked_step(Tape& tape, ParamSet& params, Var h, Var x, Var mask) const;
};

}  // namespace cfd::nn
