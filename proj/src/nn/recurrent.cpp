#include "cfd/nn/recurrent.hpp"

#include "cfd/nn/errors.hpp"

namespace cfd::nn {

void GatedCell::init(ParamSet& params, Rng& rng) const {
  // fan-in of each gate pre-activation is input + hidden.
  const std::size_t fan_in = input + hidden;
  params.add_uniform(name + ".Wz", input, hidden, fan_in, rng);
  params.add_uniform(name + ".Uz", hidden, hidden, fan_in, rng);
  params.add_uniform(name + ".bz", 1, hidden, fan_in, rng);
  params.add_uniform(name + ".Wc", input, hidden, fan_in, rng);
  params.add_uniform(name + ".Uc", hidden, hidden, fan_in, rng);
  params.add_uniform(name + ".bc", 1, hidden, fan_in, rng);
}

Var GatedCell::step(Tape& tape, ParamSet& params, Var h, Var x) const {
  Tape::Scope scope(tape, name);
  if (h.cols() != hidden || x.cols() != input || h.rows() != x.rows()) {
    throw DimensionError(tape.label("step") + ": state " + h.value().shape_string() + " / input " +
                         x.value().shape_string() + " do not match cell (" +
                         std::to_string(input) + " -> " + std::to_string(hidden) + ")");
  }
  auto p = [&](const char* suffix) { return tape.parameter(params, name + suffix); };
  Var z = sigmoid(add_bias(add(matmul(x, p(".Wz")), matmul(h, p(".Uz"))), p(".bz")));
  Var c = tanh(add_bias(add(matmul(x, p(".Wc")), matmul(h, p(".Uc"))), p(".bc")));
  return add(h, mul(z, sub(c, h)));
}

Var GatedCell::masked_step(Tape& tape, ParamSet& params, Var h, Var x, Var mask) const {
  Var next = step(tape, params, h, x);
  return add(h, mul(mask, sub(next, h)));
}

}  // namespace cfd::nn
