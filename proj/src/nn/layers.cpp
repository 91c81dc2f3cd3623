#include "cfd/nn/layers.hpp"

#include "cfd/nn/errors.hpp"

namespace cfd::nn {

Var activate(Var x, Activation act, double leaky_slope) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::relu: return relu(x);
    case Activation::leaky_relu: return leaky_relu(x, leaky_slope);
  }
  return x;
}

void Dense::init(ParamSet& params, Rng& rng) const {
  params.add_uniform(name + ".weight", in, out, in, rng);
  params.add_uniform(name + ".bias", 1, out, in, rng);
}

Var Dense::operator()(Tape& tape, ParamSet& params, Var x) const {
  Tape::Scope scope(tape, name);
  if (x.cols() != in) {
    throw DimensionError(tape.label("input") + ": expected " + std::to_string(in) +
                         " columns, got " + x.value().shape_string());
  }
  Var w = tape.parameter(params, name + ".weight");
  Var b = tape.parameter(params, name + ".bias");
  return add_bias(matmul(x, w), b);
}

Mlp Mlp::make(const std::string& name, std::vector<std::size_t> widths, Activation hidden,
              Activation output) {
  if (widths.size() < 2) throw ContractError("Mlp::make needs at least input and output widths");
  Mlp mlp;
  mlp.hidden = hidden;
  mlp.output = output;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    mlp.layers.push_back(Dense{name + ".fc" + std::to_string(i + 1), widths[i], widths[i + 1]});
  }
  return mlp;
}

void Mlp::init(ParamSet& params, Rng& rng) const {
  for (const auto& layer : layers) layer.init(params, rng);
}

Var Mlp::operator()(Tape& tape, ParamSet& params, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](tape, params, x);
    x = activate(x, i + 1 == layers.size() ? output : hidden, leaky_slope);
  }
  return x;
}

}  // namespace cfd::nn
