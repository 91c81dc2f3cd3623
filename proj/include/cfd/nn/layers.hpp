#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cfd/common/rng.hpp"
#include "cfd/nn/ops.hpp"
#include "cfd/nn/param_set.hpp"

namespace cfd::nn {

enum class Activation { identity, tanh, sigmoid, relu, leaky_relu };

Var activate(Var x, Activation act, double leaky_slope = 0.2);

/// Affine map x * W + b with W stored as [in x out] under "<name>.weight",
/// b as [1 x out] under "<name>.bias".
struct Dense {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;

  void init(ParamSet& params, Rng& rng) const;
  Var operator()(Tape& tape, ParamSet& params, Var x) const;
};

/// Stack of Dense layers; `hidden` activation between layers, `output` after the last.
struct Mlp {
  std::vector<Dense> layers;
  Activation hidden = Activation::tanh;
  Activation output = Activation::identity;
  double leaky_slope = 0.2;

  static Mlp make(const std::string& name, std::vector<std::size_t> widths, Activation hidden,
                  Activation output = Activation::identity);

  void init(ParamSet& params, Rng& rng) const;
  Var operator()(Tape& tape, ParamSet& params, Var x) const;
  std::size_t in() const { return layers.front().in; }
  std::size_t out() const { return layers.back().out; }
};

}  // namespace cfd::nn
