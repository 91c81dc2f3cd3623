#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "cfd/nn/ops.hpp"

namespace cfd::nn {

using InputMap = std::map<std::string, Tensor, std::less<>>;

/// Name-based access to a graph's inputs and parameters while it is being built.
class GraphContext {
 public:
  GraphContext(Tape& tape, const InputMap& inputs, ParamSet& params)
      : tape_(tape), inputs_(inputs), params_(params) {}

  /// Throws ContractError if the input or parameter is absent.
  Var input(std::string_view name);
  Var param(std::string_view name);
  Tape& tape() { return tape_; }
  ParamSet& params() { return params_; }

 private:
  Tape& tape_;
  const InputMap& inputs_;
  ParamSet& params_;
  std::map<std::string, Var, std::less<>> bound_;
};

/// A computation description: builds its output from named inputs and parameters.
using Graph = std::function<Var(GraphContext&)>;

struct ForwardResult {
  std::unique_ptr<Tape> tape;
  Var output;

  const Tensor& value() const { return output.value(); }
  /// Backpropagates from the (scalar) output into the parameter set.
  void backward() { tape->backward(output); }
};

/// Runs a graph on a fresh tape. Pure in its inputs: repeated calls with the
/// same arguments produce identical outputs.
ForwardResult forward(const Graph& graph, const InputMap& inputs, ParamSet& params);

}  // namespace cfd::nn
