#include "cfd/nn/graph.hpp"

#include "cfd/nn/errors.hpp"

namespace cfd::nn {

Var GraphContext::input(std::string_view name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  auto it = inputs_.find(name);
  if (it == inputs_.end()) throw ContractError("graph input '" + std::string(name) + "' not provided");
  Var v = tape_.constant(it->second);
  bound_.emplace(std::string(name), v);
  return v;
}

Var GraphContext::param(std::string_view name) {
  if (!params_.contains(name)) {
    throw ContractError("graph parameter '" + std::string(name) + "' not provided");
  }
  return tape_.parameter(params_, name);
}

ForwardResult forward(const Graph& graph, const InputMap& inputs, ParamSet& params) {
  ForwardResult result{std::make_unique<Tape>(), Var()};
  GraphContext ctx(*result.tape, inputs, params);
  result.output = graph(ctx);
  if (!result.output.value().all_finite()) {
    throw std::runtime_error("forward produced non-finite values");
  }
  return result;
}

}  // namespace cfd::nn
