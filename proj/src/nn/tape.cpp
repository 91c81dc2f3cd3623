#include "cfd/nn/tape.hpp"

#include "cfd/nn/errors.hpp"

namespace cfd::nn {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::parameter(ParamSet& params, std::string_view name) {
  const std::size_t index = params.index_of(name);
  const auto key = std::make_pair(static_cast<const ParamSet*>(&params), index);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var(this, it->second);
  Node node;
  node.value = params.entry(index).value;
  node.needs_grad = true;
  node.params = &params;
  node.param_index = index;
  Var v = push(std::move(node));
  param_nodes_.emplace(key, v.id());
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(parents), std::move(fn));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  for (const auto& p : parents) {
    if (&p.tape() != this) throw ContractError(label("record") + ": operand from another tape");
    node.needs_grad = node.needs_grad || nodes_[p.id()].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(fn);
  return push(std::move(node));
}

Tensor& Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss recorded on another tape");
  const Tensor& lv = value(loss.id());
  if (lv.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + lv.shape_string());
  }
  for (auto& node : nodes_) node.grad = Tensor();
  grad(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.needs_grad || node.grad.empty() || !node.backward) continue;
    node.backward(*this, i);
  }
  for (auto& node : nodes_) {
    if (node.params == nullptr) continue;
    auto& entry = node.params->entry(node.param_index);
    if (!node.grad.empty()) {
      auto dst = entry.grad.values();
      auto src = node.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    entry.grad_ready = true;
  }
}

std::string Tape::label(std::string_view op) const {
  std::string out;
  for (const auto& s : scopes_) {
    out += s;
    out += '/';
  }
  out += op;
  return out;
}

}  // namespace cfd::nn
