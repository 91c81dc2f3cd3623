#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cfd/nn/param_set.hpp"
#include "cfd/nn/tensor.hpp"

namespace cfd::nn {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records a computation as it runs so gradients can flow back through it.
/// Parameter gradients are accumulated into their ParamSet on backward().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a named parameter; repeated requests return the same node.
  Var parameter(ParamSet& params, std::string_view name);

  /// Appends a node. `fn` receives the node id and must push its gradient into
  /// the parents' gradient buffers.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Gradient buffer of a node, allocated on first use.
  Tensor& grad(std::size_t id);

  /// Reverse sweep from a 1x1 loss. Throws ContractError for non-scalar losses.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Prefix applied to node labels in error messages ("generator/fc1/matmul").
  class Scope {
   public:
    Scope(Tape& tape, std::string name) : tape_(tape) { tape_.scopes_.push_back(std::move(name)); }
    ~Scope() { tape_.scopes_.pop_back(); }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape& tape_;
  };

  std::string label(std::string_view op) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool needs_grad = false;
    ParamSet* params = nullptr;
    std::size_t param_index = 0;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  std::map<std::pair<const ParamSet*, std::size_t>, std::size_t> param_nodes_;
  std::vector<std::string> scopes_;
};

}  // namespace cfd::nn
