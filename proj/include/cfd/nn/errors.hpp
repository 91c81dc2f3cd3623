#pragma once

#include <stdexcept>
#include <string>

namespace cfd::nn {

/// Incompatible shapes; the message names the graph node that rejected them.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition (non-scalar loss, missing gradient, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cfd::nn
