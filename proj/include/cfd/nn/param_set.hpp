#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cfd/common/rng.hpp"
#include "cfd/nn/tensor.hpp"

namespace cfd::nn {

/// Named, ordered collection of trainable tensors with one gradient slot each.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    // Set by Tape::backward when the parameter took part in the graph.
    bool grad_ready = false;
  };

  /// Adds a parameter; throws ContractError on a duplicate name.
  Tensor& add(std::string name, Tensor init);
  /// Adds a rows x cols parameter drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor& add_uniform(std::string name, std::size_t rows, std::size_t cols, std::size_t fan_in,
                      Rng& rng);

  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  Tensor& value(std::string_view name);
  const Tensor& value(std::string_view name) const;
  Tensor& grad(std::string_view name);
  const Tensor& grad(std::string_view name) const;

  Entry& entry(std::size_t i) { return entries_[i]; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_elements() const noexcept;
  std::vector<std::string> names() const;

  std::vector<Entry>::iterator begin() { return entries_.begin(); }
  std::vector<Entry>::iterator end() { return entries_.end(); }
  std::vector<Entry>::const_iterator begin() const { return entries_.begin(); }
  std::vector<Entry>::const_iterator end() const { return entries_.end(); }

  void zero_grad();
  /// Copies values (not gradients) from a set with identical names and shapes.
  void copy_values_from(const ParamSet& other);

  bool all_finite() const;
  std::uint64_t checksum() const;

  /// Parameters and names compared; gradients ignored.
  bool same_values(const ParamSet& other) const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Binary format: magic "CFDP", u32 version, u64 count, then per parameter
// u64 name length, name bytes, u64 rank, u64 extents..., raw little-endian doubles.
inline constexpr std::uint32_t kParamFormatVersion = 1;

void save_params(const ParamSet& params, std::ostream& out);
ParamSet load_params(std::istream& in);
void save_params(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_params(const std::filesystem::path& path);

}  // namespace cfd::nn
