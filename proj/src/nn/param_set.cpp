#include "cfd/nn/param_set.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "cfd/common/checksum.hpp"
#include "cfd/nn/errors.hpp"

namespace cfd::nn {

Tensor& ParamSet::add(std::string name, Tensor init) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  Tensor grad(init.shape());
  entries_.push_back(Entry{std::move(name), std::move(init), std::move(grad), false});
  return entries_.back().value;
}

Tensor& ParamSet::add_uniform(std::string name, std::size_t rows, std::size_t cols,
                              std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(rows, cols);
  for (auto& v : t.values()) v = sample_uniform(rng, -bound, bound);
  return add(std::move(name), std::move(t));
}

bool ParamSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParamSet::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

Tensor& ParamSet::value(std::string_view name) { return entries_[index_of(name)].value; }
const Tensor& ParamSet::value(std::string_view name) const { return entries_[index_of(name)].value; }
Tensor& ParamSet::grad(std::string_view name) { return entries_[index_of(name)].grad; }
const Tensor& ParamSet::grad(std::string_view name) const { return entries_[index_of(name)].grad; }

std::size_t ParamSet::total_elements() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

void ParamSet::zero_grad() {
  for (auto& e : entries_) {
    e.grad.fill(0.0);
    e.grad_ready = false;
  }
}

void ParamSet::copy_values_from(const ParamSet& other) {
  if (other.size() != size()) throw ContractError("parameter sets differ in size");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& src = other.entries_[i];
    if (src.name != entries_[i].name || src.value.shape() != entries_[i].value.shape()) {
      throw ContractError("parameter sets differ at '" + entries_[i].name + "'");
    }
    entries_[i].value = src.value;
  }
}

bool ParamSet::all_finite() const {
  for (const auto& e : entries_) {
    if (!e.value.all_finite()) return false;
  }
  return true;
}

std::uint64_t ParamSet::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& e : entries_) {
    h = fnv1a64(e.name, h);
    h = fnv1a64(e.value.values(), h);
  }
  return h;
}

bool ParamSet::same_values(const ParamSet& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (!(entries_[i].value == other.entries_[i].value)) return false;
  }
  return true;
}

namespace {

constexpr char kMagic[4] = {'C', 'F', 'D', 'P'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error(std::string("truncated parameter file while reading ") + what);
  return v;
}

}  // namespace

void save_params(const ParamSet& params, std::ostream& out) {
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, kParamFormatVersion);
  write_pod<std::uint64_t>(out, params.size());
  for (const auto& e : params) {
    write_pod<std::uint64_t>(out, e.name.size());
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod<std::uint64_t>(out, e.value.rank());
    for (auto extent : e.value.shape()) write_pod<std::uint64_t>(out, extent);
    out.write(reinterpret_cast<const char*>(e.value.data().data()),
              static_cast<std::streamsize>(e.value.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed to write parameter stream");
}

ParamSet load_params(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a parameter file (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kParamFormatVersion) {
    throw std::runtime_error("unsupported parameter format version " + std::to_string(version));
  }
  const auto count = read_pod<std::uint64_t>(in, "count");
  ParamSet params;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint64_t>(in, "name length");
    if (name_len > 4096) throw std::runtime_error("corrupt parameter name length");
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!in) throw std::runtime_error("truncated parameter file while reading name");
    const auto rank = read_pod<std::uint64_t>(in, "rank");
    if (rank > 8) throw std::runtime_error("corrupt parameter rank for '" + name + "'");
    Shape shape(rank);
    for (auto& extent : shape) extent = read_pod<std::uint64_t>(in, "shape");
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated parameter file in data of '" + name + "'");
    params.add(std::move(name), std::move(t));
  }
  return params;
}

void save_params(const ParamSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_params(params, out);
}

ParamSet load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return load_params(in);
}

}  // namespace cfd::nn
