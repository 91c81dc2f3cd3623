#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "cfd/data/episode.hpp"

// Episode files are JSON lines. Line 1 is a header
//   {"schema_version":1,"d":8,"T":9[,"database_index":3,"strategy":2]}
// and each following line is one record
//   {"id":"...","states":[[...]],"actions":[[...]],"traits":[5 reals]|null,
//    "outcome":2.0,"source":"synthetic"|"corpus"|"counterfactual","length":9}
// "length" (utterances before padding) is optional and defaults to T.
// Doubles are written with round-trip precision, so save/load is bit-exact.
namespace cfd::data {

inline constexpr int kEpisodeSchemaVersion = 1;

class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

void save_dataset(const Dataset& dataset, std::ostream& out);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace cfd::data
