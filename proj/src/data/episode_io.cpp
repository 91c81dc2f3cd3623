#include "cfd/data/episode_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace cfd::data {

using nlohmann::json;

FormatError::FormatError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

json vectors_to_json(const std::vector<Vector>& vs) {
  json arr = json::array();
  for (const auto& v : vs) arr.push_back(v);
  return arr;
}

std::vector<Vector> vectors_from_json(const json& j, std::size_t dim, const char* field) {
  if (!j.is_array()) throw std::invalid_argument(std::string("'") + field + "' is not an array");
  std::vector<Vector> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& row = j[i];
    if (!row.is_array() || row.size() != dim)
      throw std::invalid_argument(std::string(field) + "[" + std::to_string(i) +
                                  "] must be an array of " + std::to_string(dim) + " numbers");
    Vector v(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      if (!row[k].is_number())
        throw std::invalid_argument(std::string(field) + "[" + std::to_string(i) +
                                    "] contains a non-number");
      v[k] = row[k].get<double>();
    }
    out.push_back(std::move(v));
  }
  return out;
}

json header_json(const Dataset& ds) {
  json h;
  h["schema_version"] = kEpisodeSchemaVersion;
  h["d"] = ds.dim;
  h["T"] = ds.length;
  h["count"] = ds.episodes.size();
  if (ds.database_index) h["database_index"] = *ds.database_index;
  if (ds.strategy) h["strategy"] = *ds.strategy;
  return h;
}

json record_json(const Episode& e) {
  json r;
  r["id"] = e.id;
  r["states"] = vectors_to_json(e.states);
  r["actions"] = vectors_to_json(e.actions);
  if (e.traits)
    r["traits"] = std::vector<double>(e.traits->begin(), e.traits->end());
  else
    r["traits"] = nullptr;
  r["outcome"] = e.outcome;
  r["source"] = to_string(e.source);
  r["length"] = e.raw_length;
  return r;
}

Episode record_from_json(const json& r, std::size_t dim, std::size_t length) {
  if (!r.is_object()) throw std::invalid_argument("record is not an object");
  for (const char* key : {"id", "states", "actions", "outcome", "source"})
    if (!r.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  Episode e;
  e.id = r.at("id").get<std::string>();
  e.states = vectors_from_json(r.at("states"), dim, "states");
  e.actions = vectors_from_json(r.at("actions"), dim, "actions");
  if (e.states.size() != state_slots(length) || e.actions.size() != action_slots(length))
    throw std::invalid_argument("expected " + std::to_string(state_slots(length)) + " states and " +
                                std::to_string(action_slots(length)) + " actions for T=" +
                                std::to_string(length));
  if (r.contains("traits") && !r.at("traits").is_null()) {
    const json& t = r.at("traits");
    if (!t.is_array() || t.size() != kTraitDim)
      throw std::invalid_argument("'traits' must be null or 5 numbers");
    TraitVector tv{};
    for (std::size_t k = 0; k < kTraitDim; ++k) tv[k] = t[k].get<double>();
    e.traits = tv;
  }
  if (!r.at("outcome").is_number()) throw std::invalid_argument("'outcome' is not a number");
  e.outcome = r.at("outcome").get<double>();
  e.source = source_from_string(r.at("source").get<std::string>());
  e.raw_length = r.contains("length") ? r.at("length").get<std::size_t>() : length;
  validate_episode(e, dim);
  return e;
}

}  // namespace

void save_dataset(const Dataset& dataset, std::ostream& out) {
  out << header_json(dataset).dump() << '\n';
  for (const auto& e : dataset.episodes) {
    validate_episode(e, dataset.dim);
    if (e.utterances() != dataset.length)
      throw std::invalid_argument("episode '" + e.id + "' is not padded to T=" +
                                  std::to_string(dataset.length));
    out << record_json(e).dump() << '\n';
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_dataset(dataset, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset load_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw FormatError(1, "missing header");
  Dataset ds;
  std::optional<std::size_t> expected;
  try {
    json h = json::parse(line);
    if (!h.contains("schema_version")) throw std::invalid_argument("header lacks schema_version");
    int version = h.at("schema_version").get<int>();
    if (version != kEpisodeSchemaVersion)
      throw std::invalid_argument("schema version " + std::to_string(version) +
                                  " is not supported (expected " +
                                  std::to_string(kEpisodeSchemaVersion) + ")");
    ds.dim = h.at("d").get<std::size_t>();
    ds.length = h.at("T").get<std::size_t>();
    if (ds.dim == 0 || ds.length == 0) throw std::invalid_argument("d and T must be positive");
    if (h.contains("count")) expected = h.at("count").get<std::size_t>();
    if (h.contains("database_index")) ds.database_index = h.at("database_index").get<std::size_t>();
    if (h.contains("strategy")) ds.strategy = h.at("strategy").get<int>();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& ex) {
    throw FormatError(1, std::string("bad header: ") + ex.what());
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t record = ds.episodes.size();
    try {
      ds.episodes.push_back(record_from_json(json::parse(line), ds.dim, ds.length));
    } catch (const std::exception& ex) {
      throw FormatError(line_no, "record " + std::to_string(record) + ": " + ex.what());
    }
  }
  if (expected && *expected != ds.episodes.size())
    throw FormatError(line_no, "header declares " + std::to_string(*expected) +
                                   " records but file ends after record " +
                                   std::to_string(ds.episodes.size()));
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_dataset(in);
}

}  // namespace cfd::data
