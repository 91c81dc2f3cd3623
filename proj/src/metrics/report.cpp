#include "cfd/metrics/report.hpp"

#include <fstream>
#include <optional>

#include "cfd/common/checksum.hpp"
#include "json.hpp"

namespace cfd::metrics {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<ReportSection> default_report_sections() {
  return {
      {"regression", "dppr/regression.tsv"},
      {"alignment", "counterfactual/alignment.tsv"},
      {"cumulative", "evaluation/cumulative.tsv"},
      {"q_stats", "evaluation/q_stats.tsv"},
      {"cca", "evaluation/cca.tsv"},
  };
}

std::vector<std::string> default_stage_dirs() {
  return {"world", "dppr", "bicogan", "reward", "counterfactual", "policy", "evaluation"};
}

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ReportError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ReportError(path.string() + ": " + e.what());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReportError("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

ReportSummary assemble_report(const fs::path& run_dir, const fs::path& out,
                              const std::vector<ReportSection>& sections,
                              const std::vector<std::string>& stage_dirs) {
  json stages = json::object();
  std::optional<std::string> config_checksum;
  std::string config_owner;
  json config;
  for (const auto& dir : stage_dirs) {
    const fs::path manifest_path = run_dir / dir / "manifest.json";
    if (!fs::exists(manifest_path)) continue;
    const json m = read_json(manifest_path);
    if (!m.contains("config_checksum") || !m.contains("outputs"))
      throw ReportError(manifest_path.string() + ": not a stage manifest");
    const std::string cs = m.at("config_checksum").get<std::string>();
    if (!config_checksum) {
      config_checksum = cs;
      config_owner = dir;
      if (m.contains("config")) config = m.at("config");
    } else if (cs != *config_checksum) {
      throw ReportError("stage '" + dir + "' was produced with config " + cs + " but stage '" +
                        config_owner + "' with " + *config_checksum + "; refusing to mix runs");
    }
    for (const auto& [file, recorded] : m.at("outputs").items()) {
      const fs::path p = run_dir / dir / file;
      if (!fs::exists(p)) throw ReportError(dir + "/" + file + " is listed in its manifest but missing");
      if (file_checksum(p) != recorded.get<std::string>())
        throw ReportError(dir + "/" + file + " no longer matches its manifest checksum");
    }
    stages[dir] = {{"config_checksum", cs}, {"outputs", m.at("outputs")}};
    if (m.contains("seed")) stages[dir]["seed"] = m.at("seed");
  }

  fs::create_directories(out);
  ReportSummary summary;
  json section_info = json::object();
  for (const auto& s : sections) {
    const fs::path src = run_dir / s.source;
    if (!fs::exists(src)) {
      summary.absent.push_back(s.name);
      section_info[s.name] = {{"present", false}, {"source", s.source.generic_string()}};
      continue;
    }
    const std::string body = read_file(src);
    const fs::path dst = out / (s.name + ".tsv");
    std::ofstream o(dst, std::ios::binary);
    o << body;
    if (!o) throw ReportError("cannot write " + dst.string());
    o.close();
    summary.present.push_back(s.name);
    section_info[s.name] = {{"present", true},
                            {"source", s.source.generic_string()},
                            {"checksum", file_checksum(dst)}};
  }

  json manifest = {{"sections", section_info}, {"stages", stages},
                   {"present", summary.present}, {"absent", summary.absent}};
  if (config_checksum) {
    manifest["config_checksum"] = *config_checksum;
    manifest["config"] = config;
  }
  std::ofstream m(out / "manifest.json", std::ios::binary);
  m << manifest.dump(2) << "\n";
  if (!m) throw ReportError("cannot write " + (out / "manifest.json").string());
  return summary;
}

}  // namespace cfd::metrics
