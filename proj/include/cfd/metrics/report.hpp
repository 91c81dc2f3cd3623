#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfd::metrics {

/// Input artifacts are unreadable or come from different runs.
class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReportSection {
  std::string name;                    // file name inside the bundle, without extension
  std::filesystem::path source;        // relative to the run directory
};

/// regression, alignment, cumulative, q_stats, cca.
std::vector<ReportSection> default_report_sections();

/// Stage directories whose manifests are checked and summarised.
std::vector<std::string> default_stage_dirs();

struct ReportSummary {
  std::vector<std::string> present;
  std::vector<std::string> absent;
};

/// Copies every available section into `out` as <name>.tsv and writes
/// out/manifest.json listing present and absent sections plus the provenance of
/// each stage manifest (config checksum, seed, output checksums). Throws
/// ReportError when stage manifests disagree on the config or a recorded output
/// no longer matches its checksum.
ReportSummary assemble_report(const std::filesystem::path& run_dir, const std::filesystem::path& out,
                              const std::vector<ReportSection>& sections = default_report_sections(),
                              const std::vector<std::string>& stage_dirs = default_stage_dirs());

}  // namespace cfd::metrics
