#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cfd/common/checksum.hpp"
#include "cfd/common/rng.hpp"
#include "cfd/metrics/cca.hpp"
#include "cfd/metrics/report.hpp"
#include "cfd/nn/ops.hpp"
#include "json.hpp"
#include "support/oracles.hpp"

using namespace cfd;
using namespace cfd::metrics;
namespace fs = std::filesystem;

namespace {

Tensor gaussian(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor t = Tensor::zeros(n, p);
  for (auto& v : t.values()) v = g(rng);
  return t;
}

double pearson(const Tensor& a, std::size_t ca, const Tensor& b, std::size_t cb) {
  const std::size_t n = a.rows();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a(i, ca);
    mb += b(i, cb);
  }
  ma /= double(n);
  mb /= double(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a(i, ca) - ma) * (b(i, cb) - mb);
    saa += (a(i, ca) - ma) * (a(i, ca) - ma);
    sbb += (b(i, cb) - mb) * (b(i, cb) - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

Tensor affine(const Tensor& x, std::uint64_t seed) {
  const std::size_t p = x.cols();
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor a = Tensor::zeros(p, p);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < p; ++c) a(r, c) = (r == c ? 3.0 : 0.0) + u(rng);
  Tensor out = nn::matmul(x, a);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t c = 0; c < p; ++c) out(i, c) += 10.0 * double(c + 1);
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write(const fs::path& p, const std::string& body) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << body;
}

void fake_stage(const fs::path& run, const std::string& dir, const std::string& config_checksum,
                const std::string& file, const std::string& body) {
  write(run / dir / file, body);
  nlohmann::json m = {{"stage", dir},
                      {"seed", 0},
                      {"config", {{"seed", 0}}},
                      {"config_checksum", config_checksum},
                      {"outputs", {{file, file_checksum(run / dir / file)}}}};
  write(run / dir / "manifest.json", m.dump(2));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST(Cca, RecoversPlantedCorrelations) {
  const auto d = check::planted_cca(2000, {0.9, 0.5}, 4, 3, 7);
  const auto r = cca_top_components(d.x, d.y);
  ASSERT_EQ(r.correlations.size(), 3u);
  EXPECT_NEAR(r.correlations[0], 0.9, 0.05);
  EXPECT_NEAR(r.correlations[1], 0.5, 0.05);
  EXPECT_LT(r.correlations[2], 0.1);
  EXPECT_EQ(cca_top_components(d.x, d.y, 2).correlations.size(), 2u);
}

TEST(Cca, CopyGivesUnitCorrelations) {
  const auto x = gaussian(500, 4, 1);
  for (double c : cca_top_components(x, x).correlations) EXPECT_NEAR(c, 1.0, 1e-6);
  const auto x2 = affine(x, 2);
  for (double c : cca_top_components(x, x2).correlations) EXPECT_NEAR(c, 1.0, 1e-6);
}

TEST(Cca, AffineInvariance) {
  const auto d = check::planted_cca(1000, {0.8, 0.3}, 3, 3, 11);
  const auto base = cca_top_components(d.x, d.y);
  const auto moved = cca_top_components(affine(d.x, 12), affine(d.y, 13));
  ASSERT_EQ(base.correlations.size(), moved.correlations.size());
  for (std::size_t k = 0; k < base.correlations.size(); ++k)
    EXPECT_NEAR(moved.correlations[k], base.correlations[k], 1e-6);
}

TEST(Cca, IndependentDataIsWeak) {
  const auto r = cca_top_components(gaussian(2000, 3, 21), gaussian(2000, 3, 22));
  for (double c : r.correlations) EXPECT_LT(c, 0.2);
}

TEST(Cca, ProjectionsMatchReportedCorrelations) {
  const auto d = check::planted_cca(800, {0.85, 0.4}, 3, 2, 31);
  const auto r = cca_top_components(d.x, d.y);
  const auto u = project(d.x, r.x_weights), v = project(d.y, r.y_weights);
  ASSERT_EQ(u.cols(), 2u);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(std::abs(pearson(u, k, v, k)), r.correlations[k], 1e-6);
  EXPECT_NEAR(pearson(u, 0, u, 1), 0.0, 1e-6);
  EXPECT_GE(r.correlations[0], r.correlations[1]);
}

TEST(Cca, Errors) {
  EXPECT_THROW(cca_top_components(gaussian(4, 3, 1), gaussian(4, 2, 2)), std::invalid_argument);
  EXPECT_THROW(cca_top_components(gaussian(50, 3, 1), gaussian(50, 2, 2), 3), std::invalid_argument);
  EXPECT_THROW(cca_top_components(gaussian(50, 3, 1), gaussian(40, 2, 2)), std::invalid_argument);
  EXPECT_THROW(cca_top_components(Tensor::zeros(50, 2), gaussian(50, 2, 2)), std::invalid_argument);
}

TEST(Cca, RowsToMatrix) {
  const auto m = rows_to_matrix({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 2u);
  EXPECT_EQ(m(2, 1), 6.0);
  EXPECT_THROW(rows_to_matrix({{1.0}, {1.0, 2.0}}), std::invalid_argument);
}

TEST(Report, EmptyRunListsEverySectionAbsent) {
  TempDir run("cfd_report_empty");
  const auto s = assemble_report(run.path(), run.path() / "report");
  EXPECT_TRUE(s.present.empty());
  EXPECT_EQ(s.absent.size(), default_report_sections().size());
  const auto m = nlohmann::json::parse(slurp(run.path() / "report" / "manifest.json"));
  EXPECT_FALSE(m.at("sections").at("cca").at("present").get<bool>());
}

TEST(Report, CopiesPresentSections) {
  TempDir run("cfd_report_partial");
  fake_stage(run.path(), "dppr", "abc", "regression.tsv", "Win size\tMSE\n1 turn\t0.1\n");
  fake_stage(run.path(), "evaluation", "abc", "cca.tsv", "component\tcorrelation\n0\t0.5\n");
  const auto s = assemble_report(run.path(), run.path() / "report");
  EXPECT_EQ(s.present, (std::vector<std::string>{"regression", "cca"}));
  EXPECT_EQ(slurp(run.path() / "report" / "regression.tsv"), "Win size\tMSE\n1 turn\t0.1\n");
  const auto m = nlohmann::json::parse(slurp(run.path() / "report" / "manifest.json"));
  EXPECT_EQ(m.at("config_checksum"), "abc");
  EXPECT_TRUE(m.at("stages").contains("dppr"));
  const std::string first = slurp(run.path() / "report" / "manifest.json");
  assemble_report(run.path(), run.path() / "report");
  EXPECT_EQ(slurp(run.path() / "report" / "manifest.json"), first);
}

TEST(Report, RefusesMixedRuns) {
  TempDir run("cfd_report_mixed");
  fake_stage(run.path(), "dppr", "abc", "regression.tsv", "x\n");
  fake_stage(run.path(), "evaluation", "xyz", "cca.tsv", "y\n");
  try {
    assemble_report(run.path(), run.path() / "report");
    FAIL() << "mixed runs accepted";
  } catch (const ReportError& e) {
    EXPECT_NE(std::string(e.what()).find("refusing to mix runs"), std::string::npos);
  }
}

TEST(Report, DetectsModifiedOutputs) {
  TempDir run("cfd_report_modified");
  fake_stage(run.path(), "dppr", "abc", "regression.tsv", "x\n");
  write(run.path() / "dppr" / "regression.tsv", "edited\n");
  EXPECT_THROW(assemble_report(run.path(), run.path() / "report"), ReportError);
}
