#include "cfd/dppr/regression_metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace cfd::dppr {

RegressionMetrics regression_metrics(const std::vector<data::Vector>& predictions,
                                     const std::vector<data::Vector>& targets) {
  if (predictions.size() != targets.size())
    throw std::invalid_argument("predictions and targets differ in length");
  if (targets.size() < 2) throw std::invalid_argument("regression metrics need at least two samples");
  const std::size_t dim = targets.front().size();
  std::vector<double> means(dim, 0.0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].size() != dim || predictions[i].size() != dim)
      throw std::invalid_argument("sample " + std::to_string(i) + " has the wrong dimension");
    for (std::size_t k = 0; k < dim; ++k) means[k] += targets[i][k];
  }
  for (auto& m : means) m /= double(targets.size());

  double sq = 0.0, ab = 0.0, pct = 0.0, tot = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double y = targets[i][k];
      const double e = predictions[i][k] - y;
      if (y == 0.0)
        throw std::invalid_argument("MAPE is undefined for zero target at sample " +
                                    std::to_string(i) + "; exclude or offset zero targets");
      sq += e * e;
      ab += std::abs(e);
      pct += std::abs(e) / std::abs(y);
      tot += (y - means[k]) * (y - means[k]);
    }
  }
  if (tot == 0.0) throw std::invalid_argument("R2 is undefined for constant targets");
  const double n = double(targets.size() * dim);
  RegressionMetrics m;
  m.mse = sq / n;
  m.rmse = std::sqrt(m.mse);
  m.mae = ab / n;
  m.mape = pct / n;
  m.r2 = 1.0 - sq / tot;
  return m;
}

RegressionMetrics regression_metrics(const std::vector<data::TraitVector>& predictions,
                                     const std::vector<data::TraitVector>& targets) {
  auto flat = [](const std::vector<data::TraitVector>& xs) {
    std::vector<data::Vector> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.emplace_back(x.begin(), x.end());
    return out;
  };
  return regression_metrics(flat(predictions), flat(targets));
}

std::string window_label(std::size_t turns) {
  return std::to_string(turns) + (turns == 1 ? " turn" : " turns");
}

void write_regression_table(std::ostream& out,
                            const std::vector<std::pair<std::size_t, RegressionMetrics>>& rows,
                            int precision) {
  out << "Win size\tMSE\tRMSE\tMAPE\tR2\tMAE\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return std::string(buf);
  };
  for (const auto& [w, m] : rows)
    out << window_label(w) << '\t' << fmt(m.mse) << '\t' << fmt(m.rmse) << '\t' << fmt(m.mape)
        << '\t' << fmt(m.r2) << '\t' << fmt(m.mae) << '\n';
}

}  // namespace cfd::dppr
