#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cfd/data/episode.hpp"

namespace cfd::dppr {

struct RegressionMetrics {
  double mse = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
  double r2 = 0.0;
  double mae = 0.0;
};

/// Errors are pooled over every sample and every output dimension. R2 uses the
/// total sum of squares about each dimension's mean. Throws std::invalid_argument
/// for fewer than two samples, ragged input, constant targets, or a zero target
/// (MAPE is undefined there; exclude or offset such targets first).
RegressionMetrics regression_metrics(const std::vector<data::Vector>& predictions,
                                     const std::vector<data::Vector>& targets);
RegressionMetrics regression_metrics(const std::vector<data::TraitVector>& predictions,
                                     const std::vector<data::TraitVector>& targets);

/// "1 turn", "2 turns", ...
std::string window_label(std::size_t turns);

/// Tab-separated table with header "Win size MSE RMSE MAPE R2 MAE".
void write_regression_table(std::ostream& out,
                            const std::vector<std::pair<std::size_t, RegressionMetrics>>& rows,
                            int precision = 6);

}  // namespace cfd::dppr
