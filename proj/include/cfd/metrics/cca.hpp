#pragma once

#include <cstddef>
#include <vector>

#include "cfd/data/episode.hpp"
#include "cfd/nn/tensor.hpp"

namespace cfd::metrics {

using nn::Tensor;

struct CcaResult {
  std::vector<double> correlations;  // non-increasing, in [0, 1]
  Tensor x_weights;                  // [p x k], column j projects X onto component j
  Tensor y_weights;                  // [q x k]
};

struct CcaOptions {
  // Ridge added to each covariance block, relative to trace / dim.
  double relative_ridge = 1e-9;
};

/// Top-k canonical correlations between the columns of x [n x p] and y [n x q].
/// k = 0 returns min(p, q) components. Columns are centred internally.
/// Throws std::invalid_argument when n <= max(p, q) + 1, k > min(p, q) or a
/// covariance block is singular after the ridge.
CcaResult cca_top_components(const Tensor& x, const Tensor& y, std::size_t k = 0,
                             const CcaOptions& options = {});

Tensor rows_to_matrix(const std::vector<data::Vector>& rows);

/// Sample projections x_c * weights (centred columns).
Tensor project(const Tensor& x, const Tensor& weights);

}  // namespace cfd::metrics
