#include "cfd/metrics/cca.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cfd/common/linalg.hpp"
#include "cfd/nn/ops.hpp"

namespace cfd::metrics {

namespace {

struct Whitening {
  Tensor inv_sqrt;  // C^{-1/2}
};

Whitening whiten(Tensor cov, double relative_ridge, const char* which) {
  const std::size_t p = cov.rows();
  double trace = 0.0;
  for (std::size_t i = 0; i < p; ++i) trace += cov(i, i);
  if (!(trace > 0.0) || !std::isfinite(trace))
    throw std::invalid_argument(std::string("CCA: ") + which + " has no variance");
  const double ridge = relative_ridge * trace / double(p);
  for (std::size_t i = 0; i < p; ++i) cov(i, i) += ridge;
  const auto eig = la::symmetric_eigen(cov);
  const double top = eig.values.front();
  if (!(eig.values.back() > 1e-12 * top))
    throw std::invalid_argument(std::string("CCA: ") + which + " covariance is rank deficient");
  Whitening w{Tensor::zeros(p, p)};
  for (std::size_t k = 0; k < p; ++k) {
    const double f = 1.0 / std::sqrt(eig.values[k]);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j)
        w.inv_sqrt(i, j) += f * eig.vectors(i, k) * eig.vectors(j, k);
  }
  return w;
}

}  // namespace

CcaResult cca_top_components(const Tensor& x, const Tensor& y, std::size_t k,
                             const CcaOptions& options) {
  const std::size_t n = x.rows(), p = x.cols(), q = y.cols();
  if (y.rows() != n) throw std::invalid_argument("CCA: X and Y have different row counts");
  if (p == 0 || q == 0) throw std::invalid_argument("CCA: empty column set");
  if (n <= std::max(p, q) + 1)
    throw std::invalid_argument("CCA: need more than " + std::to_string(std::max(p, q) + 1) +
                                " samples, got " + std::to_string(n));
  const std::size_t kmax = std::min(p, q);
  if (k == 0) k = kmax;
  if (k > kmax) throw std::invalid_argument("CCA: k exceeds min(p, q) = " + std::to_string(kmax));

  const Whitening wx = whiten(la::outer_covariance(x, x), options.relative_ridge, "X");
  const Whitening wy = whiten(la::outer_covariance(y, y), options.relative_ridge, "Y");
  const Tensor m = nn::matmul(nn::matmul(wx.inv_sqrt, la::outer_covariance(x, y)), wy.inv_sqrt);

  // Right singular vectors from the eigenvectors of M^T M.
  const auto eig = la::symmetric_eigen(nn::matmul(nn::transpose(m), m));
  CcaResult out;
  out.x_weights = Tensor::zeros(p, k);
  out.y_weights = Tensor::zeros(q, k);
  for (std::size_t c = 0; c < k; ++c) {
    const double s = std::sqrt(std::max(0.0, eig.values[c]));
    out.correlations.push_back(std::clamp(s, 0.0, 1.0));
    std::vector<double> v(q);
    for (std::size_t i = 0; i < q; ++i) v[i] = eig.vectors(i, c);
    std::vector<double> u = la::matvec(m, v);
    if (s > 0.0)
      for (auto& e : u) e /= s;
    const auto a = la::matvec(wx.inv_sqrt, u);
    const auto b = la::matvec(wy.inv_sqrt, v);
    for (std::size_t i = 0; i < p; ++i) out.x_weights(i, c) = a[i];
    for (std::size_t i = 0; i < q; ++i) out.y_weights(i, c) = b[i];
  }
  return out;
}

Tensor rows_to_matrix(const std::vector<data::Vector>& rows) {
  if (rows.empty()) return Tensor::zeros(0, 0);
  Tensor t = Tensor::zeros(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != t.cols()) throw std::invalid_argument("ragged rows at " + std::to_string(r));
    std::copy(rows[r].begin(), rows[r].end(), &t(r, 0));
  }
  return t;
}

Tensor project(const Tensor& x, const Tensor& weights) {
  return nn::matmul(la::center_columns(x), weights);
}

}  // namespace cfd::metrics
