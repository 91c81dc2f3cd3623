#include "cfd/common/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "cfd/nn/ops.hpp"

namespace cfd::la {

namespace {

Eigen::MatrixXd to_eigen(const Tensor& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
  return m;
}

}  // namespace

SymmetricEigen symmetric_eigen(const Tensor& input) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw std::invalid_argument("symmetric_eigen: matrix must be square");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(input));
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric_eigen: no convergence");
  // Eigen sorts ascending.
  SymmetricEigen out{Vector(n), Tensor::zeros(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const auto src = Eigen::Index(n - 1 - k);
    out.values[k] = solver.eigenvalues()(src);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = solver.eigenvectors()(Eigen::Index(r), src);
  }
  return out;
}

double spectral_norm(const Tensor& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(to_eigen(a)).singularValues()(0);
}

Vector matvec(const Tensor& a, const Vector& x) {
  if (a.cols() != x.size()) throw std::invalid_argument("matvec: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

Vector column_means(const Tensor& x) {
  Vector mu(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) mu[j] += x(i, j);
  }
  for (auto& m : mu) m /= static_cast<double>(x.rows());
  return mu;
}

Tensor center_columns(const Tensor& x) {
  const Vector mu = column_means(x);
  Tensor c = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) c(i, j) -= mu[j];
  }
  return c;
}

Tensor outer_covariance(const Tensor& x, const Tensor& y) {
  if (x.rows() != y.rows() || x.rows() < 2) {
    throw std::invalid_argument("outer_covariance: need matching row counts >= 2");
  }
  Tensor cov = nn::matmul(nn::transpose(center_columns(x)), center_columns(y));
  for (auto& v : cov.values()) v /= static_cast<double>(x.rows() - 1);
  return cov;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("l2_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

}  // namespace cfd::la
