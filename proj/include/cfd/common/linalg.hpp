#pragma once

#include <vector>

#include "cfd/nn/tensor.hpp"

namespace cfd::la {

using nn::Tensor;
using Vector = std::vector<double>;

struct SymmetricEigen {
  Vector values;   // descending
  Tensor vectors;  // column k is the unit eigenvector for values[k]
};

SymmetricEigen symmetric_eigen(const Tensor& a);

/// Largest singular value.
double spectral_norm(const Tensor& a);

Vector matvec(const Tensor& a, const Vector& x);
Tensor outer_covariance(const Tensor& x, const Tensor& y);  // (x^T y) / (n - 1), columns centred
Vector column_means(const Tensor& x);
Tensor center_columns(const Tensor& x);

double dot(const Vector& a, const Vector& b);
double l2_distance(const Vector& a, const Vector& b);
double norm(const Vector& a);

}  // namespace cfd::la
