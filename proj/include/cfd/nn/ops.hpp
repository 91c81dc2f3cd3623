#pragma once

#include <cstddef>
#include <vector>

#include "cfd/nn/tape.hpp"

// Differentiable operations on 2-D values. Shapes are checked eagerly; a
// mismatch throws DimensionError labelled with the tape scope and op name.
// The only broadcast is add_bias (a 1 x n row added to every row).
namespace cfd::nn {

Var matmul(Var a, Var b);
Var add_bias(Var x, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var softplus(Var a);
/// log(sigmoid(a)), computed without overflow.
Var log_sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);

Var sum(Var a);
Var mean(Var a);
/// [m x n] -> [m x 1]
Var row_sum(Var a);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var gather_rows(Var a, const std::vector<std::size_t>& rows);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var softmax_rows(Var a);
/// weights [B x n], values [(B*n) x h] -> [B x h]; row b is sum_i w[b,i] * values[b*n+i].
Var weighted_pool(Var weights, Var values);

/// Mean of squared differences over all elements.
Var mse(Var prediction, Var target);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

// Plain (non-recorded) helpers shared with the tape ops.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
double stable_sigmoid(double x);

}  // namespace cfd::nn
