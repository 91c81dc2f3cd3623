#include "cfd/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "cfd/nn/errors.hpp"

namespace cfd::nn {

namespace {

[[noreturn]] void shape_fail(const Tape& tape, const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(tape.label(op) + ": incompatible shapes " + a.shape_string() + " and " +
                       b.shape_string());
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractError(a.tape().label(op) + ": operands on different tapes");
  return a.tape();
}

Tensor like(const Tensor& t) { return Tensor::zeros(t.rows(), t.cols()); }

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C + i * n;
    const double* a = A + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p];
      if (av == 0.0) continue;
      const double* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a = A + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* b = B + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p] * b[p];
      C[i * n + j] += s;
    }
  }
}

// C[m x n] += A[k x m]^T * B[k x n]
void gemm_tn(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* a = A + p * m;
    const double* b = B + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i];
      if (av == 0.0) continue;
      double* c = C + i * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

template <typename F, typename D>
Var unary(Var a, F forward, D derivative) {
  Tape& tape = a.tape();
  const Tensor& x = a.value();
  Tensor y = like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  const std::size_t ia = a.id();
  return tape.record(std::move(y), {a}, [ia, derivative](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(ia);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * derivative(x[i], y[i]);
  });
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: incompatible shapes " + a.shape_string() + " and " +
                         b.shape_string());
  }
  Tensor c = Tensor::zeros(a.rows(), b.cols());
  gemm_nn(a.data().data(), b.data().data(), c.data().data(), a.rows(), a.cols(), b.cols());
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t = Tensor::zeros(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.cols() != w.rows()) shape_fail(tape, "matmul", x, w);
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  Tensor y = Tensor::zeros(m, n);
  gemm_nn(x.data().data(), w.data().data(), y.data().data(), m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(y), {a, b}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      gemm_nt(g.data().data(), t.value(ib).data().data(), t.grad(ia).data().data(), m, n, k);
    }
    if (t.needs_grad(ib)) {
      gemm_tn(t.value(ia).data().data(), g.data().data(), t.grad(ib).data().data(), k, m, n);
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias, "add_bias");
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) shape_fail(tape, "add_bias", xv, bv);
  Tensor y = xv;
  const std::size_t m = xv.rows(), n = xv.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] += bv[j];
  }
  const std::size_t ix = x.id(), ib = bias.id();
  return tape.record(std::move(y), {x, bias}, [ix, ib, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ix)) {
      Tensor& gx = t.grad(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
      }
    }
  });
}

namespace {

template <int SignB>
Var add_or_sub(Var a, Var b, const char* op) {
  Tape& tape = same_tape(a, b, op);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_fail(tape, op, x, y);
  Tensor out = like(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + SignB * y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += SignB * g[i];
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return add_or_sub<1>(a, b, "add"); }
Var sub(Var a, Var b) { return add_or_sub<-1>(a, b, "sub"); }

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "mul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_fail(tape, "mul", x, y);
  Tensor out = like(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      const Tensor& y = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      const Tensor& x = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var softplus(Var a) {
  return unary(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var log_sigmoid(Var a) {
  return unary(
      a, [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(-x); });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw ContractError(a.tape().label("log") + ": non-positive input");
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sum(Var a) {
  Tape& tape = a.tape();
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return tape.record(Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& ga = t.grad(ia);
    for (auto& v : ga.values()) v += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var row_sum(Var a) {
  Tape& tape = a.tape();
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y = Tensor::zeros(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[i] += x[i * n + j];
  }
  const std::size_t ia = a.id();
  return tape.record(std::move(y), {a}, [ia, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i];
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  Tape& tape = parts.front().tape();
  const std::size_t m = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (&p.tape() != &tape) throw ContractError(tape.label("concat_cols") + ": operands on different tapes");
    if (p.rows() != m) shape_fail(tape, "concat_cols", parts.front().value(), p.value());
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor y = Tensor::zeros(m, total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& x = parts[k].value();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(i * widths[k]), widths[k],
                  y.data().begin() + static_cast<std::ptrdiff_t>(i * total + offset));
    }
    offset += widths[k];
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return tape.record(std::move(y), parts, [ids, widths, m, total](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.needs_grad(ids[k])) {
        Tensor& gx = t.grad(ids[k]);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < widths[k]; ++j) gx[i * widths[k] + j] += g[i * total + offset + j];
        }
      }
      offset += widths[k];
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& tape = a.tape();
  const Tensor& x = a.value();
  if (count == 0 || begin + count > x.cols()) {
    throw DimensionError(tape.label("slice_cols") + ": columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + x.shape_string());
  }
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y = Tensor::zeros(m, count);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < count; ++j) y[i * count + j] = x[i * n + begin + j];
  }
  const std::size_t ia = a.id();
  return tape.record(std::move(y), {a}, [ia, m, n, begin, count](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < count; ++j) ga[i * n + begin + j] += g[i * count + j];
    }
  });
}

Var gather_rows(Var a, const std::vector<std::size_t>& rows) {
  Tape& tape = a.tape();
  const Tensor& x = a.value();
  const std::size_t n = x.cols();
  if (rows.empty()) throw DimensionError(tape.label("gather_rows") + ": empty row list");
  Tensor y = Tensor::zeros(rows.size(), n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.rows()) {
      throw DimensionError(tape.label("gather_rows") + ": row " + std::to_string(rows[r]) +
                           " out of range for " + x.shape_string());
    }
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * n), n,
                y.data().begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  const std::size_t ia = a.id();
  return tape.record(std::move(y), {a}, [ia, rows, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t j = 0; j < n; ++j) ga[rows[r] * n + j] += g[r * n + j];
    }
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& tape = a.tape();
  const Tensor& x = a.value();
  if (rows * cols != x.size()) {
    throw DimensionError(tape.label("reshape") + ": cannot view " + x.shape_string() + " as [" +
                         std::to_string(rows) + "x" + std::to_string(cols) + "]");
  }
  Tensor y = Tensor::matrix(rows, cols, x.data());
  const std::size_t ia = a.id();
  return tape.record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var softmax_rows(Var a) {
  Tape& tape = a.tape();
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y = like(x);
  for (std::size_t i = 0; i < m; ++i) {
    double hi = x[i * n];
    for (std::size_t j = 1; j < n; ++j) hi = std::max(hi, x[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[i * n + j] = std::exp(x[i * n + j] - hi);
      z += y[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= z;
  }
  const std::size_t ia = a.id();
  return tape.record(std::move(y), {a}, [ia, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Var weighted_pool(Var weights, Var values) {
  Tape& tape = same_tape(weights, values, "weighted_pool");
  const Tensor& w = weights.value();
  const Tensor& v = values.value();
  const std::size_t b = w.rows(), n = w.cols(), h = v.cols();
  if (v.rows() != b * n) shape_fail(tape, "weighted_pool", w, v);
  Tensor y = Tensor::zeros(b, h);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = w[r * n + i];
      const double* vi = v.data().data() + (r * n + i) * h;
      for (std::size_t j = 0; j < h; ++j) y[r * h + j] += wi * vi[j];
    }
  }
  const std::size_t iw = weights.id(), iv = values.id();
  return tape.record(std::move(y), {weights, values}, [iw, iv, b, n, h](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& w = t.value(iw);
    const Tensor& v = t.value(iv);
    if (t.needs_grad(iw)) {
      Tensor& gw = t.grad(iw);
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < h; ++j) dot += g[r * h + j] * v[(r * n + i) * h + j];
          gw[r * n + i] += dot;
        }
      }
    }
    if (t.needs_grad(iv)) {
      Tensor& gv = t.grad(iv);
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
          const double wi = w[r * n + i];
          for (std::size_t j = 0; j < h; ++j) gv[(r * n + i) * h + j] += wi * g[r * h + j];
        }
      }
    }
  });
}

Var mse(Var prediction, Var target) { return mean(square(sub(prediction, target))); }

}  // namespace cfd::nn
