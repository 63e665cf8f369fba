#pragma once

// Dense row-major matrices and the handful of kernels the models need.
// Every kernel uses a fixed summation order so results are reproducible
// bit-for-bit for a given build.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tgmc/errors.hpp"

namespace tgmc {

template <typename T>
class Tensor2 {
 public:
  using value_type = T;

  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::initializer_list<std::initializer_list<T>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw ShapeError("ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Tensor2 column(std::span<const T> values) {
    Tensor2 out(values.size(), 1);
    std::copy(values.begin(), values.end(), out.data_.begin());
    return out;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void set_zero() { fill(T(0)); }

  bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  Tensor2& operator+=(const Tensor2& o) {
    require_same(o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Tensor2& operator-=(const Tensor2& o) {
    require_same(o, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Tensor2& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  template <typename U>
  Tensor2<U> cast() const {
    Tensor2<U> out(rows_, cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) out.flat()[k] = static_cast<U>(data_[k]);
    return out;
  }

  friend bool operator==(const Tensor2& a, const Tensor2& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  void require_same(const Tensor2& o, const char* op) const {
    if (!same_shape(o))
      throw ShapeError(std::string(op) + ": " + shape_string() + " vs " + o.shape_string());
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = Tensor2<float>;
using MatrixD = Tensor2<double>;

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}
}  // namespace detail

/// C = A * B
template <typename T>
Tensor2<T> matmul(const Tensor2<T>& a, const Tensor2<T>& b) {
  detail::require(a.cols() == b.rows(),
                  "matmul: " + a.shape_string() + " * " + b.shape_string());
  Tensor2<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* crow = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      if (aik == T(0)) continue;
      const T* brow = b.row(k).data();
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

/// C = A * B^T
template <typename T>
Tensor2<T> matmul_nt(const Tensor2<T>& a, const Tensor2<T>& b) {
  detail::require(a.cols() == b.cols(),
                  "matmul_nt: " + a.shape_string() + " * T(" + b.shape_string() + ")");
  Tensor2<T> c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const T* arow = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const T* brow = b.row(j).data();
      T acc = T(0);
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      c(i, j) = acc;
    }
  }
  return c;
}

/// C = A^T * B
template <typename T>
Tensor2<T> matmul_tn(const Tensor2<T>& a, const Tensor2<T>& b) {
  detail::require(a.rows() == b.rows(),
                  "matmul_tn: T(" + a.shape_string() + ") * " + b.shape_string());
  Tensor2<T> c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const T* arow = a.row(k).data();
    const T* brow = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T aki = arow[i];
      if (aki == T(0)) continue;
      T* crow = c.row(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

template <typename T>
Tensor2<T> add(const Tensor2<T>& a, const Tensor2<T>& b) {
  Tensor2<T> c = a;
  c += b;
  return c;
}

template <typename T>
Tensor2<T> hadamard(const Tensor2<T>& a, const Tensor2<T>& b) {
  detail::require(a.same_shape(b), "hadamard: " + a.shape_string() + " vs " + b.shape_string());
  Tensor2<T> c(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) c.flat()[k] = a.flat()[k] * b.flat()[k];
  return c;
}

template <typename T>
Tensor2<T> transpose(const Tensor2<T>& a) {
  Tensor2<T> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// Adds `bias` (length = cols) to every row.
template <typename T>
void add_row_bias(Tensor2<T>& a, std::span<const T> bias) {
  detail::require(bias.size() == a.cols(), "add_row_bias: width mismatch");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

/// Column sums, accumulated into `out` (length = cols).
template <typename T>
void accumulate_column_sums(const Tensor2<T>& a, std::span<T> out) {
  detail::require(out.size() == a.cols(), "accumulate_column_sums: width mismatch");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  }
}

// Activations.

template <typename T>
inline T relu(T x) {
  return x > T(0) ? x : T(0);
}
template <typename T>
inline T relu_grad(T x) {
  return x > T(0) ? T(1) : T(0);
}
template <typename T>
inline T tanh_act(T x) {
  return std::tanh(x);
}
template <typename T>
inline T tanh_grad(T x) {
  const T y = std::tanh(x);
  return T(1) - y * y;
}
template <typename T>
inline T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}
template <typename T>
inline T sigmoid_grad(T x) {
  const T s = sigmoid(x);
  return s * (T(1) - s);
}

template <typename T, typename F>
Tensor2<T> map(const Tensor2<T>& a, F f) {
  Tensor2<T> out(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) out.flat()[k] = f(a.flat()[k]);
  return out;
}

template <typename T>
Tensor2<T> relu(const Tensor2<T>& a) {
  return map(a, [](T x) { return relu(x); });
}

/// Numerically stable softmax over a span, written into `out`.
template <typename T>
void softmax(std::span<const T> logits, std::span<T> out) {
  detail::require(logits.size() == out.size() && !logits.empty(), "softmax: bad sizes");
  const T mx = *std::max_element(logits.begin(), logits.end());
  T total = T(0);
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - mx);
    total += out[k];
  }
  for (auto& v : out) v /= total;
}

/// log(sum(exp(x))) with max subtraction.
template <typename T>
T log_sum_exp(std::span<const T> logits) {
  const T mx = *std::max_element(logits.begin(), logits.end());
  T total = T(0);
  for (T v : logits) total += std::exp(v - mx);
  return mx + std::log(total);
}

template <typename T>
Tensor2<T> softmax_rowwise(const Tensor2<T>& logits) {
  Tensor2<T> out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) softmax<T>(logits.row(i), out.row(i));
  return out;
}

template <typename T>
T frobenius_sq(const Tensor2<T>& a) {
  T acc = T(0);
  for (T v : a.flat()) acc += v * v;
  return acc;
}

template <typename T>
T max_abs_diff(const Tensor2<T>& a, const Tensor2<T>& b) {
  detail::require(a.same_shape(b), "max_abs_diff: shape mismatch");
  T m = T(0);
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.flat()[k] - b.flat()[k]));
  return m;
}

}  // namespace tgmc
