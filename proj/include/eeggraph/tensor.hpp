#pragma once

#include <cstddef>
#include <vector>

#include "eeggraph/common.hpp"

namespace eeggraph {

// Dense row-major matrix. float in training, double wherever gradients are
// checked against finite differences.
template <typename T>
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T(0))
      : rows(r), cols(c), data(r * c, fill) {}

  T& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  T at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::size_t size() const { return data.size(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

// out = a * b
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols != b.rows) throw ShapeMismatch("matmul: inner dimensions differ");
  Matrix<T> out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* arow = &a.data[i * a.cols];
    T* orow = &out.data[i * b.cols];
    for (std::size_t k = 0; k < a.cols; ++k) {
      const T aik = arow[k];
      if (aik == T(0)) continue;
      const T* brow = &b.data[k * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

// out += a^T * b  (a: n x r, b: n x c, out: r x c)
template <typename T>
void add_at_b(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out) {
  if (a.rows != b.rows || out.rows != a.cols || out.cols != b.cols)
    throw ShapeMismatch("add_at_b: shape mismatch");
  for (std::size_t n = 0; n < a.rows; ++n) {
    const T* arow = &a.data[n * a.cols];
    const T* brow = &b.data[n * b.cols];
    for (std::size_t i = 0; i < a.cols; ++i) {
      const T v = arow[i];
      if (v == T(0)) continue;
      T* orow = &out.data[i * out.cols];
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += v * brow[j];
    }
  }
}

// out = a * b^T  (a: n x c, b: r x c, out: n x r)
template <typename T>
Matrix<T> matmul_bt(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols != b.cols) throw ShapeMismatch("matmul_bt: shape mismatch");
  Matrix<T> out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* arow = &a.data[i * a.cols];
    for (std::size_t j = 0; j < b.rows; ++j) {
      const T* brow = &b.data[j * b.cols];
      T acc = T(0);
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      out.at(i, j) = acc;
    }
  }
  return out;
}

}  // namespace eeggraph
