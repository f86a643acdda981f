#pragma once

#include <cassert>
#include <cstring>
#include <vector>

namespace epibench {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Just enough linear algebra for a
// two-hidden-layer MLP; no views, no expression templates.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  void set_zero() { std::memset(data.data(), 0, data.size() * sizeof(double)); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// C = A * B            (m x k) * (k x n)
inline void matmul_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.rows);
  c = Matrix(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k);
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

// C = A * B^T          (m x k) * (n x k)^T
inline void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.cols);
  c = Matrix(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
}

// C = A^T * B          (k x m)^T * (k x n)
inline void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.rows == b.rows);
  c = Matrix(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (int i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      double* crow = c.row(i);
      for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
}

}  // namespace epibench
