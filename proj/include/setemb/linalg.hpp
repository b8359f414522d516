#pragma once

// Minimal dense linear algebra: row-major matrices and the handful of
// kernels the trainer and eigensolver are built on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "setemb/common.hpp"

namespace setemb {

using Vec = std::vector<double>;

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int i, int j) {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
  double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const {
    return a.data() + static_cast<std::size_t>(i) * cols;
  }
  std::size_t size() const { return a.size(); }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool operator==(const Mat& o) const {
    return rows == o.rows && cols == o.cols && a == o.a;
  }
};

inline double dot(const double* x, const double* y, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

inline void axpy(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

/// C = A * B. Blocked over the inner dimension so a slab of B stays cached
/// while every row of C consumes it. Parallelized over rows of C;
/// deterministic (each output row is produced by exactly one thread and the
/// accumulation order is fixed).
inline void matmul_nn(const Mat& A, const Mat& B, Mat& C) {
  if (A.cols != B.rows) throw ArgumentError("matmul_nn: inner dims differ");
  C = Mat(A.rows, B.cols);
  constexpr int kb = 64;
  for (int k0 = 0; k0 < A.cols; k0 += kb) {
    const int k1 = std::min(A.cols, k0 + kb);
#pragma omp parallel for schedule(static) if (A.rows > 2 && B.cols > 256)
    for (int i = 0; i < A.rows; ++i) {
      double* ci = C.row(i);
      const double* ai = A.row(i);
      for (int k = k0; k < k1; ++k) {
        const double aik = ai[k];
        if (aik == 0.0) continue;
        axpy(aik, B.row(k), ci, B.cols);
      }
    }
  }
}

/// C = A * B^T.
inline void matmul_nt(const Mat& A, const Mat& B, Mat& C) {
  if (A.cols != B.cols) throw ArgumentError("matmul_nt: inner dims differ");
  C = Mat(A.rows, B.rows);
#pragma omp parallel for schedule(static) if (A.rows > 8 && A.size() > 65536)
  for (int i = 0; i < A.rows; ++i) {
    double* ci = C.row(i);
    const double* ai = A.row(i);
    for (int j = 0; j < B.rows; ++j) ci[j] = dot(ai, B.row(j), A.cols);
  }
}

/// y = A * x.
inline void gemv(const Mat& A, const Vec& x, Vec& y) {
  if (static_cast<int>(x.size()) != A.cols)
    throw ArgumentError("gemv: dimension mismatch");
  y.assign(A.rows, 0.0);
  for (int i = 0; i < A.rows; ++i) y[i] = dot(A.row(i), x.data(), A.cols);
}

inline double max_abs_diff(const Mat& A, const Mat& B) {
  double m = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i)
    m = std::max(m, std::abs(A.a[i] - B.a[i]));
  return m;
}

inline double frobenius(const Mat& A) {
  double s = 0.0;
  for (double v : A.a) s += v * v;
  return std::sqrt(s);
}

/// Least squares min ||A x - b|| via Householder QR. Requires rows >= cols.
/// Used by the symmetric-polynomial reconstruction checks; sizes are tiny.
inline Vec solve_lstsq(Mat A, Vec b) {
  const int m = A.rows, n = A.cols;
  if (static_cast<int>(b.size()) != m)
    throw ArgumentError("solve_lstsq: rhs length mismatch");
  if (m < n) throw ArgumentError("solve_lstsq: underdetermined system");
  for (int k = 0; k < n; ++k) {
    double norm = 0.0;
    for (int i = k; i < m; ++i) norm += A(i, k) * A(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) throw NumericError("solve_lstsq: rank-deficient matrix");
    if (A(k, k) > 0.0) norm = -norm;
    // v = column with A(k,k) shifted; normalized so v[k] = 1
    const double akk = A(k, k) - norm;
    for (int i = k + 1; i < m; ++i) A(i, k) /= akk;
    const double beta = -akk / norm;  // 2 / (v^T v) scaled form
    A(k, k) = norm;
    for (int j = k + 1; j < n; ++j) {
      double s = A(k, j);
      for (int i = k + 1; i < m; ++i) s += A(i, k) * A(i, j);
      s *= beta;
      A(k, j) -= s;
      for (int i = k + 1; i < m; ++i) A(i, j) -= s * A(i, k);
    }
    double s = b[k];
    for (int i = k + 1; i < m; ++i) s += A(i, k) * b[i];
    s *= beta;
    b[k] -= s;
    for (int i = k + 1; i < m; ++i) b[i] -= s * A(i, k);
  }
  Vec x(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
    x[i] = s / A(i, i);
  }
  return x;
}

}  // namespace setemb
