// Dense row-major matrix type and the handful of BLAS-ish kernels the
// engine needs. Everything is double precision; see docs/formats.md for
// the storage-precision story around checkpoints.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hiker {

struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries

  Tensor2() = default;
  Tensor2(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Tensor2: negative shape");
  }

  static Tensor2 row(const std::vector<double>& v) {
    Tensor2 t(1, static_cast<int>(v.size()));
    t.data = v;
    return t;
  }

  static Tensor2 from_rows(const std::vector<std::vector<double>>& rs) {
    if (rs.empty()) return Tensor2(0, 0);
    Tensor2 t(static_cast<int>(rs.size()), static_cast<int>(rs[0].size()));
    for (size_t i = 0; i < rs.size(); ++i) {
      if (rs[i].size() != rs[0].size())
        throw std::invalid_argument("Tensor2::from_rows: ragged rows");
      for (size_t j = 0; j < rs[i].size(); ++j) t.data[i * rs[0].size() + j] = rs[i][j];
    }
    return t;
  }

  static Tensor2 identity(int n) {
    Tensor2 t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

inline void check_same_shape(const Tensor2& a, const Tensor2& b, const char* who) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(who) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
}

// c = a(m,k) * b(k,n)
inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: inner dims " + a.shape_str() + " vs " + b.shape_str());
  Tensor2 c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
    double* crow = &c.data[static_cast<size_t>(i) * c.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// c = a(m,k) * b(n,k)^T
inline Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.cols)
    throw std::invalid_argument("matmul_nt: inner dims " + a.shape_str() + " vs " + b.shape_str());
  Tensor2 c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.rows; ++j) {
      double s = 0.0;
      const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
      const double* brow = &b.data[static_cast<size_t>(j) * b.cols];
      for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      c.at(i, j) = s;
    }
  return c;
}

// c = a(k,m)^T * b(k,n)
inline Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows != b.rows)
    throw std::invalid_argument("matmul_tn: inner dims " + a.shape_str() + " vs " + b.shape_str());
  Tensor2 c(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = &a.data[static_cast<size_t>(k) * a.cols];
    const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
    for (int i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = &c.data[static_cast<size_t>(i) * c.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

inline Tensor2 transpose(const Tensor2& a) {
  Tensor2 t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

inline Tensor2 add(const Tensor2& a, const Tensor2& b) {
  check_same_shape(a, b, "add");
  Tensor2 c = a;
  for (size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
  return c;
}

inline Tensor2 sub(const Tensor2& a, const Tensor2& b) {
  check_same_shape(a, b, "sub");
  Tensor2 c = a;
  for (size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

inline Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  check_same_shape(a, b, "hadamard");
  Tensor2 c = a;
  for (size_t i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

inline Tensor2 scale(const Tensor2& a, double s) {
  Tensor2 c = a;
  for (double& v : c.data) v *= s;
  return c;
}

inline void axpy(Tensor2& y, double a, const Tensor2& x) {
  check_same_shape(y, x, "axpy");
  for (size_t i = 0; i < y.size(); ++i) y.data[i] += a * x.data[i];
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace hiker
