#pragma once
// Dense row-major double matrix and the handful of kernels the rest of the
// library is built on. All reductions are sequential loops, so results are
// identical run to run regardless of thread count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include "magtkd/errors.hpp"
#include "magtkd/rng.hpp"

namespace magtkd {

class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(check_size(rows, cols), 0.0) {}
  Matrix(int rows, int cols, double fill)
      : rows_(rows), cols_(cols), data_(check_size(rows, cols), fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
    Matrix m(r, c);
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c)
        throw InputError("from_rows: ragged initializer");
      int j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  static Matrix row_vector(std::initializer_list<double> vals) {
    Matrix m(1, static_cast<int>(vals.size()));
    int j = 0;
    for (double v : vals) m(0, j++) = v;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(int i) { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  const double* row(int i) const { return data_.data() + static_cast<std::size_t>(i) * cols_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Matrix& operator-=(const Matrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  void fill_normal(Rng& rng, double stddev) {
    for (double& v : data_) v = rng.normal() * stddev;
  }

  void fill_uniform(Rng& rng, double lo, double hi) {
    for (double& v : data_) v = rng.uniform(lo, hi);
  }

private:
  static std::size_t check_size(int rows, int cols) {
    if (rows < 0 || cols < 0) throw InputError("matrix dimensions must be non-negative");
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }

  void require_same_shape(const Matrix& o, const char* op) const {
    if (!same_shape(o))
      throw InputError(std::string("shape mismatch in Matrix ") + op + ": " + shape_str() +
                       " vs " + o.shape_str());
  }

  std::string shape_str() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw InputError("shape mismatch in hadamard");
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) * b(i, j);
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

// C = op(A) . op(B) with optional transposes. Loop orders keep the inner
// traversal contiguous for the (n,n) and (n,t) cases that dominate.
inline Matrix matmul(const Matrix& a, const Matrix& b, bool trans_a = false,
                     bool trans_b = false) {
  const int m = trans_a ? a.cols() : a.rows();
  const int k = trans_a ? a.rows() : a.cols();
  const int kb = trans_b ? b.cols() : b.rows();
  const int n = trans_b ? b.rows() : b.cols();
  if (k != kb)
    throw InputError("matmul: inner dimension mismatch (" + std::to_string(k) + " vs " +
                     std::to_string(kb) + ")");
  Matrix out(m, n);
  if (!trans_a && !trans_b) {
    for (int i = 0; i < m; ++i) {
      const double* arow = a.row(i);
      double* orow = out.row(i);
      for (int p = 0; p < k; ++p) {
        const double av = arow[p];
        if (av == 0.0) continue;
        const double* brow = b.row(p);
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (int i = 0; i < m; ++i) {
      const double* arow = a.row(i);
      double* orow = out.row(i);
      for (int j = 0; j < n; ++j) {
        const double* brow = b.row(j);
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
        orow[j] = acc;
      }
    }
  } else if (trans_a && !trans_b) {
    for (int p = 0; p < k; ++p) {
      const double* arow = a.row(p);
      const double* brow = b.row(p);
      for (int i = 0; i < m; ++i) {
        const double av = arow[i];
        if (av == 0.0) continue;
        double* orow = out.row(i);
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  } else {
    for (int i = 0; i < m; ++i) {
      double* orow = out.row(i);
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += a(p, i) * b(j, p);
        orow[j] = acc;
      }
    }
  }
  return out;
}

// Row-wise tempered softmax: softmax(a_i / tau), max-subtracted.
inline Matrix row_softmax(const Matrix& a, double tau = 1.0) {
  if (tau <= 0.0) throw InputError("row_softmax: tau must be positive");
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < a.cols(); ++j) mx = std::max(mx, a(i, j) / tau);
    double sum = 0.0;
    for (int j = 0; j < a.cols(); ++j) {
      const double e = std::exp(a(i, j) / tau - mx);
      out(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < a.cols(); ++j) out(i, j) /= sum;
  }
  return out;
}

inline Matrix col_sums(const Matrix& a) {
  Matrix out(1, a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
  return out;
}

inline double sum_all(const Matrix& a) {
  double acc = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) acc += a(i, j);
  return acc;
}

inline Matrix gather_rows(const Matrix& a, const std::vector<int>& idx) {
  Matrix out(static_cast<int>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= a.rows())
      throw InputError("gather_rows: index " + std::to_string(idx[r]) + " out of range");
    std::copy(a.row(idx[r]), a.row(idx[r]) + a.cols(), out.row(static_cast<int>(r)));
  }
  return out;
}

inline Matrix slice_cols(const Matrix& a, int first, int count) {
  if (first < 0 || count < 0 || first + count > a.cols())
    throw InputError("slice_cols: range out of bounds");
  Matrix out(a.rows(), count);
  for (int i = 0; i < a.rows(); ++i)
    std::copy(a.row(i) + first, a.row(i) + first + count, out.row(i));
  return out;
}

inline Matrix concat_cols(const std::vector<Matrix>& parts) {
  if (parts.empty()) throw InputError("concat_cols: no parts");
  const int rows = parts.front().rows();
  int cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw InputError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  int off = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < rows; ++i)
      std::copy(p.row(i), p.row(i) + p.cols(), out.row(i) + off);
    off += p.cols();
  }
  return out;
}

inline Matrix concat_rows(const std::vector<Matrix>& parts) {
  if (parts.empty()) throw InputError("concat_rows: no parts");
  const int cols = parts.front().cols();
  int rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw InputError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  int off = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < p.rows(); ++i)
      std::copy(p.row(i), p.row(i) + cols, out.row(off + i));
    off += p.rows();
  }
  return out;
}

// Index of the row maximum; ties break toward the lowest index.
inline int argmax_row(const Matrix& a, int i) {
  int best = 0;
  for (int j = 1; j < a.cols(); ++j)
    if (a(i, j) > a(i, best)) best = j;
  return best;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw InputError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

}  // namespace magtkd
