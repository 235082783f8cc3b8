#pragma once

// Dense and CSR sparse matrices plus the handful of kernels graph propagation
// needs. Everything is double precision and single-pass; spmm optionally
// splits output rows across threads, and because each output row is reduced
// in ascending column order the result does not depend on the thread count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "dgp/error.hpp"

namespace dgp {

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    detail::require(data_.size() == rows * cols,
                    "dense matrix " + shape_str(rows, cols) + " given " +
                        std::to_string(data_.size()) + " values");
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::string shape() const { return shape_str(rows_, cols_); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

// Compressed sparse row storage in canonical form: strictly increasing
// columns within a row, no duplicates, no stored zeros.
class SparseMatrix {
 public:
  SparseMatrix() : row_ptr_{0} {}

  static SparseMatrix empty(std::size_t rows, std::size_t cols) {
    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_.assign(rows + 1, 0);
    return m;
  }

  static SparseMatrix identity(std::size_t n) {
    SparseMatrix m;
    m.rows_ = m.cols_ = n;
    m.row_ptr_.resize(n + 1);
    std::iota(m.row_ptr_.begin(), m.row_ptr_.end(), std::size_t{0});
    m.col_idx_.resize(n);
    std::iota(m.col_idx_.begin(), m.col_idx_.end(), std::size_t{0});
    m.values_.assign(n, 1.0);
    return m;
  }

  // Duplicates are summed, zero results dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::span<const Triplet> triplets) {
    for (std::size_t k = 0; k < triplets.size(); ++k) {
      const auto& t = triplets[k];
      if (t.row >= rows || t.col >= cols) {
        detail::reject("triplet " + std::to_string(k) + " at (" + std::to_string(t.row) + "," +
                       std::to_string(t.col) + ") is out of range for a " + shape_str(rows, cols) +
                       " matrix");
      }
    }
    std::vector<std::size_t> order(triplets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // stable so duplicates accumulate in input order
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(triplets[a].row, triplets[a].col) < std::tie(triplets[b].row, triplets[b].col);
    });

    SparseMatrix m = empty(rows, cols);
    std::size_t k = 0;
    while (k < order.size()) {
      const std::size_t r = triplets[order[k]].row;
      const std::size_t c = triplets[order[k]].col;
      double sum = 0.0;
      while (k < order.size() && triplets[order[k]].row == r && triplets[order[k]].col == c) {
        sum += triplets[order[k]].value;
        ++k;
      }
      if (sum != 0.0) {
        m.col_idx_.push_back(c);
        m.values_.push_back(sum);
        ++m.row_ptr_[r + 1];
      }
    }
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    return m;
  }

  // Assembles from already-canonical arrays; validates the CSR invariants.
  static SparseMatrix from_csr(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                               std::vector<std::size_t> col_idx, std::vector<double> values) {
    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_ = std::move(row_ptr);
    m.col_idx_ = std::move(col_idx);
    m.values_ = std::move(values);
    detail::require(m.is_canonical(), "arrays do not form a canonical CSR matrix");
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  std::string shape() const { return shape_str(rows_, cols_); }

  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const std::size_t> col_idx() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  double at(std::size_t r, std::size_t c) const {
    auto cols = row_cols(r);
    auto it = std::lower_bound(cols.begin(), cols.end(), c);
    if (it == cols.end() || *it != c) return 0.0;
    return values_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
  }

  double density() const {
    if (rows_ == 0 || cols_ == 0) return 0.0;
    return static_cast<double>(nnz()) / (static_cast<double>(rows_) * static_cast<double>(cols_));
  }

  bool is_canonical() const {
    if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0) return false;
    if (row_ptr_.back() != col_idx_.size() || col_idx_.size() != values_.size()) return false;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (row_ptr_[r + 1] < row_ptr_[r]) return false;
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        if (col_idx_[k] >= cols_ || values_[k] == 0.0) return false;
        if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1]) return false;
      }
    }
    return true;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d(r, col_idx_[k]) = values_[k];
    return d;
  }

  // Same matrix with each stored value replaced by f(row, col, value).
  template <typename F>
  SparseMatrix map_values(F&& f) const {
    SparseMatrix out = *this;
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        out.values_[k] = f(r, col_idx_[k], values_[k]);
    out.drop_zeros();
    return out;
  }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  void drop_zeros() {
    std::size_t w = 0;
    std::size_t begin = 0;
    for (std::size_t r = 0; r < rows_; ++r) {
      const std::size_t end = row_ptr_[r + 1];
      for (std::size_t k = begin; k < end; ++k) {
        if (values_[k] != 0.0) {
          col_idx_[w] = col_idx_[k];
          values_[w] = values_[k];
          ++w;
        }
      }
      begin = end;
      row_ptr_[r + 1] = w;
    }
    col_idx_.resize(w);
    values_.resize(w);
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

inline SparseMatrix csr_from_triplets(std::size_t rows, std::size_t cols,
                                      std::span<const Triplet> triplets) {
  return SparseMatrix::from_triplets(rows, cols, triplets);
}

namespace detail {

template <typename RowFn>
void for_rows(std::size_t rows, unsigned threads, RowFn&& fn) {
  if (threads <= 1 || rows < 2) {
    for (std::size_t r = 0; r < rows; ++r) fn(r);
    return;
  }
  const std::size_t n = std::min<std::size_t>(threads, rows);
  const std::size_t chunk = (rows + n - 1) / n;
  std::vector<std::jthread> pool;
  pool.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(rows, lo + chunk);
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t r = lo; r < hi; ++r) fn(r);
    });
  }
}

}  // namespace detail

// out = a * x. Work is O(nnz(a) * x.cols()).
inline DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& x, unsigned threads = 1) {
  if (a.cols() != x.rows()) {
    detail::reject("spmm dimension mismatch: sparse " + a.shape() + " times dense " + x.shape());
  }
  DenseMatrix out(a.rows(), x.cols());
  detail::for_rows(a.rows(), threads, [&](std::size_t r) {
    auto dst = out.row(r);
    auto cols = a.row_cols(r);
    auto vals = a.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      auto src = x.row(cols[k]);
      const double v = vals[k];
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += v * src[j];
    }
  });
  return out;
}

inline SparseMatrix transpose(const SparseMatrix& a) {
  std::vector<std::size_t> row_ptr(a.cols() + 1, 0);
  for (std::size_t c : a.col_idx()) ++row_ptr[c + 1];
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
  std::vector<std::size_t> col_idx(a.nnz());
  std::vector<double> values(a.nnz());
  std::vector<std::size_t> cursor(row_ptr.begin(), row_ptr.end() - 1);
  // scanning source rows in order keeps destination columns sorted
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto cols = a.row_cols(r);
    auto vals = a.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::size_t dst = cursor[cols[k]]++;
      col_idx[dst] = r;
      values[dst] = vals[k];
    }
  }
  return SparseMatrix::from_csr(a.cols(), a.rows(), std::move(row_ptr), std::move(col_idx),
                                std::move(values));
}

inline std::vector<double> row_sums(const SparseMatrix& a) {
  std::vector<double> sums(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (double v : a.row_values(r)) sums[r] += v;
  return sums;
}

// D^{-1} A. Empty rows stay empty.
inline SparseMatrix row_normalize(const SparseMatrix& a) {
  const auto sums = row_sums(a);
  for (std::size_t r = 0; r < sums.size(); ++r) {
    if (sums[r] < 0.0) {
      detail::reject("row_normalize: row " + std::to_string(r) + " has negative sum " +
                     std::to_string(sums[r]));
    }
  }
  return a.map_values([&](std::size_t r, std::size_t, double v) {
    return sums[r] > 0.0 ? v / sums[r] : 0.0;
  });
}

// D^{-1/2} A D^{-1/2}.
inline SparseMatrix sym_normalize(const SparseMatrix& a) {
  if (a.rows() != a.cols()) detail::reject("sym_normalize needs a square matrix, got " + a.shape());
  for (double v : a.values()) {
    if (v < 0.0) detail::reject("sym_normalize: adjacency values must be non-negative");
  }
  const auto deg = row_sums(a);
  std::vector<double> inv_sqrt(deg.size(), 0.0);
  for (std::size_t i = 0; i < deg.size(); ++i)
    if (deg[i] > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
  return a.map_values([&](std::size_t r, std::size_t c, double v) {
    return v * inv_sqrt[r] * inv_sqrt[c];
  });
}

// Entrywise a + b over the union of patterns.
inline SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "sparse add shape mismatch: " + a.shape() + " vs " + b.shape());
  std::vector<Triplet> t;
  t.reserve(a.nnz() + b.nnz());
  for (const SparseMatrix* m : {&a, &b})
    for (std::size_t r = 0; r < m->rows(); ++r) {
      auto cols = m->row_cols(r);
      auto vals = m->row_values(r);
      for (std::size_t k = 0; k < cols.size(); ++k) t.push_back({r, cols[k], vals[k]});
    }
  return SparseMatrix::from_triplets(a.rows(), a.cols(), t);
}

// Pattern of a with every stored value set to one.
inline SparseMatrix pattern(const SparseMatrix& a) {
  return a.map_values([](std::size_t, std::size_t, double) { return 1.0; });
}

// ---- dense helpers -------------------------------------------------------

// a * b
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) detail::reject("matmul mismatch: " + a.shape() + " times " + b.shape());
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double v = a(i, k);
      if (v == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += v * src[j];
    }
  }
  return out;
}

// a^T * b
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows())
    detail::reject("matmul_tn mismatch: " + a.shape() + "^T times " + b.shape());
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto src = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double v = a(k, i);
      if (v == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += v * src[j];
    }
  }
  return out;
}

// a * b^T
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols())
    detail::reject("matmul_nt mismatch: " + a.shape() + " times " + b.shape() + "^T");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ra = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto rb = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ra.size(); ++k) s += ra[k] * rb[k];
      out(i, j) = s;
    }
  }
  return out;
}

inline void axpy(double alpha, const DenseMatrix& x, DenseMatrix& y) {
  detail::require(x.rows() == y.rows() && x.cols() == y.cols(),
                  "axpy shape mismatch: " + x.shape() + " vs " + y.shape());
  auto xs = x.values();
  auto ys = y.values();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] += alpha * xs[i];
}

inline double dot(const DenseMatrix& a, const DenseMatrix& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "dot shape mismatch: " + a.shape() + " vs " + b.shape());
  double s = 0.0;
  auto as = a.values();
  auto bs = b.values();
  for (std::size_t i = 0; i < as.size(); ++i) s += as[i] * bs[i];
  return s;
}

}  // namespace dgp
