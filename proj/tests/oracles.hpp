#pragma once

// Brute-force reference computations for the tests. Nothing here calls into
// the kernels it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "dgp/sparse.hpp"
#include "dgp/taxonomy.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

inline Dense to_rows(const dgp::DenseMatrix& m) {
  Dense d = zeros(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

// Reads a CSR matrix through its raw arrays only.
inline Dense to_rows(const dgp::SparseMatrix& s) {
  Dense d = zeros(s.rows(), s.cols());
  auto rp = s.row_ptr();
  auto ci = s.col_idx();
  auto v = s.values();
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) d[i][ci[k]] += v[k];
  return d;
}

inline Dense matmul(const Dense& a, const Dense& b) {
  const std::size_t n = a.size(), m = b.empty() ? 0 : b[0].size(), inner = b.size();
  Dense c = zeros(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += a[i][k] * b[k][j];
      c[i][j] = s;
    }
  return c;
}

inline Dense transpose(const Dense& a) {
  if (a.empty()) return {};
  Dense t = zeros(a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline Dense row_normalize(const Dense& a) {
  Dense out = a;
  for (auto& row : out) {
    double s = 0.0;
    for (double v : row) s += v;
    if (s > 0.0)
      for (double& v : row) v /= s;
  }
  return out;
}

inline Dense sym_normalize(const Dense& a) {
  const std::size_t n = a.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (double v : a[i]) d[i] += v;
  Dense out = a;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i][j] = (d[i] > 0 && d[j] > 0) ? a[i][j] / std::sqrt(d[i] * d[j]) : 0.0;
  return out;
}

inline Dense leaky(const Dense& a, double slope) {
  Dense out = a;
  for (auto& row : out)
    for (double& v : row) v = v > 0 ? v : slope * v;
  return out;
}

inline Dense l2_rows(const Dense& a) {
  Dense out = a;
  for (auto& row : out) {
    double s = 0.0;
    for (double v : row) s += v * v;
    s = std::sqrt(s);
    if (s >= 1e-12)
      for (double& v : row) v /= s;
  }
  return out;
}

inline Dense add_scaled(const Dense& a, double alpha, const Dense& b) {
  Dense out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] += alpha * b[i][j];
  return out;
}

inline double max_abs_diff(const Dense& a, const Dense& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

inline double max_rel_diff(const Dense& a, const Dense& b) {
  double scale = 0.0;
  for (const auto& row : b)
    for (double v : row) scale = std::max(scale, std::abs(v));
  return max_abs_diff(a, b) / std::max(scale, 1.0);
}

// All-pairs shortest child->parent hop counts by Floyd-Warshall on the raw
// edge list; dist[i][j] is the hop count from i up to ancestor j.
inline std::vector<std::vector<std::size_t>> ancestor_distances(const dgp::TaxonomyDag& dag) {
  constexpr std::size_t inf = std::numeric_limits<std::size_t>::max() / 4;
  const std::size_t n = dag.size();
  std::vector<std::vector<std::size_t>> d(n, std::vector<std::size_t>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& e : dag.edges()) d[e.child][e.parent] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  for (auto& row : d)
    for (auto& v : row)
      if (v >= inf) v = std::numeric_limits<std::size_t>::max();
  return d;
}

inline dgp::DenseMatrix random_dense(std::size_t r, std::size_t c, std::mt19937_64& rng,
                                     double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  dgp::DenseMatrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

inline dgp::SparseMatrix random_sparse(std::size_t r, std::size_t c, double density,
                                       std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> val(lo, hi);
  std::vector<dgp::Triplet> t;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (u(rng) < density) t.push_back({i, j, val(rng)});
  return dgp::SparseMatrix::from_triplets(r, c, t);
}

}  // namespace oracle
