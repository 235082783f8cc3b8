#pragma once

// Scoring features against predicted classifiers and Hit@k under the
// unseen-only and generalized (seen + unseen candidates) protocols.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dgp/error.hpp"
#include "dgp/sparse.hpp"
#include "dgp/training.hpp"

namespace dgp {

struct FeatureBatch {
  DenseMatrix features;             // n x (P-1)
  std::vector<std::size_t> labels;  // class (node) index per example
};

// Row r of `classifiers` is [w_0 .. w_{P-2}, bias]. Returns, per example, the
// k best rows by descending logit with ties going to the lower row index.
inline std::vector<std::vector<std::size_t>> classify_topk(const DenseMatrix& classifiers,
                                                           const DenseMatrix& features,
                                                           std::size_t k) {
  const std::size_t c = classifiers.rows();
  if (k == 0) detail::reject("top-k needs k >= 1");
  if (k > c)
    detail::reject("top-" + std::to_string(k) + " requested with only " + std::to_string(c) +
                   " candidate classes");
  if (classifiers.cols() != features.cols() + 1)
    detail::reject("classifier rows have length " + std::to_string(classifiers.cols()) +
                   " but features have length " + std::to_string(features.cols()) +
                   " (expected features + 1 bias)");
  const std::size_t d = features.cols();
  std::vector<std::vector<std::size_t>> out(features.rows());
  std::vector<double> logits(c);
  std::vector<std::size_t> order(c);
  for (std::size_t e = 0; e < features.rows(); ++e) {
    auto f = features.row(e);
    for (std::size_t r = 0; r < c; ++r) {
      auto w = classifiers.row(r);
      double s = w[d];
      for (std::size_t j = 0; j < d; ++j) s += w[j] * f[j];
      logits[r] = s;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (logits[a] != logits[b]) return logits[a] > logits[b];
                        return a < b;
                      });
    out[e].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

// Percentage of examples whose label is among the first k entries.
inline std::vector<double> hit_at_k(const std::vector<std::vector<std::size_t>>& topk,
                                    std::span<const std::size_t> labels,
                                    std::span<const std::size_t> k_values) {
  detail::require(topk.size() == labels.size(), "top-k lists and labels differ in length");
  std::vector<double> out;
  for (std::size_t k : k_values) {
    std::size_t hits = 0;
    for (std::size_t e = 0; e < topk.size(); ++e) {
      detail::require(topk[e].size() >= k, "top-k list shorter than k=" + std::to_string(k));
      if (std::find(topk[e].begin(), topk[e].begin() + static_cast<std::ptrdiff_t>(k), labels[e]) !=
          topk[e].begin() + static_cast<std::ptrdiff_t>(k))
        ++hits;
    }
    out.push_back(topk.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(topk.size()));
  }
  return out;
}

enum class EvalMode { unseen_only, generalized };

struct EvalProtocol {
  std::vector<std::size_t> unseen_classes;  // node indices with predicted classifiers
  EvalMode mode = EvalMode::unseen_only;
  std::vector<std::size_t> k_values{1, 2, 5, 10, 20};
};

struct HitReport {
  std::vector<std::size_t> k_values;
  std::vector<double> hit_percent;
  std::size_t candidates = 0;
  std::size_t examples = 0;

  double at(std::size_t k) const {
    for (std::size_t i = 0; i < k_values.size(); ++i)
      if (k_values[i] == k) return hit_percent[i];
    detail::reject("k=" + std::to_string(k) + " not in report");
  }
};

// Unseen-only: candidates are the predicted classifiers of the unseen
// classes. Generalized: ground-truth seen classifiers are kept and the
// predicted unseen ones appended. Example labels may be seen or unseen
// nodes as long as they are candidates.
inline HitReport generalized_eval(const DenseMatrix& predicted, const DenseMatrix& true_seen,
                                  const SeenMask& mask, const FeatureBatch& batch,
                                  const EvalProtocol& protocol) {
  if (true_seen.rows() != mask.size())
    detail::reject("seen classifiers have " + std::to_string(true_seen.rows()) +
                   " rows but the mask has " + std::to_string(mask.size()));
  if (batch.features.rows() != batch.labels.size())
    detail::reject("feature batch has " + std::to_string(batch.features.rows()) + " rows but " +
                   std::to_string(batch.labels.size()) + " labels");
  mask.validate(predicted.rows());
  std::unordered_set<std::size_t> seen(mask.indices.begin(), mask.indices.end());
  std::unordered_set<std::size_t> unseen;
  for (std::size_t u : protocol.unseen_classes) {
    if (u >= predicted.rows()) detail::reject("unseen class " + std::to_string(u) + " out of range");
    if (seen.count(u)) detail::reject("class " + std::to_string(u) + " is both seen and unseen");
    if (!unseen.insert(u).second) detail::reject("unseen class " + std::to_string(u) + " repeated");
  }
  if (protocol.mode == EvalMode::unseen_only && protocol.unseen_classes.empty())
    detail::reject("unseen-only evaluation needs at least one unseen class");

  std::vector<const double*> rows;
  std::unordered_map<std::size_t, std::size_t> position;
  const std::size_t p = predicted.cols();
  if (protocol.mode == EvalMode::generalized) {
    detail::require(true_seen.cols() == p, "seen classifier width differs from predictions");
    for (std::size_t i = 0; i < mask.size(); ++i) {
      position[mask.indices[i]] = rows.size();
      rows.push_back(true_seen.row(i).data());
    }
  }
  for (std::size_t u : protocol.unseen_classes) {
    position[u] = rows.size();
    rows.push_back(predicted.row(u).data());
  }
  DenseMatrix candidates(rows.size(), p);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r], rows[r] + p, candidates.row(r).begin());

  std::vector<std::size_t> labels;
  labels.reserve(batch.labels.size());
  for (std::size_t e = 0; e < batch.labels.size(); ++e) {
    auto it = position.find(batch.labels[e]);
    if (it == position.end())
      detail::reject("example " + std::to_string(e) + " has label " +
                     std::to_string(batch.labels[e]) + " outside the candidate set");
    labels.push_back(it->second);
  }
  if (protocol.k_values.empty()) detail::reject("evaluation needs at least one k");
  if (candidates.rows() == 0) detail::reject("evaluation has no candidate classes");
  // k beyond the candidate count saturates at the full list
  std::vector<std::size_t> clamped;
  for (std::size_t k : protocol.k_values) {
    if (k == 0) detail::reject("evaluation k must be >= 1");
    clamped.push_back(std::min(k, candidates.rows()));
  }
  const std::size_t max_k = *std::max_element(clamped.begin(), clamped.end());
  const auto topk = classify_topk(candidates, batch.features, max_k);
  return {protocol.k_values, hit_at_k(topk, labels, clamped), candidates.rows(), labels.size()};
}

inline void write_hit_csv(std::ostream& os, const HitReport& r) {
  os << "k,hit_percent\n";
  char buf[64];
  for (std::size_t i = 0; i < r.k_values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.2f\n", r.k_values[i], r.hit_percent[i]);
    os << buf;
  }
}

}  // namespace dgp
