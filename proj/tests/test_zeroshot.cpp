#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dgp/zeroshot.hpp"
#include "oracles.hpp"

using namespace dgp;

namespace {

std::vector<std::size_t> argsort_oracle(const std::vector<double>& logits) {
  std::vector<std::size_t> idx(logits.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  return idx;
}

}  // namespace

TEST(ClassifyTopk, HandExamples) {
  DenseMatrix w(2, 2, {1.0, 0.0, -1.0, 0.0});
  DenseMatrix f(1, 1, {2.0});
  EXPECT_EQ(classify_topk(w, f, 1)[0], (std::vector<std::size_t>{0}));
  EXPECT_EQ(classify_topk(w, f, 2)[0], (std::vector<std::size_t>{0, 1}));
  DenseMatrix bias(2, 2, {0.0, 0.0, 0.0, 5.0});  // only the bias differs
  EXPECT_EQ(classify_topk(bias, f, 1)[0], (std::vector<std::size_t>{1}));
}

TEST(ClassifyTopk, TiesGoToLowerIndex) {
  DenseMatrix w(3, 2, {1.0, 0.0, 1.0, 0.0, 1.0, 0.0});
  DenseMatrix f(1, 1, {1.0});
  EXPECT_EQ(classify_topk(w, f, 3)[0], (std::vector<std::size_t>{0, 1, 2}));
}

TEST(ClassifyTopk, MatchesArgsortOracle) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t c = 2 + rep % 20, d = 1 + rep % 6;
    auto w = oracle::random_dense(c, d + 1, rng);
    auto f = oracle::random_dense(7, d, rng);
    const std::size_t k = 1 + rep % c;
    auto got = classify_topk(w, f, k);
    for (std::size_t e = 0; e < 7; ++e) {
      std::vector<double> logits(c);
      for (std::size_t r = 0; r < c; ++r) {
        logits[r] = w(r, d);
        for (std::size_t j = 0; j < d; ++j) logits[r] += w(r, j) * f(e, j);
      }
      auto want = argsort_oracle(logits);
      want.resize(k);
      EXPECT_EQ(got[e], want);
    }
  }
}

TEST(ClassifyTopk, Rejections) {
  DenseMatrix w(2, 3);
  EXPECT_THROW(classify_topk(w, DenseMatrix(1, 2), 0), ValidationError);
  EXPECT_THROW(classify_topk(w, DenseMatrix(1, 2), 3), ValidationError);
  EXPECT_THROW(classify_topk(w, DenseMatrix(1, 3), 1), ValidationError);
}

TEST(HitAtK, Cases) {
  std::vector<std::vector<std::size_t>> topk{{0, 1}, {1, 0}};
  std::vector<std::size_t> labels{0, 0};
  std::vector<std::size_t> ks{1, 2};
  EXPECT_EQ(hit_at_k(topk, labels, ks), (std::vector<double>{50.0, 100.0}));
  std::vector<std::size_t> wrong{2, 2};
  EXPECT_EQ(hit_at_k(topk, wrong, ks), (std::vector<double>{0.0, 0.0}));
}

TEST(HitAtK, MonotoneInK) {
  std::mt19937_64 rng(3);
  auto w = oracle::random_dense(15, 5, rng);
  auto f = oracle::random_dense(40, 4, rng);
  auto topk = classify_topk(w, f, 15);
  std::vector<std::size_t> labels;
  for (std::size_t e = 0; e < 40; ++e) labels.push_back(e % 15);
  std::vector<std::size_t> ks{1, 2, 5, 10, 15};
  auto hits = hit_at_k(topk, labels, ks);
  for (std::size_t i = 1; i < hits.size(); ++i) EXPECT_GE(hits[i], hits[i - 1]);
  EXPECT_EQ(hits.back(), 100.0);
}

namespace {

struct EvalFixture {
  DenseMatrix predicted;
  DenseMatrix true_seen;
  SeenMask mask;
  FeatureBatch batch;
  std::vector<std::size_t> unseen;
};

EvalFixture fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EvalFixture f;
  const std::size_t n = 12, d = 4;
  f.predicted = l2_normalize_rows(oracle::random_dense(n, d + 1, rng));
  for (std::size_t i = 0; i < n; ++i) (i % 3 == 0 ? f.unseen : f.mask.indices).push_back(i);
  f.true_seen = DenseMatrix(f.mask.size(), d + 1);
  for (std::size_t i = 0; i < f.mask.size(); ++i)
    for (std::size_t j = 0; j <= d; ++j) f.true_seen(i, j) = f.predicted(f.mask.indices[i], j);
  f.batch.features = oracle::random_dense(30, d, rng);
  for (std::size_t e = 0; e < 30; ++e) f.batch.labels.push_back(f.unseen[e % f.unseen.size()]);
  return f;
}

}  // namespace

TEST(GeneralizedEval, AddingSeenCandidatesNeverHelps) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto f = fixture(seed);
    EvalProtocol only{f.unseen, EvalMode::unseen_only, {1, 2, 4}};
    EvalProtocol gen{f.unseen, EvalMode::generalized, {1, 2, 4}};
    auto a = generalized_eval(f.predicted, f.true_seen, f.mask, f.batch, only);
    auto b = generalized_eval(f.predicted, f.true_seen, f.mask, f.batch, gen);
    EXPECT_EQ(a.candidates, f.unseen.size());
    EXPECT_EQ(b.candidates, f.predicted.rows());
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(b.hit_percent[i], a.hit_percent[i]);
  }
}

TEST(GeneralizedEval, EmptyUnseenScoresSeenOnly) {
  auto f = fixture(1);
  FeatureBatch batch{f.batch.features, {}};
  for (std::size_t e = 0; e < 30; ++e) batch.labels.push_back(f.mask.indices[e % f.mask.size()]);
  EvalProtocol gen{{}, EvalMode::generalized, {1}};
  auto r = generalized_eval(f.predicted, f.true_seen, f.mask, batch, gen);
  EXPECT_EQ(r.candidates, f.mask.size());
  EvalProtocol only{{}, EvalMode::unseen_only, {1}};
  EXPECT_THROW(generalized_eval(f.predicted, f.true_seen, f.mask, batch, only), ValidationError);
}

TEST(GeneralizedEval, OverlapAndUnknownLabelsRejected) {
  auto f = fixture(2);
  auto overlap = f.unseen;
  overlap.push_back(f.mask.indices[0]);
  EXPECT_THROW(generalized_eval(f.predicted, f.true_seen, f.mask, f.batch, {overlap}), ValidationError);
  auto batch = f.batch;
  batch.labels[0] = f.mask.indices[0];  // a seen label is not a candidate in unseen-only mode
  EXPECT_THROW(generalized_eval(f.predicted, f.true_seen, f.mask, batch, {f.unseen}), ValidationError);
}

TEST(GeneralizedEval, KBeyondCandidatesSaturates) {
  auto f = fixture(3);
  EvalProtocol p{f.unseen, EvalMode::unseen_only, {1, 20}};
  auto r = generalized_eval(f.predicted, f.true_seen, f.mask, f.batch, p);
  EXPECT_EQ(r.at(20), 100.0);
}

TEST(GeneralizedEval, InvariantToPositiveClassifierScaling) {
  auto f = fixture(4);
  EvalProtocol p{f.unseen, EvalMode::unseen_only, {1, 2}};
  auto a = generalized_eval(f.predicted, f.true_seen, f.mask, f.batch, p);
  auto scaled = f.predicted;
  for (double& v : scaled.values()) v *= 7.5;
  auto b = generalized_eval(scaled, f.true_seen, f.mask, f.batch, p);
  EXPECT_EQ(a.hit_percent, b.hit_percent);
}

TEST(HitCsv, Format) {
  HitReport r{{1, 5}, {12.5, 100.0}, 3, 8};
  std::ostringstream os;
  write_hit_csv(os, r);
  EXPECT_EQ(os.str(), "k,hit_percent\n1,12.50\n5,100.00\n");
}
