#pragma once

// Forward and reverse passes for the GCN baseline and for dense graph
// propagation (DGP).
//
// Both models are stacks of the same layer shape:
//
//   dropped = dropout(H)                  (train mode only)
//   mixed   = sum_k alpha_k * B_k * dropped
//   pre     = mixed * Theta
//   H'      = leaky_relu(pre)
//
// where B_k are row-normalized sparse operators. A GCN layer has a single
// operator with alpha = {1}. A DGP phase has either one operator (the
// normalized reachability union) or K+1 hop buckets mixed by
// alpha = softmax(w). The final activation is L2-normalized per row.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dgp/error.hpp"
#include "dgp/sparse.hpp"
#include "dgp/taxonomy.hpp"

namespace dgp {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

enum class Mode { train, infer };
enum class Normalization { nonsym, sym };

inline const char* to_string(Normalization n) { return n == Normalization::sym ? "sym" : "nonsym"; }

inline Normalization parse_normalization(const std::string& s) {
  if (s == "sym") return Normalization::sym;
  if (s == "nonsym" || s == "non-sym") return Normalization::nonsym;
  detail::reject("unknown normalization '" + s + "' (expected sym or nonsym)");
}

struct ForwardOptions {
  Mode mode = Mode::infer;
  Rng* rng = nullptr;
  unsigned threads = 1;
};

// ---- elementwise pieces -------------------------------------------------

inline std::vector<double> distance_softmax(std::span<const double> w) {
  detail::require(!w.empty(), "distance_softmax of an empty weight vector");
  for (double v : w)
    if (!std::isfinite(v)) detail::reject("distance_softmax: non-finite weight");
  const double mx = *std::max_element(w.begin(), w.end());
  std::vector<double> out(w.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    out[i] = std::exp(w[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

inline DenseMatrix leaky_relu(const DenseMatrix& x, double negative_slope) {
  DenseMatrix out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : negative_slope * v;
  return out;
}

struct DropoutResult {
  DenseMatrix output;
  // Per-entry scale (0 or 1/(1-rate)); empty when dropout was a no-op.
  DenseMatrix mask;
};

// Inverted dropout. Identity in inference mode or at rate 0.
inline DropoutResult dropout_apply(const DenseMatrix& x, double rate, Mode mode, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    detail::reject("dropout rate must lie in [0,1), got " + std::to_string(rate));
  if (mode == Mode::infer || rate == 0.0) return {x, {}};
  detail::require(rng != nullptr, "dropout in train mode needs a random generator");
  const double keep_scale = 1.0 / (1.0 - rate);
  DropoutResult r{x, DenseMatrix(x.rows(), x.cols())};
  auto out = r.output.values();
  auto mask = r.mask.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = uniform01(*rng) < rate ? 0.0 : keep_scale;
    out[i] *= mask[i];
  }
  return r;
}

inline constexpr double kNormFloor = 1e-12;

inline DenseMatrix l2_normalize_rows(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double ss = 0.0;
    for (double v : row) ss += v * v;
    const double norm = std::sqrt(ss);
    if (norm < kNormFloor) continue;
    for (double& v : row) v /= norm;
  }
  return out;
}

// Reverse of l2_normalize_rows given the pre-normalization input.
inline DenseMatrix l2_normalize_rows_backward(const DenseMatrix& x, const DenseMatrix& grad_y) {
  DenseMatrix gx = grad_y;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    double ss = 0.0;
    for (double v : xr) ss += v * v;
    const double norm = std::sqrt(ss);
    if (norm < kNormFloor) continue;
    auto gr = gx.row(r);
    double yg = 0.0;
    for (std::size_t j = 0; j < xr.size(); ++j) yg += xr[j] / norm * gr[j];
    for (std::size_t j = 0; j < xr.size(); ++j) gr[j] = (gr[j] - xr[j] / norm * yg) / norm;
  }
  return gx;
}

// ---- operators ----------------------------------------------------------

// Sparse operators for one layer together with their transposes.
struct Propagator {
  std::vector<SparseMatrix> ops;
  std::vector<SparseMatrix> ops_t;

  static Propagator single(SparseMatrix normalized) {
    Propagator p;
    p.ops_t.push_back(transpose(normalized));
    p.ops.push_back(std::move(normalized));
    return p;
  }

  // Row-normalized buckets; empty buckets stay all-zero.
  static Propagator from_buckets(std::span<const SparseMatrix> buckets) {
    Propagator p;
    for (const auto& b : buckets) {
      p.ops.push_back(row_normalize(b));
      p.ops_t.push_back(transpose(p.ops.back()));
    }
    return p;
  }

  std::size_t size() const { return ops.size(); }
  std::size_t dim() const { return ops.empty() ? 0 : ops.front().rows(); }
};

inline Propagator make_gcn_operator(const SparseMatrix& adjacency, Normalization norm) {
  return Propagator::single(norm == Normalization::sym ? sym_normalize(adjacency)
                                                       : row_normalize(adjacency));
}

struct DgpOperators {
  Propagator descendant;
  Propagator ancestor;
};

// Weighted mode keeps the K+1 hop buckets; unweighted mode uses one
// row-normalized reachability union per phase. Without two-phase separation
// both phases share the merged symmetric pattern (bucket-wise when weighted).
inline DgpOperators make_dgp_operators(const KHopAdjacency& kh_d, const KHopAdjacency& kh_a,
                                       bool weighted, bool two_phase) {
  detail::require(kh_d.direction == Direction::descendant,
                  "first decomposition must be the descendant one");
  detail::require(kh_a.direction == Direction::ancestor,
                  "second decomposition must be the ancestor one");
  detail::require(kh_d.buckets.size() == kh_a.buckets.size(),
                  "ancestor and descendant decompositions have different K");
  if (two_phase) {
    if (weighted) return {Propagator::from_buckets(kh_d.buckets), Propagator::from_buckets(kh_a.buckets)};
    return {Propagator::single(row_normalize(dense_union(kh_d))),
            Propagator::single(row_normalize(dense_union(kh_a)))};
  }
  if (weighted) {
    std::vector<SparseMatrix> merged;
    merged.push_back(kh_a.buckets.front());
    for (std::size_t k = 1; k < kh_a.buckets.size(); ++k)
      merged.push_back(pattern(add(kh_a.buckets[k], kh_d.buckets[k])));
    auto p = Propagator::from_buckets(merged);
    return {p, p};
  }
  auto p = Propagator::single(row_normalize(pattern(add(dense_union(kh_a), dense_union(kh_d)))));
  return {p, p};
}

// ---- models -------------------------------------------------------------

// layers.size() = hidden layers + 1; no biases.
struct GcnStack {
  std::vector<DenseMatrix> layers;
  Normalization normalization = Normalization::nonsym;
  double negative_slope = 0.2;
  double dropout_rate = 0.5;

  std::size_t hidden_layers() const { return layers.empty() ? 0 : layers.size() - 1; }
};

struct DgpModel {
  DenseMatrix theta_d;     // S x F
  DenseMatrix theta_a;     // F x P
  std::vector<double> w_d; // K+1 logits, empty when unweighted
  std::vector<double> w_a;
  double negative_slope = 0.2;
  double dropout_rate = 0.5;
  bool weighted = true;
  bool two_phase = true;

  std::size_t K() const { return w_d.empty() ? 0 : w_d.size() - 1; }
};

using Model = std::variant<GcnStack, DgpModel>;

inline std::size_t parameter_count(const GcnStack& g) {
  std::size_t n = 0;
  for (const auto& t : g.layers) n += t.size();
  return n;
}

inline std::size_t parameter_count(const DgpModel& m) {
  return m.theta_d.size() + m.theta_a.size() + m.w_d.size() + m.w_a.size();
}

inline std::size_t parameter_count(const Model& m) {
  return std::visit([](const auto& x) { return parameter_count(x); }, m);
}

// Mutable view of one trainable tensor.
struct ParamView {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<double> values;
  bool decay = true;  // receives weight decay
};

inline std::vector<ParamView> parameters(GcnStack& g) {
  std::vector<ParamView> v;
  for (std::size_t l = 0; l < g.layers.size(); ++l)
    v.push_back({"theta" + std::to_string(l), g.layers[l].rows(), g.layers[l].cols(),
                 g.layers[l].values(), true});
  return v;
}

inline std::vector<ParamView> parameters(DgpModel& m) {
  std::vector<ParamView> v;
  v.push_back({"theta_d", m.theta_d.rows(), m.theta_d.cols(), m.theta_d.values(), true});
  v.push_back({"theta_a", m.theta_a.rows(), m.theta_a.cols(), m.theta_a.values(), true});
  if (m.weighted) {
    v.push_back({"w_d", 1, m.w_d.size(), m.w_d, false});
    v.push_back({"w_a", 1, m.w_a.size(), m.w_a, false});
  }
  return v;
}

inline std::vector<ParamView> parameters(Model& m) {
  return std::visit([](auto& x) { return parameters(x); }, m);
}

// ---- traces -------------------------------------------------------------

struct LayerTrace {
  DenseMatrix mask;      // dropout scales; empty if none applied
  DenseMatrix dropped;   // layer input after dropout
  DenseMatrix mixed;     // sum_k alpha_k B_k dropped
  DenseMatrix pre;       // mixed * theta
  DenseMatrix activated; // leaky_relu(pre)
  std::vector<double> alpha;
};

struct ForwardTrace {
  enum class Kind { gcn, dgp } kind = Kind::gcn;
  std::vector<LayerTrace> layers;
  DenseMatrix output;  // row-normalized final activation
};

struct ForwardResult {
  DenseMatrix output;
  ForwardTrace trace;
};

namespace detail {

inline LayerTrace layer_forward(const Propagator& prop, std::vector<double> alpha,
                                const DenseMatrix& theta, const DenseMatrix& input, double slope,
                                double dropout_rate, const ForwardOptions& opt,
                                const std::string& where) {
  if (prop.dim() != input.rows())
    reject(where + ": operator is " + prop.ops.front().shape() + " but input is " + input.shape());
  if (theta.rows() != input.cols())
    reject(where + ": weight is " + theta.shape() + " but input is " + input.shape());
  if (alpha.size() != prop.size())
    reject(where + ": " + std::to_string(alpha.size()) + " mixing weights for " +
           std::to_string(prop.size()) + " operators");
  LayerTrace t;
  auto d = dropout_apply(input, dropout_rate, opt.mode, opt.rng);
  t.dropped = std::move(d.output);
  t.mask = std::move(d.mask);
  if (prop.size() == 1 && alpha.front() == 1.0) {
    t.mixed = spmm(prop.ops.front(), t.dropped, opt.threads);
  } else {
    t.mixed = DenseMatrix(input.rows(), input.cols());
    for (std::size_t k = 0; k < prop.size(); ++k)
      axpy(alpha[k], spmm(prop.ops[k], t.dropped, opt.threads), t.mixed);
  }
  t.pre = matmul(t.mixed, theta);
  t.activated = leaky_relu(t.pre, slope);
  t.alpha = std::move(alpha);
  return t;
}

struct LayerGrads {
  DenseMatrix theta;
  std::vector<double> alpha;
  DenseMatrix input;
};

inline LayerGrads layer_backward(const Propagator& prop, const DenseMatrix& theta,
                                 const LayerTrace& t, const DenseMatrix& grad_act, double slope,
                                 bool need_input_grad, bool need_alpha_grad, unsigned threads) {
  DenseMatrix grad_pre = grad_act;
  {
    auto g = grad_pre.values();
    auto p = t.pre.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= p[i] > 0.0 ? 1.0 : slope;
  }
  LayerGrads out;
  out.theta = matmul_tn(t.mixed, grad_pre);
  const DenseMatrix grad_mixed = matmul_nt(grad_pre, theta);
  out.alpha.assign(prop.size(), 0.0);
  if (!need_input_grad && !need_alpha_grad) return out;
  DenseMatrix grad_dropped(t.dropped.rows(), t.dropped.cols());
  for (std::size_t k = 0; k < prop.size(); ++k) {
    const DenseMatrix back = spmm(prop.ops_t[k], grad_mixed, threads);
    out.alpha[k] = dot(back, t.dropped);
    if (need_input_grad) axpy(t.alpha[k], back, grad_dropped);
  }
  if (need_input_grad) {
    if (!t.mask.empty()) {
      auto g = grad_dropped.values();
      auto m = t.mask.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= m[i];
    }
    out.input = std::move(grad_dropped);
  }
  return out;
}

// d loss / d w from d loss / d alpha through the softmax Jacobian.
inline std::vector<double> softmax_backward(std::span<const double> alpha,
                                            std::span<const double> grad_alpha) {
  double inner = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) inner += alpha[i] * grad_alpha[i];
  std::vector<double> g(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) g[i] = alpha[i] * (grad_alpha[i] - inner);
  return g;
}

}  // namespace detail

inline ForwardResult gcn_forward(const GcnStack& stack, const Propagator& a_norm,
                                 const DenseMatrix& x, const ForwardOptions& opt = {}) {
  detail::require(!stack.layers.empty(), "GCN stack has no layers");
  detail::require(a_norm.size() == 1, "GCN expects a single normalized adjacency");
  ForwardTrace trace;
  trace.kind = ForwardTrace::Kind::gcn;
  const DenseMatrix* h = &x;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    trace.layers.push_back(detail::layer_forward(a_norm, {1.0}, stack.layers[l], *h,
                                                 stack.negative_slope, stack.dropout_rate, opt,
                                                 "GCN layer " + std::to_string(l)));
    h = &trace.layers.back().activated;
  }
  trace.output = l2_normalize_rows(*h);
  return {trace.output, std::move(trace)};
}

inline ForwardResult dgp_forward(const DgpModel& m, const DgpOperators& ops, const DenseMatrix& x,
                                 const ForwardOptions& opt = {}) {
  std::vector<double> alpha_d{1.0};
  std::vector<double> alpha_a{1.0};
  if (m.weighted) {
    if (m.w_d.size() != ops.descendant.size() || m.w_a.size() != ops.ancestor.size())
      detail::reject("DGP has " + std::to_string(m.w_d.size()) + "/" +
                     std::to_string(m.w_a.size()) + " distance weights but the graph has " +
                     std::to_string(ops.descendant.size()) + "/" +
                     std::to_string(ops.ancestor.size()) + " hop buckets");
    alpha_d = distance_softmax(m.w_d);
    alpha_a = distance_softmax(m.w_a);
  } else if (ops.descendant.size() != 1 || ops.ancestor.size() != 1) {
    detail::reject("unweighted DGP expects one merged operator per phase");
  }
  ForwardTrace trace;
  trace.kind = ForwardTrace::Kind::dgp;
  trace.layers.push_back(detail::layer_forward(ops.descendant, std::move(alpha_d), m.theta_d, x,
                                               m.negative_slope, m.dropout_rate, opt,
                                               "descendant phase"));
  trace.layers.push_back(detail::layer_forward(ops.ancestor, std::move(alpha_a), m.theta_a,
                                               trace.layers[0].activated, m.negative_slope,
                                               m.dropout_rate, opt, "ancestor phase"));
  trace.output = l2_normalize_rows(trace.layers[1].activated);
  return {trace.output, std::move(trace)};
}

// Gradients aligned with parameters(model): one DenseMatrix per tensor,
// distance-weight gradients as 1 x (K+1).
using Gradients = std::vector<DenseMatrix>;

inline Gradients gcn_backward(const GcnStack& stack, const Propagator& a_norm,
                              const ForwardTrace& trace, const DenseMatrix& grad_out,
                              unsigned threads = 1) {
  if (trace.kind != ForwardTrace::Kind::gcn || trace.layers.size() != stack.layers.size())
    detail::reject("trace does not come from this GCN stack");
  if (grad_out.rows() != trace.output.rows() || grad_out.cols() != trace.output.cols())
    detail::reject("output gradient " + grad_out.shape() + " does not match output " +
                   trace.output.shape());
  Gradients grads(stack.layers.size());
  DenseMatrix g = l2_normalize_rows_backward(trace.layers.back().activated, grad_out);
  for (std::size_t l = stack.layers.size(); l-- > 0;) {
    auto lg = detail::layer_backward(a_norm, stack.layers[l], trace.layers[l], g,
                                     stack.negative_slope, l > 0, false, threads);
    grads[l] = std::move(lg.theta);
    g = std::move(lg.input);
  }
  return grads;
}

inline Gradients dgp_backward(const DgpModel& m, const DgpOperators& ops,
                              const ForwardTrace& trace, const DenseMatrix& grad_out,
                              unsigned threads = 1) {
  if (trace.kind != ForwardTrace::Kind::dgp || trace.layers.size() != 2)
    detail::reject("trace does not come from a DGP forward pass");
  if (trace.layers[0].pre.cols() != m.theta_d.cols() || trace.layers[1].pre.cols() != m.theta_a.cols())
    detail::reject("trace dimensions do not match this DGP model");
  if (grad_out.rows() != trace.output.rows() || grad_out.cols() != trace.output.cols())
    detail::reject("output gradient " + grad_out.shape() + " does not match output " +
                   trace.output.shape());
  const DenseMatrix g = l2_normalize_rows_backward(trace.layers[1].activated, grad_out);
  auto anc = detail::layer_backward(ops.ancestor, m.theta_a, trace.layers[1], g, m.negative_slope,
                                    true, m.weighted, threads);
  auto desc = detail::layer_backward(ops.descendant, m.theta_d, trace.layers[0], anc.input,
                                     m.negative_slope, false, m.weighted, threads);
  Gradients grads;
  grads.push_back(std::move(desc.theta));
  grads.push_back(std::move(anc.theta));
  if (m.weighted) {
    auto gd = detail::softmax_backward(trace.layers[0].alpha, desc.alpha);
    auto ga = detail::softmax_backward(trace.layers[1].alpha, anc.alpha);
    grads.emplace_back(1, gd.size(), std::move(gd));
    grads.emplace_back(1, ga.size(), std::move(ga));
  }
  return grads;
}

// ---- dispatch over Model -------------------------------------------------

// Operators for whichever model is being run.
struct GraphOperators {
  Propagator gcn;
  DgpOperators dgp;
};

inline ForwardResult model_forward(const Model& model, const GraphOperators& g,
                                   const DenseMatrix& x, const ForwardOptions& opt = {}) {
  if (const auto* s = std::get_if<GcnStack>(&model)) return gcn_forward(*s, g.gcn, x, opt);
  return dgp_forward(std::get<DgpModel>(model), g.dgp, x, opt);
}

inline Gradients model_backward(const Model& model, const GraphOperators& g,
                                const ForwardTrace& trace, const DenseMatrix& grad_out,
                                unsigned threads = 1) {
  if (const auto* s = std::get_if<GcnStack>(&model))
    return gcn_backward(*s, g.gcn, trace, grad_out, threads);
  return dgp_backward(std::get<DgpModel>(model), g.dgp, trace, grad_out, threads);
}

// ---- smoothing ------------------------------------------------------------

inline double row_dispersion(const DenseMatrix& x) {
  double best = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.rows(); ++j) {
      double ss = 0.0;
      auto a = x.row(i);
      auto b = x.row(j);
      for (std::size_t k = 0; k < a.size(); ++k) ss += (a[k] - b[k]) * (a[k] - b[k]);
      best = std::max(best, ss);
    }
  return std::sqrt(best);
}

// Repeated neighbourhood averaging x <- D^{-1} A x. Returns the maximum
// pairwise row distance after each step. Graphs with edges must be connected.
inline std::vector<double> smoothing_trajectory(const SparseMatrix& a, DenseMatrix x,
                                                std::size_t steps) {
  if (a.rows() != a.cols()) detail::reject("smoothing needs a square adjacency, got " + a.shape());
  if (a.rows() != x.rows())
    detail::reject("smoothing: adjacency " + a.shape() + " vs features " + x.shape());
  if (!(transpose(a) == a)) detail::reject("smoothing needs a symmetric adjacency");
  for (std::size_t i = 0; i < a.rows(); ++i)
    if (a.at(i, i) == 0.0) detail::reject("smoothing: node " + std::to_string(i) + " lacks a self-loop");
  std::vector<bool> seen(a.rows(), false);
  std::deque<std::size_t> queue;
  if (a.rows() > 0) {
    seen[0] = true;
    queue.push_back(0);
  }
  std::size_t reached = 0;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    ++reached;
    for (std::size_t u : a.row_cols(v))
      if (!seen[u]) {
        seen[u] = true;
        queue.push_back(u);
      }
  }
  // a self-loop-only graph is the degenerate no-mixing case and is allowed
  if (reached != a.rows() && a.nnz() != a.rows())
    detail::reject("smoothing needs a connected graph (" + std::to_string(reached) + " of " +
                   std::to_string(a.rows()) + " nodes reachable from node 0)");
  const SparseMatrix p = row_normalize(a);
  std::vector<double> out;
  out.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    x = spmm(p, x);
    out.push_back(row_dispersion(x));
  }
  return out;
}

}  // namespace dgp
