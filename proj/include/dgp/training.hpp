#pragma once

// Stage-one training: regress classifier weights of the seen classes from
// the graph model's output with a masked squared loss and Adam.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "dgp/error.hpp"
#include "dgp/propagation.hpp"
#include "dgp/sparse.hpp"
#include "dgp/taxonomy.hpp"

namespace dgp {

// Rows of the graph output that carry ground-truth classifiers, in the
// order of the target matrix.
struct SeenMask {
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }

  void validate(std::size_t n_nodes) const {
    if (indices.empty()) detail::reject("seen mask is empty");
    if (indices.size() > n_nodes)
      detail::reject("seen mask has " + std::to_string(indices.size()) + " entries for " +
                     std::to_string(n_nodes) + " nodes");
    std::unordered_set<std::size_t> seen;
    for (std::size_t i : indices) {
      if (i >= n_nodes)
        detail::reject("seen index " + std::to_string(i) + " out of range for " +
                       std::to_string(n_nodes) + " nodes");
      if (!seen.insert(i).second) detail::reject("seen index " + std::to_string(i) + " repeated");
    }
  }
};

struct LossResult {
  double loss = 0.0;
  DenseMatrix grad;  // same shape as the prediction
};

// 1/(2M) * sum over masked rows of the squared error.
inline LossResult masked_mse_loss(const DenseMatrix& pred, const DenseMatrix& target,
                                  const SeenMask& mask) {
  if (target.rows() != mask.size())
    detail::reject("target has " + std::to_string(target.rows()) + " rows but the mask selects " +
                   std::to_string(mask.size()));
  if (target.cols() != pred.cols())
    detail::reject("target width " + std::to_string(target.cols()) + " vs prediction width " +
                   std::to_string(pred.cols()));
  mask.validate(pred.rows());
  const double m = static_cast<double>(mask.size());
  LossResult r{0.0, DenseMatrix(pred.rows(), pred.cols())};
  for (std::size_t i = 0; i < mask.size(); ++i) {
    auto p = pred.row(mask.indices[i]);
    auto t = target.row(i);
    auto g = r.grad.row(mask.indices[i]);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d = p[j] - t[j];
      r.loss += d * d;
      g[j] = d / m;
    }
  }
  r.loss /= 2.0 * m;
  return r;
}

// ---- Adam -------------------------------------------------------------------

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
};

// Weight decay enters as an L2 term on the gradient of parameters flagged
// for decay, before the moment updates.
inline void adam_step(std::span<const ParamView> params, const Gradients& grads, AdamState& st,
                      double lr, double weight_decay) {
  if (grads.size() != params.size())
    detail::reject("adam: " + std::to_string(grads.size()) + " gradients for " +
                   std::to_string(params.size()) + " parameters");
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.values.size(), 0.0);
      st.v.emplace_back(p.values.size(), 0.0);
    }
  }
  if (st.m.size() != params.size()) detail::reject("adam state was built for a different model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].values.size() || st.m[i].size() != params[i].values.size())
      detail::reject("adam: shape mismatch for parameter '" + params[i].name + "' (" +
                     shape_str(params[i].rows, params[i].cols) + " vs gradient " +
                     grads[i].shape() + ")");
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].values;
    auto g = grads[i].values();
    auto& m = st.m[i];
    auto& v = st.v[i];
    const double wd = params[i].decay ? weight_decay : 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] + wd * w[j];
      m[j] = st.beta1 * m[j] + (1.0 - st.beta1) * gj;
      v[j] = st.beta2 * v[j] + (1.0 - st.beta2) * gj * gj;
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + st.eps);
    }
  }
}

// ---- configuration ------------------------------------------------------------

enum class ModelKind { gcn, dgp };

struct TrainConfig {
  std::size_t epochs = 3000;
  double learning_rate = 0.001;
  double weight_decay = 0.0005;
  double dropout_rate = 0.5;
  double negative_slope = 0.2;
  std::size_t K = 4;
  std::size_t hidden_dim = 2048;
  std::size_t layers = 1;  // hidden layers of the GCN; 1 is SGCN
  Normalization normalization = Normalization::nonsym;
  std::uint64_t seed = 0;
  ModelKind model_kind = ModelKind::dgp;
  bool weighted = true;
  bool two_phase = true;
  unsigned threads = 1;

  void validate() const {
    if (epochs < 1) detail::reject("epochs must be at least 1");
    if (!(learning_rate > 0.0)) detail::reject("learning rate must be positive");
    if (!(weight_decay >= 0.0)) detail::reject("weight decay must be non-negative");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) detail::reject("dropout rate must lie in [0,1)");
    if (!std::isfinite(negative_slope)) detail::reject("negative slope must be finite");
    if (hidden_dim < 1) detail::reject("hidden dimension must be positive");
    if (model_kind == ModelKind::gcn && layers < 1) detail::reject("GCN needs at least one hidden layer");
    if (model_kind == ModelKind::dgp && K < 1) detail::reject("K must be at least 1");
  }
};

inline const char* to_string(ModelKind k) { return k == ModelKind::gcn ? "gcn" : "dgp"; }

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline DenseMatrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  DenseMatrix w(fan_in, fan_out);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  return w;
}

inline Model init_model(const TrainConfig& cfg, std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  if (cfg.model_kind == ModelKind::gcn) {
    GcnStack g;
    g.normalization = cfg.normalization;
    g.negative_slope = cfg.negative_slope;
    g.dropout_rate = cfg.dropout_rate;
    std::size_t fan_in = in_dim;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      g.layers.push_back(glorot_uniform(fan_in, cfg.hidden_dim, rng));
      fan_in = cfg.hidden_dim;
    }
    g.layers.push_back(glorot_uniform(fan_in, out_dim, rng));
    return g;
  }
  DgpModel m;
  m.theta_d = glorot_uniform(in_dim, cfg.hidden_dim, rng);
  m.theta_a = glorot_uniform(cfg.hidden_dim, out_dim, rng);
  if (cfg.weighted) {
    m.w_d.assign(cfg.K + 1, 0.0);
    m.w_a.assign(cfg.K + 1, 0.0);
  }
  m.negative_slope = cfg.negative_slope;
  m.dropout_rate = cfg.dropout_rate;
  m.weighted = cfg.weighted;
  m.two_phase = cfg.two_phase;
  return m;
}

// Builds only the operators the configured model consumes.
inline GraphOperators prepare_graph(const TaxonomyDag& dag, const TrainConfig& cfg) {
  GraphOperators g;
  if (cfg.model_kind == ModelKind::gcn) {
    g.gcn = make_gcn_operator(hierarchy_adjacency(dag), cfg.normalization);
  } else {
    const auto kh_d = khop_decompose(dag, cfg.K, Direction::descendant);
    const auto kh_a = khop_decompose(dag, cfg.K, Direction::ancestor);
    g.dgp = make_dgp_operators(kh_d, kh_a, cfg.weighted, cfg.two_phase);
  }
  return g;
}

// Identity adjacency: the same layers with no neighbourhood mixing.
inline GraphOperators graph_free_operators(std::size_t n_nodes) {
  GraphOperators g;
  g.gcn = Propagator::single(SparseMatrix::identity(n_nodes));
  return g;
}

inline std::size_t operator_dim(const GraphOperators& g) {
  return g.gcn.size() ? g.gcn.dim() : g.dgp.ancestor.dim();
}

// ---- training loop ------------------------------------------------------------

struct TrainResult {
  Model model;
  std::vector<double> losses;  // one per epoch, training-mode loss before the step
  std::vector<double> alpha_d; // learned hop weights (DGP weighted only)
  std::vector<double> alpha_a;
};

using ProgressSink = std::function<void(std::size_t epoch, double loss)>;

inline TrainResult train(const TrainConfig& cfg, const GraphOperators& graph, const DenseMatrix& x,
                         const DenseMatrix& w_true, const SeenMask& mask,
                         const ProgressSink& progress = {}) {
  cfg.validate();
  const std::size_t n = operator_dim(graph);
  if (x.rows() != n)
    detail::reject("embeddings have " + std::to_string(x.rows()) + " rows but the graph has " +
                   std::to_string(n) + " nodes");
  if (w_true.rows() != mask.size())
    detail::reject("classifier targets have " + std::to_string(w_true.rows()) +
                   " rows but the seen mask has " + std::to_string(mask.size()));
  mask.validate(n);
  if (!x.all_finite() || !w_true.all_finite()) detail::reject("training inputs contain non-finite values");

  Rng rng(cfg.seed);
  TrainResult res;
  res.model = init_model(cfg, x.cols(), w_true.cols(), rng);
  AdamState adam;
  ForwardOptions opt{Mode::train, &rng, cfg.threads};
  res.losses.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto fwd = model_forward(res.model, graph, x, opt);
    auto loss = masked_mse_loss(fwd.output, w_true, mask);
    if (!std::isfinite(loss.loss))
      throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
    res.losses.push_back(loss.loss);
    if (progress) progress(epoch, loss.loss);
    const auto grads = model_backward(res.model, graph, fwd.trace, loss.grad, cfg.threads);
    const auto params = parameters(res.model);
    adam_step(params, grads, adam, cfg.learning_rate, cfg.weight_decay);
  }
  if (const auto* m = std::get_if<DgpModel>(&res.model); m && m->weighted) {
    res.alpha_d = distance_softmax(m->w_d);
    res.alpha_a = distance_softmax(m->w_a);
  }
  return res;
}

// Inference pass: no dropout, rows L2-normalized.
inline DenseMatrix predict_classifiers(const Model& model, const GraphOperators& graph,
                                       const DenseMatrix& x, unsigned threads = 1) {
  return model_forward(model, graph, x, {Mode::infer, nullptr, threads}).output;
}

}  // namespace dgp
