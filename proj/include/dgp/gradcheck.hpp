#pragma once

// Central finite-difference check of model_backward on small random
// instances. The finite-difference side only ever calls the forward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dgp/data.hpp"
#include "dgp/propagation.hpp"
#include "dgp/training.hpp"

namespace dgp {

struct GradCheckInstance {
  TrainConfig config;
  Model model;
  GraphOperators graph;
  DenseMatrix x;
  DenseMatrix target;
  SeenMask mask;
  std::uint64_t dropout_seed = 0;
};

struct ParamError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<ParamError> params;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& p : params) m = std::max(m, p.max_rel_error);
    return m;
  }
  const ParamError& worst() const {
    return *std::max_element(params.begin(), params.end(), [](const auto& a, const auto& b) {
      return a.max_rel_error < b.max_rel_error;
    });
  }
};

// Training-mode loss with dropout masks replayed from a fixed seed.
inline double instance_loss(const GradCheckInstance& inst, const Model& model) {
  Rng rng(inst.dropout_seed);
  auto fwd = model_forward(model, inst.graph, inst.x, {Mode::train, &rng, 1});
  return masked_mse_loss(fwd.output, inst.target, inst.mask).loss;
}

// |analytic - numeric| / max(|analytic|, |numeric|), with absolute
// differences below abs_floor counted as exact.
inline double gradient_rel_error(double analytic, double numeric, double abs_floor = 1e-7) {
  const double diff = std::abs(analytic - numeric);
  if (diff < abs_floor) return 0.0;
  return diff / std::max(std::abs(analytic), std::abs(numeric));
}

inline GradCheckReport check_gradients(const GradCheckInstance& inst, double step = 1e-5) {
  Rng rng(inst.dropout_seed);
  auto fwd = model_forward(inst.model, inst.graph, inst.x, {Mode::train, &rng, 1});
  const auto loss = masked_mse_loss(fwd.output, inst.target, inst.mask);
  const Gradients analytic = model_backward(inst.model, inst.graph, fwd.trace, loss.grad);

  GradCheckReport report;
  Model probe = inst.model;
  auto views = parameters(probe);
  for (std::size_t p = 0; p < views.size(); ++p) {
    ParamError err{views[p].name, 0.0, 0};
    for (std::size_t i = 0; i < views[p].values.size(); ++i) {
      double& v = views[p].values[i];
      const double orig = v;
      v = orig + step;
      const double up = instance_loss(inst, probe);
      v = orig - step;
      const double down = instance_loss(inst, probe);
      v = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double e = gradient_rel_error(analytic[p].values()[i], numeric);
      if (e > err.max_rel_error) {
        err.max_rel_error = e;
        err.worst_index = i;
      }
    }
    report.params.push_back(err);
  }
  return report;
}

enum class GradCheckKind { gcn1, gcn2, gcn3, dgp_weighted, dgp_unweighted };

inline const char* to_string(GradCheckKind k) {
  switch (k) {
    case GradCheckKind::gcn1: return "gcn-1";
    case GradCheckKind::gcn2: return "gcn-2";
    case GradCheckKind::gcn3: return "gcn-3";
    case GradCheckKind::dgp_weighted: return "dgp";
    case GradCheckKind::dgp_unweighted: return "dgp-w";
  }
  return "?";
}

namespace detail {

inline double min_abs_preactivation(const ForwardTrace& t) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& l : t.layers)
    for (double v : l.pre.values()) m = std::min(m, std::abs(v));
  return m;
}

}  // namespace detail

// Random instance with N <= 12, widths <= 8, K <= 3. Instances whose
// pre-activations sit within `kink_margin` of the leaky-ReLU kink are
// redrawn so that a finite-difference step cannot cross it.
inline GradCheckInstance make_gradcheck_instance(GradCheckKind kind, std::uint64_t seed,
                                                 double kink_margin = 1e-3) {
  Rng rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + detail::uniform_index(rng, hi - lo + 1); };
  for (;;) {
    GradCheckInstance inst;
    SynthSpec shape;
    shape.n_nodes = pick(3, 12);
    shape.max_depth = pick(2, 5);
    shape.multi_parent_prob = 0.3;
    shape.seed = rng();
    const TaxonomyDag dag = synth_hierarchy(shape);
    const std::size_t n = dag.size();
    const std::size_t s = pick(2, 8);
    const std::size_t p = pick(2, 8);

    auto& cfg = inst.config;
    cfg.hidden_dim = pick(2, 8);
    cfg.K = pick(1, 3);
    cfg.dropout_rate = 0.5;
    cfg.negative_slope = 0.2;
    cfg.seed = rng();
    switch (kind) {
      case GradCheckKind::gcn1: cfg.model_kind = ModelKind::gcn; cfg.layers = 1; break;
      case GradCheckKind::gcn2: cfg.model_kind = ModelKind::gcn; cfg.layers = 2; break;
      case GradCheckKind::gcn3: cfg.model_kind = ModelKind::gcn; cfg.layers = 3; break;
      case GradCheckKind::dgp_weighted: cfg.model_kind = ModelKind::dgp; cfg.weighted = true; break;
      case GradCheckKind::dgp_unweighted: cfg.model_kind = ModelKind::dgp; cfg.weighted = false; break;
    }
    Rng init_rng(cfg.seed);
    inst.model = init_model(cfg, s, p, init_rng);
    if (auto* m = std::get_if<DgpModel>(&inst.model); m && m->weighted) {
      for (double& w : m->w_d) w = detail::standard_normal(rng);
      for (double& w : m->w_a) w = detail::standard_normal(rng);
    }
    inst.graph = prepare_graph(dag, cfg);
    inst.x = DenseMatrix(n, s);
    for (double& v : inst.x.values()) v = detail::standard_normal(rng);
    for (std::size_t i = 0; i < n; ++i)
      if (uniform01(rng) < 0.6 || inst.mask.indices.empty()) inst.mask.indices.push_back(i);
    inst.target = DenseMatrix(inst.mask.size(), p);
    for (double& v : inst.target.values()) v = detail::standard_normal(rng);
    inst.target = l2_normalize_rows(inst.target);
    inst.dropout_seed = rng();

    Rng probe(inst.dropout_seed);
    auto fwd = model_forward(inst.model, inst.graph, inst.x, {Mode::train, &probe, 1});
    if (detail::min_abs_preactivation(fwd.trace) >= kink_margin) return inst;
  }
}

}  // namespace dgp
