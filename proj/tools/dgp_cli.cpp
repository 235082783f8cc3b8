// dgp: command-line driver for graph statistics, training, evaluation,
// ablations, diagnostics and synthetic data generation.
//
// Exit codes: 0 success, 1 validation error, 2 numerical failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dgp/dgp.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace dgp;

namespace {

struct CommonOptions {
  std::uint64_t seed = 0;
  std::string out;
  std::string edges;
  std::string embeddings;
  std::string weights;
  std::string synth;
};

struct ModelOptions {
  std::string model = "dgp";
  std::size_t layers = 1;
  std::size_t K = 4;
  std::size_t hidden = 2048;
  bool no_weighting = false;
  bool no_two_phase = false;
  std::string norm = "nonsym";
  std::size_t epochs = 3000;
  double learning_rate = 0.001;
  double weight_decay = 0.0005;
  double dropout = 0.5;
  double negative_slope = 0.2;
  unsigned threads = 1;
};

void add_common(CLI::App* app, CommonOptions& o, bool needs_out) {
  app->add_option("--seed", o.seed, "random seed")->capture_default_str();
  auto* out = app->add_option("--out", o.out, "output directory");
  if (needs_out) out->required();
  app->add_option("--edges", o.edges, "child<TAB>parent edge list");
  app->add_option("--embeddings", o.embeddings, "node embedding table");
  app->add_option("--weights", o.weights, "seen-class classifier table");
  app->add_option("--synth", o.synth, "synthetic task spec, e.g. \"n=100,depth=8\"");
}

void add_model(CLI::App* app, ModelOptions& m) {
  app->add_option("--model", m.model, "sgcn | gcn | dgp")
      ->check(CLI::IsMember({"sgcn", "gcn", "dgp"}))
      ->capture_default_str();
  app->add_option("--layers", m.layers, "hidden layers of the gcn model")->capture_default_str();
  app->add_option("--K", m.K, "hop buckets of the dgp model")->capture_default_str();
  app->add_option("--hidden", m.hidden, "hidden width")->capture_default_str();
  app->add_flag("--no-weighting", m.no_weighting, "dgp without distance weights");
  app->add_flag("--no-two-phase", m.no_two_phase, "dgp with one merged adjacency per layer");
  app->add_option("--norm", m.norm, "sym | nonsym")
      ->check(CLI::IsMember({"sym", "nonsym"}))
      ->capture_default_str();
  app->add_option("--epochs", m.epochs)->capture_default_str();
  app->add_option("--learning-rate,--lr", m.learning_rate)->capture_default_str();
  app->add_option("--weight-decay", m.weight_decay)->capture_default_str();
  app->add_option("--dropout", m.dropout)->capture_default_str();
  app->add_option("--negative-slope", m.negative_slope)->capture_default_str();
  app->add_option("--threads", m.threads)->capture_default_str();
}

TrainConfig to_config(const ModelOptions& m, std::uint64_t seed) {
  TrainConfig c;
  c.epochs = m.epochs;
  c.learning_rate = m.learning_rate;
  c.weight_decay = m.weight_decay;
  c.dropout_rate = m.dropout;
  c.negative_slope = m.negative_slope;
  c.K = m.K;
  c.hidden_dim = m.hidden;
  c.normalization = parse_normalization(m.norm);
  c.seed = seed;
  c.threads = std::max(1u, m.threads);
  if (m.model == "dgp") {
    c.model_kind = ModelKind::dgp;
    c.weighted = !m.no_weighting;
    c.two_phase = !m.no_two_phase;
  } else {
    c.model_kind = ModelKind::gcn;
    c.layers = m.model == "sgcn" ? 1 : m.layers;
  }
  c.validate();
  return c;
}

json config_json(const TrainConfig& c) {
  json j;
  j["model"] = to_string(c.model_kind);
  if (c.model_kind == ModelKind::gcn) {
    j["layers"] = c.layers;
    j["normalization"] = to_string(c.normalization);
  } else {
    j["K"] = c.K;
    j["weighted"] = c.weighted;
    j["two_phase"] = c.two_phase;
  }
  j["hidden"] = c.hidden_dim;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["dropout"] = c.dropout_rate;
  j["negative_slope"] = c.negative_slope;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

// Model hyperparameters recovered from a checkpoint, enough to rebuild the
// graph operators it was trained with.
TrainConfig config_from_model(const Model& model) {
  TrainConfig c;
  if (const auto* g = std::get_if<GcnStack>(&model)) {
    c.model_kind = ModelKind::gcn;
    c.layers = g->hidden_layers();
    c.normalization = g->normalization;
  } else {
    const auto& m = std::get<DgpModel>(model);
    c.model_kind = ModelKind::dgp;
    c.K = m.K();
    c.weighted = m.weighted;
    c.two_phase = m.two_phase;
  }
  return c;
}

// ---- inputs -------------------------------------------------------------------

struct Inputs {
  TaxonomyDag dag;
  DenseMatrix x;
  SeenTargets seen;
  std::vector<std::size_t> unseen;
  std::optional<FeatureBatch> unseen_test;
  json description;
};

std::vector<std::size_t> complement(const SeenMask& mask, std::size_t n) {
  std::vector<bool> is_seen(n, false);
  for (auto i : mask.indices) is_seen[i] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!is_seen[i]) out.push_back(i);
  return out;
}

SynthSpec resolve_spec(const CommonOptions& o) {
  SynthSpec base;
  base.seed = o.seed;
  return parse_synth_spec(o.synth, base);
}

Inputs load_inputs(const CommonOptions& o) {
  const bool files = !o.edges.empty() || !o.embeddings.empty() || !o.weights.empty();
  if (!o.synth.empty() && files) detail::reject("give either --synth or input files, not both");
  if (!o.synth.empty()) {
    const SynthSpec spec = resolve_spec(o);
    auto dag = synth_hierarchy(spec);
    auto task = synth_task(dag, spec);
    Inputs in{std::move(dag), task.embeddings.matrix, {task.mask, task.seen_weights.matrix},
              task.unseen, task.unseen_test, json::object()};
    in.description["synth"] = to_string(spec);
    return in;
  }
  if (o.edges.empty() || o.embeddings.empty() || o.weights.empty())
    detail::reject("inputs need --synth or all of --edges, --embeddings, --weights");
  auto dag = build_dag(load_edge_list(o.edges));
  const auto emb = load_table(o.embeddings);
  DenseMatrix x = align_to_graph(emb, dag);
  auto seen = seen_targets(load_table(o.weights), dag);
  auto unseen = complement(seen.mask, dag.size());
  Inputs in{std::move(dag), std::move(x), std::move(seen), std::move(unseen), std::nullopt, json::object()};
  in.description["edges"] = o.edges;
  in.description["embeddings"] = o.embeddings;
  in.description["weights"] = o.weights;
  return in;
}

// ---- output helpers ---------------------------------------------------------------

class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv) : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["argv"] = std::vector<std::string>(argv, argv + argc);
  }
  json& operator[](const char* key) { return j_[key]; }
  void output(const fs::path& p) { j_["outputs"].push_back(p.string()); }

  void write(const fs::path& dir) {
    j_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream os(dir / "manifest.json");
    if (!os) detail::reject("cannot write " + (dir / "manifest.json").string());
    os << j_.dump(2) << '\n';
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) detail::reject("cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

std::ofstream open_file(const fs::path& p) {
  std::ofstream os(p);
  if (!os) detail::reject("cannot write " + p.string());
  return os;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<std::size_t> parse_k_list(const std::string& s) {
  std::vector<std::size_t> ks;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t k = 0;
    const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), k);
    if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size() || k == 0)
      detail::reject("--k expects positive integers, got '" + tok + "'");
    ks.push_back(k);
  }
  if (ks.empty()) detail::reject("--k list is empty");
  return ks;
}

const FeatureBatch& require_test_batch(const Inputs& in) {
  if (!in.unseen_test) detail::reject("evaluation needs --features and --labels (or --synth)");
  return *in.unseen_test;
}

HitReport evaluate(const Inputs& in, const DenseMatrix& predicted, bool generalized,
                   const std::vector<std::size_t>& ks) {
  EvalProtocol p{in.unseen, generalized ? EvalMode::generalized : EvalMode::unseen_only, ks};
  return generalized_eval(predicted, in.seen.weights, in.seen.mask, require_test_batch(in), p);
}

// ---- train --------------------------------------------------------------------

struct TrainCmd {
  CommonOptions common;
  ModelOptions model;
};

int run_train(const TrainCmd& c, int argc, char** argv) {
  const TrainConfig cfg = to_config(c.model, c.common.seed);
  const Inputs in = load_inputs(c.common);
  const fs::path out = prepare_out(c.common.out);
  Manifest man("train", argc, argv);
  man["seed"] = c.common.seed;
  man["config"] = config_json(cfg);
  man["inputs"] = in.description;

  const auto graph = prepare_graph(in.dag, cfg);
  const std::size_t every = std::max<std::size_t>(1, cfg.epochs / 10);
  auto progress = [&](std::size_t epoch, double loss) {
    if (epoch % every == 0 || epoch + 1 == cfg.epochs)
      std::cerr << "epoch " << epoch << " loss " << format_double(loss) << '\n';
  };
  const auto res = train(cfg, graph, in.x, in.seen.weights, in.seen.mask, progress);

  save_checkpoint((out / "checkpoint.txt").string(), res.model);
  man.output(out / "checkpoint.txt");
  {
    auto os = open_file(out / "loss.csv");
    os << "epoch,loss\n";
    for (std::size_t e = 0; e < res.losses.size(); ++e) os << e << ',' << format_double(res.losses[e]) << '\n';
  }
  man.output(out / "loss.csv");
  if (!res.alpha_d.empty()) {
    auto os = open_file(out / "alpha.csv");
    os << "phase,k,alpha\n";
    for (std::size_t k = 0; k < res.alpha_d.size(); ++k)
      os << "descendant," << k << ',' << format_double(res.alpha_d[k]) << '\n';
    for (std::size_t k = 0; k < res.alpha_a.size(); ++k)
      os << "ancestor," << k << ',' << format_double(res.alpha_a[k]) << '\n';
    man.output(out / "alpha.csv");
  }

  json metrics;
  metrics["final_loss"] = res.losses.back();
  metrics["parameters"] = parameter_count(res.model);
  if (!res.alpha_d.empty()) {
    metrics["alpha_descendant"] = res.alpha_d;
    metrics["alpha_ancestor"] = res.alpha_a;
  }
  man["metrics"] = metrics;
  man.write(out);
  std::cout << "parameters " << parameter_count(res.model) << '\n'
            << "final_loss " << format_double(res.losses.back()) << '\n'
            << "checkpoint " << (out / "checkpoint.txt").string() << '\n';
  return 0;
}

// ---- eval ---------------------------------------------------------------------

struct EvalCmd {
  CommonOptions common;
  std::string checkpoint;
  std::string features;
  std::string labels;
  std::string k_list = "1,2,5,10,20";
  bool generalized = false;
  unsigned threads = 1;
};

int run_eval(const EvalCmd& c, int argc, char** argv) {
  const auto ks = parse_k_list(c.k_list);
  Inputs in = load_inputs(c.common);
  if (!c.features.empty() || !c.labels.empty()) {
    if (c.features.empty() || c.labels.empty()) detail::reject("--features and --labels go together");
    in.unseen_test = load_feature_batch(c.features, c.labels, in.dag);
    in.description["features"] = c.features;
    in.description["labels"] = c.labels;
  }
  const Model model = load_checkpoint(c.checkpoint);
  const auto graph = prepare_graph(in.dag, config_from_model(model));
  const auto predicted = predict_classifiers(model, graph, in.x, std::max(1u, c.threads));
  const auto report = evaluate(in, predicted, c.generalized, ks);

  write_hit_csv(std::cout, report);
  if (!c.common.out.empty()) {
    const fs::path out = prepare_out(c.common.out);
    Manifest man("eval", argc, argv);
    man["seed"] = c.common.seed;
    man["checkpoint"] = c.checkpoint;
    man["inputs"] = in.description;
    man["mode"] = c.generalized ? "generalized" : "unseen_only";
    {
      auto os = open_file(out / "hits.csv");
      write_hit_csv(os, report);
    }
    man.output(out / "hits.csv");
    json metrics;
    metrics["candidates"] = report.candidates;
    metrics["examples"] = report.examples;
    for (std::size_t i = 0; i < ks.size(); ++i)
      metrics["hit@" + std::to_string(ks[i])] = report.hit_percent[i];
    man["metrics"] = metrics;
    man.write(out);
  }
  return 0;
}

// ---- ablate -------------------------------------------------------------------

struct AblateCmd {
  CommonOptions common;
  ModelOptions model;
  std::size_t seeds = 3;
  std::string variants = "sgcn,dgp-w,dgp,dgp-1phase";
  std::string k_list = "1,2,5,10,20";
  bool generalized = false;
};

// Known variants: sgcn, gcnL (L hidden layers), dgp, dgp-w (no distance
// weights), dgp-1phase (merged adjacency), free (sgcn layers, no graph).
struct Variant {
  std::string name;
  TrainConfig cfg;
  bool graph_free = false;
};

Variant make_variant(const std::string& name, const ModelOptions& base, std::uint64_t seed) {
  ModelOptions m = base;
  bool graph_free = false;
  if (name == "sgcn" || name == "free") {
    m.model = "sgcn";
    graph_free = name == "free";
  } else if (name.size() > 3 && name.starts_with("gcn")) {
    m.model = "gcn";
    m.layers = detail::parse_count(std::string_view(name).substr(3), "variant '" + name + "'");
  } else if (name == "dgp") {
    m.model = "dgp";
    m.no_weighting = false;
    m.no_two_phase = false;
  } else if (name == "dgp-w") {
    m.model = "dgp";
    m.no_weighting = true;
    m.no_two_phase = false;
  } else if (name == "dgp-1phase") {
    m.model = "dgp";
    m.no_weighting = false;
    m.no_two_phase = true;
  } else {
    detail::reject("unknown variant '" + name + "' (sgcn, gcnL, dgp, dgp-w, dgp-1phase, free)");
  }
  return {name, to_config(m, seed), graph_free};
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation; a single run reports 0.
double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int run_ablate(const AblateCmd& c, int argc, char** argv) {
  const auto ks = parse_k_list(c.k_list);
  if (c.seeds < 1) detail::reject("--seeds must be at least 1");
  std::vector<std::string> names;
  {
    std::stringstream ss(c.variants);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) names.push_back(tok);
  }
  if (names.empty()) detail::reject("--variants is empty");
  for (const auto& n : names) make_variant(n, c.model, 0);  // validate before any training

  const Inputs in = load_inputs(c.common);
  require_test_batch(in);
  const fs::path out = prepare_out(c.common.out);
  Manifest man("ablate", argc, argv);
  man["seed"] = c.common.seed;
  man["inputs"] = in.description;
  man["seeds"] = c.seeds;
  man["mode"] = c.generalized ? "generalized" : "unseen_only";

  auto runs = open_file(out / "ablate_runs.csv");
  runs << "variant,seed";
  for (auto k : ks) runs << ",hit" << k;
  runs << '\n';

  struct Row {
    std::string name;
    std::vector<std::vector<double>> hits;  // per k, per seed
  };
  std::vector<Row> rows;
  json configs = json::object();
  for (const auto& name : names) {
    Row row{name, std::vector<std::vector<double>>(ks.size())};
    for (std::size_t s = 0; s < c.seeds; ++s) {
      const std::uint64_t seed = c.common.seed + s;
      const Variant v = make_variant(name, c.model, seed);
      if (s == 0) configs[name] = config_json(v.cfg);
      const auto graph = v.graph_free ? graph_free_operators(in.dag.size()) : prepare_graph(in.dag, v.cfg);
      const auto res = train(v.cfg, graph, in.x, in.seen.weights, in.seen.mask);
      const auto pred = predict_classifiers(res.model, graph, in.x, v.cfg.threads);
      const auto report = evaluate(in, pred, c.generalized, ks);
      runs << name << ',' << seed;
      for (std::size_t i = 0; i < ks.size(); ++i) {
        row.hits[i].push_back(report.hit_percent[i]);
        runs << ',' << fixed2(report.hit_percent[i]);
      }
      runs << '\n';
      std::cerr << name << " seed " << seed << " hit@" << ks[0] << ' ' << fixed2(report.hit_percent[0]) << '\n';
    }
    rows.push_back(std::move(row));
  }
  runs.close();
  man.output(out / "ablate_runs.csv");
  man["configs"] = configs;

  auto summary = open_file(out / "ablate_summary.csv");
  summary << "variant,runs";
  for (auto k : ks) summary << ",hit" << k << "_mean,hit" << k << "_std";
  summary << '\n';
  json metrics = json::object();
  for (const auto& r : rows) {
    summary << r.name << ',' << c.seeds;
    std::cout << r.name;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double m = mean_of(r.hits[i]), sd = stddev_of(r.hits[i]);
      summary << ',' << fixed2(m) << ',' << fixed2(sd);
      std::cout << "  hit@" << ks[i] << ' ' << fixed2(m) << " +- " << fixed2(sd);
      metrics[r.name]["hit@" + std::to_string(ks[i])] = {{"mean", m}, {"std", sd}};
    }
    summary << '\n';
    std::cout << '\n';
  }
  summary.close();
  man.output(out / "ablate_summary.csv");
  man["metrics"] = metrics;
  man.write(out);
  return 0;
}

// ---- diagnose -------------------------------------------------------------------

struct DiagnoseCmd {
  CommonOptions common;
  std::size_t instances = 20;
  std::string smooth;
  double tolerance = 1e-4;
};

struct SmoothSpec {
  std::size_t n = 30;
  std::size_t steps = 200;
  std::size_t dim = 8;
  double extra = 0.1;
  std::string graph = "random";
  std::uint64_t seed = 0;
};

SmoothSpec parse_smooth(const std::string& text, std::uint64_t seed) {
  SmoothSpec s;
  s.seed = seed;
  std::string norm = text;
  std::replace(norm.begin(), norm.end(), ',', ' ');
  for (auto tok : detail::split_ws(norm)) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) detail::reject("smoothing spec item '" + std::string(tok) + "' is not key=value");
    const std::string key(tok.substr(0, eq));
    const std::string_view val = tok.substr(eq + 1);
    const std::string where = "smoothing spec '" + key + "'";
    if (key == "n") s.n = detail::parse_count(val, where);
    else if (key == "steps") s.steps = detail::parse_count(val, where);
    else if (key == "dim") s.dim = detail::parse_count(val, where);
    else if (key == "p") s.extra = detail::parse_double(val, where);
    else if (key == "seed") s.seed = detail::parse_count(val, where);
    else if (key == "graph") s.graph = std::string(val);
    else detail::reject("unknown smoothing spec key '" + key + "'");
  }
  if (s.n < 1 || s.dim < 1) detail::reject("smoothing needs n >= 1 and dim >= 1");
  if (s.graph != "random" && s.graph != "identity" && s.graph != "complete")
    detail::reject("smoothing graph must be random, identity or complete");
  return s;
}

int run_diagnose(const DiagnoseCmd& c, int argc, char** argv) {
  const SmoothSpec sm = parse_smooth(c.smooth, c.common.seed);
  bool ok = true;
  json grad = json::object();
  std::cout << "gradient check (" << c.instances << " instances per model, tolerance "
            << format_double(c.tolerance) << ")\n";
  for (auto kind : {GradCheckKind::gcn1, GradCheckKind::gcn2, GradCheckKind::gcn3,
                    GradCheckKind::dgp_weighted, GradCheckKind::dgp_unweighted}) {
    double worst = 0.0;
    std::string worst_param = "-";
    std::uint64_t worst_seed = 0;
    for (std::size_t i = 0; i < c.instances; ++i) {
      const std::uint64_t seed = c.common.seed * 1000003 + i;
      const auto report = check_gradients(make_gradcheck_instance(kind, seed));
      if (report.max_rel_error() >= worst) {
        worst = report.max_rel_error();
        worst_param = report.worst().name;
        worst_seed = seed;
      }
    }
    const bool pass = worst < c.tolerance;
    ok = ok && pass;
    std::cout << "  " << to_string(kind) << " max_rel_error " << format_double(worst) << " (" << worst_param
              << ", instance seed " << worst_seed << ") " << (pass ? "ok" : "FAILED") << '\n';
    grad[to_string(kind)] = {{"max_rel_error", worst}, {"worst_parameter", worst_param}, {"pass", pass}};
  }

  SparseMatrix a;
  if (sm.graph == "identity") {
    a = SparseMatrix::identity(sm.n);
  } else if (sm.graph == "complete") {
    a = synth_connected_graph(sm.n, 1.0, sm.seed);
  } else {
    a = synth_connected_graph(sm.n, sm.extra, sm.seed);
  }
  Rng rng(sm.seed + 17);
  DenseMatrix x(sm.n, sm.dim);
  for (double& v : x.values()) v = detail::standard_normal(rng);
  const double initial = row_dispersion(x);
  const auto curve = smoothing_trajectory(a, x, sm.steps);
  std::cout << "smoothing graph=" << sm.graph << " n=" << sm.n << " steps=" << sm.steps << '\n'
            << "step,dispersion\n0," << format_double(initial) << '\n';
  for (std::size_t s = 0; s < curve.size(); ++s) std::cout << s + 1 << ',' << format_double(curve[s]) << '\n';
  std::cout << "final_dispersion " << format_double(curve.empty() ? initial : curve.back()) << '\n';

  if (!c.common.out.empty()) {
    const fs::path out = prepare_out(c.common.out);
    Manifest man("diagnose", argc, argv);
    man["seed"] = c.common.seed;
    man["instances"] = c.instances;
    man["smoothing"] = {{"graph", sm.graph}, {"n", sm.n}, {"steps", sm.steps}, {"p", sm.extra},
                        {"dim", sm.dim}, {"seed", sm.seed}};
    {
      auto os = open_file(out / "smoothing.csv");
      os << "step,dispersion\n0," << format_double(initial) << '\n';
      for (std::size_t s = 0; s < curve.size(); ++s) os << s + 1 << ',' << format_double(curve[s]) << '\n';
    }
    man.output(out / "smoothing.csv");
    man["metrics"] = {{"gradient_check", grad},
                      {"final_dispersion", curve.empty() ? initial : curve.back()}};
    man.write(out);
  }
  if (!ok) {
    std::cerr << "error: gradient check failed\n";
    return 2;
  }
  return 0;
}

// ---- graph-stats ------------------------------------------------------------------

struct GraphStatsCmd {
  CommonOptions common;
  std::size_t K = 4;
};

int run_graph_stats(const GraphStatsCmd& c, int argc, char** argv) {
  TaxonomyDag dag;
  json source;
  if (!c.common.synth.empty() && !c.common.edges.empty()) detail::reject("give either --synth or --edges");
  if (!c.common.synth.empty()) {
    const SynthSpec spec = resolve_spec(c.common);
    dag = synth_hierarchy(spec);
    source["synth"] = to_string(spec);
  } else if (!c.common.edges.empty()) {
    dag = build_dag(load_edge_list(c.common.edges));
    source["edges"] = c.common.edges;
  } else {
    detail::reject("graph-stats needs --edges or --synth");
  }
  const auto s = graph_stats(dag, khop_decompose(dag, c.K, Direction::ancestor));
  std::cout << "nodes " << s.nodes << '\n'
            << "edges " << s.edges << '\n'
            << "hierarchy_nnz " << s.hierarchy_nnz << '\n'
            << "dense_nnz " << s.dense_nnz << '\n'
            << "hierarchy_density " << format_double(s.hierarchy_density) << '\n'
            << "dense_density " << format_double(s.dense_density) << '\n'
            << "density_ratio " << format_double(s.density_ratio) << '\n';
  if (!c.common.out.empty()) {
    const fs::path out = prepare_out(c.common.out);
    Manifest man("graph-stats", argc, argv);
    man["inputs"] = source;
    man["K"] = c.K;
    json stats = {{"nodes", s.nodes},
                  {"edges", s.edges},
                  {"hierarchy_nnz", s.hierarchy_nnz},
                  {"dense_nnz", s.dense_nnz},
                  {"hierarchy_density", s.hierarchy_density},
                  {"dense_density", s.dense_density},
                  {"density_ratio", s.density_ratio}};
    {
      auto os = open_file(out / "graph_stats.json");
      os << stats.dump(2) << '\n';
    }
    man.output(out / "graph_stats.json");
    man["metrics"] = stats;
    man.write(out);
  }
  return 0;
}

// ---- synth ----------------------------------------------------------------------

int run_synth(const CommonOptions& c, int argc, char** argv) {
  const SynthSpec spec = resolve_spec(c);
  const auto dag = synth_hierarchy(spec);
  const auto task = synth_task(dag, spec);
  const fs::path out = prepare_out(c.out);
  Manifest man("synth", argc, argv);
  man["spec"] = to_string(spec);

  auto emit = [&](const std::string& name, auto&& writer) {
    writer((out / name).string());
    man.output(out / name);
  };
  emit("edges.tsv", [&](const std::string& p) { save_edge_list(p, edge_pairs(dag)); });
  emit("embeddings.txt", [&](const std::string& p) { save_table(p, task.embeddings); });
  emit("weights.txt", [&](const std::string& p) { save_table(p, task.seen_weights); });
  emit("true_weights.txt", [&](const std::string& p) { save_table(p, {dag.node_ids(), task.true_weights}); });
  save_feature_batch((out / "unseen_features.txt").string(), (out / "unseen_labels.txt").string(),
                     task.unseen_test, dag);
  man.output(out / "unseen_features.txt");
  man.output(out / "unseen_labels.txt");
  save_feature_batch((out / "seen_features.txt").string(), (out / "seen_labels.txt").string(),
                     task.seen_test, dag);
  man.output(out / "seen_features.txt");
  man.output(out / "seen_labels.txt");
  man["metrics"] = {{"nodes", dag.size()},
                    {"edges", dag.edge_count()},
                    {"seen", task.mask.size()},
                    {"unseen", task.unseen.size()}};
  man.write(out);
  std::cout << "nodes " << dag.size() << '\n'
            << "edges " << dag.edge_count() << '\n'
            << "seen " << task.mask.size() << '\n'
            << "unseen " << task.unseen.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense graph propagation for zero-shot classifier regression"};
  app.require_subcommand(1);

  TrainCmd train_cmd;
  auto* train_app = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train_app, train_cmd.common, true);
  add_model(train_app, train_cmd.model);

  EvalCmd eval_cmd;
  auto* eval_app = app.add_subcommand("eval", "Hit@k of a checkpoint on held-out features");
  add_common(eval_app, eval_cmd.common, false);
  eval_app->add_option("--checkpoint", eval_cmd.checkpoint)->required();
  eval_app->add_option("--features", eval_cmd.features, "feature table of the test examples");
  eval_app->add_option("--labels", eval_cmd.labels, "class id per test example");
  eval_app->add_option("--k", eval_cmd.k_list, "comma-separated k values")->capture_default_str();
  eval_app->add_flag("--generalized", eval_cmd.generalized, "seen classes join the candidate set");
  eval_app->add_option("--threads", eval_cmd.threads)->capture_default_str();

  AblateCmd ablate_cmd;
  auto* ablate_app = app.add_subcommand("ablate", "train variants over several seeds and summarize Hit@k");
  add_common(ablate_app, ablate_cmd.common, true);
  add_model(ablate_app, ablate_cmd.model);
  ablate_app->add_option("--seeds", ablate_cmd.seeds, "runs per variant")->capture_default_str();
  ablate_app->add_option("--variants", ablate_cmd.variants, "sgcn, gcnL, dgp, dgp-w, dgp-1phase, free")
      ->capture_default_str();
  ablate_app->add_option("--k", ablate_cmd.k_list)->capture_default_str();
  ablate_app->add_flag("--generalized", ablate_cmd.generalized);

  DiagnoseCmd diag_cmd;
  auto* diag_app = app.add_subcommand("diagnose", "finite-difference gradient check and smoothing curve");
  add_common(diag_app, diag_cmd.common, false);
  diag_app->add_option("--instances", diag_cmd.instances, "random instances per model")->capture_default_str();
  diag_app->add_option("--smooth", diag_cmd.smooth, "e.g. \"n=30 steps=200 graph=random|identity|complete\"");
  diag_app->add_option("--tolerance", diag_cmd.tolerance)->capture_default_str();

  GraphStatsCmd gs_cmd;
  auto* gs_app = app.add_subcommand("graph-stats", "adjacency density of the hierarchy and its dense form");
  add_common(gs_app, gs_cmd.common, false);
  gs_app->add_option("--K", gs_cmd.K)->capture_default_str();

  CommonOptions synth_cmd;
  auto* synth_app = app.add_subcommand("synth", "write a synthetic task to disk");
  add_common(synth_app, synth_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_app) return run_train(train_cmd, argc, argv);
    if (*eval_app) return run_eval(eval_cmd, argc, argv);
    if (*ablate_app) return run_ablate(ablate_cmd, argc, argv);
    if (*diag_app) return run_diagnose(diag_cmd, argc, argv);
    if (*gs_app) return run_graph_stats(gs_cmd, argc, argv);
    if (*synth_app) return run_synth(synth_cmd, argc, argv);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
