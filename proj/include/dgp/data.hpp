#pragma once

// Text formats (edge lists, numeric tables, checkpoints) and the synthetic
// hierarchy/task generator used for desk-scale experiments.
//
//   edge list : "child<TAB>parent" per line, '#' lines are comments
//   table     : "<rows> <cols>" then "<id> v1 .. vcols" per row
//   checkpoint: "DGPCKPT 1", a model header line, then "name rows cols v.."
//
// Values are written with 17 significant digits so doubles round-trip.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dgp/error.hpp"
#include "dgp/propagation.hpp"
#include "dgp/sparse.hpp"
#include "dgp/taxonomy.hpp"
#include "dgp/training.hpp"
#include "dgp/zeroshot.hpp"

namespace dgp {

using EdgePairs = std::vector<std::pair<std::string, std::string>>;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_double(std::string_view tok, const std::string& where) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  if (!tok.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e) reject(where + ": '" + std::string(tok) + "' is not a number");
  if (!std::isfinite(v)) reject(where + ": non-finite value '" + std::string(tok) + "'");
  return v;
}

inline std::size_t parse_count(std::string_view tok, const std::string& where) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    reject(where + ": '" + std::string(tok) + "' is not a non-negative integer");
  return v;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) reject("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) reject("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

// ---- edge lists ---------------------------------------------------------------

inline EdgePairs parse_edge_list(std::istream& in, const std::string& source = "<stream>") {
  EdgePairs edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      detail::reject(where + ": expected exactly 'child<TAB>parent'");
    std::string child = line.substr(0, tab);
    std::string parent = line.substr(tab + 1);
    if (child.empty() || parent.empty()) detail::reject(where + ": empty identifier");
    if (child.find(' ') != std::string::npos || parent.find(' ') != std::string::npos)
      detail::reject(where + ": identifiers must not contain spaces");
    edges.emplace_back(std::move(child), std::move(parent));
  }
  if (edges.empty()) detail::reject(source + ": no edges found");
  return edges;
}

inline EdgePairs load_edge_list(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_edge_list(in, path);
}

inline void write_edge_list(std::ostream& os, const EdgePairs& edges) {
  for (const auto& [c, p] : edges) os << c << '\t' << p << '\n';
}

inline void save_edge_list(const std::string& path, const EdgePairs& edges) {
  auto out = detail::open_out(path);
  write_edge_list(out, edges);
}

inline EdgePairs edge_pairs(const TaxonomyDag& dag) {
  EdgePairs out;
  for (const auto& e : dag.edges()) out.emplace_back(dag.node_ids()[e.child], dag.node_ids()[e.parent]);
  return out;
}

// ---- tables -------------------------------------------------------------------

struct Table {
  std::vector<std::string> ids;
  DenseMatrix matrix;
};

// Word embeddings, one row per graph node.
using EmbeddingTable = Table;
// Ground-truth classifiers of the seen classes.
using ClassifierWeights = Table;

inline Table parse_table(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      detail::strip_cr(line);
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next_line()) detail::reject(source + ": empty table file");
  const auto header = detail::split_ws(line);
  if (header.size() != 2) detail::reject(source + ":1: header must be '<rows> <cols>'");
  const std::size_t rows = detail::parse_count(header[0], source + ":1");
  const std::size_t cols = detail::parse_count(header[1], source + ":1");
  Table t{{}, DenseMatrix(rows, cols)};
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!next_line())
      detail::reject(source + ": declared " + std::to_string(rows) + " rows but found " +
                     std::to_string(r));
    const std::string where = source + ":" + std::to_string(lineno);
    const auto tok = detail::split_ws(line);
    if (tok.size() != cols + 1)
      detail::reject(where + ": expected id plus " + std::to_string(cols) + " values, got " +
                     std::to_string(tok.empty() ? 0 : tok.size() - 1));
    std::string id(tok[0]);
    if (!seen.insert(id).second) detail::reject(where + ": duplicate id '" + id + "'");
    for (std::size_t c = 0; c < cols; ++c) t.matrix(r, c) = detail::parse_double(tok[c + 1], where);
    t.ids.push_back(std::move(id));
  }
  if (next_line())
    detail::reject(source + ":" + std::to_string(lineno) + ": more rows than the declared " +
                   std::to_string(rows));
  return t;
}

inline Table load_table(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_table(in, path);
}

inline void write_table(std::ostream& os, const Table& t) {
  detail::require(t.ids.size() == t.matrix.rows(), "table ids and rows differ in count");
  os << t.matrix.rows() << ' ' << t.matrix.cols() << '\n';
  for (std::size_t r = 0; r < t.matrix.rows(); ++r) {
    os << t.ids[r];
    for (double v : t.matrix.row(r)) os << ' ' << format_double(v);
    os << '\n';
  }
}

inline void save_table(const std::string& path, const Table& t) {
  auto out = detail::open_out(path);
  write_table(out, t);
}

// Reorders table rows into graph node order; every node must appear exactly once.
inline DenseMatrix align_to_graph(const Table& t, const TaxonomyDag& dag) {
  if (t.ids.size() != dag.size())
    detail::reject("table has " + std::to_string(t.ids.size()) + " rows but the graph has " +
                   std::to_string(dag.size()) + " nodes");
  DenseMatrix out(dag.size(), t.matrix.cols());
  std::vector<bool> filled(dag.size(), false);
  for (std::size_t r = 0; r < t.ids.size(); ++r) {
    if (!dag.contains(t.ids[r])) detail::reject("table id '" + t.ids[r] + "' is not a graph node");
    const std::size_t i = dag.index_of(t.ids[r]);
    filled[i] = true;
    std::copy(t.matrix.row(r).begin(), t.matrix.row(r).end(), out.row(i).begin());
  }
  return out;
}

struct SeenTargets {
  SeenMask mask;
  DenseMatrix weights;  // L2-normalized rows, mask order
};

inline SeenTargets seen_targets(const ClassifierWeights& w, const TaxonomyDag& dag) {
  SeenTargets s;
  for (const auto& id : w.ids) {
    if (!dag.contains(id)) detail::reject("classifier id '" + id + "' is not a graph node");
    s.mask.indices.push_back(dag.index_of(id));
  }
  s.mask.validate(dag.size());
  s.weights = l2_normalize_rows(w.matrix);
  return s;
}

// ---- feature batches ------------------------------------------------------------

// Features as a table with example ids e0.., labels as one class id per line.
inline void save_feature_batch(const std::string& features_path, const std::string& labels_path,
                               const FeatureBatch& b, const TaxonomyDag& dag) {
  Table t{{}, b.features};
  for (std::size_t e = 0; e < b.labels.size(); ++e) t.ids.push_back("e" + std::to_string(e));
  save_table(features_path, t);
  auto out = detail::open_out(labels_path);
  for (std::size_t l : b.labels) out << dag.node_ids()[l] << '\n';
}

inline FeatureBatch load_feature_batch(const std::string& features_path,
                                       const std::string& labels_path, const TaxonomyDag& dag) {
  FeatureBatch b;
  b.features = load_table(features_path).matrix;
  auto in = detail::open_in(labels_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    if (!dag.contains(line))
      detail::reject(labels_path + ":" + std::to_string(lineno) + ": unknown class '" + line + "'");
    b.labels.push_back(dag.index_of(line));
  }
  if (b.labels.size() != b.features.rows())
    detail::reject(labels_path + ": " + std::to_string(b.labels.size()) + " labels for " +
                   std::to_string(b.features.rows()) + " feature rows");
  return b;
}

// ---- checkpoints --------------------------------------------------------------------

inline void write_checkpoint(std::ostream& os, const Model& model) {
  os << "DGPCKPT 1\n";
  Model copy = model;  // parameters() hands out mutable views
  if (const auto* g = std::get_if<GcnStack>(&model)) {
    const std::size_t s = g->layers.front().rows();
    const std::size_t f = g->layers.size() > 1 ? g->layers.front().cols() : 0;
    const std::size_t p = g->layers.back().cols();
    os << "gcn " << s << ' ' << f << ' ' << p << " 0 layers=" << g->hidden_layers()
       << " norm=" << to_string(g->normalization) << " slope=" << format_double(g->negative_slope)
       << " dropout=" << format_double(g->dropout_rate) << '\n';
  } else {
    const auto& m = std::get<DgpModel>(model);
    os << "dgp " << m.theta_d.rows() << ' ' << m.theta_d.cols() << ' ' << m.theta_a.cols() << ' '
       << m.K() << " weighted=" << m.weighted << " two_phase=" << m.two_phase
       << " slope=" << format_double(m.negative_slope)
       << " dropout=" << format_double(m.dropout_rate) << '\n';
  }
  for (const auto& p : parameters(copy)) {
    os << p.name << ' ' << p.rows << ' ' << p.cols;
    for (double v : p.values) os << ' ' << format_double(v);
    os << '\n';
  }
}

inline void save_checkpoint(const std::string& path, const Model& model) {
  auto out = detail::open_out(path);
  write_checkpoint(out, model);
}

inline Model parse_checkpoint(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line) || (detail::strip_cr(line), line != "DGPCKPT 1"))
    detail::reject(source + ":1: not a version-1 checkpoint");
  if (!std::getline(in, line)) detail::reject(source + ":2: missing model header");
  detail::strip_cr(line);
  const auto head = detail::split_ws(line);
  if (head.size() < 5) detail::reject(source + ":2: header needs kind S F P K");
  const std::string where = source + ":2";
  const std::string kind(head[0]);
  const std::size_t s = detail::parse_count(head[1], where);
  const std::size_t f = detail::parse_count(head[2], where);
  const std::size_t p = detail::parse_count(head[3], where);
  const std::size_t k = detail::parse_count(head[4], where);
  std::map<std::string, std::string> flags;
  for (std::size_t i = 5; i < head.size(); ++i) {
    const auto eq = head[i].find('=');
    if (eq == std::string_view::npos) detail::reject(where + ": malformed flag '" + std::string(head[i]) + "'");
    flags[std::string(head[i].substr(0, eq))] = std::string(head[i].substr(eq + 1));
  }
  auto flag = [&](const std::string& key) -> const std::string& {
    auto it = flags.find(key);
    if (it == flags.end()) detail::reject(where + ": missing flag '" + key + "'");
    return it->second;
  };

  Model model;
  if (kind == "gcn") {
    GcnStack g;
    const std::size_t layers = detail::parse_count(flag("layers"), where);
    g.normalization = parse_normalization(flag("norm"));
    g.negative_slope = detail::parse_double(flag("slope"), where);
    g.dropout_rate = detail::parse_double(flag("dropout"), where);
    std::size_t in_dim = s;
    for (std::size_t l = 0; l < layers; ++l) {
      g.layers.emplace_back(in_dim, f);
      in_dim = f;
    }
    g.layers.emplace_back(in_dim, p);
    model = std::move(g);
  } else if (kind == "dgp") {
    DgpModel m;
    m.weighted = flag("weighted") == "1";
    m.two_phase = flag("two_phase") == "1";
    m.negative_slope = detail::parse_double(flag("slope"), where);
    m.dropout_rate = detail::parse_double(flag("dropout"), where);
    m.theta_d = DenseMatrix(s, f);
    m.theta_a = DenseMatrix(f, p);
    if (m.weighted) {
      m.w_d.assign(k + 1, 0.0);
      m.w_a.assign(k + 1, 0.0);
    }
    model = std::move(m);
  } else {
    detail::reject(where + ": unknown model kind '" + kind + "'");
  }

  std::size_t lineno = 2;
  for (auto& param : parameters(model)) {
    ++lineno;
    const std::string at = source + ":" + std::to_string(lineno);
    if (!std::getline(in, line)) detail::reject(at + ": missing parameter '" + param.name + "'");
    detail::strip_cr(line);
    const auto tok = detail::split_ws(line);
    if (tok.size() < 3 || tok[0] != param.name)
      detail::reject(at + ": expected parameter '" + param.name + "'");
    const std::size_t r = detail::parse_count(tok[1], at);
    const std::size_t c = detail::parse_count(tok[2], at);
    if (r != param.rows || c != param.cols || tok.size() != 3 + r * c)
      detail::reject(at + ": parameter '" + param.name + "' should be " +
                     shape_str(param.rows, param.cols));
    for (std::size_t i = 0; i < r * c; ++i) param.values[i] = detail::parse_double(tok[3 + i], at);
  }
  while (std::getline(in, line)) {
    detail::strip_cr(line);
    if (!line.empty()) detail::reject(source + ": trailing content after the last parameter");
  }
  return model;
}

inline Model load_checkpoint(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_checkpoint(in, path);
}

// ---- synthetic data -------------------------------------------------------------------

struct SynthSpec {
  std::size_t n_nodes = 100;
  std::size_t max_depth = 8;
  double multi_parent_prob = 0.1;  // chance of one extra, shallower parent
  std::uint64_t seed = 0;
  std::size_t S = 32;               // embedding width
  std::size_t P = 33;               // classifier width (features + bias)
  std::size_t examples_per_class = 50;
  double classifier_noise = 1.2;
  double embedding_noise = 0.15;
  double feature_noise = 0.12;
  double feature_scale = 1.0;
  double unseen_fraction = 0.2;     // 0 selects only maximum-depth leaves

  void validate() const {
    if (n_nodes < 1 || max_depth < 1 || S < 1 || P < 2 || examples_per_class < 1)
      detail::reject("synthetic spec counts must be >= 1 (P >= 2)");
    if (!(multi_parent_prob >= 0.0 && multi_parent_prob <= 1.0))
      detail::reject("multi-parent probability must lie in [0,1]");
    if (classifier_noise < 0.0 || embedding_noise < 0.0 || feature_noise < 0.0)
      detail::reject("noise scales must be non-negative");
    if (!(feature_scale > 0.0)) detail::reject("feature scale must be positive");
    if (!(unseen_fraction >= 0.0 && unseen_fraction < 1.0))
      detail::reject("unseen fraction must lie in [0,1)");
  }
};

// Parses "key=value" items separated by commas and/or whitespace.
inline SynthSpec parse_synth_spec(const std::string& text, SynthSpec spec = {}) {
  std::string norm = text;
  std::replace(norm.begin(), norm.end(), ',', ' ');
  for (auto tok : detail::split_ws(norm)) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) detail::reject("synthetic spec item '" + std::string(tok) + "' is not key=value");
    const std::string key(tok.substr(0, eq));
    const std::string_view val = tok.substr(eq + 1);
    const std::string where = "synthetic spec '" + key + "'";
    if (key == "n") spec.n_nodes = detail::parse_count(val, where);
    else if (key == "depth") spec.max_depth = detail::parse_count(val, where);
    else if (key == "multi") spec.multi_parent_prob = detail::parse_double(val, where);
    else if (key == "seed") spec.seed = detail::parse_count(val, where);
    else if (key == "S") spec.S = detail::parse_count(val, where);
    else if (key == "P") spec.P = detail::parse_count(val, where);
    else if (key == "examples") spec.examples_per_class = detail::parse_count(val, where);
    else if (key == "cnoise") spec.classifier_noise = detail::parse_double(val, where);
    else if (key == "enoise") spec.embedding_noise = detail::parse_double(val, where);
    else if (key == "fnoise") spec.feature_noise = detail::parse_double(val, where);
    else if (key == "fscale") spec.feature_scale = detail::parse_double(val, where);
    else if (key == "unseen") spec.unseen_fraction = detail::parse_double(val, where);
    else detail::reject("unknown synthetic spec key '" + key + "'");
  }
  spec.validate();
  return spec;
}

inline std::string to_string(const SynthSpec& s) {
  std::ostringstream os;
  os << "n=" << s.n_nodes << ",depth=" << s.max_depth << ",multi=" << format_double(s.multi_parent_prob)
     << ",seed=" << s.seed << ",S=" << s.S << ",P=" << s.P << ",examples=" << s.examples_per_class
     << ",cnoise=" << format_double(s.classifier_noise) << ",enoise=" << format_double(s.embedding_noise)
     << ",fnoise=" << format_double(s.feature_noise) << ",fscale=" << format_double(s.feature_scale)
     << ",unseen=" << format_double(s.unseen_fraction);
  return os.str();
}

namespace detail {

// Box-Muller on uniform01 keeps streams identical across standard libraries.
inline double standard_normal(Rng& rng) {
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

}  // namespace detail

// Random recursive tree (each node attaches to a uniformly chosen earlier
// node below max_depth) plus optional extra parents at strictly smaller tree
// depth, which keeps the graph acyclic. Nodes are named c0, c1, ...
inline TaxonomyDag synth_hierarchy(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.n_nodes;
  std::vector<std::string> ids;
  std::vector<std::size_t> depth{0};
  std::vector<Edge> edges;
  ids.push_back("c0");
  std::vector<std::size_t> open{0};  // nodes that may take children
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t parent = open[detail::uniform_index(rng, open.size())];
    ids.push_back("c" + std::to_string(i));
    depth.push_back(depth[parent] + 1);
    edges.push_back({i, parent});
    if (depth[i] < spec.max_depth) open.push_back(i);
    if (depth[i] >= 2 && uniform01(rng) < spec.multi_parent_prob) {
      std::vector<std::size_t> shallower;
      for (std::size_t j = 0; j < i; ++j)
        if (depth[j] < depth[i] && j != parent) shallower.push_back(j);
      if (!shallower.empty()) edges.push_back({i, shallower[detail::uniform_index(rng, shallower.size())]});
    }
  }
  return TaxonomyDag(std::move(ids), edges);
}

// Symmetric 0/1 adjacency with self-loops: a random spanning tree plus each
// remaining pair with probability `extra`. Always connected.
inline SparseMatrix synth_connected_graph(std::size_t n, double extra, std::uint64_t seed) {
  detail::require(n >= 1, "graph needs at least one node");
  detail::require(extra >= 0.0 && extra <= 1.0, "edge probability must lie in [0,1]");
  Rng rng(seed);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  auto link = [&](std::size_t i, std::size_t j) {
    t.push_back({i, j, 1.0});
    t.push_back({j, i, 1.0});
  };
  for (std::size_t i = 1; i < n; ++i) link(i, detail::uniform_index(rng, i));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (uniform01(rng) < extra) link(i, j);
  return pattern(SparseMatrix::from_triplets(n, n, t));
}

struct SynthTask {
  EmbeddingTable embeddings;        // all nodes, graph order
  ClassifierWeights seen_weights;   // seen nodes, normalized rows
  DenseMatrix true_weights;         // all nodes, normalized rows
  SeenMask mask;
  std::vector<std::size_t> unseen;
  FeatureBatch unseen_test;
  FeatureBatch seen_test;
};

// Ground-truth classifiers diffuse down the hierarchy (child = mean of its
// parents + noise), embeddings are a fixed random projection of them plus
// noise, and class features scatter around a multiple of the classifier's
// weight part. The bias entry is zero for every class, so with zero noise a
// feature always scores highest under its own class.
inline SynthTask synth_task(const TaxonomyDag& dag, const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = dag.size();
  const std::size_t d = spec.P - 1;
  Rng rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
  auto normal = [&] { return detail::standard_normal(rng); };

  DenseMatrix raw(n, d);
  for (std::size_t v : dag.topological_order()) {
    auto row = raw.row(v);
    const auto& ps = dag.parents(v);
    if (ps.empty()) {
      for (double& x : row) x = normal();
      continue;
    }
    for (std::size_t p : ps)
      for (std::size_t j = 0; j < d; ++j) row[j] += raw(p, j) / static_cast<double>(ps.size());
    for (double& x : row) x += spec.classifier_noise * normal();
  }
  const DenseMatrix unit = l2_normalize_rows(raw);
  SynthTask task;
  task.true_weights = DenseMatrix(n, spec.P);
  for (std::size_t v = 0; v < n; ++v)
    std::copy(unit.row(v).begin(), unit.row(v).end(), task.true_weights.row(v).begin());

  DenseMatrix proj(spec.P, spec.S);
  for (double& x : proj.values()) x = normal() / std::sqrt(static_cast<double>(spec.S));
  DenseMatrix emb = matmul(task.true_weights, proj);
  for (double& x : emb.values()) x += spec.embedding_noise * normal();
  task.embeddings = {dag.node_ids(), std::move(emb)};

  // unseen split: deepest leaves first
  const auto depth = dag.depths();
  std::vector<std::size_t> leaves;
  for (std::size_t v = 0; v < n; ++v)
    if (dag.children(v).empty()) leaves.push_back(v);
  std::stable_sort(leaves.begin(), leaves.end(),
                   [&](std::size_t a, std::size_t b) { return depth[a] > depth[b]; });
  std::size_t n_unseen = 0;
  if (spec.unseen_fraction > 0.0) {
    n_unseen = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(spec.unseen_fraction * static_cast<double>(n))));
  } else if (!leaves.empty()) {
    while (n_unseen < leaves.size() && depth[leaves[n_unseen]] == depth[leaves.front()]) ++n_unseen;
  }
  n_unseen = std::min(n_unseen, leaves.size());
  std::vector<bool> is_unseen(n, false);
  for (std::size_t i = 0; i < n_unseen; ++i) is_unseen[leaves[i]] = true;
  for (std::size_t v = 0; v < n; ++v) (is_unseen[v] ? task.unseen : task.mask.indices).push_back(v);
  if (task.mask.size() < 2 || task.unseen.empty())
    detail::reject("synthetic split needs at least 2 seen and 1 unseen class (got " +
                   std::to_string(task.mask.size()) + " seen, " + std::to_string(task.unseen.size()) +
                   " unseen)");

  task.seen_weights.matrix = DenseMatrix(task.mask.size(), spec.P);
  for (std::size_t i = 0; i < task.mask.size(); ++i) {
    const std::size_t v = task.mask.indices[i];
    task.seen_weights.ids.push_back(dag.node_ids()[v]);
    std::copy(task.true_weights.row(v).begin(), task.true_weights.row(v).end(),
              task.seen_weights.matrix.row(i).begin());
  }

  auto make_batch = [&](const std::vector<std::size_t>& classes) {
    FeatureBatch b{DenseMatrix(classes.size() * spec.examples_per_class, d), {}};
    std::size_t r = 0;
    for (std::size_t c : classes)
      for (std::size_t e = 0; e < spec.examples_per_class; ++e, ++r) {
        auto row = b.features.row(r);
        for (std::size_t j = 0; j < d; ++j)
          row[j] = spec.feature_scale * unit(c, j) + spec.feature_noise * normal();
        b.labels.push_back(c);
      }
    return b;
  };
  task.unseen_test = make_batch(task.unseen);
  task.seen_test = make_batch(task.mask.indices);
  return task;
}

}  // namespace dgp
