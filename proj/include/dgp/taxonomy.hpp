#pragma once

// Class hierarchy as a DAG with child -> parent edges, and its decomposition
// into per-distance adjacency buckets for dense propagation.

#include <algorithm>
#include <cstddef>
#include <deque>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dgp/error.hpp"
#include "dgp/sparse.hpp"

namespace dgp {

struct Edge {
  std::size_t child;
  std::size_t parent;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

class TaxonomyDag {
 public:
  TaxonomyDag() = default;

  // Validates ids and edges; duplicate edges are collapsed, edge order kept.
  TaxonomyDag(std::vector<std::string> node_ids, const std::vector<Edge>& edges)
      : ids_(std::move(node_ids)), parents_(ids_.size()), children_(ids_.size()) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      const auto& id = ids_[i];
      if (id.empty()) detail::reject("node " + std::to_string(i) + " has an empty identifier");
      if (id.find_first_of(" \t\r\n") != std::string::npos)
        detail::reject("node identifier '" + id + "' contains whitespace");
      if (!index_.emplace(id, i).second) detail::reject("duplicate node identifier '" + id + "'");
    }
    std::vector<Edge> seen;
    seen.reserve(edges.size());
    for (const auto& e : edges) {
      if (e.child >= ids_.size() || e.parent >= ids_.size())
        detail::reject("edge (" + std::to_string(e.child) + "," + std::to_string(e.parent) +
                       ") references a node outside 0.." + std::to_string(ids_.size()));
      if (e.child == e.parent) detail::reject("self-edge on node '" + ids_[e.child] + "'");
      auto& ps = parents_[e.child];
      if (std::find(ps.begin(), ps.end(), e.parent) != ps.end()) continue;
      ps.push_back(e.parent);
      children_[e.parent].push_back(e.child);
      edges_.push_back(e);
    }
    check_acyclic();
  }

  std::size_t size() const { return ids_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<std::string>& node_ids() const { return ids_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_[i]; }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_[i]; }

  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) detail::reject("unknown node identifier '" + id + "'");
    return it->second;
  }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  // Length of the longest child -> parent chain from i to a root.
  std::vector<std::size_t> depths() const {
    std::vector<std::size_t> depth(size(), 0);
    for (std::size_t v : topological_order()) {
      for (std::size_t p : parents_[v]) depth[v] = std::max(depth[v], depth[p] + 1);
    }
    return depth;
  }

  // Parents before children.
  std::vector<std::size_t> topological_order() const {
    std::vector<std::size_t> pending(size());
    for (std::size_t i = 0; i < size(); ++i) pending[i] = parents_[i].size();
    std::deque<std::size_t> ready;
    for (std::size_t i = 0; i < size(); ++i)
      if (pending[i] == 0) ready.push_back(i);
    std::vector<std::size_t> order;
    order.reserve(size());
    while (!ready.empty()) {
      const std::size_t v = ready.front();
      ready.pop_front();
      order.push_back(v);
      for (std::size_t c : children_[v])
        if (--pending[c] == 0) ready.push_back(c);
    }
    return order;
  }

 private:
  void check_acyclic() const {
    enum class Mark : unsigned char { fresh, active, done };
    std::vector<Mark> mark(size(), Mark::fresh);
    std::vector<std::size_t> stack_nodes;
    // iterative DFS along parent edges; frames hold (node, next parent slot)
    std::vector<std::pair<std::size_t, std::size_t>> frames;
    for (std::size_t root = 0; root < size(); ++root) {
      if (mark[root] != Mark::fresh) continue;
      frames.push_back({root, 0});
      mark[root] = Mark::active;
      stack_nodes.push_back(root);
      while (!frames.empty()) {
        auto& [v, slot] = frames.back();
        if (slot < parents_[v].size()) {
          const std::size_t p = parents_[v][slot++];
          if (mark[p] == Mark::active) {
            auto from = std::find(stack_nodes.begin(), stack_nodes.end(), p);
            std::string cycle;
            for (auto it = from; it != stack_nodes.end(); ++it) cycle += ids_[*it] + " -> ";
            cycle += ids_[p];
            detail::reject("taxonomy contains a cycle: " + cycle);
          }
          if (mark[p] == Mark::fresh) {
            mark[p] = Mark::active;
            stack_nodes.push_back(p);
            frames.push_back({p, 0});
          }
        } else {
          mark[v] = Mark::done;
          stack_nodes.pop_back();
          frames.pop_back();
        }
      }
    }
  }

  std::vector<std::string> ids_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Node order is first appearance (child before parent within a pair).
inline TaxonomyDag build_dag(const std::vector<std::pair<std::string, std::string>>& edge_pairs) {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;
  auto intern = [&](const std::string& id) {
    auto [it, inserted] = index.emplace(id, ids.size());
    if (inserted) ids.push_back(id);
    return it->second;
  };
  std::vector<Edge> edges;
  edges.reserve(edge_pairs.size());
  for (const auto& [child, parent] : edge_pairs) {
    if (child == parent) detail::reject("self-edge on node '" + child + "'");
    const std::size_t c = intern(child);
    const std::size_t p = intern(parent);
    edges.push_back({c, p});
  }
  return TaxonomyDag(std::move(ids), edges);
}

enum class Direction { ancestor, descendant };

inline const char* to_string(Direction d) {
  return d == Direction::ancestor ? "ancestor" : "descendant";
}

// buckets[0] is the identity; buckets[k] marks pairs at shortest hop distance
// exactly k for k < K, and buckets[K] every reachable pair at distance >= K.
struct KHopAdjacency {
  Direction direction = Direction::ancestor;
  std::size_t K = 0;
  std::vector<SparseMatrix> buckets;
};

// Shortest hop distances from source along parent (ancestor) or child
// (descendant) edges; unreachable nodes get SIZE_MAX.
inline std::vector<std::size_t> hop_distances(const TaxonomyDag& dag, std::size_t source,
                                              Direction direction) {
  constexpr auto unreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(dag.size(), unreached);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    const auto& next = direction == Direction::ancestor ? dag.parents(v) : dag.children(v);
    for (std::size_t u : next) {
      if (dist[u] != unreached) continue;
      dist[u] = dist[v] + 1;
      queue.push_back(u);
    }
  }
  return dist;
}

inline KHopAdjacency khop_decompose(const TaxonomyDag& dag, std::size_t K, Direction direction) {
  if (K == 0) detail::reject("khop_decompose needs K >= 1 (self bucket plus at least one hop)");
  const std::size_t n = dag.size();
  std::vector<std::vector<Triplet>> per_bucket(K + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto dist = hop_distances(dag, i, direction);
    for (std::size_t j = 0; j < n; ++j) {
      if (dist[j] == std::numeric_limits<std::size_t>::max()) continue;
      per_bucket[std::min(dist[j], K)].push_back({i, j, 1.0});
    }
  }
  KHopAdjacency kh{direction, K, {}};
  kh.buckets.reserve(K + 1);
  for (const auto& t : per_bucket) kh.buckets.push_back(SparseMatrix::from_triplets(n, n, t));
  return kh;
}

// Reflexive-transitive reachability pattern (all buckets merged).
inline SparseMatrix dense_union(const KHopAdjacency& kh) {
  detail::require(!kh.buckets.empty(), "dense_union of an empty decomposition");
  SparseMatrix acc = kh.buckets.front();
  for (std::size_t k = 1; k < kh.buckets.size(); ++k) acc = add(acc, kh.buckets[k]);
  return pattern(acc);
}

// Symmetric adjacency of the hierarchy itself: self-loops plus each edge in
// both directions.
inline SparseMatrix hierarchy_adjacency(const TaxonomyDag& dag) {
  std::vector<Triplet> t;
  t.reserve(dag.size() + 2 * dag.edge_count());
  for (std::size_t i = 0; i < dag.size(); ++i) t.push_back({i, i, 1.0});
  for (const auto& e : dag.edges()) {
    t.push_back({e.child, e.parent, 1.0});
    t.push_back({e.parent, e.child, 1.0});
  }
  return pattern(SparseMatrix::from_triplets(dag.size(), dag.size(), t));
}

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t hierarchy_nnz = 0;
  std::size_t dense_nnz = 0;
  double hierarchy_density = 0.0;
  double dense_density = 0.0;
  double density_ratio = 0.0;
};

inline GraphStats graph_stats(const TaxonomyDag& dag, const KHopAdjacency& kh_a) {
  detail::require(kh_a.direction == Direction::ancestor,
                  "graph_stats expects the ancestor decomposition");
  const auto hier = hierarchy_adjacency(dag);
  const auto anc = dense_union(kh_a);
  const auto dense = pattern(add(anc, transpose(anc)));
  GraphStats s;
  s.nodes = dag.size();
  s.edges = dag.edge_count();
  s.hierarchy_nnz = hier.nnz();
  s.dense_nnz = dense.nnz();
  s.hierarchy_density = hier.density();
  s.dense_density = dense.density();
  s.density_ratio = s.hierarchy_density > 0.0 ? s.dense_density / s.hierarchy_density : 0.0;
  return s;
}

}  // namespace dgp
