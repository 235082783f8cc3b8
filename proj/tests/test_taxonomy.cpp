#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "dgp/data.hpp"
#include "dgp/taxonomy.hpp"
#include "oracles.hpp"

using namespace dgp;

namespace {

// c0 -> c1 -> ... -> c5, child to parent.
TaxonomyDag chain6() {
  EdgePairs e;
  for (int i = 0; i < 5; ++i) e.emplace_back("c" + std::to_string(i), "c" + std::to_string(i + 1));
  return build_dag(e);
}

const char* kWordnetSample = R"(# a small is-a sample
dog	canine
wolf	canine
fox	canine
canine	carnivore
cat	feline
lion	feline
tiger	feline
feline	carnivore
carnivore	placental
bear	carnivore
whale	cetacean
dolphin	cetacean
cetacean	placental
placental	mammal
kangaroo	marsupial
koala	marsupial
marsupial	mammal
mammal	vertebrate
sparrow	passerine
robin	passerine
passerine	bird
eagle	raptor
hawk	raptor
raptor	bird
bird	vertebrate
salmon	fish
trout	fish
shark	fish
fish	vertebrate
frog	amphibian
toad	amphibian
amphibian	vertebrate
snake	reptile
lizard	reptile
turtle	reptile
reptile	vertebrate
vertebrate	animal
ant	insect
bee	insect
beetle	insect
insect	arthropod
spider	arachnid
scorpion	arachnid
arachnid	arthropod
arthropod	invertebrate
invertebrate	animal
bat	placental
bat	flyer
eagle	flyer
dog	canine
)";

}  // namespace

TEST(BuildDag, SingleEdge) {
  auto dag = build_dag({{"b", "a"}});
  EXPECT_EQ(dag.size(), 2u);
  EXPECT_EQ(dag.edge_count(), 1u);
  EXPECT_EQ(dag.node_ids(), (std::vector<std::string>{"b", "a"}));
}

TEST(BuildDag, TwoCycleRejectedWithSequence) {
  try {
    build_dag({{"b", "a"}, {"a", "b"}});
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("cycle"), std::string::npos);
    EXPECT_NE(msg.find("a"), std::string::npos);
    EXPECT_NE(msg.find("b"), std::string::npos);
  }
}

TEST(BuildDag, LongerCycleRejected) {
  EXPECT_THROW(build_dag({{"a", "b"}, {"b", "c"}, {"c", "d"}, {"d", "b"}}), ValidationError);
}

TEST(BuildDag, SelfEdgeRejected) { EXPECT_THROW(build_dag({{"a", "a"}}), ValidationError); }

TEST(BuildDag, WordnetSampleCountsMatchLineOracle) {
  std::istringstream in(kWordnetSample);
  const auto pairs = parse_edge_list(in);
  ASSERT_EQ(pairs.size(), 50u);
  std::set<std::string> ids;
  std::set<std::pair<std::string, std::string>> distinct;
  std::istringstream raw(kWordnetSample);
  std::string line;
  while (std::getline(raw, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    ids.insert(line.substr(0, tab));
    ids.insert(line.substr(tab + 1));
    distinct.insert({line.substr(0, tab), line.substr(tab + 1)});
  }
  auto dag = build_dag(pairs);
  EXPECT_EQ(dag.size(), ids.size());
  EXPECT_EQ(dag.edge_count(), distinct.size());
  EXPECT_EQ(dag.edge_count(), 49u);  // "dog canine" appears twice
  EXPECT_EQ(dag.node_ids().front(), "dog");
  EXPECT_EQ(dag.parents(dag.index_of("bat")).size(), 2u);
}

TEST(KHop, SingleNode) {
  TaxonomyDag dag({"only"}, {});
  auto kh = khop_decompose(dag, 4, Direction::ancestor);
  ASSERT_EQ(kh.buckets.size(), 5u);
  EXPECT_EQ(kh.buckets[0], SparseMatrix::identity(1));
  for (std::size_t k = 1; k <= 4; ++k) EXPECT_EQ(kh.buckets[k].nnz(), 0u);
}

TEST(KHop, ChainAncestorsOfNodeZero) {
  auto dag = chain6();
  auto kh = khop_decompose(dag, 4, Direction::ancestor);
  const auto i0 = dag.index_of("c0");
  auto cols = [&](std::size_t k) {
    auto c = kh.buckets[k].row_cols(i0);
    std::vector<std::string> out;
    for (auto j : c) out.push_back(dag.node_ids()[j]);
    return out;
  };
  EXPECT_EQ(cols(0), (std::vector<std::string>{"c0"}));
  EXPECT_EQ(cols(1), (std::vector<std::string>{"c1"}));
  EXPECT_EQ(cols(2), (std::vector<std::string>{"c2"}));
  EXPECT_EQ(cols(3), (std::vector<std::string>{"c3"}));
  EXPECT_EQ(cols(4), (std::vector<std::string>{"c4", "c5"}));
}

TEST(KHop, ZeroKRejected) {
  EXPECT_THROW(khop_decompose(chain6(), 0, Direction::ancestor), ValidationError);
}

TEST(KHop, RandomDagsMatchAllPairsOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SynthSpec spec;
    spec.n_nodes = 1 + seed % 50;
    spec.max_depth = 2 + seed % 7;
    spec.multi_parent_prob = 0.4;
    spec.seed = seed;
    const auto dag = synth_hierarchy(spec);
    const std::size_t K = 1 + seed % 5;
    const auto dist = oracle::ancestor_distances(dag);
    const auto anc = khop_decompose(dag, K, Direction::ancestor);
    const auto desc = khop_decompose(dag, K, Direction::descendant);
    for (std::size_t k = 0; k <= K; ++k) {
      oracle::Dense want = oracle::zeros(dag.size(), dag.size());
      for (std::size_t i = 0; i < dag.size(); ++i)
        for (std::size_t j = 0; j < dag.size(); ++j) {
          const auto d = dist[i][j];
          if (d == std::numeric_limits<std::size_t>::max()) continue;
          if (d == k || (k == K && d >= K)) want[i][j] = 1.0;
        }
      ASSERT_EQ(oracle::to_rows(anc.buckets[k]), want) << "seed " << seed << " bucket " << k;
      ASSERT_EQ(oracle::to_rows(desc.buckets[k]), oracle::transpose(want))
          << "seed " << seed << " bucket " << k;
      ASSERT_EQ(desc.buckets[k], transpose(anc.buckets[k]));
    }
  }
}

TEST(DenseUnion, SingleNodeAndChain) {
  TaxonomyDag one({"x"}, {});
  EXPECT_EQ(dense_union(khop_decompose(one, 2, Direction::ancestor)), SparseMatrix::identity(1));

  auto dag = chain6();
  auto u = dense_union(khop_decompose(dag, 4, Direction::ancestor));
  // transitive closure of the chain: row i reaches every j >= i
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(u.at(i, j), j >= i ? 1.0 : 0.0) << i << "," << j;
}

TEST(DenseUnion, MatchesReachabilityAndMergesSymmetric) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SynthSpec spec;
    spec.n_nodes = 5 + seed;
    spec.multi_parent_prob = 0.5;
    spec.seed = seed;
    const auto dag = synth_hierarchy(spec);
    const auto dist = oracle::ancestor_distances(dag);
    const auto ua = dense_union(khop_decompose(dag, 2, Direction::ancestor));
    const auto ud = dense_union(khop_decompose(dag, 2, Direction::descendant));
    for (std::size_t i = 0; i < dag.size(); ++i)
      for (std::size_t j = 0; j < dag.size(); ++j)
        EXPECT_EQ(ua.at(i, j), dist[i][j] != std::numeric_limits<std::size_t>::max() ? 1.0 : 0.0);
    const auto merged = pattern(add(ua, ud));
    EXPECT_EQ(merged, transpose(merged));
  }
}

TEST(GraphStats, SingleNode) {
  TaxonomyDag one({"x"}, {});
  auto s = graph_stats(one, khop_decompose(one, 4, Direction::ancestor));
  EXPECT_EQ(s.hierarchy_density, 1.0);
  EXPECT_EQ(s.dense_density, 1.0);
}

TEST(GraphStats, ChainHandCount) {
  auto dag = chain6();
  auto s = graph_stats(dag, khop_decompose(dag, 4, Direction::ancestor));
  EXPECT_EQ(s.nodes, 6u);
  EXPECT_EQ(s.edges, 5u);
  EXPECT_DOUBLE_EQ(s.hierarchy_density, (6.0 + 5.0 + 5.0) / 36.0);
  EXPECT_DOUBLE_EQ(s.dense_density, (6.0 + 15.0 + 15.0) / 36.0);
  EXPECT_DOUBLE_EQ(s.density_ratio, 36.0 / 16.0);
}

TEST(Taxonomy, DepthsAndTopologicalOrder) {
  auto dag = build_dag({{"a", "r"}, {"b", "a"}, {"b", "r"}});
  const auto order = dag.topological_order();
  ASSERT_EQ(order.size(), 3u);
  EXPECT_EQ(dag.node_ids()[order[0]], "r");
  EXPECT_EQ(dag.depths()[dag.index_of("b")], 2u);
}
