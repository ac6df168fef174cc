#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

namespace cmggib {
namespace {

constexpr int kInstances = 100;

TEST(OracleChecks, HyperEdgesMatchPairLoop) {
  test::Rng rng(41);
  SyntheticProvider provider(41, 6, 3);
  for (int trial = 0; trial < kInstances; ++trial) {
    const Instance inst = test::random_instance(rng, "o" + std::to_string(trial), 6);
    const Mat t = inst.tsg.nodes.empty() ? Mat(0, 6) : embed_textual_nodes(inst.tsg, inst.tokens, provider);
    const Mat v = test::random_matrix(rng, static_cast<Eigen::Index>(inst.vsg.nodes.size()), 6);
    const double lambda = test::uniform(rng, -0.5, 0.6);
    const CrossModalGraph g = build_cmg(v, t, inst.vsg, inst.tsg, lambda);
    ASSERT_LE(g.size(), 12);
    std::set<std::pair<int, int>> expected;
    const int m = static_cast<int>(t.rows());
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < v.rows(); ++i) {
        const double c = t.row(j).dot(v.row(i)) / (t.row(j).norm() * v.row(i).norm());
        if (c >= lambda) expected.insert({j, m + i});
      }
    const std::set<std::pair<int, int>> got(g.hyper_edges.begin(), g.hyper_edges.end());
    EXPECT_EQ(got, expected);
  }
}

TEST(OracleChecks, VisualWordsMatchNearestCentroidScan) {
  test::Rng rng(42);
  for (int trial = 0; trial < kInstances; ++trial) {
    const int n = test::uniform_int(rng, 0, 12), k = test::uniform_int(rng, 1, 8);
    Codebook cb;
    cb.centroids = test::random_matrix(rng, k, 5);
    if (trial % 10 == 0 && k > 1) cb.centroids.row(1) = cb.centroids.row(0);  // exercise ties
    Mat x = test::random_matrix(rng, n, 5);
    if (n > 0 && trial % 10 == 0) x.row(0) = cb.centroids.row(0);
    std::vector<int> expected(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int c = 1; c < k; ++c)
        if ((x.row(i) - cb.centroids.row(c)).squaredNorm() < (x.row(i) - cb.centroids.row(best)).squaredNorm()) best = c;
      ++expected[static_cast<std::size_t>(best)];
    }
    EXPECT_EQ(assign_visual_words(x, cb), expected);
  }
}

TEST(OracleChecks, HardPruningMatchesGateFilter) {
  test::Rng rng(43);
  for (int trial = 0; trial < kInstances; ++trial) {
    const int n = test::uniform_int(rng, 1, 12);
    EdgeList edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (test::uniform(rng, 0, 1) < 0.3) edges.push_back({i, j});
    Eigen::VectorXd node(n), edge(static_cast<Eigen::Index>(edges.size()));
    for (int i = 0; i < n; ++i) node(i) = test::uniform(rng, 0, 1);
    for (Eigen::Index e = 0; e < edge.size(); ++e) edge(e) = test::uniform(rng, 0, 1);
    const double thr = trial % 2 ? 0.5 : test::uniform(rng, 0.1, 0.9);
    const PrunedGraph got = hard_prune(node, edge, edges, thr);
    std::vector<int> kept;
    for (int i = 0; i < n; ++i)
      if (node(i) > thr) kept.push_back(i);
    EdgeList kept_edges;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto [a, b] = edges[e];
      if (edge(static_cast<Eigen::Index>(e)) > thr && node(a) > thr && node(b) > thr) kept_edges.push_back(edges[e]);
    }
    EXPECT_EQ(got.nodes, kept);
    EXPECT_EQ(got.edges, kept_edges);
  }
}

TEST(OracleChecks, RelevanceMatchesPairLoop) {
  test::Rng rng(44);
  SyntheticProvider provider(44, 6, 3);
  int scored = 0;
  for (int trial = 0; trial < kInstances; ++trial) {
    const Instance inst = test::random_instance(rng, "r" + std::to_string(trial), 6);
    const Mat text = inst.tsg.nodes.empty() ? Mat(0, 6) : embed_textual_nodes(inst.tsg, inst.tokens, provider);
    double acc = 0.0;
    int pairs = 0;
    for (const auto& vn : inst.vsg.nodes) {
      if (vn.kind == NodeKind::kRelation) continue;
      const RowVec a = provider.region(region_query(inst.vsg, vn, inst.image_ref));
      for (std::size_t j = 0; j < inst.tsg.nodes.size(); ++j) {
        if (inst.tsg.nodes[j].kind == NodeKind::kRelation) continue;
        const RowVec b = text.row(static_cast<Eigen::Index>(j));
        acc += std::max(0.0, a.dot(b) / (a.norm() * b.norm()));
        ++pairs;
      }
    }
    const auto psi = relevance(inst, provider);
    if (pairs == 0) {
      EXPECT_FALSE(psi);
      continue;
    }
    ++scored;
    ASSERT_TRUE(psi);
    EXPECT_NEAR(*psi, acc / pairs, 1e-12);
  }
  EXPECT_GT(scored, kInstances / 2);
}

}  // namespace
}  // namespace cmggib
