#include <gtest/gtest.h>

#include "support.hpp"

namespace cmggib {
namespace {

CrossModalGraph path_graph(int n, const Mat& x) {
  CrossModalGraph g;
  g.num_textual = n;
  for (int i = 0; i < n; ++i) g.nodes.push_back({Modality::kTextual, NodeKind::kObject, "n", i});
  for (int i = 0; i + 1 < n; ++i) g.intra_edges.push_back({i, i + 1});
  g.features = x;
  return g;
}

struct Toy {
  nn::Rng rng{21};
  GatParams gat;
  GeneParams gene;

  explicit Toy(int d, GeneConfig cfg = {}) {
    gat = GatParams::init(d, 2, rng);
    gene = GeneParams::init(cfg, d, d, d, 23, rng);
  }
};

TEST(GeneExamples, HalfProbabilityHalfNoiseGivesHalf) {
  for (double tau : {0.01, 0.1, 1.0, 7.0}) EXPECT_NEAR(concrete_sample(0.5, tau, 0.5), 0.5, 1e-12);
}

TEST(GeneExamples, HighProbabilityLowTemperatureSaturatesOpen) {
  EXPECT_NEAR(concrete_sample(0.9, 0.1, 0.5), 1.0, 1e-9);
  EXPECT_NEAR(concrete_sample(0.9, 0.1, 0.5), 0.9999999997132027, 1e-15);
}

TEST(GeneExamples, LowProbabilityLowTemperatureSaturatesClosed) {
  EXPECT_NEAR(concrete_sample(0.1, 0.1, 0.5), 0.0, 1e-9);
  EXPECT_NEAR(concrete_sample(0.1, 0.1, 0.5), 1.0 - concrete_sample(0.9, 0.1, 0.5), 1e-15);
}

TEST(GeneExamples, ZeroGateNetworkGivesHalfProbability) {
  Toy toy(3);
  toy.gene.node_ffn.out.weight.value.setZero();
  toy.gene.node_ffn.out.bias.value.setZero();
  test::Rng rng(1);
  const Mat h = test::random_matrix(rng, 5, 3);
  const EdgeList edges = {{0, 1}, {1, 2}, {3, 4}};
  for (int i = 0; i < 5; ++i)
    EXPECT_NEAR(node_gate(i, h, h.row(0), h.row(1), edges, toy.gene).prob, 0.5, 1e-12);
}

TEST(GeneExamples, SingletonContextIsTanhOfValue) {
  Toy toy(3);
  test::Rng rng(2);
  const Mat h = test::random_matrix(rng, 1, 3);
  ag::Tape t;
  const Mat r = node_context(t, t.constant(h), {{}}, toy.gene).value();
  const Mat expected = (h * toy.gene.node_value.value.transpose()).array().tanh().matrix();
  EXPECT_LT((r - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GeneExamples, FourNodeContextMatchesHandComputation) {
  Toy toy(2);
  Mat h(4, 2);
  h << 0.2, 0.4, 1, 0, 0.5, 0.5, 0, 1;
  toy.gene.node_attention.value = (Mat(1, 4) << 0.3, -0.2, 0.6, 0.1).finished();
  toy.gene.node_value.value = (Mat(2, 2) << 0.5, -1, 1, 0.25).finished();
  const auto context = l_order_context(4, {{0, 1}, {1, 2}, {2, 3}}, 2);
  ag::Tape t;
  const Mat r = node_context(t, t.constant(h), context, toy.gene).value();
  Mat expected(4, 2);
  expected << 0.046230501092933, 0.600152827321567, -0.161782103333595, 0.540323680213914, -0.161782103333595,
      0.540323680213914, -0.125617628670311, 0.595959507408462;
  EXPECT_LT((r - expected).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(GeneExamples, ClosedNodeZeroesIncidentWeights) {
  ag::Tape t;
  const EdgeList edges = {{0, 1}, {1, 2}};
  const Mat w = ag::gated_adjacency(t.constant(Mat::Ones(2, 1)), t.constant((Mat(3, 1) << 1, 0, 1).finished()), edges).value();
  EXPECT_EQ(w(0, 1), 0.0);
  EXPECT_EQ(w(1, 2), 0.0);
  EXPECT_EQ(w(2, 1), 0.0);
}

TEST(GeneExamples, OpenGatesReproduceAdjacency) {
  test::Rng rng(3);
  const Mat x = test::random_matrix(rng, 4, 2);
  const CrossModalGraph g = path_graph(4, x);
  ag::Tape t;
  const auto edges = g.edges();
  const Mat w = ag::gated_adjacency(t.constant(Mat::Ones(static_cast<Eigen::Index>(edges.size()), 1)),
                                    t.constant(Mat::Ones(4, 1)), edges)
                    .value();
  EXPECT_EQ(w, message_support(g));
}

TEST(GeneExamples, HardPruningMatchesThreeFactorFilterOnFiveNodes) {
  test::Rng rng(4);
  EdgeList edges;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j)
      if (test::uniform(rng, 0, 1) < 0.6) edges.push_back({i, j});
  Eigen::VectorXd node(5), edge(static_cast<Eigen::Index>(edges.size()));
  for (int i = 0; i < 5; ++i) node(i) = test::uniform(rng, 0, 1);
  for (Eigen::Index k = 0; k < edge.size(); ++k) edge(k) = test::uniform(rng, 0, 1);
  const PrunedGraph p = hard_prune(node, edge, edges);
  EdgeList expected;
  for (std::size_t k = 0; k < edges.size(); ++k)
    if (edge(static_cast<Eigen::Index>(k)) > 0.5 && node(edges[k].first) > 0.5 && node(edges[k].second) > 0.5)
      expected.push_back(edges[k]);
  EXPECT_EQ(p.edges, expected);
}

TEST(GeneExamples, ZeroIterationsIsNoOp) {
  GeneConfig cfg;
  cfg.iterations = 0;
  Toy toy(3, cfg);
  test::Rng rng(5);
  const Mat x = test::random_matrix(rng, 4, 3);
  const CrossModalGraph g = path_graph(4, x);
  ag::Tape t;
  ag::Var xv = t.constant(x);
  ag::Var h = gat_encode(t, xv, message_support(g), toy.gat);
  const RefineResult r = refine(t, g, xv, h, {{0}, {3}}, toy.gat, toy.gene, Sampling{});
  EXPECT_FALSE(r.state.gated);
  EXPECT_EQ(r.h_refined.value(), h.value());
  EXPECT_LT((r.pooled.value() - h.value().colwise().mean()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GeneExamples, DeterministicRefinementIsRepeatable) {
  Toy toy(3);
  test::Rng rng(6);
  const Mat x = test::random_matrix(rng, 5, 3);
  const CrossModalGraph g = path_graph(5, x);
  auto run = [&] {
    ag::Tape t;
    ag::Var xv = t.constant(x);
    ag::Var h = gat_encode(t, xv, message_support(g), toy.gat);
    return Mat(refine(t, g, xv, h, {{0}, {4}}, toy.gat, toy.gene, Sampling{}).rep.z.value());
  };
  EXPECT_EQ(run(), run());
}

TEST(GeneExamples, SingleNodePoolIsGatedState) {
  Toy toy(3);
  const Mat x = (Mat(1, 3) << 0.4, 0.1, 0.9).finished();
  const CrossModalGraph g = path_graph(1, x);
  ag::Tape t;
  ag::Var xv = t.constant(x);
  ag::Var h = gat_encode(t, xv, message_support(g), toy.gat);
  const RefineResult r = refine(t, g, xv, h, {{0}, {0}}, toy.gat, toy.gene, Sampling{});
  const double rho = r.state.node_gate.value()(0, 0);
  const double floor = toy.gene.config.clamp_floor;
  EXPECT_LT((r.pooled.value() - rho / (rho + floor) * r.h_refined.value()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GeneExamples, PoolIsGateWeightedMean) {
  Toy toy(3);
  const Mat x = (Mat(3, 3) << 0.4, 0.1, 0.9, -0.2, 0.5, 0.3, 0.7, -0.6, 0.1).finished();
  const CrossModalGraph g = path_graph(3, x);
  ag::Tape t;
  ag::Var xv = t.constant(x);
  ag::Var h = gat_encode(t, xv, message_support(g), toy.gat);
  const RefineResult r = refine(t, g, xv, h, {{0}, {2}}, toy.gat, toy.gene, Sampling{});
  const Mat rho = r.state.node_gate.value();
  const Mat expected = rho.transpose() * r.h_refined.value() / (rho.sum() + toy.gene.config.clamp_floor);
  EXPECT_LT((r.pooled.value() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GeneExamples, KlOfStandardNormalIsZero) {
  for (int d : {1, 4, 9}) EXPECT_EQ(kl_gaussian(RowVec::Zero(d), RowVec::Ones(d)), 0.0);
}

TEST(GeneExamples, KlUnitMeanShiftIsHalf) {
  EXPECT_NEAR(kl_gaussian(RowVec::Ones(1), RowVec::Ones(1)), 0.5, 1e-12);
}

TEST(GeneExamples, KlDoubledScale) {
  EXPECT_NEAR(kl_gaussian(RowVec::Zero(1), RowVec::Constant(1, 2.0)), 0.8068528194400547, 1e-6);
}

TEST(GeneExamples, ZeroBetaIsCrossEntropyOnly) {
  ag::Tape t;
  const auto l = gib_loss(t.constant(RowVec::Constant(3, 2.0)), t.constant(RowVec::Constant(3, 0.3)),
                          t.constant((Mat(1, 3) << 0.1, 0.7, -1).finished()), 2, 0.0);
  EXPECT_EQ(l.total.scalar(), l.ce.scalar());
}

TEST(GeneExamples, UniformLogitsOverAllLabels) {
  ag::Tape t;
  const auto l = gib_loss(t.constant(RowVec::Zero(2)), t.constant(RowVec::Ones(2)), t.constant(Mat::Zero(1, 23)), 5, 0.0);
  EXPECT_NEAR(l.ce.scalar(), 3.1354942159291497, 1e-6);
}

TEST(GeneExamples, HandSetComponentsSum) {
  ag::Tape t;
  const auto l = gib_loss(t.constant((Mat(1, 2) << 0.5, -1).finished()), t.constant((Mat(1, 2) << 0.8, 1.5).finished()),
                          t.constant((Mat(1, 3) << 1, 2, 0.5).finished()), 1, 0.01);
  EXPECT_NEAR(l.ce.scalar(), 0.4643687841079447, 1e-6);
  EXPECT_NEAR(l.kl.scalar(), 0.8876784432060454, 1e-6);
  EXPECT_NEAR(l.total.scalar(), 0.47324556854000516, 1e-6);
}

TEST(GeneBehaviour, NonEdgeGateIsContractViolation) {
  Toy toy(2);
  const Mat h = Mat::Ones(3, 2);
  EXPECT_THROW(edge_gate(0, 2, h, h.row(0), h.row(1), {{0, 1}, {1, 2}}, toy.gene), ContractViolation);
  EXPECT_NO_THROW(edge_gate(2, 1, h, h.row(0), h.row(1), {{0, 1}, {1, 2}}, toy.gene));
}

TEST(GeneBehaviour, InvalidLabelIsContractViolation) {
  ag::Tape t;
  EXPECT_THROW(gib_loss(t.constant(RowVec::Zero(2)), t.constant(RowVec::Ones(2)), t.constant(Mat::Zero(1, 23)), 23, 0.01),
               ContractViolation);
}

TEST(GeneBehaviour, NonpositiveSigmaIsDomainError) {
  EXPECT_THROW(kl_gaussian(RowVec::Zero(2), RowVec::Zero(2)), NumericDomainError);
}

TEST(GeneBehaviour, BoundaryProbabilityIsClampedNotSingular) {
  EXPECT_TRUE(std::isfinite(concrete_sample(0.0, 0.1, 0.5)));
  EXPECT_TRUE(std::isfinite(concrete_sample(1.0, 0.1, 1.0)));
  EXPECT_THROW(concrete_sample(0.5, 0.0, 0.5), NumericDomainError);
}

TEST(GeneBehaviour, GatePriorIsZeroAtPriorRate) {
  ag::Tape t;
  EXPECT_NEAR(ag::bernoulli_kl(t.constant(Mat::Constant(4, 1, 0.3)), 0.3).scalar(), 0.0, 1e-12);
  EXPECT_GT(ag::bernoulli_kl(t.constant(Mat::Constant(4, 1, 0.9)), 0.3).scalar(), 0.0);
}

TEST(GeneProperties, GatesStayInsideOpenInterval) {
  test::Rng rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    const double pi = test::uniform(rng, 1e-6, 1.0 - 1e-6);
    const double eps = test::uniform(rng, 1e-6, 1.0 - 1e-6);
    const double rho = concrete_sample(pi, 1.0, eps);
    EXPECT_GT(rho, 0.0);
    EXPECT_LT(rho, 1.0);
  }
}

TEST(GeneProperties, MonotoneInProbability) {
  test::Rng rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    double a = test::uniform(rng, 0.01, 0.99), b = test::uniform(rng, 0.01, 0.99);
    if (a > b) std::swap(a, b);
    if (b - a < 1e-6) continue;
    const double eps = test::uniform(rng, 0.05, 0.95);
    EXPECT_LT(concrete_sample(a, 2.0, eps), concrete_sample(b, 2.0, eps));
  }
}

TEST(GeneProperties, TemperatureLimitIsIndicator) {
  for (double pi : {0.05, 0.3, 0.49, 0.51, 0.7, 0.99})
    EXPECT_LT(std::abs(concrete_sample(pi, 1e-3, 0.5) - (pi > 0.5 ? 1.0 : 0.0)), 1e-6);
}

TEST(GeneProperties, SampledGateOpensWithProbabilityPi) {
  test::Rng rng(29);
  for (double pi : {0.1, 0.3, 0.5, 0.8}) {
    int open = 0;
    const int draws = 20000;
    for (int k = 0; k < draws; ++k) open += concrete_sample(pi, 0.1, test::uniform(rng, 1e-9, 1.0)) > 0.5;
    EXPECT_NEAR(static_cast<double>(open) / draws, pi, 0.015);
  }
}

TEST(GeneProperties, ClosedNodeDropsAllIncidentEdges) {
  test::Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = test::uniform_int(rng, 1, 12);
    EdgeList edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (test::uniform(rng, 0, 1) < 0.4) edges.push_back({i, j});
    Eigen::VectorXd node = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd edge = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(edges.size()));
    const int closed = test::uniform_int(rng, 0, n - 1);
    node(closed) = 0.0;
    for (auto [i, j] : hard_prune(node, edge, edges).edges) {
      EXPECT_NE(i, closed);
      EXPECT_NE(j, closed);
    }
  }
}

TEST(GeneProperties, KlIsNonnegativeAndZeroOnlyAtStandard) {
  test::Rng rng(10);
  for (int trial = 0; trial < 10000; ++trial) {
    const int d = test::uniform_int(rng, 1, 6);
    const RowVec mu = test::random_matrix(rng, 1, d);
    RowVec sigma(d);
    for (int i = 0; i < d; ++i) sigma(i) = test::uniform(rng, 0.05, 3.0);
    const double kl = kl_gaussian(mu, sigma);
    EXPECT_GE(kl, 0.0);
    if (kl <= 1e-9) {
      EXPECT_LT((mu.cwiseAbs().maxCoeff() + (sigma.array() - 1.0).abs().maxCoeff()), 1e-3);
    }
  }
}

}  // namespace
}  // namespace cmggib
