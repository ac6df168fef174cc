#include <gtest/gtest.h>

#include "support.hpp"

namespace cmggib {
namespace {

SceneGraph triple() {
  SceneGraph g;
  g.modality = Modality::kVisual;
  g.nodes = {{1, NodeKind::kObject, "man", BoundingBox{0, 0, 10, 10}, {}},
             {2, NodeKind::kRelation, "holding", {}, {}},
             {3, NodeKind::kObject, "ball", BoundingBox{5, 5, 20, 30}, {}}};
  g.edges = {{1, 2}, {2, 3}};
  return g;
}

// Returns fixed vectors per token, with no context mixing.
class TableProvider : public EmbeddingProvider {
 public:
  std::map<std::string, RowVec> table;
  int dim() const override { return 2; }
  int word_dim() const override { return 1; }
  RowVec region(const RegionQuery&) const override { return RowVec::Zero(2); }
  Mat tokens(const std::vector<std::string>& toks) const override {
    Mat m(static_cast<Eigen::Index>(toks.size()), 2);
    for (std::size_t i = 0; i < toks.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = table.at(toks[i]);
    return m;
  }
  RowVec word(const std::string&) const override { return RowVec::Zero(1); }
};

SceneGraph text_graph(TokenSpan span) {
  SceneGraph g;
  g.modality = Modality::kTextual;
  g.nodes = {{0, NodeKind::kObject, "x", {}, span}};
  return g;
}

TEST(SgCoreExamples, EmptyGraphIsValid) {
  const SceneGraph g = parse_scene_graph(R"({"modality":"visual","nodes":[],"edges":[]})");
  EXPECT_TRUE(g.nodes.empty());
  EXPECT_TRUE(g.edges.empty());
  EXPECT_TRUE(validate(g).empty());
}

TEST(SgCoreExamples, MinimalRelationTripleIsValid) {
  const std::string doc = serialize(triple());
  EXPECT_NO_THROW(parse_scene_graph(doc));
  EXPECT_TRUE(validate(triple()).empty());
}

TEST(SgCoreExamples, RelationWithTwoOutgoingEdgesIsRejected) {
  SceneGraph g = triple();
  g.edges = {{2, 1}, {2, 3}};
  EXPECT_THROW(parse_scene_graph(serialize(g)), ValidationError);
}

TEST(SgCoreExamples, ZeroFusionMatrixGivesZeroVector) {
  const RowVec out = fuse_visual_features(RowVec::Constant(3, 0.7), RowVec::Constant(2, -1.3), Mat::Zero(3, 5));
  EXPECT_EQ(out, RowVec::Zero(3));
}

TEST(SgCoreExamples, LabelColumnZeroedIgnoresLabel) {
  Mat w1(2, 3);
  w1 << 1, 0, 0, 0, 1, 0;
  RowVec label(1);
  label << 5.0;
  const RowVec out = fuse_visual_features(RowVec::Zero(2), label, w1);
  EXPECT_NEAR(out(0), 0.0, 1e-12);
  EXPECT_NEAR(out(1), 0.0, 1e-12);
}

TEST(SgCoreExamples, ScalarFusionIsTanhOfSum) {
  Mat w1(1, 2);
  w1 << 1, 1;
  RowVec a(1), b(1);
  a << 0.5;
  b << 0.5;
  EXPECT_NEAR(fuse_visual_features(a, b, w1)(0), 0.7615941559557649, 1e-6);
}

TEST(SgCoreExamples, SingleTokenSpanIsThatToken) {
  TableProvider p;
  p.table["a"] = (RowVec(2) << 0.3, -0.4).finished();
  p.table["b"] = (RowVec(2) << 1.0, 2.0).finished();
  const Mat out = embed_textual_nodes(text_graph({1, 2}), {"a", "b"}, p);
  EXPECT_EQ(RowVec(out.row(0)), p.table["b"]);
}

TEST(SgCoreExamples, TwoTokenSpanIsMean) {
  TableProvider p;
  p.table["a"] = (RowVec(2) << 1.0, 0.0).finished();
  p.table["b"] = (RowVec(2) << 0.0, 1.0).finished();
  const Mat out = embed_textual_nodes(text_graph({0, 2}), {"a", "b"}, p);
  EXPECT_NEAR(out(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(out(0, 1), 0.5, 1e-12);
}

TEST(SgCoreExamples, EmptySpanIsRejected) {
  TableProvider p;
  p.table["a"] = RowVec::Zero(2);
  EXPECT_THROW(embed_textual_nodes(text_graph({1, 1}), {"a"}, p), StructuralError);
}

TEST(SgCoreExamples, ValidGraphHasNoViolations) { EXPECT_TRUE(validate(triple()).empty()); }

TEST(SgCoreExamples, DanglingEdgeIsOneViolation) {
  SceneGraph g = triple();
  g.nodes.push_back({4, NodeKind::kAttribute, "red", {}, {}});
  g.edges.push_back({4, 99});
  const auto vs = validate(g);
  const auto dangling = std::count_if(vs.begin(), vs.end(), [](const Violation& v) { return v.rule == "dangling-edge"; });
  EXPECT_EQ(dangling, 1);
}

TEST(SgCoreExamples, AttributeWithTwoEdgesIsOneDegreeViolation) {
  SceneGraph g = triple();
  g.nodes.push_back({4, NodeKind::kAttribute, "red", {}, {}});
  g.edges.push_back({4, 1});
  g.edges.push_back({4, 3});
  const auto vs = validate(g);
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].rule, "attribute-degree");
  EXPECT_EQ(vs[0].subject, "node 4");
}

TEST(SgCoreBehaviour, SchemaErrorNamesTheField) {
  try {
    parse_scene_graph(R"({"modality":"visual","nodes":[{"id":1,"label":"x"}],"edges":[]})");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("nodes[0].kind"), std::string::npos);
  }
}

TEST(SgCoreBehaviour, DanglingEdgeNamesTheEdgeIndex) {
  try {
    parse_scene_graph(R"({"modality":"visual","nodes":[],"edges":[[1,2]]})");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("edge 0"), std::string::npos);
  }
}

TEST(SgCoreBehaviour, MissingRegionIsStructuralError) {
  SceneGraph g;
  g.modality = Modality::kVisual;
  g.nodes = {{1, NodeKind::kObject, "man", {}, {}}};
  EXPECT_THROW(region_query(g, g.nodes[0], "img"), StructuralError);
}

TEST(SgCoreBehaviour, AttributeReusesObjectRegionAndRelationUsesUnion) {
  SceneGraph g = triple();
  g.nodes.push_back({4, NodeKind::kAttribute, "red", {}, {}});
  g.edges.push_back({4, 1});
  const RegionQuery attr = region_query(g, g.node(4), "img");
  EXPECT_EQ(attr.box, (BoundingBox{0, 0, 10, 10}));
  EXPECT_EQ(attr.category, "man");
  EXPECT_EQ(region_query(g, g.node(2), "img").box, (BoundingBox{0, 0, 20, 30}));
}

TEST(SgCoreProperties, SerializeParseRoundTrip) {
  test::Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto mod = trial % 2 ? Modality::kVisual : Modality::kTextual;
    const SceneGraph g = test::random_scene_graph(rng, mod, 12);
    ASSERT_TRUE(validate(g).empty()) << describe(validate(g));
    EXPECT_EQ(parse_scene_graph(serialize(g)), g);
  }
}

TEST(SgCoreProperties, ProviderIsDeterministic) {
  SyntheticProvider a(7, 8, 4), b(7, 8, 4);
  const std::vector<std::string> toks = {"the", "man", "holds", "a", "ball"};
  EXPECT_EQ(a.tokens(toks), b.tokens(toks));
  EXPECT_EQ(a.word("dog"), b.word("dog"));
  const RegionQuery q{"img", {1, 2, 3, 4}, "dog"};
  EXPECT_EQ(a.region(q), b.region(q));
}

TEST(SgCoreProperties, VisualEmbeddingIsBounded) {
  test::Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    // Scales keep pre-activations well below the point where tanh rounds to 1 in double precision.
    const Mat w1 = test::random_matrix(rng, 6, 10, 0.5);
    const RowVec out = fuse_visual_features(test::random_matrix(rng, 1, 6, 1.0), test::random_matrix(rng, 1, 4, 1.0), w1);
    EXPECT_LT(out.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(SgCoreProperties, ModalitiesShareDimension) {
  for (int d1 : {2, 8, 33}) {
    SyntheticProvider p(3, d1, 5);
    SceneGraph vsg = triple();
    LabelEmbeddingTable table = LabelEmbeddingTable::build({"man", "holding", "ball"}, p);
    const Mat w1 = Mat::Identity(d1, d1 + 5);
    const RowVec v = embed_visual_node(vsg, vsg.nodes[0], "img", p, table, w1);
    const Mat t = embed_textual_nodes(text_graph({0, 1}), {"man"}, p);
    EXPECT_EQ(v.size(), t.cols());
  }
}

}  // namespace
}  // namespace cmggib
