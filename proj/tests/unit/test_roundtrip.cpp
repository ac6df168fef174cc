#include <gtest/gtest.h>

#include <memory>
#include <sstream>

#include "support.hpp"

namespace cmggib {
namespace {

constexpr int kArtifacts = 100;

TEST(RoundTripChecks, CorpusFiles) {
  test::Rng rng(51);
  std::vector<Instance> corpus;
  for (int i = 0; i < kArtifacts; ++i) corpus.push_back(test::random_instance(rng, "rt" + std::to_string(i), 10));
  std::stringstream records, graphs;
  write_corpus(corpus, records, graphs);
  const auto back = parse_corpus(records, parse_graphs(graphs));
  ASSERT_EQ(back.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(to_json(back[i]), to_json(corpus[i]));
    EXPECT_EQ(back[i].vsg, corpus[i].vsg);
    EXPECT_EQ(back[i].tsg, corpus[i].tsg);
  }
}

TEST(RoundTripChecks, SceneGraphs) {
  test::Rng rng(52);
  for (int i = 0; i < kArtifacts; ++i) {
    const SceneGraph g = test::random_scene_graph(rng, i % 2 ? Modality::kVisual : Modality::kTextual, 12);
    EXPECT_EQ(parse_scene_graph(serialize(g)), g);
  }
}

TEST(RoundTripChecks, Checkpoints) {
  static std::unique_ptr<test::World> w = std::make_unique<test::World>(test::toy_config());
  const Model& base = w->model;
  test::Rng rng(53);
  for (int i = 0; i < kArtifacts; ++i) {
    Config cfg = base.config;
    cfg.seed = 2000 + static_cast<std::uint64_t>(i);
    cfg.tau = test::uniform(rng, 0.05, 1.0);
    cfg.lambda = test::uniform(rng, -1, 1);
    Model m = Model::assemble(cfg, base.labels, base.codebook, base.vocabulary, base.keyword_embeddings);
    m.visit([&](ag::Parameter& p, Component, ParamGroup) { p.value += test::random_matrix(rng, p.value.rows(), p.value.cols(), 1e-3); });
    const json saved = checkpoint_to_json(m);
    Model back = checkpoint_from_json(json::parse(saved.dump()));
    EXPECT_EQ(checkpoint_to_json(back), saved);
    EXPECT_EQ(back.config.to_text(), m.config.to_text());
    std::vector<Mat> a, b;
    m.visit([&](ag::Parameter& p, Component, ParamGroup) { a.push_back(p.value); });
    back.visit([&](ag::Parameter& p, Component, ParamGroup) { b.push_back(p.value); });
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]);
  }
}

TEST(RoundTripChecks, TopicDumps) {
  test::Rng rng(54);
  for (int i = 0; i < kArtifacts; ++i) {
    TopicDump dump;
    const int k = test::uniform_int(rng, 0, 6);
    for (int t = 0; t < k; ++t) {
      TopicEntry e;
      e.topic = t;
      for (int w = test::uniform_int(rng, 0, 5); w > 0; --w) e.textual.push_back(test::random_word(rng));
      for (int w = test::uniform_int(rng, 0, 5); w > 0; --w) e.visual.push_back(test::uniform_int(rng, 0, 40));
      dump.push_back(e);
    }
    EXPECT_EQ(parse_topic_dump(json::parse(to_json(dump).dump())), dump);
  }
}

}  // namespace
}  // namespace cmggib
