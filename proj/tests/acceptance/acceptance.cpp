// Acceptance runner. Links every unit suite, adds the seeded end-to-end
// experiments, and prints one PASS/FAIL line per criterion.

#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>

#include "support.hpp"

namespace cmggib {
namespace {

// The seeded planted-signal pipeline: synthesize, train the full schedule, evaluate.
struct PipelineRun {
  Config config;
  std::unique_ptr<test::World> world;
  TrainingLog log;
  EvaluationReport dev;
  EvaluationReport test;
  json checkpoint;

  explicit PipelineRun(const Config& cfg) : config(cfg) {
    world = std::make_unique<test::World>(cfg);
    log = run_schedule(world->model, world->train, world->dev, TrainingSchedule::from_config(cfg));
    dev = evaluate(world->model, world->dev);
    test = evaluate(world->model, world->test);
    checkpoint = checkpoint_to_json(world->model);
  }
};

PipelineRun& planted_run() {
  static std::unique_ptr<PipelineRun> run = std::make_unique<PipelineRun>(Config::desk());
  return *run;
}

TEST(Criterion4, PlantedSignalDenoising) {
  PipelineRun& run = planted_run();
  ASSERT_EQ(run.config.synth_instances, 500);
  ASSERT_EQ(run.config.synth_classes, 4);
  ASSERT_EQ(run.config.synth_strength, 1.0);
  // Gates on the held-out test split; entity nodes are neither signal nor noise.
  double signal = 0.0, noise = 0.0;
  int ns = 0, nn = 0;
  std::vector<double> scores;
  std::vector<bool> positive;
  for (const auto& o : run.test.outputs) {
    const auto roles = run.world->corpus.roles.at(o.id).cmg_order();
    for (std::size_t i = 0; i < roles.size(); ++i) {
      if (roles[i] == NodeRole::kEntity) continue;
      const double g = o.node_gate(static_cast<Eigen::Index>(i));
      scores.push_back(g);
      positive.push_back(roles[i] == NodeRole::kSignal);
      if (roles[i] == NodeRole::kSignal) {
        signal += g;
        ++ns;
      } else {
        noise += g;
        ++nn;
      }
    }
  }
  const double gap = signal / ns - noise / nn;
  const double rank = auc(scores, positive);
  std::cout << "  planted gate " << signal / ns << ", noise gate " << noise / nn << ", gap " << gap << ", AUC " << rank
            << ", dev F1 " << run.dev.metrics.f1 << "\n";
  EXPECT_GE(gap, 0.2);
  EXPECT_GE(rank, 0.8);
  EXPECT_GE(run.dev.metrics.f1, 0.9);
}

TEST(Criterion5, TopicRecovery) {
  TopicCorpusOptions corpus;
  corpus.topics = 3;
  corpus.text_vocab = 50;
  corpus.visual_vocab = 20;
  corpus.documents = 1000;
  const TopicCorpus c = synth_topic_corpus(corpus);
  nn::Rng rng(7);
  TopicModelParams p = TopicModelParams::init(corpus.dim, 16, 3, 50, 20, rng);
  TopicFitOptions fit;
  fit.seed = 7;
  fit_topic_model(p, c.states, c.text, c.visual, fit);
  const double text = aligned_topic_distance(row_softmax(p.chi.value), c.text_topics);
  const double visual = aligned_topic_distance(row_softmax(p.psi.value), c.visual_topics);
  std::cout << "  aligned TV text " << text << ", visual " << visual << "\n";
  EXPECT_LE(text, 0.15);
  EXPECT_LE(visual, 0.15);
}

TEST(Criterion6, EntropyOrdering) {
  PipelineRun& run = planted_run();
  const StageProbes probes =
      fit_stage_probes(evaluate(run.world->model, run.world->train).outputs, run.world->model.num_relations(), run.config);
  const double h = task_entropy(FeatureStage::kH, run.test.outputs, probes);
  const double z = task_entropy(FeatureStage::kZ, run.test.outputs, probes);
  const double s = task_entropy(FeatureStage::kS, run.test.outputs, probes);
  std::cout << "  entropy H " << h << ", z " << z << ", s " << s << "\n";
  EXPECT_LE(s, z);
  EXPECT_LE(z, h + 0.05);
}

TEST(Criterion7, Determinism) {
  PipelineRun& first = planted_run();
  PipelineRun second(first.config);
  EXPECT_EQ(first.dev.metrics.f1, second.dev.metrics.f1);
  EXPECT_EQ(first.dev.metrics.accuracy, second.dev.metrics.accuracy);
  EXPECT_EQ(first.test.metrics.f1, second.test.metrics.f1);
  EXPECT_EQ(first.test.metrics.confusion, second.test.metrics.confusion);
  ASSERT_EQ(first.log.records.size(), second.log.records.size());
  for (std::size_t i = 0; i < first.log.records.size(); ++i) EXPECT_EQ(first.log.records[i].to_json(), second.log.records[i].to_json());
  EXPECT_TRUE(first.checkpoint == second.checkpoint);
}

struct Criterion {
  int id;
  std::string title;
  std::vector<std::string> suites;  // suite names or "*Suffix" patterns
  double limit_seconds;             // 0 for no runtime bound
  int tests = 0;
  int failed = 0;
  double seconds = 0.0;

  bool matches(const std::string& suite) const {
    for (const auto& s : suites) {
      if (s.front() == '*') {
        const std::string tail = s.substr(1);
        if (suite.size() >= tail.size() && suite.compare(suite.size() - tail.size(), tail.size(), tail) == 0) return true;
      } else if (suite == s) {
        return true;
      }
    }
    return false;
  }
  bool passed() const { return tests > 0 && failed == 0 && (limit_seconds <= 0.0 || seconds < limit_seconds); }
};

class CriterionListener : public ::testing::EmptyTestEventListener {
 public:
  std::vector<Criterion> criteria = {
      {1, "unit examples", {"*Examples"}, 60.0},
      {2, "finite-difference gradients", {"GradientChecks"}, 300.0},
      {3, "brute-force oracles", {"OracleChecks"}, 60.0},
      {4, "planted-signal denoising", {"Criterion4"}, 900.0},
      {5, "topic recovery", {"Criterion5"}, 600.0},
      {6, "entropy ordering", {"Criterion6"}, 0.0},
      {7, "determinism", {"Criterion7"}, 0.0},
      {8, "schema round-trips", {"RoundTripChecks"}, 0.0},
  };

  void OnTestEnd(const ::testing::TestInfo& info) override {
    for (auto& c : criteria)
      if (c.matches(info.test_suite_name())) {
        ++c.tests;
        if (info.result()->Failed()) ++c.failed;
        c.seconds += static_cast<double>(info.result()->elapsed_time()) / 1000.0;
      }
  }

  bool all_passed() const {
    for (const auto& c : criteria)
      if (!c.passed()) return false;
    return true;
  }

  void report(std::ostream& os) const {
    os << "\n";
    for (const auto& c : criteria) {
      char line[256];
      std::snprintf(line, sizeof line, "criterion %d %-30s %s  (%d tests, %d failed, %.1f s%s)", c.id, c.title.c_str(),
                    c.passed() ? "PASS" : c.tests == 0 ? "NOT RUN" : "FAIL", c.tests, c.failed, c.seconds,
                    c.limit_seconds > 0.0 ? (", limit " + std::to_string(static_cast<int>(c.limit_seconds)) + " s").c_str() : "");
      os << line << "\n";
    }
  }
};

}  // namespace
}  // namespace cmggib

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  auto* listener = new cmggib::CriterionListener;
  ::testing::UnitTest::GetInstance()->listeners().Append(listener);
  const int status = RUN_ALL_TESTS();
  listener->report(std::cout);
  return status == 0 && listener->all_passed() ? 0 : 1;
}
