#pragma once

// Shared fixtures for the test suites: random scene graphs and instances,
// a tiny synthetic world, and a central finite-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cmggib/cmggib.hpp"

namespace cmggib::test {

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Mat random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = nd(rng);
  return m;
}

inline std::string random_word(Rng& rng) {
  static const std::vector<std::string> pool = {"man",  "dog",  "ball",   "red",   "tall",  "near", "hat",
                                                "tree", "blue", "holding", "car",  "wet",   "sky",  "under"};
  return pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
}

// A valid scene graph: objects first, then attributes and relations hung on
// them, never more than `max_nodes` nodes. Ids are shuffled distinct integers.
inline SceneGraph random_scene_graph(Rng& rng, Modality modality, int max_nodes, int num_tokens = 12) {
  SceneGraph g;
  g.modality = modality;
  const int budget = uniform_int(rng, 0, max_nodes);
  const int objects = budget == 0 ? 0 : uniform_int(rng, 1, std::max(1, budget / 2 + 1));
  std::vector<int> ids(static_cast<std::size_t>(budget));
  for (int i = 0; i < budget; ++i) ids[static_cast<std::size_t>(i)] = i * 3 + uniform_int(rng, 0, 2);
  std::shuffle(ids.begin(), ids.end(), rng);
  auto make = [&](int k, NodeKind kind) {
    SGNode n;
    n.id = ids[static_cast<std::size_t>(k)];
    n.kind = kind;
    n.label = random_word(rng);
    if (modality == Modality::kVisual) {
      if (kind == NodeKind::kObject) {
        const double x0 = uniform(rng, 0, 50), y0 = uniform(rng, 0, 50);
        n.region = BoundingBox{x0, y0, x0 + uniform(rng, 1, 50), y0 + uniform(rng, 1, 50)};
      }
    } else {
      const int s = uniform_int(rng, 0, num_tokens - 1);
      n.span = TokenSpan{s, std::min(num_tokens, s + uniform_int(rng, 1, 2))};
    }
    return n;
  };
  for (int k = 0; k < objects; ++k) g.nodes.push_back(make(k, NodeKind::kObject));
  for (int k = objects; k < budget; ++k) {
    const int a = g.nodes[static_cast<std::size_t>(uniform_int(rng, 0, objects - 1))].id;
    if (objects >= 2 && uniform_int(rng, 0, 1) == 1) {
      int b = a;
      while (b == a) b = g.nodes[static_cast<std::size_t>(uniform_int(rng, 0, objects - 1))].id;
      SGNode r = make(k, NodeKind::kRelation);
      g.nodes.push_back(r);
      g.edges.push_back({a, r.id});
      g.edges.push_back({r.id, b});
    } else {
      SGNode at = make(k, NodeKind::kAttribute);
      g.nodes.push_back(at);
      g.edges.push_back({at.id, a});
    }
  }
  return g;
}

inline Instance random_instance(Rng& rng, const std::string& id, int max_nodes = 8) {
  Instance inst;
  inst.id = id;
  const int n = uniform_int(rng, 4, 12);
  for (int i = 0; i < n; ++i) inst.tokens.push_back(random_word(rng));
  inst.image_ref = "img-" + id;
  inst.vsg = random_scene_graph(rng, Modality::kVisual, max_nodes);
  inst.tsg = random_scene_graph(rng, Modality::kTextual, max_nodes, n);
  inst.subject = {"subj", {0, 1}};
  inst.object = {"obj", {n - 1, n}};
  inst.relation = relation_labels()[static_cast<std::size_t>(uniform_int(rng, 0, 22))];
  return inst;
}

// Compact settings for fast end-to-end checks (d₁ = 8, K = 3).
inline Config toy_config() {
  Config c = Config::desk();
  c.d1 = 8;
  c.d2 = 4;
  c.mlp_width = 8;
  c.topics = 3;
  c.keywords = 3;
  c.codebook_size = 6;
  c.synth_instances = 60;
  c.epochs_gene = 3;
  c.epochs_lamo = 2;
  c.epochs_joint = 2;
  return c;
}

struct World {
  Config config;
  SyntheticProvider provider;
  SynthCorpus corpus;
  Model model;
  std::vector<FeaturizedInstance> train, dev, test;

  explicit World(const Config& cfg)
      : config(cfg),
        provider(cfg.seed, cfg.d1, cfg.d2, cfg.context_mix, cfg.region_jitter),
        corpus((plant_correlations(provider, cfg.synth_classes, cfg.synth_plant_cosine),
                synth_corpus(SynthOptions::from_config(cfg)))),
        model(Model::create(cfg, corpus.train, corpus.all(), provider)) {
    for (const auto& i : corpus.train) train.push_back(model.featurize(i, provider));
    for (const auto& i : corpus.dev) dev.push_back(model.featurize(i, provider));
    for (const auto& i : corpus.test) test.push_back(model.featurize(i, provider));
  }
};

// Per-tensor relative error ‖a − n‖ / max(‖a‖, ‖n‖) between the analytic and
// central-difference gradients over a random subset of entries.
struct GradientCheck {
  double worst = 0.0;
  std::string worst_tensor;
  int tensors = 0;
};

inline GradientCheck check_gradients(const std::vector<ag::Parameter*>& params,
                                     const std::function<ag::Var(ag::Tape&)>& loss, Rng& rng, int entries = 6,
                                     double step = 1e-4) {
  for (auto* p : params) p->zero_grad();
  {
    ag::Tape t;
    t.backward(loss(t));
  }
  auto value = [&] {
    ag::Tape t;
    return loss(t).scalar();
  };
  GradientCheck out;
  for (auto* p : params) {
    if (p->value.size() == 0) continue;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(p->value.size()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) idx[static_cast<std::size_t>(i)] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(entries)));
    Eigen::VectorXd analytic(static_cast<Eigen::Index>(idx.size()));
    Eigen::VectorXd numeric(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Eigen::Index i = idx[k];
      const double keep = p->value(i);
      p->value(i) = keep + step;
      const double up = value();
      p->value(i) = keep - step;
      const double down = value();
      p->value(i) = keep;
      analytic(static_cast<Eigen::Index>(k)) = p->grad(i);
      numeric(static_cast<Eigen::Index>(k)) = (up - down) / (2.0 * step);
    }
    const double scale = std::max(analytic.norm(), numeric.norm());
    const double diff = (analytic - numeric).norm();
    const double rel = scale < 1e-7 ? diff : diff / scale;
    ++out.tensors;
    if (rel > out.worst) {
      out.worst = rel;
      out.worst_tensor = p->name;
    }
  }
  return out;
}

}  // namespace cmggib::test
