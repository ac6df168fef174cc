#pragma once

// Seeded synthetic corpora.
//
// synth_corpus plants one class-bearing concept per instance: a textual
// predicate token, and a visual object with an attribute whose region vectors
// are bent towards that predicate. Everything else (scenery objects,
// attributes, spatial relations, a person box) is noise drawn independently
// of the label. Node roles are returned so pruning can be scored.
//
// synth_topic_corpus samples documents from a known topic model.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cmggib/config.hpp"
#include "cmggib/corpus.hpp"
#include "cmggib/embedding.hpp"
#include "cmggib/lamo.hpp"

namespace cmggib {

enum class NodeRole { kSignal, kNoise, kEntity };

inline std::string to_string(NodeRole r) {
  switch (r) {
    case NodeRole::kSignal: return "signal";
    case NodeRole::kNoise: return "noise";
    case NodeRole::kEntity: return "entity";
  }
  return "?";
}

// Roles in CMG order: textual nodes first, then visual nodes.
struct NodeRoles {
  std::vector<NodeRole> textual;
  std::vector<NodeRole> visual;

  std::vector<NodeRole> cmg_order() const {
    std::vector<NodeRole> all = textual;
    all.insert(all.end(), visual.begin(), visual.end());
    return all;
  }
};

struct SynthOptions {
  int instances = 500;
  int classes = 4;
  double strength = 1.0;
  double dev_fraction = 0.15;
  double test_fraction = 0.15;
  double plant_cosine = 0.8;
  double decoy_rate = 0.0;  // chance of borrowing another class's predicate / emblem as noise
  std::uint64_t seed = 13;

  static SynthOptions from_config(const Config& c) {
    SynthOptions o;
    o.instances = c.synth_instances;
    o.classes = c.synth_classes;
    o.strength = c.synth_strength;
    o.dev_fraction = c.synth_dev_fraction;
    o.test_fraction = c.synth_test_fraction;
    o.plant_cosine = c.synth_plant_cosine;
    o.decoy_rate = c.synth_decoy_rate;
    o.seed = c.seed;
    return o;
  }
};

struct SynthCorpus {
  std::vector<Instance> train;
  std::vector<Instance> dev;
  std::vector<Instance> test;
  std::map<std::string, NodeRoles> roles;
  std::vector<int> planted;  // planted class per instance, in generation order

  std::vector<Instance> all() const {
    std::vector<Instance> out = train;
    out.insert(out.end(), dev.begin(), dev.end());
    out.insert(out.end(), test.begin(), test.end());
    return out;
  }
};

namespace synth_words {

inline const std::vector<std::string>& predicates() {
  static const std::vector<std::string> w = {"raised",  "married", "coached", "hosted",  "founded", "visited",
                                             "signed",  "painted", "joined",  "defended", "elected", "adopted"};
  return w;
}
inline const std::vector<std::string>& emblems() {
  static const std::vector<std::string> w = {"cradle", "ring",    "whistle", "podium", "ribbon", "trophy",
                                             "banner", "anchor",  "lantern", "compass", "crown", "shield"};
  return w;
}
inline const std::vector<std::string>& finishes() {
  static const std::vector<std::string> w = {"golden", "silver", "striped", "glowing", "wooden", "marble",
                                             "velvet", "crystal", "rusty",  "enamel",  "woven",  "bronze"};
  return w;
}
inline const std::vector<std::string>& scenery() {
  static const std::vector<std::string> w = {"tree",  "car",   "dog",   "table", "chair", "lamp",  "window", "door",
                                             "bottle", "cup",  "book",  "phone", "bag",   "hat",   "shirt",  "bench",
                                             "road",  "sky",   "wall",  "grass", "bike",  "boat",  "clock",  "sign",
                                             "fence", "plate", "ball",  "cat",   "horse", "train"};
  return w;
}
inline const std::vector<std::string>& adjectives() {
  static const std::vector<std::string> w = {"red", "blue", "small", "large", "old",  "young",
                                             "dark", "bright", "green", "white", "tall", "short"};
  return w;
}
inline const std::vector<std::string>& spatial() {
  static const std::vector<std::string> w = {"near", "behind", "holding", "beside", "under", "above", "wearing", "facing"};
  return w;
}
inline const std::vector<std::string>& names() {
  static const std::vector<std::string> w = {"alice", "bruno", "chen",  "dara",  "emeka", "farah", "goran", "hana",
                                             "ivan",  "jun",   "kofi",  "lena",  "mateo", "nadia", "omar",  "priya",
                                             "quinn", "rosa",  "sven",  "tara",  "umar",  "vera",  "wes",   "ximena",
                                             "yusuf", "zoe",   "amara", "boris", "celia", "dmitri"};
  return w;
}

inline std::string pick(const std::vector<std::string>& pool, int k) {
  const auto n = static_cast<int>(pool.size());
  return k < n ? pool[static_cast<std::size_t>(k)] : pool[static_cast<std::size_t>(k % n)] + std::to_string(k / n);
}

inline std::string predicate(int k) { return pick(predicates(), k); }
inline std::string emblem(int k) { return pick(emblems(), k); }
inline std::string finish(int k) { return pick(finishes(), k); }

}  // namespace synth_words

// Bends the planted visual categories towards their predicates.
inline void plant_correlations(SyntheticProvider& provider, int classes, double plant_cosine) {
  for (int k = 0; k < classes; ++k) provider.correlate(synth_words::predicate(k), synth_words::emblem(k), plant_cosine);
}

inline SynthCorpus synth_corpus(const SynthOptions& opt) {
  const int max_classes = static_cast<int>(relation_labels().size()) - 1;
  if (opt.classes < 2 || opt.classes > max_classes)
    throw ConfigError("synthetic corpus needs between 2 and " + std::to_string(max_classes) + " classes");
  if (opt.strength < 0.0 || opt.strength > 1.0) throw ConfigError("plant strength must lie in [0, 1]");
  if (opt.instances < 0) throw ConfigError("instance count must be nonnegative");
  using namespace synth_words;

  std::mt19937_64 rng(fnv1a(opt.seed, "synth-corpus"));
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };
  auto any_of = [&](const std::vector<std::string>& pool) { return pool[static_cast<std::size_t>(uniform_int(0, static_cast<int>(pool.size()) - 1))]; };
  auto random_box = [&]() {
    const double x0 = uniform_int(0, 500);
    const double y0 = uniform_int(0, 360);
    return BoundingBox{x0, y0, x0 + uniform_int(20, 140), y0 + uniform_int(20, 120)};
  };

  SynthCorpus out;
  std::vector<Instance> all;
  for (int idx = 0; idx < opt.instances; ++idx) {
    const int cls = uniform_int(0, opt.classes - 1);
    const int planted = coin(opt.strength) ? cls : uniform_int(0, opt.classes - 1);
    out.planted.push_back(planted);
    auto other_class = [&]() {
      const int k = uniform_int(0, opt.classes - 2);
      return k >= planted ? k + 1 : k;
    };

    Instance inst;
    inst.id = "syn-" + std::to_string(opt.seed) + "-" + std::to_string(idx);
    inst.image_ref = "img-" + std::to_string(opt.seed) + "-" + std::to_string(idx);
    inst.relation = relation_labels()[static_cast<std::size_t>(cls + 1)];
    NodeRoles roles;

    // Text: "<subj> <predicate> <obj> with [adj] noun ... <spatial> [adj] noun ..."
    std::string subj = any_of(names());
    std::string obj = any_of(names());
    while (obj == subj) obj = any_of(names());
    inst.tokens = {subj, predicate(planted), obj, "with"};
    inst.subject = {subj, {0, 1}};
    inst.object = {obj, {2, 3}};
    SceneGraph& tsg = inst.tsg;
    tsg.modality = Modality::kTextual;
    auto add_text = [&](NodeKind kind, const std::string& label, int pos, NodeRole role) {
      const int id = static_cast<int>(tsg.nodes.size());
      SGNode n;
      n.id = id;
      n.kind = kind;
      n.label = label;
      n.span = TokenSpan{pos, pos + 1};
      tsg.nodes.push_back(n);
      roles.textual.push_back(role);
      return id;
    };
    const int t_subj = add_text(NodeKind::kObject, subj, 0, NodeRole::kEntity);
    const int t_obj = add_text(NodeKind::kObject, obj, 2, NodeRole::kEntity);
    const int t_pred = add_text(NodeKind::kRelation, predicate(planted), 1, NodeRole::kSignal);
    tsg.edges.push_back({t_subj, t_pred});
    tsg.edges.push_back({t_pred, t_obj});

    std::vector<std::string> text_nouns;
    std::vector<int> text_objects = {t_subj, t_obj};
    const int n_text_nouns = uniform_int(2, 3);
    for (int k = 0; k < n_text_nouns; ++k) {
      std::string noun = any_of(scenery());
      text_nouns.push_back(noun);
      int attr_pos = -1;
      std::string adj;
      if (coin(0.5)) {
        adj = any_of(adjectives());
        attr_pos = static_cast<int>(inst.tokens.size());
        inst.tokens.push_back(adj);
      }
      const int pos = static_cast<int>(inst.tokens.size());
      inst.tokens.push_back(noun);
      const int o = add_text(NodeKind::kObject, noun, pos, NodeRole::kNoise);
      text_objects.push_back(o);
      if (attr_pos >= 0) {
        const int a = add_text(NodeKind::kAttribute, adj, attr_pos, NodeRole::kNoise);
        tsg.edges.push_back({o, a});
      }
      if (k + 1 < n_text_nouns) inst.tokens.push_back("and");
    }
    const int n_text_rel = uniform_int(1, 2);
    for (int k = 0; k < n_text_rel; ++k) {
      const int a = text_objects[static_cast<std::size_t>(uniform_int(0, static_cast<int>(text_objects.size()) - 1))];
      int b = text_objects[static_cast<std::size_t>(uniform_int(2, static_cast<int>(text_objects.size()) - 1))];
      if (a == b) b = t_subj == a ? t_obj : t_subj;
      const int pos = static_cast<int>(inst.tokens.size());
      // Some scenery relations borrow another class's predicate as a decoy.
      const std::string word = coin(opt.decoy_rate) ? predicate(other_class()) : any_of(spatial());
      inst.tokens.push_back(word);
      const int r = add_text(NodeKind::kRelation, word, pos, NodeRole::kNoise);
      tsg.edges.push_back({a, r});
      tsg.edges.push_back({r, b});
    }

    // Image: planted emblem + finish, a person box, scenery with attributes and relations.
    SceneGraph& vsg = inst.vsg;
    vsg.modality = Modality::kVisual;
    auto add_visual = [&](NodeKind kind, const std::string& label, NodeRole role, bool boxed) {
      const int id = static_cast<int>(vsg.nodes.size());
      SGNode n;
      n.id = id;
      n.kind = kind;
      n.label = label;
      if (boxed) n.region = random_box();
      vsg.nodes.push_back(n);
      roles.visual.push_back(role);
      return id;
    };
    const int v_emblem = add_visual(NodeKind::kObject, emblem(planted), NodeRole::kSignal, true);
    const int v_finish = add_visual(NodeKind::kAttribute, finish(planted), NodeRole::kSignal, false);
    vsg.edges.push_back({v_emblem, v_finish});
    std::vector<int> visual_objects = {v_emblem, add_visual(NodeKind::kObject, "person", NodeRole::kNoise, true)};
    if (coin(opt.decoy_rate)) visual_objects.push_back(add_visual(NodeKind::kObject, emblem(other_class()), NodeRole::kNoise, true));
    const int n_vis_nouns = uniform_int(2, 4);
    for (int k = 0; k < n_vis_nouns; ++k) {
      const std::string noun = coin(0.5) && k < static_cast<int>(text_nouns.size()) ? text_nouns[static_cast<std::size_t>(k)]
                                                                                   : any_of(scenery());
      const int o = add_visual(NodeKind::kObject, noun, NodeRole::kNoise, true);
      visual_objects.push_back(o);
      if (coin(0.5)) {
        const int a = add_visual(NodeKind::kAttribute, any_of(adjectives()), NodeRole::kNoise, false);
        vsg.edges.push_back({o, a});
      }
    }
    const int n_vis_rel = uniform_int(1, 2);
    for (int k = 0; k < n_vis_rel; ++k) {
      const int a = visual_objects[static_cast<std::size_t>(uniform_int(0, static_cast<int>(visual_objects.size()) - 1))];
      int b = visual_objects[static_cast<std::size_t>(uniform_int(1, static_cast<int>(visual_objects.size()) - 1))];
      if (a == b) b = visual_objects[1] == a ? visual_objects[2] : visual_objects[1];
      const int r = add_visual(NodeKind::kRelation, any_of(spatial()), NodeRole::kNoise, false);
      vsg.edges.push_back({a, r});
      vsg.edges.push_back({r, b});
    }

    out.roles[inst.id] = std::move(roles);
    all.push_back(std::move(inst));
  }

  const auto n = static_cast<int>(all.size());
  const int n_dev = static_cast<int>(opt.dev_fraction * n + 0.5);
  const int n_test = static_cast<int>(opt.test_fraction * n + 0.5);
  const int n_train = std::max(0, n - n_dev - n_test);
  for (int i = 0; i < n; ++i) {
    auto& dst = i < n_train ? out.train : (i < n_train + n_dev ? out.dev : out.test);
    dst.push_back(all[static_cast<std::size_t>(i)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Known-topic corpus

struct TopicCorpus {
  Mat text_topics;    // K × U^T, rows on the simplex
  Mat visual_topics;  // K × U^I
  std::vector<int> topic;
  std::vector<BowVector> text;
  std::vector<BowVector> visual;
  std::vector<Mat> states;  // per-document H: one row per observed word
};

struct TopicCorpusOptions {
  int topics = 3;
  int text_vocab = 50;
  int visual_vocab = 20;
  int documents = 1000;
  int text_length = 60;
  int visual_length = 20;
  int dim = 16;
  double background = 0.02;  // weight of each off-topic word before normalization
  std::uint64_t seed = 13;
};

namespace detail {

// Each topic owns a contiguous block of the vocabulary with log-normal weights.
inline Mat block_topics(int k, int vocab, double background, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.5);
  Mat m = Mat::Constant(k, vocab, background);
  for (int t = 0; t < k; ++t) {
    const int lo = t * vocab / k;
    const int hi = (t + 1) * vocab / k;
    for (int w = lo; w < hi; ++w) m(t, w) = std::exp(nd(rng));
    m.row(t) /= m.row(t).sum();
  }
  return m;
}

inline BowVector draw_counts(const RowVec& p, int length, std::mt19937_64& rng) {
  std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
  BowVector b(static_cast<std::size_t>(p.size()), 0);
  for (int i = 0; i < length; ++i) ++b[static_cast<std::size_t>(dist(rng))];
  return b;
}

}  // namespace detail

inline TopicCorpus synth_topic_corpus(const TopicCorpusOptions& opt) {
  if (opt.topics < 2) throw ConfigError("topic corpus needs at least 2 topics");
  std::mt19937_64 rng(fnv1a(opt.seed, "topic-corpus"));
  TopicCorpus c;
  c.text_topics = detail::block_topics(opt.topics, opt.text_vocab, opt.background, rng);
  c.visual_topics = detail::block_topics(opt.topics, opt.visual_vocab, opt.background, rng);
  SyntheticProvider words(opt.seed, opt.dim, 1);
  Mat text_vec(opt.text_vocab, opt.dim);
  Mat vis_vec(opt.visual_vocab, opt.dim);
  for (int w = 0; w < opt.text_vocab; ++w) text_vec.row(w) = words.base("word" + std::to_string(w));
  for (int w = 0; w < opt.visual_vocab; ++w) vis_vec.row(w) = words.base("vword" + std::to_string(w));
  std::uniform_int_distribution<int> pick_topic(0, opt.topics - 1);
  for (int d = 0; d < opt.documents; ++d) {
    const int t = pick_topic(rng);
    c.topic.push_back(t);
    c.text.push_back(detail::draw_counts(c.text_topics.row(t), opt.text_length, rng));
    c.visual.push_back(detail::draw_counts(c.visual_topics.row(t), opt.visual_length, rng));
    Mat h(opt.text_length + opt.visual_length, opt.dim);
    Eigen::Index r = 0;
    for (int w = 0; w < opt.text_vocab; ++w)
      for (int k = 0; k < c.text.back()[static_cast<std::size_t>(w)]; ++k) h.row(r++) = text_vec.row(w);
    for (int w = 0; w < opt.visual_vocab; ++w)
      for (int k = 0; k < c.visual.back()[static_cast<std::size_t>(w)]; ++k) h.row(r++) = vis_vec.row(w);
    c.states.push_back(std::move(h));
  }
  return c;
}

}  // namespace cmggib
