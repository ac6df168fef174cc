#pragma once

// Node featurization: the embedding-provider interface, a seeded synthetic
// provider, the trainable label-embedding table, and visual/textual node
// embedding assembly.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "cmggib/autograd.hpp"
#include "cmggib/errors.hpp"
#include "cmggib/sg_core.hpp"

namespace cmggib {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

// What a region encoder is asked to look at. `category` is the detector's
// label for the region; real image encoders may ignore it.
struct RegionQuery {
  std::string image_ref;
  BoundingBox box;
  std::string category;
};

// Frozen feature extractor shared by both modalities. Region and token
// vectors live in one dim()-dimensional space; word() serves the label table.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual int dim() const = 0;
  virtual int word_dim() const = 0;
  virtual RowVec region(const RegionQuery& q) const = 0;
  // One contextual row per token.
  virtual Mat tokens(const std::vector<std::string>& toks) const = 0;
  virtual RowVec word(const std::string& label) const = 0;

  // Topic keywords are embedded through the token path so they share the node space.
  virtual RowVec keyword(const std::string& w) const { return tokens({w}).row(0); }
};

inline std::uint64_t fnv1a(std::uint64_t seed, const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Deterministic pseudo-random unit vectors keyed by (seed, string).
//
// correlate(anchor, follower, s) bends follower's base vector towards the
// anchor's so tests can plant cross-modal matches with a chosen cosine.
class SyntheticProvider : public EmbeddingProvider {
 public:
  SyntheticProvider(std::uint64_t seed, int d1, int d2, double context_mix = 0.1, double region_jitter = 0.3)
      : seed_(seed), d1_(d1), d2_(d2), context_mix_(context_mix), region_jitter_(region_jitter) {
    if (d1 <= 0 || d2 <= 0) throw ConfigError("embedding dimensions must be positive");
  }

  int dim() const override { return d1_; }
  int word_dim() const override { return d2_; }

  void correlate(const std::string& anchor, const std::string& follower, double strength) {
    correlations_[follower] = {anchor, strength};
  }

  RowVec base(const std::string& key) const {
    RowVec v = raw("b:" + key, d1_);
    if (auto it = correlations_.find(key); it != correlations_.end()) {
      const double s = it->second.second;
      v = s * raw("b:" + it->second.first, d1_) + (1.0 - s) * v;
    }
    return v.normalized();
  }

  RowVec region(const RegionQuery& q) const override {
    std::string where = q.image_ref + "@" + std::to_string(q.box.x0) + "," + std::to_string(q.box.y0) + "," +
                        std::to_string(q.box.x1) + "," + std::to_string(q.box.y1);
    RowVec v = base(q.category) + region_jitter_ * raw("r:" + where, d1_);
    return v.normalized();
  }

  Mat tokens(const std::vector<std::string>& toks) const override {
    const auto n = static_cast<Eigen::Index>(toks.size());
    Mat bases(n, d1_);
    for (Eigen::Index i = 0; i < n; ++i) bases.row(i) = base(toks[static_cast<std::size_t>(i)]);
    Mat out(n, d1_);
    for (Eigen::Index i = 0; i < n; ++i) {
      RowVec v = bases.row(i);
      if (i > 0) v += context_mix_ * bases.row(i - 1);
      if (i + 1 < n) v += context_mix_ * bases.row(i + 1);
      out.row(i) = v.normalized();
    }
    return out;
  }

  RowVec word(const std::string& label) const override { return raw("w:" + label, d2_).normalized(); }

 private:
  RowVec raw(const std::string& key, int d) const {
    std::mt19937_64 gen(fnv1a(seed_, key));
    std::normal_distribution<double> nd(0.0, 1.0);
    RowVec v(d);
    for (int i = 0; i < d; ++i) v(i) = nd(gen);
    return v;
  }

  std::uint64_t seed_;
  int d1_;
  int d2_;
  double context_mix_;
  double region_jitter_;
  std::map<std::string, std::pair<std::string, double>> correlations_;
};

// Trainable category-label embeddings. Stored one row per category
// (C_label × d₂); row c is column c of the usual d₂ × C_label layout.
struct LabelEmbeddingTable {
  std::vector<std::string> names;
  std::unordered_map<std::string, int> index;
  ag::Parameter weights{"label_embedding", Mat()};

  int size() const { return static_cast<int>(names.size()); }

  int id(const std::string& label) const {
    auto it = index.find(label);
    if (it == index.end()) throw StructuralError("label '" + label + "' is not in the label-embedding table");
    return it->second;
  }

  RowVec lookup(const std::string& label) const { return weights.value.row(id(label)); }

  // One row per distinct label, initialised from the provider's word vectors.
  static LabelEmbeddingTable build(const std::vector<std::string>& labels, const EmbeddingProvider& provider) {
    LabelEmbeddingTable t;
    for (const auto& l : labels) {
      if (t.index.count(l)) continue;
      t.index.emplace(l, static_cast<int>(t.names.size()));
      t.names.push_back(l);
    }
    Mat w(static_cast<Eigen::Index>(t.names.size()), provider.word_dim());
    for (std::size_t i = 0; i < t.names.size(); ++i) w.row(static_cast<Eigen::Index>(i)) = provider.word(t.names[i]);
    t.weights = ag::Parameter("label_embedding", std::move(w));
    return t;
  }
};

// Region query for any visual node: objects use their own box, attributes
// reuse the box and category of their object, relations use the union box of
// their two endpoint objects.
inline RegionQuery region_query(const SceneGraph& vsg, const SGNode& node, const std::string& image_ref) {
  switch (node.kind) {
    case NodeKind::kObject:
      if (!node.region) throw StructuralError("visual object node " + std::to_string(node.id) + " has no region");
      return {image_ref, *node.region, node.label};
    case NodeKind::kAttribute: {
      const auto nb = vsg.neighbours(node.id);
      if (nb.empty()) throw StructuralError("attribute node " + std::to_string(node.id) + " is not attached");
      return region_query(vsg, vsg.node(nb.front()), image_ref);
    }
    case NodeKind::kRelation: {
      const auto nb = vsg.neighbours(node.id);
      if (nb.size() != 2) throw StructuralError("relation node " + std::to_string(node.id) + " needs two endpoints");
      const auto& a = vsg.node(nb[0]);
      const auto& b = vsg.node(nb[1]);
      if (!a.region || !b.region) throw StructuralError("relation node " + std::to_string(node.id) + " endpoint lacks a region");
      return {image_ref, union_box(*a.region, *b.region), node.label};
    }
  }
  throw StructuralError("unknown node kind");
}

// x = Tanh(W₁ [x̂; x̄]) with W₁ of shape d₁ × (d₁ + d₂).
inline RowVec fuse_visual_features(const RowVec& region_feature, const RowVec& label_feature, const Mat& w1) {
  if (w1.cols() != region_feature.size() + label_feature.size())
    throw StructuralError("fusion matrix width does not match d1 + d2");
  RowVec cat(region_feature.size() + label_feature.size());
  cat << region_feature, label_feature;
  return (cat * w1.transpose()).array().tanh().matrix();
}

inline RowVec embed_visual_node(const SceneGraph& vsg, const SGNode& node, const std::string& image_ref,
                                const EmbeddingProvider& provider, const LabelEmbeddingTable& labels, const Mat& w1) {
  return fuse_visual_features(provider.region(region_query(vsg, node, image_ref)), labels.lookup(node.label), w1);
}

// Row j is the mean of the contextual token vectors covered by node j's span.
inline Mat embed_textual_nodes(const SceneGraph& tsg, const std::vector<std::string>& tokens,
                               const EmbeddingProvider& provider) {
  const Mat tok = tokens.empty() ? Mat(0, provider.dim()) : provider.tokens(tokens);
  Mat out(static_cast<Eigen::Index>(tsg.nodes.size()), provider.dim());
  for (std::size_t j = 0; j < tsg.nodes.size(); ++j) {
    const auto& n = tsg.nodes[j];
    if (!n.span) throw StructuralError("textual node " + std::to_string(n.id) + " has no span");
    const auto sp = *n.span;
    if (sp.length() <= 0) throw StructuralError("textual node " + std::to_string(n.id) + " has an empty span");
    if (sp.start < 0 || sp.end > static_cast<int>(tokens.size()))
      throw StructuralError("textual node " + std::to_string(n.id) + " span is outside the token list");
    out.row(static_cast<Eigen::Index>(j)) = tok.middleRows(sp.start, sp.length()).colwise().mean();
  }
  return out;
}

}  // namespace cmggib
