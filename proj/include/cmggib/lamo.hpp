#pragma once

// Latent multimodal topic model: visual-word codebook (k-means), bag-of-words
// vocabularies, Gaussian-softmax topic inference from graph states, a
// multinomial reconstruction ELBO over textual and visual words, and keyword
// extraction from the activated topic.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cmggib/autograd.hpp"
#include "cmggib/errors.hpp"
#include "cmggib/gene.hpp"
#include "cmggib/nn.hpp"

namespace cmggib {

// ---------------------------------------------------------------------------
// Visual codebook

struct Codebook {
  static constexpr int kVersion = 1;
  Mat centroids;  // K_cb × d₁
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(centroids.rows()); }
  int dim() const { return static_cast<int>(centroids.cols()); }
};

struct KMeansOptions {
  int max_iterations = 100;
  double tolerance = 1e-4;  // relative centroid shift
};

// Index of the nearest centroid (squared Euclidean); ties go to the lowest index.
inline int nearest_centroid(const Mat& centroids, const Eigen::Ref<const RowVec>& x) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

// Lloyd iterations from a k-means++ seeding.
inline Codebook build_codebook(const Mat& features, int k, std::uint64_t seed, const KMeansOptions& opts = {}) {
  const auto n = static_cast<int>(features.rows());
  if (k <= 0) throw ConfigError("codebook size must be positive");
  if (n < k) throw ConfigError("codebook needs at least as many features (" + std::to_string(n) + ") as clusters (" +
                               std::to_string(k) + ")");
  nn::Rng rng(seed);
  Mat centroids(k, features.cols());
  {
    std::uniform_int_distribution<int> pick(0, n - 1);
    centroids.row(0) = features.row(pick(rng));
    Eigen::VectorXd d2(n);
    for (int i = 0; i < n; ++i) d2(i) = (features.row(i) - centroids.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double total = d2.sum();
      int chosen = 0;
      if (total <= 0.0) {
        chosen = pick(rng);
      } else {
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng);
        chosen = n - 1;
        for (int i = 0; i < n; ++i) {
          if (d2(i) <= 0.0) continue;
          r -= d2(i);
          if (r <= 0.0) {
            chosen = i;
            break;
          }
        }
        while (d2(chosen) <= 0.0 && chosen > 0) --chosen;
      }
      centroids.row(c) = features.row(chosen);
      for (int i = 0; i < n; ++i) d2(i) = std::min(d2(i), (features.row(i) - centroids.row(c)).squaredNorm());
    }
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int a = nearest_centroid(centroids, features.row(i));
      if (a != assign[static_cast<std::size_t>(i)]) {
        assign[static_cast<std::size_t>(i)] = a;
        changed = true;
      }
    }
    if (!changed) break;
    Mat sums = Mat::Zero(k, features.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += features.row(i);
      counts(assign[static_cast<std::size_t>(i)]) += 1.0;
    }
    double shift = 0.0;
    double scale = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts(c) == 0.0) continue;  // empty cluster keeps its centroid
      RowVec updated = sums.row(c) / counts(c);
      shift += (updated - centroids.row(c)).norm();
      scale += updated.norm();
      centroids.row(c) = updated;
    }
    if (scale > 0.0 && shift / scale < opts.tolerance) break;
  }
  return {std::move(centroids), seed};
}

// ---------------------------------------------------------------------------
// Bags of words

using BowVector = std::vector<int>;

inline RowVec to_row(const BowVector& b) {
  RowVec r(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) r(static_cast<Eigen::Index>(i)) = b[i];
  return r;
}

// Each feature row increments the count of its nearest visual word.
inline BowVector assign_visual_words(const Mat& features, const Codebook& cb) {
  BowVector counts(static_cast<std::size_t>(cb.size()), 0);
  for (Eigen::Index i = 0; i < features.rows(); ++i) ++counts[static_cast<std::size_t>(nearest_centroid(cb.centroids, features.row(i)))];
  return counts;
}

inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",   "and",  "are",  "as",   "at",    "be",   "but",  "by",   "for",   "from", "has",  "have",
      "he",   "her",  "his",  "i",    "in",   "is",    "it",   "its",  "of",   "on",    "or",   "our",  "she",
      "that", "the",  "their", "them", "they", "this", "to",   "was",  "we",   "were",  "with", "you",  "your",
      "rt",   "@",    "#",    ",",    ".",    "!",     "?",    ":",    ";",    "'",     "\"",   "-",    "..."};
  return words;
}

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Textual vocabulary: lowercased corpus tokens seen at least `min_count`
// times, minus stopwords. Word ids follow first appearance.
struct Vocabulary {
  std::vector<std::string> words;
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(words.size()); }

  static Vocabulary build(const std::vector<std::vector<std::string>>& docs, int min_count) {
    std::map<std::string, int> freq;
    std::vector<std::string> order;
    for (const auto& doc : docs)
      for (const auto& tok : doc) {
        const auto w = lowercase(tok);
        if (stopwords().count(w)) continue;
        if (freq[w]++ == 0) order.push_back(w);
      }
    Vocabulary v;
    for (const auto& w : order)
      if (freq[w] >= min_count) v.add(w);
    return v;
  }

  void add(const std::string& w) {
    if (index.count(w)) return;
    index.emplace(w, static_cast<int>(words.size()));
    words.push_back(w);
  }

  BowVector bow(const std::vector<std::string>& tokens) const {
    BowVector b(words.size(), 0);
    for (const auto& t : tokens)
      if (auto it = index.find(lowercase(t)); it != index.end()) ++b[static_cast<std::size_t>(it->second)];
    return b;
  }
};

// ---------------------------------------------------------------------------
// Topic inference and reconstruction

struct TopicModelParams {
  int num_topics = 0;
  nn::Linear encoder;         // f(H) -> hidden, Softplus-activated
  nn::Linear mu_head;         // hidden -> μ
  nn::Linear log_sigma_head;  // hidden -> log σ
  nn::Linear theta_ffn;       // ϖ -> topic logits
  ag::Parameter chi;          // K × U^T
  ag::Parameter psi;          // K × U^I

  static TopicModelParams init(int d, int width, int k, int text_vocab, int visual_vocab, nn::Rng& rng) {
    if (k < 2) throw ConfigError("topic count must be at least 2");
    TopicModelParams p;
    p.num_topics = k;
    p.encoder = nn::Linear("lamo.encoder", d, width, rng);
    p.mu_head = nn::Linear("lamo.mu_head", width, k, rng);
    p.log_sigma_head = nn::Linear("lamo.log_sigma_head", width, k, rng, 0.1);
    p.theta_ffn = nn::Linear("lamo.theta_ffn", k, k, rng);
    p.chi = ag::Parameter("lamo.chi", nn::glorot(k, text_vocab, rng));
    p.psi = ag::Parameter("lamo.psi", nn::glorot(k, visual_vocab, rng));
    return p;
  }

  template <typename F>
  void visit(F&& f) {
    encoder.visit(f);
    mu_head.visit(f);
    log_sigma_head.visit(f);
    theta_ffn.visit(f);
    f(chi);
    f(psi);
  }
};

struct TopicVars {
  ag::Var mu;
  ag::Var sigma;
  ag::Var varpi;
  ag::Var theta;
};

// μ = f_μ(f(H)), log σ = f_σ(f(H)) with f = mean over rows.
inline TopicVars encode_topics(ag::Tape& t, const ag::Var& h, TopicModelParams& p) {
  if (h.rows() == 0) throw ContractViolation("encode_topics: H is empty");
  TopicVars tv;
  ag::Var hidden = ag::softplus(p.encoder(t, ag::mean_rows(h)));
  tv.mu = p.mu_head(t, hidden);
  tv.sigma = ag::exp(p.log_sigma_head(t, hidden));
  return tv;
}

// ϖ = μ + σ·ε, θ = Softmax(FFN(ϖ)).
inline void sample_theta(ag::Tape& t, TopicVars& tv, TopicModelParams& p, const Mat& eps) {
  tv.varpi = ag::add(tv.mu, ag::hadamard(tv.sigma, t.constant(eps)));
  tv.theta = ag::softmax_rows(p.theta_ffn(t, tv.varpi));
}

struct TopicState {
  RowVec mu;
  RowVec sigma;
  RowVec varpi;
  RowVec theta;
};

inline TopicState encode_topics(const Mat& h, TopicModelParams& p, const Sampling& sampling = {}) {
  ag::Tape t;
  TopicVars tv = encode_topics(t, t.constant(h), p);
  sample_theta(t, tv, p, sampling.normal(1, p.num_topics));
  return {tv.mu.value(), tv.sigma.value(), tv.varpi.value(), tv.theta.value()};
}

// p = Softmax(θ · M) over the vocabulary of M (K × U).
inline RowVec reconstruct(const RowVec& theta, const Mat& m) {
  if (theta.size() != m.rows()) throw ContractViolation("reconstruct: theta length does not match topic count");
  return ag::softmax_row_values(theta * m);
}

inline double reconstruction_log_likelihood(const RowVec& p, const BowVector& counts) {
  double ll = 0.0;
  for (std::size_t w = 0; w < counts.size(); ++w)
    if (counts[w] > 0) ll += counts[w] * std::log(p(static_cast<Eigen::Index>(w)));
  return ll;
}

struct LamoLoss {
  ag::Var total;
  ag::Var kl;
  ag::Var rec_text;
  ag::Var rec_visual;
};

// L = KL(N(μ, σ²) ‖ N(0, I)) − log p(b^T | θ, χ) − log p(b^I | θ, ψ).
inline LamoLoss lamo_loss(ag::Tape& t, const TopicVars& tv, const BowVector& text_bow, const BowVector& visual_bow,
                          TopicModelParams& p) {
  LamoLoss l;
  l.kl = ag::kl_standard_normal(tv.mu, tv.sigma);
  l.rec_text = ag::multinomial_nll(ag::matmul(tv.theta, t.param(p.chi)), to_row(text_bow));
  l.rec_visual = ag::multinomial_nll(ag::matmul(tv.theta, t.param(p.psi)), to_row(visual_bow));
  l.total = ag::add(ag::add(l.kl, l.rec_text), l.rec_visual);
  return l;
}

inline int argmax_lowest(const Eigen::Ref<const RowVec>& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

// Indices of the `count` largest entries, descending; ties by lowest index.
inline std::vector<int> top_indices(const Eigen::Ref<const RowVec>& v, int count) {
  std::vector<int> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v(a) > v(b); });
  idx.resize(static_cast<std::size_t>(std::min<Eigen::Index>(count, v.size())));
  return idx;
}

struct Keywords {
  int topic = 0;
  std::vector<int> textual;
  std::vector<int> visual;
};

inline Keywords top_keywords(const RowVec& theta, const Mat& chi, const Mat& psi, int count) {
  if (count > chi.cols() || count > psi.cols()) throw ContractViolation("top_keywords: L exceeds a vocabulary size");
  Keywords k;
  k.topic = argmax_lowest(theta);
  k.textual = top_indices(chi.row(k.topic), count);
  k.visual = top_indices(psi.row(k.topic), count);
  return k;
}

}  // namespace cmggib
