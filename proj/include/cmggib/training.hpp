#pragma once

// Warm-start training: GENE on L_GIB, LAMO pretraining on L_LAMO with the
// encoder frozen, then joint training on the full objective.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "cmggib/config.hpp"
#include "cmggib/errors.hpp"
#include "cmggib/metrics.hpp"
#include "cmggib/model.hpp"

namespace cmggib {

enum class Stage { kGeneWarmup, kLamoPretrain, kJoint };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::kGeneWarmup: return "gene-warmup";
    case Stage::kLamoPretrain: return "lamo-pretrain";
    case Stage::kJoint: return "joint";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  if (s == "gene-warmup") return Stage::kGeneWarmup;
  if (s == "lamo-pretrain") return Stage::kLamoPretrain;
  if (s == "joint") return Stage::kJoint;
  throw ConfigError("unknown training stage '" + s + "'");
}

struct StageSpec {
  Stage stage = Stage::kGeneWarmup;
  int epochs = 0;
};

struct TrainingSchedule {
  std::vector<StageSpec> stages;
  double lr_pretrained = 2e-5;
  double lr_other = 2e-4;
  int batch_size = 8;
  std::uint64_t seed = 13;
  bool freeze_lamo_in_joint = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool deterministic = false;  // ε fixed during training as well

  static TrainingSchedule from_config(const Config& c) {
    TrainingSchedule s;
    s.stages = {{Stage::kGeneWarmup, c.epochs_gene}, {Stage::kLamoPretrain, c.epochs_lamo}, {Stage::kJoint, c.epochs_joint}};
    s.lr_pretrained = c.lr_pretrained;
    s.lr_other = c.lr_other;
    s.batch_size = c.batch_size;
    s.seed = c.seed;
    s.freeze_lamo_in_joint = c.freeze_lamo_in_joint;
    s.beta1 = c.adam_beta1;
    s.beta2 = c.adam_beta2;
    s.epsilon = c.adam_epsilon;
    return s;
  }

  // Stages must appear in warm-start order; each at most once.
  void validate() const {
    int last = -1;
    for (const auto& st : stages) {
      const int k = static_cast<int>(st.stage);
      if (k <= last)
        throw ConfigError("stage '" + to_string(st.stage) + "' is out of order; expected gene-warmup, lamo-pretrain, joint");
      if (st.epochs < 0) throw ConfigError("stage '" + to_string(st.stage) + "' has a negative epoch count");
      last = k;
    }
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (lr_pretrained < 0.0 || lr_other < 0.0) throw ConfigError("learning rates must be nonnegative");
  }
};

// Adam with one learning rate per parameter group.
class Adam {
 public:
  Adam(double beta1, double beta2, double epsilon) : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void step(ag::Parameter& p, double lr) {
    auto& s = state_[&p];
    if (s.m.size() == 0) {
      s.m = Mat::Zero(p.value.rows(), p.value.cols());
      s.v = Mat::Zero(p.value.rows(), p.value.cols());
    }
    ++s.t;
    s.m = beta1_ * s.m + (1.0 - beta1_) * p.grad;
    s.v = beta2_ * s.v + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    const double c1 = 1.0 - std::pow(beta1_, s.t);
    const double c2 = 1.0 - std::pow(beta2_, s.t);
    p.value.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + epsilon_);
  }

  void reset() { state_.clear(); }

 private:
  struct Moments {
    Mat m;
    Mat v;
    int t = 0;
  };
  double beta1_;
  double beta2_;
  double epsilon_;
  std::map<const ag::Parameter*, Moments> state_;
};

struct EvaluationReport {
  MetricsReport metrics;
  std::vector<InstanceOutput> outputs;
  double node_keep = 0.0;  // mean expected hard node-keep ratio
  double edge_keep = 0.0;
  double mi_proxy = 0.0;   // mean KL(p(z|G) ‖ r(z))
};

inline EvaluationReport evaluate(Model& model, const std::vector<FeaturizedInstance>& data, bool keep_outputs = true) {
  EvaluationReport r;
  std::vector<int> pred, gold;
  for (const auto& f : data) {
    InstanceOutput o = evaluate_instance(model, f);
    pred.push_back(o.prediction);
    gold.push_back(o.gold);
    r.node_keep += o.node_keep;
    r.edge_keep += o.edge_keep;
    r.mi_proxy += o.kl;
    if (keep_outputs) r.outputs.push_back(std::move(o));
  }
  const int exclude = model.config.exclude_none ? kNoneLabel : -1;
  r.metrics = compute_metrics(pred, gold, model.num_relations(), exclude);
  if (!data.empty()) {
    const double n = static_cast<double>(data.size());
    r.node_keep /= n;
    r.edge_keep /= n;
    r.mi_proxy /= n;
  }
  return r;
}

struct EpochRecord {
  std::string stage;
  int epoch = 0;  // within the stage, 0 is the pre-training snapshot
  int step = 0;   // optimizer steps so far
  double loss = 0.0;
  double ce = 0.0;
  double gib = 0.0;
  double kl = 0.0;
  double lamo = 0.0;
  double mi_proxy = 0.0;
  double dev_f1 = 0.0;
  double dev_accuracy = 0.0;
  double node_keep = 0.0;
  double edge_keep = 0.0;

  json to_json() const {
    return {{"stage", stage},       {"epoch", epoch},       {"step", step},           {"loss", loss},
            {"ce", ce},             {"gib", gib},           {"kl", kl},               {"lamo", lamo},
            {"mi_proxy", mi_proxy}, {"dev_f1", dev_f1},     {"dev_accuracy", dev_accuracy},
            {"node_keep", node_keep}, {"edge_keep", edge_keep}};
  }

  static EpochRecord from_json(const json& j) {
    EpochRecord r;
    r.stage = j.at("stage").get<std::string>();
    r.epoch = j.at("epoch").get<int>();
    r.step = j.at("step").get<int>();
    r.loss = j.at("loss").get<double>();
    r.ce = j.at("ce").get<double>();
    r.gib = j.at("gib").get<double>();
    r.kl = j.at("kl").get<double>();
    r.lamo = j.at("lamo").get<double>();
    r.mi_proxy = j.at("mi_proxy").get<double>();
    r.dev_f1 = j.at("dev_f1").get<double>();
    r.dev_accuracy = j.at("dev_accuracy").get<double>();
    r.node_keep = j.at("node_keep").get<double>();
    r.edge_keep = j.at("edge_keep").get<double>();
    return r;
  }
};

struct TrainingLog {
  std::vector<EpochRecord> records;

  void write_jsonl(std::ostream& os) const {
    for (const auto& r : records) os << r.to_json().dump() << "\n";
  }

  static TrainingLog read_jsonl(std::istream& in) {
    TrainingLog log;
    for (const auto& j : cmggib::read_jsonl(in, "training log")) log.records.push_back(EpochRecord::from_json(j));
    return log;
  }
};

namespace detail {

inline bool stage_updates(Stage stage, Component c, bool freeze_lamo) {
  switch (stage) {
    case Stage::kGeneWarmup: return c == Component::kEncoder || c == Component::kGene;
    case Stage::kLamoPretrain: return c == Component::kLamo;
    case Stage::kJoint: return c != Component::kLamo || !freeze_lamo;
  }
  return false;
}

inline ForwardScope stage_scope(Stage stage) {
  switch (stage) {
    case Stage::kGeneWarmup: return ForwardScope::kGene;
    case Stage::kLamoPretrain: return ForwardScope::kTopics;
    case Stage::kJoint: return ForwardScope::kFull;
  }
  return ForwardScope::kFull;
}

inline void fill_dev(EpochRecord& rec, Model& model, const std::vector<FeaturizedInstance>& dev) {
  if (dev.empty()) return;
  EvaluationReport r = evaluate(model, dev, false);
  rec.dev_f1 = r.metrics.f1;
  rec.dev_accuracy = r.metrics.accuracy;
  rec.node_keep = r.node_keep;
  rec.edge_keep = r.edge_keep;
  rec.mi_proxy = r.mi_proxy;
}

}  // namespace detail

// Called after every epoch with the finished record.
using EpochHook = std::function<void(const EpochRecord&, Model&)>;

// Runs the schedule in place on `model`. A non-finite loss restores the
// parameters from before the offending step and rethrows.
inline TrainingLog run_schedule(Model& model, const std::vector<FeaturizedInstance>& train,
                                const std::vector<FeaturizedInstance>& dev, const TrainingSchedule& schedule,
                                std::ostream* progress = nullptr, const EpochHook& hook = {}) {
  schedule.validate();
  TrainingLog log;
  int total_epochs = 0;
  for (const auto& st : schedule.stages) total_epochs += st.epochs;
  if (total_epochs == 0 || train.empty()) return log;

  nn::Rng rng(schedule.seed ^ 0xC0FFEEULL);
  Sampling sampling{schedule.deterministic, &rng};
  Adam adam(schedule.beta1, schedule.beta2, schedule.epsilon);
  auto params = model.parameters();
  int step = 0;

  EpochRecord init;
  init.stage = "init";
  detail::fill_dev(init, model, dev);
  log.records.push_back(init);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (const auto& st : schedule.stages) {
    adam.reset();
    for (int epoch = 1; epoch <= st.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      EpochRecord rec;
      rec.stage = to_string(st.stage);
      rec.epoch = epoch;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(schedule.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(schedule.batch_size));
        std::vector<Mat> snapshot;
        for (auto* p : params) {
          snapshot.push_back(p->value);
          p->zero_grad();
        }
        const double inv = 1.0 / static_cast<double>(end - start);
        try {
          for (std::size_t b = start; b < end; ++b) {
            ag::Tape t;
            ForwardPass fp = model.forward(t, train[order[b]], sampling, detail::stage_scope(st.stage));
            const double loss = fp.total.scalar();
            if (!std::isfinite(loss)) throw NumericDomainError("non-finite loss");
            rec.loss += loss;
            if (fp.has_gene) {
              rec.gib += fp.gib.total.scalar();
              rec.kl += fp.gib.kl.scalar();
            }
            if (fp.has_topics) rec.lamo += fp.lamo.total.scalar();
            if (fp.has_head) rec.ce += fp.ce.scalar();
            t.backward(ag::scale(fp.total, inv));
          }
        } catch (const NumericDomainError& e) {
          for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = snapshot[k];
          throw NumericDomainError(std::string(e.what()) + " at stage " + to_string(st.stage) + ", epoch " +
                                   std::to_string(epoch) + "; parameters restored to the last good step");
        }
        model.visit([&](ag::Parameter& p, Component c, ParamGroup g) {
          if (!detail::stage_updates(st.stage, c, schedule.freeze_lamo_in_joint)) return;
          adam.step(p, g == ParamGroup::kPretrained ? schedule.lr_pretrained : schedule.lr_other);
        });
        ++step;
      }
      const double n = static_cast<double>(train.size());
      rec.loss /= n;
      rec.gib /= n;
      rec.kl /= n;
      rec.lamo /= n;
      rec.ce /= n;
      rec.step = step;
      detail::fill_dev(rec, model, dev);
      if (progress != nullptr)
        *progress << rec.stage << " epoch " << rec.epoch << " loss " << rec.loss << " dev_f1 " << rec.dev_f1
                  << " node_keep " << rec.node_keep << "\n";
      log.records.push_back(rec);
      if (hook) hook(rec, model);
    }
  }
  return log;
}

struct TopicFitOptions {
  int epochs = 150;
  int batch_size = 32;
  double lr = 3e-2;
  std::uint64_t seed = 13;
  bool deterministic = false;
};

// Fits a topic model alone on fixed node states; returns the mean loss per epoch.
inline std::vector<double> fit_topic_model(TopicModelParams& p, const std::vector<Mat>& states,
                                           const std::vector<BowVector>& text, const std::vector<BowVector>& visual,
                                           const TopicFitOptions& opt) {
  if (states.size() != text.size() || states.size() != visual.size())
    throw ContractViolation("fit_topic_model: document counts differ");
  nn::Rng rng(opt.seed);
  Sampling sampling{opt.deterministic, &rng};
  Adam adam(0.9, 0.999, 1e-8);
  std::vector<ag::Parameter*> params;
  p.visit([&](ag::Parameter& q) { params.push_back(&q); });
  std::vector<std::size_t> order(states.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  for (int e = 0; e < opt.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      for (auto* q : params) q->zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t d = order[b];
        ag::Tape t;
        TopicVars tv = encode_topics(t, t.constant(states[d]), p);
        sample_theta(t, tv, p, sampling.normal(1, p.num_topics));
        LamoLoss l = lamo_loss(t, tv, text[d], visual[d], p);
        if (!std::isfinite(l.total.scalar())) throw NumericDomainError("non-finite topic-model loss");
        total += l.total.scalar();
        t.backward(ag::scale(l.total, 1.0 / static_cast<double>(end - start)));
      }
      for (auto* q : params) adam.step(*q, opt.lr);
    }
    history.push_back(total / static_cast<double>(std::max<std::size_t>(1, states.size())));
  }
  return history;
}

}  // namespace cmggib
