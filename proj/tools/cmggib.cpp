// Command-line front end: synth, train, eval, inspect, topics, analyze.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "cmggib/cmggib.hpp"

namespace fs = std::filesystem;
using namespace cmggib;

namespace {

Config load_config(const std::string& path) {
  Config c = path.empty() ? Config::desk() : Config::load(path, Config::desk());
  c.apply_environment();
  c.validate();
  return c;
}

// Synthetic embeddings stand in for the pretrained encoders; the planted
// correlations depend only on the config, so every subcommand rebuilds the same provider.
SyntheticProvider make_provider(const Config& c) {
  SyntheticProvider p(c.seed, c.d1, c.d2, c.context_mix, c.region_jitter);
  plant_correlations(p, c.synth_classes, c.synth_plant_cosine);
  return p;
}

std::vector<Instance> load_split(const std::string& dir, const std::string& split) {
  return load_corpus((fs::path(dir) / (split + ".jsonl")).string(), (fs::path(dir) / "graphs.jsonl").string());
}

std::vector<FeaturizedInstance> featurize(const Model& m, const std::vector<Instance>& data, const EmbeddingProvider& p) {
  std::vector<FeaturizedInstance> out;
  out.reserve(data.size());
  for (const auto& i : data) out.push_back(m.featurize(i, p));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << text;
}

std::string matrix_csv(const Mat& m) {
  std::ostringstream os;
  os.precision(10);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
    os << "\n";
  }
  return os.str();
}

json metrics_json(const MetricsReport& m, std::size_t n) {
  return {{"instances", n},         {"accuracy", m.accuracy},          {"precision", m.precision},
          {"recall", m.recall},     {"f1", m.f1},                      {"true_positive", m.true_positive},
          {"predicted_positive", m.predicted_positive}, {"gold_positive", m.gold_positive}};
}

int run_synth(const std::string& config, const std::string& out) {
  const Config c = load_config(config);
  make_provider(c);
  const SynthCorpus corpus = synth_corpus(SynthOptions::from_config(c));
  fs::create_directories(out);
  std::ofstream graphs(fs::path(out) / "graphs.jsonl");
  json roles = json::object();
  for (const auto& [name, split] : {std::pair{"train", &corpus.train}, {"dev", &corpus.dev}, {"test", &corpus.test}}) {
    std::ofstream records(fs::path(out) / (std::string(name) + ".jsonl"));
    write_corpus(*split, records, graphs);
  }
  for (const auto& [id, r] : corpus.roles) {
    std::vector<std::string> t, v;
    for (auto x : r.textual) t.push_back(to_string(x));
    for (auto x : r.visual) v.push_back(to_string(x));
    roles[id] = {{"textual", t}, {"visual", v}};
  }
  write_text(fs::path(out) / "roles.json", roles.dump() + "\n");
  std::cout << "wrote " << corpus.train.size() << " train, " << corpus.dev.size() << " dev, " << corpus.test.size()
            << " test instances to " << out << "\n";
  return 0;
}

int run_train(const std::string& config, const std::string& data, const std::string& out, bool quiet) {
  const Config c = load_config(config);
  const SyntheticProvider provider = make_provider(c);
  const auto train = load_split(data, "train");
  const auto dev = load_split(data, "dev");
  const auto test = load_split(data, "test");
  std::vector<Instance> all = train;
  all.insert(all.end(), dev.begin(), dev.end());
  all.insert(all.end(), test.begin(), test.end());
  const CorpusSummary s = summarize(all);
  std::cout << "corpus: " << s.instances << " instances, " << s.sentences << " sentences\n";
  Model model = Model::create(c, train, all, provider);
  const auto ftrain = featurize(model, train, provider);
  const auto fdev = featurize(model, dev, provider);
  const TrainingLog log = run_schedule(model, ftrain, fdev, TrainingSchedule::from_config(c), quiet ? nullptr : &std::cout);
  fs::create_directories(out);
  save_checkpoint(model, (fs::path(out) / "model.json").string());
  std::ofstream lf(fs::path(out) / "log.jsonl");
  log.write_jsonl(lf);
  write_text(fs::path(out) / "trajectory.csv", trajectory_report(log));
  const EvaluationReport r = evaluate(model, fdev, false);
  std::cout << "dev F1 " << r.metrics.f1 << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data, const std::string& split, bool include_none) {
  Model model = load_checkpoint(checkpoint);
  if (include_none) model.config.exclude_none = false;
  const SyntheticProvider provider = make_provider(model.config);
  const auto f = featurize(model, load_split(data, split), provider);
  const EvaluationReport r = evaluate(model, f, false);
  std::cout << metrics_json(r.metrics, f.size()).dump(2) << "\n";
  std::cout << "F1 " << r.metrics.f1 << "\n";
  return 0;
}

int run_inspect(const std::string& checkpoint, const std::string& data, const std::string& split,
                const std::vector<std::string>& ids) {
  Model model = load_checkpoint(checkpoint);
  const SyntheticProvider provider = make_provider(model.config);
  const std::set<std::string> wanted(ids.begin(), ids.end());
  std::set<std::string> found;
  for (const auto& inst : load_split(data, split)) {
    if (!wanted.empty() && !wanted.count(inst.id)) continue;
    found.insert(inst.id);
    std::cout << inspect_record(evaluate_instance(model, model.featurize(inst, provider))).dump() << "\n";
  }
  for (const auto& id : wanted)
    if (!found.count(id)) throw ValidationError("no instance '" + id + "' in split '" + split + "'");
  return 0;
}

int run_topics(const std::string& checkpoint, int count) {
  const Model model = load_checkpoint(checkpoint);
  std::cout << to_json(topic_dump(model, count)).dump(2) << "\n";
  return 0;
}

int run_analyze(const std::string& checkpoint, const std::string& data, const std::string& split, const std::string& log_path,
                const std::string& out, int buckets) {
  Model model = load_checkpoint(checkpoint);
  const SyntheticProvider provider = make_provider(model.config);
  const auto train_inst = load_split(data, "train");
  const auto inst = load_split(data, split);
  const EvaluationReport train = evaluate(model, featurize(model, train_inst, provider));
  const EvaluationReport eval = evaluate(model, featurize(model, inst, provider));
  const StageProbes probes = fit_stage_probes(train.outputs, model.num_relations(), model.config);
  fs::create_directories(out);
  const json entropy = {{"H", task_entropy(FeatureStage::kH, eval.outputs, probes)},
                        {"z", task_entropy(FeatureStage::kZ, eval.outputs, probes)},
                        {"s", task_entropy(FeatureStage::kS, eval.outputs, probes)}};
  write_text(fs::path(out) / "entropy.json", entropy.dump(2) + "\n");
  std::cout << "entropy " << entropy.dump() << "\n";

  std::vector<std::string> ids;
  std::vector<std::optional<double>> scores;
  std::vector<int> pred, gold;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    ids.push_back(inst[i].id);
    scores.push_back(relevance(inst[i], provider));
    pred.push_back(eval.outputs[i].prediction);
    gold.push_back(eval.outputs[i].gold);
  }
  const auto b = relevance_buckets(ids, scores, pred, gold, buckets, model.num_relations(),
                                   model.config.exclude_none ? kNoneLabel : -1);
  write_text(fs::path(out) / "buckets.csv", buckets_csv(b));
  std::cout << buckets_csv(b);

  write_text(fs::path(out) / "z.csv", matrix_csv(stage_features(eval.outputs, FeatureStage::kZ)));
  write_text(fs::path(out) / "s.csv", matrix_csv(stage_features(eval.outputs, FeatureStage::kS)));
  std::string labels;
  for (const auto& o : eval.outputs) labels += relation_labels()[static_cast<std::size_t>(o.gold)] + "\n";
  write_text(fs::path(out) / "labels.txt", labels);

  if (!log_path.empty()) {
    std::ifstream in(log_path);
    if (!in) throw ConfigError("cannot open training log '" + log_path + "'");
    write_text(fs::path(out) / "trajectory.csv", trajectory_report(TrainingLog::read_jsonl(in)));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal graph refinement with topic fusion for multimodal relation extraction"};
  app.require_subcommand(1);

  std::string config, data, out, checkpoint, split = "dev", log_path;
  std::vector<std::string> ids;
  int count = 10, buckets = 5;
  bool quiet = false, include_none = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic planted-signal corpus");
  synth->add_option("--config", config, "config file (defaults to the desk preset)");
  synth->add_option("--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model; writes model.json, log.jsonl and trajectory.csv");
  train->add_option("--config", config, "config file (defaults to the desk preset)");
  train->add_option("--data", data, "corpus directory")->required();
  train->add_option("--out", out, "output directory")->required();
  train->add_flag("--quiet", quiet, "suppress per-epoch progress");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a split");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--data", data, "corpus directory")->required();
  eval->add_option("--split", split, "train, dev or test");
  eval->add_flag("--include-none", include_none, "count the None relation as a positive class");

  auto* inspect = app.add_subcommand("inspect", "dump gates and pruned graphs per instance");
  inspect->add_option("--checkpoint", checkpoint)->required();
  inspect->add_option("--data", data, "corpus directory")->required();
  inspect->add_option("--split", split, "train, dev or test");
  inspect->add_option("--id", ids, "instance ids (all when omitted)");

  auto* topics = app.add_subcommand("topics", "print the top keywords of every topic");
  topics->add_option("--checkpoint", checkpoint)->required();
  topics->add_option("--count", count, "keywords per topic");

  auto* analyze = app.add_subcommand("analyze", "entropy, relevance buckets, trajectory and feature dumps");
  analyze->add_option("--checkpoint", checkpoint)->required();
  analyze->add_option("--data", data, "corpus directory")->required();
  analyze->add_option("--split", split, "split to analyze");
  analyze->add_option("--log", log_path, "training log for the trajectory report");
  analyze->add_option("--out", out, "output directory")->required();
  analyze->add_option("--buckets", buckets, "relevance bucket count")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return run_synth(config, out);
    if (*train) return run_train(config, data, out, quiet);
    if (*eval) return run_eval(checkpoint, data, split, include_none);
    if (*inspect) return run_inspect(checkpoint, data, split, ids);
    if (*topics) return run_topics(checkpoint, count);
    if (*analyze) return run_analyze(checkpoint, data, split, log_path, out, buckets);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
