#pragma once

// On-disk artifacts: model checkpoints, topic dumps and pruned-graph
// inspection records. All are JSON; doubles are written with round-trip
// precision so a save/load cycle is exact.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cmggib/errors.hpp"
#include "cmggib/model.hpp"

namespace cmggib {

inline constexpr const char* kCheckpointFormat = "cmggib-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline json matrix_to_json(const Mat& m) {
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Mat matrix_from_json(const json& j, const std::string& what) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError(what + ": data length does not match shape");
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
    return m;
  } catch (const json::exception&) {
    throw ParseError(what + ": malformed matrix");
  }
}

inline json codebook_to_json(const Codebook& cb) {
  return {{"version", Codebook::kVersion}, {"size", cb.size()}, {"dim", cb.dim()}, {"seed", cb.seed},
          {"centroids", matrix_to_json(cb.centroids)}};
}

inline Codebook codebook_from_json(const json& j) {
  if (!j.contains("version") || j.at("version").get<int>() != Codebook::kVersion)
    throw ParseError("unsupported codebook version");
  Codebook cb;
  cb.seed = j.at("seed").get<std::uint64_t>();
  cb.centroids = matrix_from_json(j.at("centroids"), "codebook");
  if (cb.size() != j.at("size").get<int>() || cb.dim() != j.at("dim").get<int>())
    throw ParseError("codebook header does not match its centroids");
  return cb;
}

inline json checkpoint_to_json(Model& model) {
  json params = json::object();
  model.visit([&](ag::Parameter& p, Component, ParamGroup) { params[p.name] = matrix_to_json(p.value); });
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config_hash", hex64(model.config.hash())},
          {"config", model.config.to_text()},
          {"labels", model.labels.names},
          {"vocabulary", model.vocabulary.words},
          {"keyword_embeddings", matrix_to_json(model.keyword_embeddings)},
          {"codebook", codebook_to_json(model.codebook)},
          {"parameters", params}};
}

inline Model checkpoint_from_json(const json& j) {
  try {
    if (j.value("format", "") != kCheckpointFormat) throw ParseError("not a checkpoint file");
    if (j.at("version").get<int>() != kCheckpointVersion) throw ParseError("unsupported checkpoint version");
    const Config cfg = Config::parse(j.at("config").get<std::string>());
    if (hex64(cfg.hash()) != j.at("config_hash").get<std::string>()) throw ParseError("checkpoint config hash mismatch");
    LabelEmbeddingTable table;
    for (const auto& name : j.at("labels").get<std::vector<std::string>>()) {
      table.index.emplace(name, static_cast<int>(table.names.size()));
      table.names.push_back(name);
    }
    table.weights = ag::Parameter("label_embedding", Mat::Zero(table.size(), cfg.d2));
    Vocabulary vocab;
    for (const auto& w : j.at("vocabulary").get<std::vector<std::string>>()) vocab.add(w);
    Model m = Model::assemble(cfg, std::move(table), codebook_from_json(j.at("codebook")), std::move(vocab),
                              matrix_from_json(j.at("keyword_embeddings"), "keyword_embeddings"));
    const json& params = j.at("parameters");
    std::size_t seen = 0;
    m.visit([&](ag::Parameter& p, Component, ParamGroup) {
      if (!params.contains(p.name)) throw ParseError("checkpoint is missing parameter '" + p.name + "'");
      Mat v = matrix_from_json(params.at(p.name), p.name);
      if (v.rows() != p.value.rows() || v.cols() != p.value.cols())
        throw ParseError("parameter '" + p.name + "' has the wrong shape");
      p.value = std::move(v);
      p.zero_grad();
      ++seen;
    });
    if (seen != params.size()) throw ParseError("checkpoint has unexpected parameters");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(Model& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write checkpoint '" + path + "'");
  os << checkpoint_to_json(model).dump() << "\n";
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::parse_error&) {
    throw ParseError("checkpoint '" + path + "' is not valid JSON");
  }
}

// ---------------------------------------------------------------------------
// Topic dump

struct TopicEntry {
  int topic = 0;
  std::vector<std::string> textual;
  std::vector<int> visual;

  friend bool operator==(const TopicEntry&, const TopicEntry&) = default;
};

using TopicDump = std::vector<TopicEntry>;

inline TopicDump topic_dump(const Model& model, int count) {
  const Mat& chi = model.lamo.chi.value;
  const Mat& psi = model.lamo.psi.value;
  count = std::min({count, static_cast<int>(chi.cols()), static_cast<int>(psi.cols())});
  TopicDump out;
  for (Eigen::Index k = 0; k < chi.rows(); ++k) {
    TopicEntry e;
    e.topic = static_cast<int>(k);
    for (int w : top_indices(chi.row(k), count)) e.textual.push_back(model.vocabulary.words[static_cast<std::size_t>(w)]);
    e.visual = top_indices(psi.row(k), count);
    out.push_back(std::move(e));
  }
  return out;
}

inline json to_json(const TopicDump& dump) {
  json topics = json::array();
  for (const auto& e : dump) topics.push_back({{"topic", e.topic}, {"textual", e.textual}, {"visual", e.visual}});
  return {{"topics", topics}};
}

inline TopicDump parse_topic_dump(const json& j) {
  try {
    TopicDump out;
    for (const auto& t : j.at("topics")) {
      TopicEntry e;
      e.topic = t.at("topic").get<int>();
      e.textual = t.at("textual").get<std::vector<std::string>>();
      e.visual = t.at("visual").get<std::vector<int>>();
      out.push_back(std::move(e));
    }
    return out;
  } catch (const json::exception&) {
    throw ParseError("malformed topic dump");
  }
}

// ---------------------------------------------------------------------------
// Inspection records

inline json inspect_record(const InstanceOutput& o) {
  json nodes = json::array();
  for (std::size_t i = 0; i < o.graph.nodes.size(); ++i) {
    const auto& n = o.graph.nodes[i];
    nodes.push_back({{"index", i},
                     {"modality", to_string(n.modality)},
                     {"kind", to_string(n.kind)},
                     {"label", n.label},
                     {"source_id", n.source_id}});
  }
  auto edges = [](const EdgeList& es) {
    json a = json::array();
    for (auto [i, j] : es) a.push_back({i, j});
    return a;
  };
  std::vector<double> gates(o.node_gate.data(), o.node_gate.data() + o.node_gate.size());
  std::vector<double> egates(o.edge_gate.data(), o.edge_gate.data() + o.edge_gate.size());
  return {{"id", o.id},
          {"gold", relation_labels()[static_cast<std::size_t>(o.gold)]},
          {"prediction", relation_labels()[static_cast<std::size_t>(o.prediction)]},
          {"nodes", nodes},
          {"intra_edges", edges(o.graph.intra_edges)},
          {"hyper_edges", edges(o.graph.hyper_edges)},
          {"node_gates", gates},
          {"edges", edges(o.edges)},
          {"edge_gates", egates},
          {"kept_nodes", o.pruned.nodes},
          {"kept_edges", edges(o.pruned.edges)}};
}

}  // namespace cmggib
