#pragma once

// Task instances and their on-disk form.
//
// A corpus is two JSON-lines files: instance records shaped like the public
// multimodal relation-extraction release
//   {"id", "token": [...], "h": {"name", "pos": [s, e]}, "t": {...}, "img_id", "relation"}
// and scene-graph records (the sg-core schema plus an "instance" key), one
// visual and one textual graph per instance.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cmggib/errors.hpp"
#include "cmggib/sg_core.hpp"

namespace cmggib {

inline const std::vector<std::string>& relation_labels() {
  static const std::vector<std::string> labels = {
      "None",
      "/per/per/parent",
      "/per/per/siblings",
      "/per/per/couple",
      "/per/per/neighbor",
      "/per/per/peer",
      "/per/per/charges",
      "/per/per/alumi",
      "/per/per/alternate_names",
      "/per/org/member_of",
      "/per/loc/place_of_residence",
      "/per/loc/place_of_birth",
      "/org/org/alternate_names",
      "/org/org/subsidiary",
      "/org/loc/locate_at",
      "/loc/loc/contain",
      "/per/misc/present_in",
      "/per/misc/awarded",
      "/per/misc/race",
      "/per/misc/religion",
      "/per/misc/nationality",
      "/misc/misc/part_of",
      "/misc/loc/held_on",
  };
  return labels;
}

inline constexpr int kNoneLabel = 0;

inline int relation_index(const std::string& name) {
  const auto& ls = relation_labels();
  for (std::size_t i = 0; i < ls.size(); ++i)
    if (ls[i] == name) return static_cast<int>(i);
  return -1;
}

struct Entity {
  std::string name;
  TokenSpan span;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct Instance {
  std::string id;
  std::vector<std::string> tokens;
  std::string image_ref;
  SceneGraph vsg;
  SceneGraph tsg;
  Entity subject;
  Entity object;
  std::string relation;

  int label() const { return relation_index(relation); }

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct CorpusSummary {
  std::size_t instances = 0;
  std::size_t sentences = 0;  // distinct token sequences
  std::map<std::string, std::size_t> per_relation;
};

inline CorpusSummary summarize(const std::vector<Instance>& corpus) {
  CorpusSummary s;
  std::map<std::vector<std::string>, int> seen;
  for (const auto& inst : corpus) {
    ++s.instances;
    ++s.per_relation[inst.relation];
    seen[inst.tokens] = 1;
  }
  s.sentences = seen.size();
  return s;
}

namespace detail {

inline Entity parse_entity(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_object()) throw ParseError(std::string("missing field '") + field + "'");
  const json& e = j.at(field);
  Entity out;
  if (e.contains("name") && e.at("name").is_string()) out.name = e.at("name").get<std::string>();
  if (!e.contains("pos") || !e.at("pos").is_array() || e.at("pos").size() != 2)
    throw ParseError(std::string("field '") + field + ".pos' must be [start,end]");
  out.span = {e.at("pos")[0].get<int>(), e.at("pos")[1].get<int>()};
  return out;
}

}  // namespace detail

inline json to_json(const Instance& inst) {
  return {{"id", inst.id},
          {"token", inst.tokens},
          {"h", {{"name", inst.subject.name}, {"pos", {inst.subject.span.start, inst.subject.span.end}}}},
          {"t", {{"name", inst.object.name}, {"pos", {inst.object.span.start, inst.object.span.end}}}},
          {"img_id", inst.image_ref},
          {"relation", inst.relation}};
}

// Parses the instance fields (not the scene graphs) and checks spans and label.
inline Instance parse_instance_record(const json& j) {
  Instance inst;
  if (!j.is_object()) throw ParseError("instance record must be an object");
  if (!j.contains("id") || !j.at("id").is_string()) throw ParseError("missing field 'id'");
  inst.id = j.at("id").get<std::string>();
  if (!j.contains("token") || !j.at("token").is_array()) throw ParseError("missing field 'token'");
  for (const auto& t : j.at("token")) {
    if (!t.is_string()) throw ParseError("field 'token' must hold strings");
    inst.tokens.push_back(t.get<std::string>());
  }
  inst.subject = detail::parse_entity(j, "h");
  inst.object = detail::parse_entity(j, "t");
  if (j.contains("img_id") && j.at("img_id").is_string()) inst.image_ref = j.at("img_id").get<std::string>();
  if (!j.contains("relation") || !j.at("relation").is_string()) throw ParseError("missing field 'relation'");
  inst.relation = j.at("relation").get<std::string>();
  if (relation_index(inst.relation) < 0) throw ValidationError("unknown relation label '" + inst.relation + "'");
  const int n = static_cast<int>(inst.tokens.size());
  for (const Entity* e : {&inst.subject, &inst.object}) {
    if (e->span.length() <= 0 || e->span.start < 0 || e->span.end > n)
      throw ValidationError("entity span [" + std::to_string(e->span.start) + "," + std::to_string(e->span.end) +
                            "] is outside the " + std::to_string(n) + " tokens");
  }
  return inst;
}

inline std::vector<json> read_jsonl(std::istream& in, const std::string& what) {
  std::vector<json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(what + " line " + std::to_string(lineno) + ": malformed record");
    }
  }
  return out;
}

// Scene graphs keyed by instance id; each entry is (visual, textual).
using GraphIndex = std::map<std::string, std::pair<SceneGraph, SceneGraph>>;

inline GraphIndex parse_graphs(std::istream& in) {
  GraphIndex index;
  std::map<std::string, int> seen;  // bit 1 visual, bit 2 textual
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!j.contains("instance") || !j.at("instance").is_string()) throw ParseError("missing field 'instance'");
      const auto id = j.at("instance").get<std::string>();
      SceneGraph g = parse_scene_graph(j);
      auto& slot = index[id];
      if (g.modality == Modality::kVisual) {
        slot.first = std::move(g);
        seen[id] |= 1;
      } else {
        slot.second = std::move(g);
        seen[id] |= 2;
      }
    } catch (const json::parse_error&) {
      throw ParseError("scene-graph line " + std::to_string(lineno) + ": malformed record");
    } catch (const ParseError& e) {
      throw ParseError("scene-graph line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("scene-graph line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (auto& [id, slot] : index) {
    slot.first.modality = Modality::kVisual;
    slot.second.modality = Modality::kTextual;
  }
  return index;
}

inline std::vector<Instance> parse_corpus(std::istream& records, const GraphIndex& graphs) {
  std::vector<Instance> out;
  std::string line;
  int lineno = 0;
  while (std::getline(records, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Instance inst = parse_instance_record(json::parse(line));
      auto it = graphs.find(inst.id);
      if (it == graphs.end()) throw ValidationError("no scene graphs for instance '" + inst.id + "'");
      inst.vsg = it->second.first;
      inst.tsg = it->second.second;
      for (const auto& n : inst.tsg.nodes)
        if (n.span && (n.span->start < 0 || n.span->end > static_cast<int>(inst.tokens.size())))
          throw ValidationError("textual node " + std::to_string(n.id) + " span is outside the token list");
      out.push_back(std::move(inst));
    } catch (const json::parse_error&) {
      throw ParseError("corpus line " + std::to_string(lineno) + ": malformed record");
    } catch (const ParseError& e) {
      throw ParseError("corpus line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<Instance> load_corpus(const std::string& records_path, const std::string& graphs_path) {
  std::ifstream records(records_path);
  if (!records) throw ParseError("cannot open corpus file '" + records_path + "'");
  std::ifstream graphs(graphs_path);
  GraphIndex index;
  if (graphs) index = parse_graphs(graphs);
  return parse_corpus(records, index);
}

inline void write_corpus(const std::vector<Instance>& corpus, std::ostream& records, std::ostream& graphs) {
  for (const auto& inst : corpus) {
    records << to_json(inst).dump() << "\n";
    for (const SceneGraph* g : {&inst.vsg, &inst.tsg}) {
      json j = to_json(*g);
      j["instance"] = inst.id;
      graphs << j.dump() << "\n";
    }
  }
}

}  // namespace cmggib
