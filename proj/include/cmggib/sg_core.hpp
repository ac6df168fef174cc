#pragma once

// Scene-graph data model: typed object / attribute / relation nodes for one
// modality, JSON record (de)serialization, and invariant validation.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmggib/errors.hpp"

namespace cmggib {

using json = nlohmann::json;

enum class Modality { kVisual, kTextual };
enum class NodeKind { kObject, kAttribute, kRelation };

inline const char* to_string(Modality m) { return m == Modality::kVisual ? "visual" : "textual"; }

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::kObject: return "object";
    case NodeKind::kAttribute: return "attribute";
    case NodeKind::kRelation: return "relation";
  }
  return "?";
}

struct BoundingBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Smallest box containing both inputs.
inline BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

// Half-open token range [start, end).
struct TokenSpan {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool overlaps(const TokenSpan& o) const { return start < o.end && o.start < end; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct SGNode {
  int id = 0;
  NodeKind kind = NodeKind::kObject;
  std::string label;
  std::optional<BoundingBox> region;
  std::optional<TokenSpan> span;

  friend bool operator==(const SGNode&, const SGNode&) = default;
};

struct SGEdge {
  int source = 0;
  int target = 0;

  friend bool operator==(const SGEdge&, const SGEdge&) = default;
};

struct SceneGraph {
  Modality modality = Modality::kTextual;
  std::vector<SGNode> nodes;
  std::vector<SGEdge> edges;

  // Position of a node id in `nodes`, or -1.
  int index_of(int id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return static_cast<int>(i);
    return -1;
  }

  const SGNode& node(int id) const {
    const int i = index_of(id);
    if (i < 0) throw StructuralError("no node with id " + std::to_string(id));
    return nodes[static_cast<std::size_t>(i)];
  }

  // Ids of nodes adjacent to `id` through any edge, in edge order.
  std::vector<int> neighbours(int id) const {
    std::vector<int> out;
    for (const auto& e : edges) {
      if (e.source == id) out.push_back(e.target);
      if (e.target == id) out.push_back(e.source);
    }
    return out;
  }

  friend bool operator==(const SceneGraph&, const SceneGraph&) = default;
};

struct Violation {
  std::string rule;     // e.g. "dangling-edge", "attribute-degree"
  std::string subject;  // e.g. "edge 2", "node 7"
  std::string detail;
};

inline std::vector<Violation> validate(const SceneGraph& g) {
  std::vector<Violation> out;
  std::set<int> ids;
  for (const auto& n : g.nodes) {
    const std::string who = "node " + std::to_string(n.id);
    if (!ids.insert(n.id).second) out.push_back({"duplicate-id", who, "node id appears more than once"});
    if (n.label.empty()) out.push_back({"empty-label", who, "label must be non-empty"});
    if (g.modality == Modality::kVisual && n.kind == NodeKind::kObject && !n.region)
      out.push_back({"missing-region", who, "visual object nodes need a region"});
    if (g.modality == Modality::kTextual && !n.span) out.push_back({"missing-span", who, "textual nodes need a span"});
  }

  std::map<int, NodeKind> kind_of;
  for (const auto& n : g.nodes) kind_of.emplace(n.id, n.kind);

  std::map<int, int> in_deg, out_deg;
  std::map<int, std::vector<int>> incident;  // node id -> other endpoint ids
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    const bool ok_s = kind_of.count(e.source) != 0;
    const bool ok_t = kind_of.count(e.target) != 0;
    if (!ok_s || !ok_t) {
      std::ostringstream d;
      d << "edge [" << e.source << "," << e.target << "] references missing node " << (!ok_s ? e.source : e.target);
      out.push_back({"dangling-edge", "edge " + std::to_string(k), d.str()});
      continue;
    }
    ++out_deg[e.source];
    ++in_deg[e.target];
    incident[e.source].push_back(e.target);
    incident[e.target].push_back(e.source);
  }

  for (const auto& n : g.nodes) {
    const std::string who = "node " + std::to_string(n.id);
    const auto& inc = incident[n.id];
    if (n.kind == NodeKind::kAttribute) {
      if (inc.size() != 1) {
        out.push_back({"attribute-degree", who, "attribute nodes need exactly one incident edge, found " + std::to_string(inc.size())});
      } else if (kind_of[inc.front()] != NodeKind::kObject) {
        out.push_back({"attribute-target", who, "attribute must attach to an object node"});
      }
    } else if (n.kind == NodeKind::kRelation) {
      if (in_deg[n.id] != 1 || out_deg[n.id] != 1) {
        out.push_back({"relation-degree", who,
                       "relation nodes need one incoming and one outgoing edge, found in=" + std::to_string(in_deg[n.id]) +
                           " out=" + std::to_string(out_deg[n.id])});
      } else {
        for (int other : inc)
          if (kind_of[other] != NodeKind::kObject) {
            out.push_back({"relation-endpoint", who, "relation endpoints must be object nodes"});
            break;
          }
      }
    }
  }
  return out;
}

inline std::string describe(const std::vector<Violation>& vs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) os << "; ";
    os << vs[i].subject << ": " << vs[i].rule << " (" << vs[i].detail << ")";
  }
  return os.str();
}

namespace detail {

inline const json& require(const json& j, const char* field) {
  if (!j.is_object() || !j.contains(field)) throw ParseError(std::string("missing field '") + field + "'");
  return j.at(field);
}

inline NodeKind parse_kind(const json& j) {
  if (!j.is_string()) throw ParseError("field 'kind' must be a string");
  const auto s = j.get<std::string>();
  if (s == "object") return NodeKind::kObject;
  if (s == "attribute") return NodeKind::kAttribute;
  if (s == "relation") return NodeKind::kRelation;
  throw ParseError("field 'kind' has unknown value '" + s + "'");
}

inline Modality parse_modality(const json& j) {
  if (!j.is_string()) throw ParseError("field 'modality' must be a string");
  const auto s = j.get<std::string>();
  if (s == "visual") return Modality::kVisual;
  if (s == "textual") return Modality::kTextual;
  throw ParseError("field 'modality' has unknown value '" + s + "'");
}

inline int parse_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ParseError("field '" + field + "' must be an integer");
  return j.get<int>();
}

}  // namespace detail

// Reads one scene-graph record and checks every invariant.
inline SceneGraph parse_scene_graph(const json& doc) {
  using detail::require;
  SceneGraph g;
  g.modality = detail::parse_modality(require(doc, "modality"));

  const json& nodes = require(doc, "nodes");
  if (!nodes.is_array()) throw ParseError("field 'nodes' must be an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const json& jn = nodes[i];
    const std::string where = "nodes[" + std::to_string(i) + "].";
    if (!jn.is_object()) throw ParseError("field '" + where.substr(0, where.size() - 1) + "' must be an object");
    SGNode n;
    if (!jn.contains("id")) throw ParseError("missing field '" + where + "id'");
    n.id = detail::parse_int(jn.at("id"), where + "id");
    if (!jn.contains("kind")) throw ParseError("missing field '" + where + "kind'");
    n.kind = detail::parse_kind(jn.at("kind"));
    if (!jn.contains("label") || !jn.at("label").is_string()) throw ParseError("field '" + where + "label' must be a string");
    n.label = jn.at("label").get<std::string>();
    if (jn.contains("region") && !jn.at("region").is_null()) {
      const json& r = jn.at("region");
      if (!r.is_array() || r.size() != 4) throw ParseError("field '" + where + "region' must be [x0,y0,x1,y1]");
      for (const auto& v : r)
        if (!v.is_number()) throw ParseError("field '" + where + "region' must hold numbers");
      n.region = BoundingBox{r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
    }
    if (jn.contains("span") && !jn.at("span").is_null()) {
      const json& s = jn.at("span");
      if (!s.is_array() || s.size() != 2) throw ParseError("field '" + where + "span' must be [start,end]");
      n.span = TokenSpan{detail::parse_int(s[0], where + "span"), detail::parse_int(s[1], where + "span")};
    }
    g.nodes.push_back(std::move(n));
  }

  const json& edges = require(doc, "edges");
  if (!edges.is_array()) throw ParseError("field 'edges' must be an array");
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const json& e = edges[k];
    const std::string where = "edges[" + std::to_string(k) + "]";
    if (!e.is_array() || e.size() != 2) throw ParseError("field '" + where + "' must be [src,dst]");
    g.edges.push_back({detail::parse_int(e[0], where), detail::parse_int(e[1], where)});
  }

  if (auto vs = validate(g); !vs.empty()) throw ValidationError(describe(vs));
  return g;
}

inline SceneGraph parse_scene_graph(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed scene-graph record: ") + e.what());
  }
  return parse_scene_graph(doc);
}

inline SceneGraph parse_scene_graph(const char* text) { return parse_scene_graph(std::string(text)); }

inline json to_json(const SceneGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json jn = {{"id", n.id}, {"kind", to_string(n.kind)}, {"label", n.label}};
    if (n.region) jn["region"] = {n.region->x0, n.region->y0, n.region->x1, n.region->y1};
    if (n.span) jn["span"] = {n.span->start, n.span->end};
    nodes.push_back(std::move(jn));
  }
  json edges = json::array();
  for (const auto& e : g.edges) edges.push_back({e.source, e.target});
  return {{"modality", to_string(g.modality)}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

inline std::string serialize(const SceneGraph& g) { return to_json(g).dump(); }

}  // namespace cmggib
