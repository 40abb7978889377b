#pragma once

// Hierarchical 3D scene graph with a visibility overlay.
//
// The full graph is immutable after load; expand/contract/collapse only move
// the visible set. Serialization renders the visible view in document order
// with a fixed key layout, so equal visible sets on the same document produce
// identical bytes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace sgplan {

using ordered_json = nlohmann::ordered_json;

class GraphError : public std::runtime_error {
public:
    explicit GraphError(const std::string& what) : std::runtime_error(what) {}
};

enum class NodeKind { floor, room, pose, asset, object, agent };

inline const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::floor: return "floor";
        case NodeKind::room: return "room";
        case NodeKind::pose: return "pose";
        case NodeKind::asset: return "asset";
        case NodeKind::object: return "object";
        case NodeKind::agent: return "agent";
    }
    return "?";
}

inline std::optional<NodeKind> node_kind_from(std::string_view s) {
    if (s == "floor") return NodeKind::floor;
    if (s == "room") return NodeKind::room;
    if (s == "pose") return NodeKind::pose;
    if (s == "asset") return NodeKind::asset;
    if (s == "object") return NodeKind::object;
    if (s == "agent") return NodeKind::agent;
    return std::nullopt;
}

// Hierarchy levels; pose and agent nodes sit outside the hierarchy.
inline std::optional<int> level_of(NodeKind k) {
    switch (k) {
        case NodeKind::floor: return 0;
        case NodeKind::room: return 1;
        case NodeKind::asset: return 2;
        case NodeKind::object: return 3;
        default: return std::nullopt;
    }
}

struct NodeRecord {
    std::string id;
    NodeKind kind = NodeKind::object;
    std::optional<std::string> location;
    std::vector<std::string> affordances;
    std::optional<std::string> state;
    std::vector<std::string> attributes;
    std::optional<std::array<double, 3>> position;
};

struct SceneGraph {
    std::vector<NodeRecord> nodes;                           // document order
    std::vector<std::pair<std::string, std::string>> edges;  // document order
    std::unordered_map<std::string, std::size_t> index;      // id -> first node
    std::unordered_map<std::string, std::vector<std::string>> adjacency;
    std::set<std::string> visible;

    bool has(const std::string& id) const { return index.count(id) > 0; }

    const NodeRecord& node(const std::string& id) const {
        auto it = index.find(id);
        if (it == index.end()) throw GraphError("unknown node: " + id);
        return nodes[it->second];
    }

    std::optional<NodeKind> kind_of(const std::string& id) const {
        auto it = index.find(id);
        if (it == index.end()) return std::nullopt;
        return nodes[it->second].kind;
    }

    const std::vector<std::string>& neighbors(const std::string& id) const {
        static const std::vector<std::string> none;
        auto it = adjacency.find(id);
        return it == adjacency.end() ? none : it->second;
    }

    bool adjacent(const std::string& a, const std::string& b) const {
        const auto& ns = neighbors(a);
        return std::find(ns.begin(), ns.end(), b) != ns.end();
    }

    bool is_visible(const std::string& id) const { return visible.count(id) > 0; }

    // Room an asset or in-room object is linked to, or the room of the object's
    // containing asset. Empty when parentage is broken (validate() reports it).
    std::optional<std::string> room_of(const std::string& id) const {
        auto k = kind_of(id);
        if (!k) return std::nullopt;
        if (*k == NodeKind::room) return id;
        for (const auto& n : neighbors(id))
            if (kind_of(n) == NodeKind::room) return n;
        if (*k == NodeKind::object) {
            for (const auto& n : neighbors(id))
                if (kind_of(n) == NodeKind::asset) return room_of(n);
        }
        return std::nullopt;
    }

    std::optional<std::string> containing_asset(const std::string& object_id) const {
        for (const auto& n : neighbors(object_id))
            if (kind_of(n) == NodeKind::asset) return n;
        return std::nullopt;
    }

    std::optional<std::string> agent_id() const {
        for (const auto& n : nodes)
            if (n.kind == NodeKind::agent) return n.id;
        return std::nullopt;
    }
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::string json_type_name(const ordered_json& j) { return j.type_name(); }

inline void expect_object(const ordered_json& j, const std::string& where) {
    if (!j.is_object())
        throw GraphError("schema error: " + where + " must be an object, got " + json_type_name(j));
}

inline std::optional<std::pair<std::string, std::string>> split_link(const std::string& raw) {
    static const std::string arrow = "↔";  // two-headed arrow
    auto pos = raw.find(arrow);
    std::size_t sep_len = arrow.size();
    if (pos == std::string::npos) {
        pos = raw.find("<->");
        sep_len = 3;
    }
    if (pos == std::string::npos || pos == 0 || pos + sep_len >= raw.size()) return std::nullopt;
    return std::make_pair(raw.substr(0, pos), raw.substr(pos + sep_len));
}

inline std::vector<std::string> parse_string_list(const ordered_json& j, const std::string& where) {
    std::vector<std::string> out;
    if (j.is_string()) {  // single string accepted for convenience
        out.push_back(j.get<std::string>());
        return out;
    }
    if (!j.is_array())
        throw GraphError("schema error: " + where + " must be an array of strings");
    for (const auto& e : j) {
        if (!e.is_string())
            throw GraphError("schema error: " + where + " must contain only strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace detail

inline SceneGraph parse_environment(const std::string& json_text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw GraphError(std::string("parse error: ") + e.what());
    }
    detail::expect_object(doc, "document");
    if (!doc.contains("nodes")) throw GraphError("schema error: missing \"nodes\"");
    detail::expect_object(doc.at("nodes"), "\"nodes\"");

    SceneGraph g;
    for (const auto& [kind_name, group] : doc.at("nodes").items()) {
        auto kind = node_kind_from(kind_name);
        if (!kind) throw GraphError("schema error: unknown node kind \"" + kind_name + "\"");
        if (!group.is_array())
            throw GraphError("schema error: nodes." + kind_name + " must be an array");
        for (const auto& item : group) {
            detail::expect_object(item, "node in nodes." + kind_name);
            NodeRecord rec;
            rec.kind = *kind;
            for (const auto& [key, value] : item.items()) {
                if (key == "id") {
                    if (!value.is_string()) throw GraphError("schema error: node id must be a string");
                    rec.id = value.get<std::string>();
                } else if (key == "location") {
                    if (!value.is_string())
                        throw GraphError("schema error: location must be a string");
                    rec.location = value.get<std::string>();
                } else if (key == "affordances") {
                    rec.affordances = detail::parse_string_list(value, "affordances");
                } else if (key == "state") {
                    if (!value.is_string()) throw GraphError("schema error: state must be a string");
                    rec.state = value.get<std::string>();
                } else if (key == "attributes") {
                    rec.attributes = detail::parse_string_list(value, "attributes");
                } else if (key == "position") {
                    if (!value.is_array() || value.size() != 3)
                        throw GraphError("schema error: position must be [x, y, z]");
                    std::array<double, 3> p{};
                    for (std::size_t i = 0; i < 3; ++i) {
                        if (!value[i].is_number())
                            throw GraphError("schema error: position must be numeric");
                        p[i] = value[i].get<double>();
                    }
                    rec.position = p;
                } else {
                    throw GraphError("schema error: unknown node field \"" + key + "\"");
                }
            }
            if (rec.id.empty()) throw GraphError("schema error: node without id in nodes." + kind_name);
            g.nodes.push_back(std::move(rec));
        }
    }

    if (doc.contains("links")) {
        const auto& links = doc.at("links");
        if (!links.is_array()) throw GraphError("schema error: \"links\" must be an array");
        for (const auto& l : links) {
            if (!l.is_string()) throw GraphError("schema error: link must be a string");
            auto pair = detail::split_link(l.get<std::string>());
            if (!pair)
                throw GraphError("schema error: malformed link \"" + l.get<std::string>() + "\"");
            g.edges.push_back(*pair);
        }
    }

    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        g.index.emplace(g.nodes[i].id, i);  // first occurrence wins; dups reported by validate
    for (const auto& [a, b] : g.edges) {
        g.adjacency[a].push_back(b);
        g.adjacency[b].push_back(a);
    }
    for (const auto& n : g.nodes) g.visible.insert(n.id);
    return g;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    std::string subject;  // node id or "a<->b" edge label
    std::string rule;
    std::string message;
};

inline const std::set<std::string>& known_affordances() {
    static const std::set<std::string> verbs{"pickup", "release", "open",
                                             "close",  "turn_on", "turn_off"};
    return verbs;
}

namespace detail {

inline bool is_simple_state(const std::string& s) {
    return s == "open" || s == "closed" || s == "on" || s == "off" || s == "free";
}

struct ContainmentState {
    std::string relation;  // inside_of | ontop_of
    std::string target;
};

inline std::optional<ContainmentState> parse_containment(const std::string& s) {
    for (const char* rel : {"inside_of", "ontop_of"}) {
        std::string prefix = std::string(rel) + "(";
        if (s.rfind(prefix, 0) == 0 && s.back() == ')')
            return ContainmentState{rel, s.substr(prefix.size(), s.size() - prefix.size() - 1)};
    }
    return std::nullopt;
}

}  // namespace detail

inline std::vector<Violation> validate(const SceneGraph& g) {
    std::vector<Violation> out;
    auto flag = [&](std::string subject, std::string rule, std::string message) {
        out.push_back({std::move(subject), std::move(rule), std::move(message)});
    };

    std::unordered_set<std::string> seen;
    for (const auto& n : g.nodes) {
        if (!seen.insert(n.id).second)
            flag(n.id, "duplicate-id", "duplicate id: " + n.id);
    }

    for (const auto& [a, b] : g.edges) {
        std::string label = a + "<->" + b;
        if (!g.has(a) || !g.has(b)) {
            flag(label, "dangling-edge", "dangling edge: " + label);
            continue;
        }
        auto la = level_of(*g.kind_of(a));
        auto lb = level_of(*g.kind_of(b));
        if (!la || !lb) continue;  // pose/agent edges are level-exempt
        int gap = std::abs(*la - *lb);
        bool room_object = gap == 2 && ((*la == 1 && *lb == 3) || (*la == 3 && *lb == 1));
        if (gap > 1 && !room_object)  // room<->object is direct in-room containment
            flag(label, "level-rule", "level rule violated: " + label);
    }

    std::size_t agents = 0;
    for (const auto& n : g.nodes)
        if (n.kind == NodeKind::agent) ++agents;
    if (agents != 1)
        flag("agent", "agent-count", "expected exactly one agent, found " + std::to_string(agents));

    std::size_t held = 0;
    for (const auto& n : g.nodes) {
        switch (n.kind) {
            case NodeKind::agent: {
                if (!n.location) {
                    flag(n.id, "agent-location", "agent has no location");
                } else {
                    auto k = g.kind_of(*n.location);
                    if (!k || (*k != NodeKind::room && *k != NodeKind::pose))
                        flag(n.id, "agent-location",
                             "agent location must be a room or pose: " + *n.location);
                }
                break;
            }
            case NodeKind::asset: {
                std::vector<std::string> rooms;
                for (const auto& nb : g.neighbors(n.id))
                    if (g.kind_of(nb) == NodeKind::room) rooms.push_back(nb);
                if (rooms.empty())
                    flag(n.id, "parent", "asset not linked to any room: " + n.id);
                else if (rooms.size() > 1)
                    flag(n.id, "parent",
                         "multiple parents: " + n.id + " linked to " + rooms[0] + " and " + rooms[1]);
                else if (n.location && *n.location != rooms[0])
                    flag(n.id, "parent",
                         "location field disagrees with room link: " + *n.location + " vs " + rooms[0]);
                if (n.state && !detail::is_simple_state(*n.state))
                    flag(n.id, "state-kind", "invalid asset state: " + *n.state);
                break;
            }
            case NodeKind::object: {
                std::vector<std::string> parents;
                for (const auto& nb : g.neighbors(n.id)) {
                    auto k = g.kind_of(nb);
                    if (k == NodeKind::room || k == NodeKind::asset) parents.push_back(nb);
                }
                if (parents.empty())
                    flag(n.id, "parent", "object not linked to any room or asset: " + n.id);
                else if (parents.size() > 1)
                    flag(n.id, "parent",
                         "multiple parents: " + n.id + " linked to " + parents[0] + " and " + parents[1]);
                if (n.state) {
                    if (auto c = detail::parse_containment(*n.state)) {
                        if (!g.has(c->target))
                            flag(n.id, "state-kind",
                                 "containment names unknown node: " + *n.state);
                        else if (!g.adjacent(n.id, c->target))
                            flag(n.id, "state-kind",
                                 "containment disagrees with links: " + *n.state);
                    } else if (*n.state == "inside_hand") {
                        ++held;
                    } else if (!detail::is_simple_state(*n.state)) {
                        flag(n.id, "state-kind", "invalid object state: " + *n.state);
                    }
                }
                break;
            }
            default: {
                if (n.state)
                    flag(n.id, "state-kind",
                         std::string(to_string(n.kind)) + " nodes carry no state: " + n.id);
                break;
            }
        }
        for (const auto& a : n.affordances)
            if (!known_affordances().count(a))
                flag(n.id, "affordance", "unknown affordance: " + a);
    }
    if (held > 1)
        flag("agent", "single-hand", "more than one object is inside_hand");
    return out;
}

inline SceneGraph load_graph(const std::string& json_text) {
    SceneGraph g = parse_environment(json_text);
    auto violations = validate(g);
    if (!violations.empty()) {
        std::string msg = "invariant error:";
        for (const auto& v : violations) msg += "\n  " + v.message;
        throw GraphError(msg);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Visibility operations

enum class OpStatus { ok, noop, unknown_node, wrong_kind, not_visible };

struct OpResult {
    OpStatus status = OpStatus::ok;
    std::vector<std::string> changed;  // ids revealed (expand) or hidden (contract)
    std::string message;

    bool ok() const { return status == OpStatus::ok || status == OpStatus::noop; }
};

namespace detail {

// Assets and objects under a room, including objects nested in those assets.
inline std::vector<std::string> room_descendants(const SceneGraph& g, const std::string& room) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    auto add = [&](const std::string& id) {
        if (seen.insert(id).second) out.push_back(id);
    };
    for (const auto& nb : g.neighbors(room)) {
        auto k = g.kind_of(nb);
        if (k == NodeKind::asset) {
            add(nb);
            for (const auto& nb2 : g.neighbors(nb))
                if (g.kind_of(nb2) == NodeKind::object) add(nb2);
        } else if (k == NodeKind::object) {
            add(nb);
        }
    }
    return out;
}

inline std::vector<std::string> floor_rooms(const SceneGraph& g, const std::string& floor) {
    std::vector<std::string> out;
    for (const auto& nb : g.neighbors(floor))
        if (g.kind_of(nb) == NodeKind::room) out.push_back(nb);
    return out;
}

}  // namespace detail

// Visible view after collapse: the highest occupied hierarchy level (floors if
// any, else rooms) plus all poses and the agent.
inline void collapse(SceneGraph& g) {
    bool has_floors = false;
    for (const auto& n : g.nodes)
        if (n.kind == NodeKind::floor) has_floors = true;
    g.visible.clear();
    for (const auto& n : g.nodes) {
        bool top = has_floors ? (n.kind == NodeKind::floor) : (n.kind == NodeKind::room);
        if (top || n.kind == NodeKind::pose || n.kind == NodeKind::agent)
            g.visible.insert(n.id);
    }
}

inline OpResult expand(SceneGraph& g, const std::string& id) {
    OpResult r;
    auto k = g.kind_of(id);
    if (!k) {
        r.status = OpStatus::unknown_node;
        r.message = id + " does not exist";
        return r;
    }
    if (*k != NodeKind::room && *k != NodeKind::floor) {
        r.status = OpStatus::wrong_kind;
        r.message = "cannot expand " + id + ": not a floor or room";
        return r;
    }
    if (!g.is_visible(id)) {
        r.status = OpStatus::not_visible;
        r.message = "cannot expand " + id + ": not visible";
        return r;
    }
    std::vector<std::string> children = *k == NodeKind::room
                                            ? detail::room_descendants(g, id)
                                            : detail::floor_rooms(g, id);
    for (const auto& c : children)
        if (g.visible.insert(c).second) r.changed.push_back(c);
    if (r.changed.empty() && !children.empty()) {
        r.status = OpStatus::noop;
        r.message = id + " is already expanded";
    }
    return r;
}

inline OpResult contract(SceneGraph& g, const std::string& id) {
    OpResult r;
    auto k = g.kind_of(id);
    if (!k) {
        r.status = OpStatus::unknown_node;
        r.message = id + " does not exist";
        return r;
    }
    if (*k != NodeKind::room && *k != NodeKind::floor) {
        r.status = OpStatus::wrong_kind;
        r.message = "cannot contract " + id + ": not a floor or room";
        return r;
    }
    std::vector<std::string> below;
    if (*k == NodeKind::room) {
        below = detail::room_descendants(g, id);
    } else {
        below = detail::floor_rooms(g, id);
        for (const auto& room : detail::floor_rooms(g, id))
            for (const auto& d : detail::room_descendants(g, room)) below.push_back(d);
    }
    for (const auto& c : below)
        if (g.visible.erase(c) > 0) r.changed.push_back(c);
    // Contracting a node with no descendants is vacuously fine; contracting
    // one whose descendants are already hidden is a reported no-op.
    if (r.changed.empty() && !below.empty()) {
        r.status = OpStatus::noop;
        r.message = id + " is not expanded";
    }
    return r;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline ordered_json node_to_json(const NodeRecord& n) {
    ordered_json j = ordered_json::object();
    j["id"] = n.id;
    if (n.location) j["location"] = *n.location;
    if (!n.affordances.empty()) j["affordances"] = n.affordances;
    if (n.state) j["state"] = *n.state;
    if (!n.attributes.empty()) j["attributes"] = n.attributes;
    if (n.position) j["position"] = *n.position;
    return j;
}

inline std::string serialize_view(const SceneGraph& g, bool visible_only) {
    static constexpr NodeKind order[] = {NodeKind::floor, NodeKind::room,  NodeKind::pose,
                                         NodeKind::agent, NodeKind::asset, NodeKind::object};
    ordered_json doc = ordered_json::object();
    doc["nodes"] = ordered_json::object();
    for (NodeKind k : order) {
        ordered_json group = ordered_json::array();
        for (const auto& n : g.nodes)
            if (n.kind == k && (!visible_only || g.is_visible(n.id)))
                group.push_back(node_to_json(n));
        if (!group.empty()) doc["nodes"][to_string(k)] = std::move(group);
    }
    ordered_json links = ordered_json::array();
    for (const auto& [a, b] : g.edges)
        if (!visible_only || (g.is_visible(a) && g.is_visible(b)))
            links.push_back(a + "↔" + b);
    doc["links"] = std::move(links);
    return doc.dump();
}

}  // namespace detail

inline std::string serialize_visible(const SceneGraph& g) {
    return detail::serialize_view(g, true);
}

inline std::string serialize_full(const SceneGraph& g) {
    return detail::serialize_view(g, false);
}

// ---------------------------------------------------------------------------
// Size accounting

using TokenCounter = std::function<std::size_t(std::string_view)>;

// Coarse per-character token estimate; deterministic and tokenizer-free.
inline std::size_t heuristic_tokens(std::string_view text) {
    return (text.size() + 3) / 4;
}

inline TokenCounter make_token_counter(const std::string& name) {
    if (name == "heuristic") return [](std::string_view s) { return heuristic_tokens(s); };
    if (name == "chars") return [](std::string_view s) { return s.size(); };
    throw GraphError("unknown tokenizer: " + name);
}

struct EntityStats {
    std::map<NodeKind, std::size_t> counts;
    std::size_t edge_count = 0;
    std::size_t full_chars = 0;
    std::size_t visible_chars = 0;
    std::size_t full_tokens = 0;
    std::size_t visible_tokens = 0;
    double compression_ratio = 0.0;  // 1 - visible_tokens / full_tokens
};

inline EntityStats stats(const SceneGraph& g, const TokenCounter& tokens) {
    EntityStats s;
    for (const auto& n : g.nodes) ++s.counts[n.kind];
    s.edge_count = g.edges.size();
    std::string full = serialize_full(g);
    std::string vis = serialize_visible(g);
    s.full_chars = full.size();
    s.visible_chars = vis.size();
    s.full_tokens = tokens(full);
    s.visible_tokens = tokens(vis);
    s.compression_ratio =
        s.full_tokens == 0 ? 0.0
                           : 1.0 - static_cast<double>(s.visible_tokens) / static_cast<double>(s.full_tokens);
    return s;
}

inline EntityStats stats(const SceneGraph& g) {
    return stats(g, make_token_counter("heuristic"));
}

}  // namespace sgplan
