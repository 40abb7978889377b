#pragma once

// Deterministic world-state simulator over a scene graph.
//
// verify_plan is pure (works on a copy); execute_plan commits the final state
// on success and leaves the input state untouched on failure. Both report the
// first failing action with a machine reason code and a textual feedback line
// whose wording is part of the external contract.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "actions.hpp"
#include "scene_graph.hpp"

namespace sgplan {

enum class ReasonCode {
    not_accessible,
    hand_occupied,
    wrong_location,
    no_affordance,
    bad_state,
    unknown_node,
    not_adjacent,
    wrong_kind,
    not_holding,
    no_access,
};

inline const char* to_string(ReasonCode r) {
    switch (r) {
        case ReasonCode::not_accessible: return "NOT_ACCESSIBLE";
        case ReasonCode::hand_occupied: return "HAND_OCCUPIED";
        case ReasonCode::wrong_location: return "WRONG_LOCATION";
        case ReasonCode::no_affordance: return "NO_AFFORDANCE";
        case ReasonCode::bad_state: return "BAD_STATE";
        case ReasonCode::unknown_node: return "UNKNOWN_NODE";
        case ReasonCode::not_adjacent: return "NOT_ADJACENT";
        case ReasonCode::wrong_kind: return "WRONG_KIND";
        case ReasonCode::not_holding: return "NOT_HOLDING";
        case ReasonCode::no_access: return "NO_ACCESS";
    }
    return "?";
}

struct ActionError {
    ReasonCode reason;
    std::string feedback;
};

struct Containment {
    enum class Rel { in_room, ontop_of, inside_of, inside_hand };
    Rel rel = Rel::in_room;
    std::string target;  // empty for inside_hand

    bool operator==(const Containment& o) const { return rel == o.rel && target == o.target; }
};

inline std::string to_string(const Containment& c) {
    switch (c.rel) {
        case Containment::Rel::in_room: return "in_room(" + c.target + ")";
        case Containment::Rel::ontop_of: return "ontop_of(" + c.target + ")";
        case Containment::Rel::inside_of: return "inside_of(" + c.target + ")";
        case Containment::Rel::inside_hand: return "inside_hand";
    }
    return "?";
}

struct WorldState {
    std::string agent_at;                          // room or pose id
    std::optional<std::string> holding;            // object id
    std::optional<std::string> accessed;           // asset id; cleared by goto
    std::map<std::string, std::string> node_states;    // open/closed/on/off/free
    std::map<std::string, Containment> containment;    // object id -> where

    bool operator==(const WorldState& o) const {
        return agent_at == o.agent_at && holding == o.holding && accessed == o.accessed &&
               node_states == o.node_states && containment == o.containment;
    }
};

inline ordered_json world_state_to_json(const WorldState& s) {
    ordered_json j = ordered_json::object();
    j["agent_at"] = s.agent_at;
    j["holding"] = s.holding ? ordered_json(*s.holding) : ordered_json(nullptr);
    j["accessed"] = s.accessed ? ordered_json(*s.accessed) : ordered_json(nullptr);
    j["node_states"] = ordered_json::object();
    for (const auto& [id, st] : s.node_states) j["node_states"][id] = st;
    j["containment"] = ordered_json::object();
    for (const auto& [id, c] : s.containment) j["containment"][id] = to_string(c);
    return j;
}

// ---------------------------------------------------------------------------
// Initialization

inline WorldState init_state(const SceneGraph& g) {
    WorldState s;
    auto agent = g.agent_id();
    if (!agent) throw GraphError("no agent node");
    const auto& rec = g.node(*agent);
    if (!rec.location) throw GraphError("agent has no location");
    auto lk = g.kind_of(*rec.location);
    if (!lk || (*lk != NodeKind::room && *lk != NodeKind::pose))
        throw GraphError("agent location must be a room or pose: " + *rec.location);
    s.agent_at = *rec.location;

    auto derived_containment = [&](const NodeRecord& n) -> Containment {
        if (auto asset = g.containing_asset(n.id))
            return {Containment::Rel::ontop_of, *asset};
        for (const auto& nb : g.neighbors(n.id))
            if (g.kind_of(nb) == NodeKind::room) return {Containment::Rel::in_room, nb};
        return {Containment::Rel::in_room, ""};
    };

    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::asset) {
            if (n.state) s.node_states[n.id] = *n.state;
        } else if (n.kind == NodeKind::object) {
            if (n.state) {
                if (auto c = detail::parse_containment(*n.state)) {
                    s.containment[n.id] = {c->relation == "inside_of" ? Containment::Rel::inside_of
                                                                      : Containment::Rel::ontop_of,
                                           c->target};
                    continue;
                }
                if (*n.state == "inside_hand") {
                    s.containment[n.id] = {Containment::Rel::inside_hand, ""};
                    s.holding = n.id;
                    continue;
                }
                if (*n.state == "on" || *n.state == "off") s.node_states[n.id] = *n.state;
            }
            s.containment[n.id] = derived_containment(n);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Action application

namespace detail {

inline std::string de_underscore(std::string s) {
    for (auto& c : s)
        if (c == '_') c = ' ';
    return s;
}

inline ActionError err(ReasonCode r, std::string feedback) {
    return ActionError{r, std::move(feedback)};
}

inline std::string state_token(const WorldState& s, const std::string& id) {
    auto it = s.node_states.find(id);
    return it == s.node_states.end() ? "free" : it->second;
}

inline bool has_affordance(const NodeRecord& n, const char* verb) {
    for (const auto& a : n.affordances)
        if (a == verb) return true;
    return false;
}

inline bool is_openable(const NodeRecord& n) {
    return has_affordance(n, "open") || has_affordance(n, "close");
}

// An object is accessible when loose in the agent's room, or when its
// containing asset is the accessed one and is open (or has no open/close
// affordance at all).
inline bool object_accessible(const SceneGraph& g, const WorldState& s, const std::string& id) {
    auto it = s.containment.find(id);
    if (it == s.containment.end()) return false;
    const Containment& c = it->second;
    switch (c.rel) {
        case Containment::Rel::in_room:
            return c.target == s.agent_at;
        case Containment::Rel::ontop_of:
        case Containment::Rel::inside_of: {
            if (!s.accessed || *s.accessed != c.target) return false;
            const NodeRecord& asset = g.node(c.target);
            return !is_openable(asset) || state_token(s, c.target) == "open";
        }
        case Containment::Rel::inside_hand:
            return false;
    }
    return false;
}

}  // namespace detail

inline std::optional<ActionError> apply_action(WorldState& s, const SceneGraph& g,
                                               const PlanAction& a) {
    using detail::err;
    const char* verb = to_string(a.verb);

    if (a.verb == Verb::done) return std::nullopt;

    if (!g.has(a.arg))
        return err(ReasonCode::unknown_node, a.arg + " does not exist");
    NodeKind kind = *g.kind_of(a.arg);

    auto wrong_kind = [&](const char* expected) {
        return err(ReasonCode::wrong_kind,
                   "cannot " + std::string(verb) + " " + a.arg + ": " + a.arg + " is not " + expected);
    };

    switch (a.verb) {
        case Verb::goto_: {
            if (kind != NodeKind::room && kind != NodeKind::pose) return wrong_kind("a room or pose");
            if (a.arg != s.agent_at && !g.adjacent(s.agent_at, a.arg))
                return err(ReasonCode::not_adjacent,
                           "cannot goto " + a.arg + ": no direct connection from " + s.agent_at);
            s.agent_at = a.arg;
            s.accessed.reset();
            return std::nullopt;
        }
        case Verb::access: {
            if (kind != NodeKind::asset) return wrong_kind("an asset");
            auto room = g.room_of(a.arg);
            if (!room || *room != s.agent_at)
                return err(ReasonCode::wrong_location,
                           "cannot access " + a.arg + ": agent is not at " + room.value_or("?"));
            s.accessed = a.arg;
            return std::nullopt;
        }
        case Verb::pickup: {
            if (kind != NodeKind::object) return wrong_kind("an object");
            if (s.holding)
                return err(ReasonCode::hand_occupied,
                           "cannot pickup " + a.arg + ": hand is occupied");
            if (!detail::object_accessible(g, s, a.arg))
                return err(ReasonCode::not_accessible,
                           detail::de_underscore(a.arg) + " is not accessible");
            s.containment[a.arg] = {Containment::Rel::inside_hand, ""};
            s.holding = a.arg;
            return std::nullopt;
        }
        case Verb::release: {
            if (kind != NodeKind::object) return wrong_kind("an object");
            if (!s.holding || *s.holding != a.arg)
                return err(ReasonCode::not_holding,
                           "cannot release " + a.arg + ": not holding " + a.arg);
            if (!s.accessed)
                return err(ReasonCode::no_access, "cannot release " + a.arg + ": no asset accessed");
            const NodeRecord& asset = g.node(*s.accessed);
            if (!detail::has_affordance(asset, "release"))
                return err(ReasonCode::no_affordance,
                           "cannot release " + a.arg + ": affordance not available");
            bool open_container =
                detail::is_openable(asset) && detail::state_token(s, asset.id) == "open";
            s.containment[a.arg] = {open_container ? Containment::Rel::inside_of
                                                   : Containment::Rel::ontop_of,
                                    asset.id};
            s.holding.reset();
            return std::nullopt;
        }
        case Verb::open:
        case Verb::close: {
            if (kind != NodeKind::asset) return wrong_kind("an asset");
            if (!s.accessed || *s.accessed != a.arg)
                return err(ReasonCode::no_access,
                           "cannot " + std::string(verb) + " " + a.arg + ": " + a.arg +
                               " is not accessed");
            if (!detail::has_affordance(g.node(a.arg), verb))
                return err(ReasonCode::no_affordance,
                           "cannot " + std::string(verb) + " " + a.arg +
                               ": affordance not available");
            std::string required = a.verb == Verb::open ? "closed" : "open";
            std::string current = detail::state_token(s, a.arg);
            if (current != required)
                return err(ReasonCode::bad_state, "cannot " + std::string(verb) + " " + a.arg +
                                                      ": " + a.arg + " is " + current);
            s.node_states[a.arg] = a.verb == Verb::open ? "open" : "closed";
            return std::nullopt;
        }
        case Verb::turn_on:
        case Verb::turn_off: {
            if (kind != NodeKind::asset && kind != NodeKind::object)
                return wrong_kind("an asset or object");
            if (kind == NodeKind::asset) {
                if (!s.accessed || *s.accessed != a.arg)
                    return err(ReasonCode::no_access,
                               "cannot " + std::string(verb) + " " + a.arg + ": " + a.arg +
                                   " is not accessed");
            } else if (!detail::object_accessible(g, s, a.arg)) {
                return err(ReasonCode::not_accessible,
                           detail::de_underscore(a.arg) + " is not accessible");
            }
            if (!detail::has_affordance(g.node(a.arg), verb))
                return err(ReasonCode::no_affordance,
                           "cannot " + std::string(verb) + " " + a.arg +
                               ": affordance not available");
            std::string required = a.verb == Verb::turn_on ? "off" : "on";
            std::string current = detail::state_token(s, a.arg);
            if (current != required)
                return err(ReasonCode::bad_state, "cannot " + std::string(verb) + " " + a.arg +
                                                      ": " + a.arg + " is " + current);
            s.node_states[a.arg] = a.verb == Verb::turn_on ? "on" : "off";
            return std::nullopt;
        }
        default:
            return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Plan verification and execution

struct VerifyOutcome {
    bool ok = false;
    std::optional<std::size_t> failed_index;
    std::optional<ReasonCode> reason;
    std::string feedback;  // "Plan Verified" on success

    static VerifyOutcome success() { return {true, std::nullopt, std::nullopt, "Plan Verified"}; }
};

namespace detail {

inline VerifyOutcome run_plan(WorldState& s, const SceneGraph& g, const Plan& plan) {
    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (auto e = apply_action(s, g, plan[i]))
            return {false, i, e->reason, e->feedback};
    }
    return VerifyOutcome::success();
}

}  // namespace detail

inline VerifyOutcome verify_plan(const WorldState& initial, const SceneGraph& g, const Plan& plan) {
    WorldState scratch = initial;
    return detail::run_plan(scratch, g, plan);
}

inline VerifyOutcome execute_plan(WorldState& state, const SceneGraph& g, const Plan& plan) {
    WorldState scratch = state;
    VerifyOutcome out = detail::run_plan(scratch, g, plan);
    if (out.ok) state = std::move(scratch);
    return out;
}

// World-state invariants; returns human-readable breaches (empty when sound).
inline std::vector<std::string> check_world_invariants(const WorldState& s, const SceneGraph& g) {
    std::vector<std::string> breaches;
    auto agent_kind = g.kind_of(s.agent_at);
    if (!agent_kind || (*agent_kind != NodeKind::room && *agent_kind != NodeKind::pose))
        breaches.push_back("agent_at is not a room or pose: " + s.agent_at);
    std::size_t held = 0;
    for (const auto& [id, c] : s.containment) {
        if (c.rel == Containment::Rel::inside_hand) {
            ++held;
            if (!s.holding || *s.holding != id)
                breaches.push_back("inside_hand object not matched by holding: " + id);
        } else if (!g.has(c.target)) {
            breaches.push_back("containment target does not exist: " + to_string(c));
        }
    }
    if (held > 1) breaches.push_back("more than one object inside_hand");
    if (s.holding && (!s.containment.count(*s.holding) ||
                      s.containment.at(*s.holding).rel != Containment::Rel::inside_hand))
        breaches.push_back("holding not matched by containment: " + *s.holding);
    if (s.accessed) {
        auto room = g.room_of(*s.accessed);
        if (!room || *room != s.agent_at)
            breaches.push_back("accessed asset is not in the agent's room: " + *s.accessed);
    }
    for (const auto& [id, st] : s.node_states)
        if (st != "open" && st != "closed" && st != "on" && st != "off" && st != "free")
            breaches.push_back("invalid state token: " + id + " is " + st);
    return breaches;
}

}  // namespace sgplan
