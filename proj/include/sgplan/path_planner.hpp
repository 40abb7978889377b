#pragma once

// Navigation planning over the room/pose subgraph.
//
// Dijkstra with deterministic tie-breaking: among equal-cost shortest paths
// the lexicographically smallest node-id sequence is returned. Edge weights
// default to 1; Euclidean weights use node positions when both endpoints
// carry them and fall back to 1 otherwise.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include "actions.hpp"
#include "scene_graph.hpp"

namespace sgplan {

namespace detail {

// Integer-indexed mirror of a NavGraph. Slots follow the sorted vertex-id
// order, so slot order equals lexicographic id order and the sorted link
// lists let a linear scan find the smallest-id neighbor first.
struct CompactNav {
    std::map<std::string, int> slot;
    std::vector<std::string> ids;                            // slot -> vertex id
    std::vector<std::vector<std::pair<int, double>>> links;  // slot -> (slot, weight)
};

}  // namespace detail

struct NavGraph {
    std::vector<std::string> vertices;  // document order
    std::map<std::string, std::vector<std::pair<std::string, double>>> adjacency;
    detail::CompactNav compact;  // rebuilt by build_nav_graph; stale after manual edits

    bool has(const std::string& id) const { return adjacency.count(id) > 0; }
    std::size_t edge_count() const {
        std::size_t degree_sum = 0;
        for (const auto& [_, ns] : adjacency) degree_sum += ns.size();
        return degree_sum / 2;
    }
};

namespace detail {

inline CompactNav compact_view(const NavGraph& nav) {
    CompactNav c;
    c.ids.reserve(nav.adjacency.size());
    for (const auto& [id, _] : nav.adjacency) {  // sorted by id
        c.slot[id] = int(c.ids.size());
        c.ids.push_back(id);
    }
    c.links.resize(c.ids.size());
    for (std::size_t i = 0; i < c.ids.size(); ++i) {
        for (const auto& [v, w] : nav.adjacency.at(c.ids[i]))
            c.links[i].emplace_back(c.slot.at(v), w);
        std::sort(c.links[i].begin(), c.links[i].end());
    }
    return c;
}

}  // namespace detail

inline NavGraph build_nav_graph(const SceneGraph& g, bool euclidean = false) {
    NavGraph nav;
    auto navigable = [&](const std::string& id) {
        auto k = g.kind_of(id);
        return k == NodeKind::room || k == NodeKind::pose;
    };
    for (const auto& n : g.nodes)
        if (n.kind == NodeKind::room || n.kind == NodeKind::pose) {
            nav.vertices.push_back(n.id);
            nav.adjacency[n.id];  // isolated rooms keep degree 0
        }
    for (const auto& [a, b] : g.edges) {
        if (!navigable(a) || !navigable(b)) continue;
        double w = 1.0;
        if (euclidean) {
            const auto& pa = g.node(a).position;
            const auto& pb = g.node(b).position;
            if (pa && pb) {
                double dx = (*pa)[0] - (*pb)[0];
                double dy = (*pa)[1] - (*pb)[1];
                double dz = (*pa)[2] - (*pb)[2];
                w = std::sqrt(dx * dx + dy * dy + dz * dz);
                if (w <= 0.0) w = 1e-9;  // weights stay positive
            }
        }
        nav.adjacency[a].emplace_back(b, w);
        nav.adjacency[b].emplace_back(a, w);
    }
    nav.compact = detail::compact_view(nav);
    return nav;
}

struct PathResult {
    std::vector<std::string> nodes;  // src first, dst last
    double cost = 0.0;
};

namespace detail {

inline std::vector<double> dijkstra_distances(const CompactNav& c, int source) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(c.ids.size(), inf);
    dist[std::size_t(source)] = 0.0;
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
    queue.push({0.0, source});
    while (!queue.empty()) {
        auto [d, u] = queue.top();
        queue.pop();
        if (d > dist[std::size_t(u)]) continue;
        for (const auto& [v, w] : c.links[std::size_t(u)]) {
            if (d + w < dist[std::size_t(v)]) {
                dist[std::size_t(v)] = d + w;
                queue.push({dist[std::size_t(v)], v});
            }
        }
    }
    return dist;
}

}  // namespace detail

// std::nullopt when dst is unreachable from src. Throws on unknown vertices.
inline std::optional<PathResult> shortest_path(const NavGraph& nav, const std::string& src,
                                               const std::string& dst) {
    if (!nav.has(src)) throw GraphError("unknown nav vertex: " + src);
    if (!nav.has(dst)) throw GraphError("unknown nav vertex: " + dst);
    if (src == dst) return PathResult{{src}, 0.0};

    const bool fresh = nav.compact.ids.size() == nav.adjacency.size();
    detail::CompactNav rebuilt;  // only for graphs assembled without build_nav_graph
    if (!fresh) rebuilt = detail::compact_view(nav);
    const detail::CompactNav& c = fresh ? nav.compact : rebuilt;

    // Distances toward dst, then a greedy walk from src that always steps to
    // the smallest-id neighbor lying on some shortest path. Link lists are
    // sorted by id, so the first feasible neighbor is the smallest.
    auto dist = detail::dijkstra_distances(c, c.slot.at(dst));
    int current = c.slot.at(src);
    if (std::isinf(dist[std::size_t(current)])) return std::nullopt;

    constexpr double eps = 1e-9;
    const int goal = c.slot.at(dst);
    PathResult result;
    result.cost = dist[std::size_t(current)];
    result.nodes.push_back(c.ids[std::size_t(current)]);
    while (current != goal) {
        int next = -1;
        for (const auto& [v, w] : c.links[std::size_t(current)]) {
            if (std::abs(dist[std::size_t(current)] - (w + dist[std::size_t(v)])) > eps) continue;
            next = v;
            break;
        }
        if (next < 0)
            throw GraphError("shortest path reconstruction failed at " +
                             c.ids[std::size_t(current)]);
        current = next;
        result.nodes.push_back(c.ids[std::size_t(current)]);
    }
    return result;
}

struct CompletionError {
    std::string node;      // offending goto target
    bool unknown = false;  // true: target missing or not navigable; false: unreachable
    std::string from;      // agent's tracked location when the goto failed
    std::string message;
};

// Replaces each room-level goto with the full goto sequence along the
// shortest path from the agent's tracked location. Non-goto actions pass
// through unchanged; goto to the current location expands to nothing.
// Completing an already-completed plan is the identity.
inline std::variant<Plan, CompletionError> complete_plan(const Plan& plan, const SceneGraph& g,
                                                         const std::string& start_at,
                                                         bool euclidean = false) {
    NavGraph nav = build_nav_graph(g, euclidean);
    if (!nav.has(start_at))
        return CompletionError{start_at, true, start_at,
                               "start location is not navigable: " + start_at};
    Plan out;
    std::string current = start_at;
    for (const auto& action : plan) {
        if (action.verb != Verb::goto_) {
            out.push_back(action);
            continue;
        }
        if (!nav.has(action.arg))
            return CompletionError{action.arg, true, current,
                                   "goto target is not a known room or pose: " + action.arg};
        if (action.arg == current) continue;
        auto path = shortest_path(nav, current, action.arg);
        if (!path)
            return CompletionError{action.arg, false, current,
                                   "no route from " + current + " to " + action.arg};
        for (std::size_t i = 1; i < path->nodes.size(); ++i)
            out.push_back(PlanAction{Verb::goto_, path->nodes[i]});
        current = action.arg;
    }
    return out;
}

}  // namespace sgplan
