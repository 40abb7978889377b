// Shared helpers for the test suite: fixture paths, independent oracles, and
// random-input generators. Oracles here must not reuse the library's own
// algorithms; BFS distances and hand-rolled JSON checks keep them honest.
#pragma once

#include <sgplan/sgplan.hpp>

#include <deque>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace support {

inline std::string data_dir() { return SGPLAN_DATA_DIR; }
inline std::string fixture_path(const std::string& name) {
    return data_dir() + "/fixtures/" + name;
}
inline std::string cassette_path(const std::string& name) {
    return data_dir() + "/cassettes/" + name;
}
inline std::string suite_path(const std::string& name) { return data_dir() + "/suites/" + name; }
inline std::string prompt_path(const std::string& name) { return data_dir() + "/prompts/" + name; }

inline sgplan::SceneGraph load_fixture(const std::string& name) {
    return sgplan::load_graph(sgplan::read_text_file(fixture_path(name)));
}

inline sgplan::ScriptedBackend scripted(const std::string& cassette) {
    return sgplan::ScriptedBackend(sgplan::load_cassette(cassette_path(cassette)));
}

// Unweighted breadth-first distances; the independent check for Dijkstra
// under unit edge weights.
inline std::unordered_map<std::string, int> bfs_distances(const sgplan::NavGraph& nav,
                                                          const std::string& src) {
    std::unordered_map<std::string, int> dist;
    std::deque<std::string> queue;
    dist[src] = 0;
    queue.push_back(src);
    while (!queue.empty()) {
        std::string u = queue.front();
        queue.pop_front();
        auto it = nav.adjacency.find(u);
        if (it == nav.adjacency.end()) continue;
        for (const auto& [v, w] : it->second) {
            if (dist.count(v)) continue;
            dist[v] = dist[u] + 1;
            queue.push_back(v);
        }
    }
    return dist;
}

// Uniformly random action over the fixture's node ids plus a few ids that do
// not exist; produces the valid/invalid mix the equivalence suite needs.
inline sgplan::PlanAction random_action(std::mt19937& rng,
                                        const std::vector<std::string>& ids) {
    static const char* bogus[] = {"pose9", "ghost_room", "nothing", "agent2"};
    std::uniform_int_distribution<int> verb_pick(0, 8);
    auto verb = static_cast<sgplan::Verb>(verb_pick(rng));
    if (verb == sgplan::Verb::done) return {verb, ""};
    std::uniform_int_distribution<std::size_t> arg_pick(0, ids.size() + 3);
    std::size_t k = arg_pick(rng);
    std::string arg = k < ids.size() ? ids[k] : bogus[k - ids.size()];
    return {verb, arg};
}

inline sgplan::Plan random_plan(std::mt19937& rng, const std::vector<std::string>& ids,
                                std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len_pick(0, max_len);
    sgplan::Plan plan;
    std::size_t n = len_pick(rng);
    for (std::size_t i = 0; i < n; ++i) plan.push_back(random_action(rng, ids));
    return plan;
}

inline std::vector<std::string> all_node_ids(const sgplan::SceneGraph& g) {
    std::vector<std::string> ids;
    for (const auto& n : g.nodes) ids.push_back(n.id);
    return ids;
}

// The hand-checked end state of the demo coffee task: mug fetched from
// bobs_room, coffee made in the kitchen, mug delivered onto toms_room's
// wardrobe (closed, so it rests on top).
inline std::vector<std::string> golden_plan_actions() {
    return {"access(wardrobe1)", "open(wardrobe1)",       "pickup(coffee_mug)",
            "goto(pose1)",       "goto(jacks_room)",      "goto(pose3)",
            "goto(kitchen)",     "access(coffee_machine)", "release(coffee_mug)",
            "turn_on(coffee_machine)", "turn_off(coffee_machine)", "pickup(coffee_mug)",
            "goto(pose5)",       "goto(toms_room)",       "access(wardrobe2)",
            "release(coffee_mug)", "done"};
}

inline sgplan::Plan golden_plan() {
    sgplan::Plan plan;
    for (const auto& text : golden_plan_actions()) {
        auto action = sgplan::parse_action(text);
        REQUIRE(action.has_value());
        plan.push_back(*action);
    }
    return plan;
}

inline std::vector<std::string> golden_memory() {
    return {"toms_room", "kitchen", "jacks_room", "bobs_room"};
}

}  // namespace support
