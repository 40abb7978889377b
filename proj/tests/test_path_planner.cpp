#include <catch2/catch_amalgamated.hpp>
#include <sgplan/sgplan.hpp>

#include "support.hpp"

#include <random>
#include <set>

using namespace sgplan;

TEST_CASE("nav graph covers rooms and poses only") {
    SceneGraph g = support::load_fixture("demo_home.json");
    NavGraph nav = build_nav_graph(g);
    CHECK(nav.vertices.size() == 10);
    CHECK(nav.edge_count() == 10);
    CHECK_FALSE(nav.has("wardrobe1"));
    CHECK_FALSE(nav.has("agent"));

    auto neighbor_set = [&](const std::string& id) {
        std::set<std::string> out;
        for (const auto& [v, w] : nav.adjacency.at(id)) out.insert(v);
        return out;
    };
    CHECK(neighbor_set("bobs_room") == std::set<std::string>{"pose1"});
    CHECK(neighbor_set("jacks_room") == std::set<std::string>{"pose1", "pose2", "pose3"});
    CHECK(neighbor_set("toms_room") == std::set<std::string>{"pose2", "pose5"});
    CHECK(neighbor_set("kitchen") == std::set<std::string>{"pose3", "pose4", "pose5"});
    CHECK(neighbor_set("livingroom") == std::set<std::string>{"pose4"});
}

TEST_CASE("shortest path follows the frozen route") {
    SceneGraph g = support::load_fixture("demo_home.json");
    NavGraph nav = build_nav_graph(g);

    auto path = shortest_path(nav, "kitchen", "bobs_room");
    REQUIRE(path.has_value());
    CHECK(path->cost == Catch::Approx(4.0));
    CHECK(path->nodes == std::vector<std::string>{"kitchen", "pose3", "jacks_room", "pose1",
                                                  "bobs_room"});

    auto self = shortest_path(nav, "pose2", "pose2");
    REQUIRE(self.has_value());
    CHECK(self->nodes == std::vector<std::string>{"pose2"});
    CHECK(self->cost == 0.0);

    CHECK_THROWS_AS(shortest_path(nav, "nowhere", "kitchen"), GraphError);
    CHECK_THROWS_AS(shortest_path(nav, "kitchen", "nowhere"), GraphError);
}

TEST_CASE("equal cost ties pick the lexicographically smallest walk") {
    SceneGraph g = support::load_fixture("demo_home.json");
    NavGraph nav = build_nav_graph(g);

    // Two cost-3 routes exist: via pose2/toms_room and via pose3/kitchen.
    auto path = shortest_path(nav, "jacks_room", "pose5");
    REQUIRE(path.has_value());
    CHECK(path->cost == Catch::Approx(3.0));
    CHECK(path->nodes == std::vector<std::string>{"jacks_room", "pose2", "toms_room", "pose5"});
}

TEST_CASE("dijkstra distances match breadth first search on every fixture") {
    for (const char* name : {"demo_home.json", "mini_office.json", "mini_home.json"}) {
        SceneGraph g = support::load_fixture(name);
        NavGraph nav = build_nav_graph(g);
        for (const auto& src : nav.vertices) {
            auto oracle = support::bfs_distances(nav, src);
            for (const auto& dst : nav.vertices) {
                auto path = shortest_path(nav, src, dst);
                auto hops = oracle.find(dst);
                if (hops == oracle.end()) {
                    REQUIRE_FALSE(path.has_value());
                } else {
                    REQUIRE(path.has_value());
                    REQUIRE(path->cost == Catch::Approx(double(hops->second)));
                    REQUIRE(path->nodes.size() == std::size_t(hops->second) + 1);
                }
            }
        }
    }
}

TEST_CASE("unreachable and isolated vertices are reported, not invented") {
    SceneGraph g = parse_environment(R"({
        "nodes": {
            "room": [{"id": "east"}, {"id": "west"}, {"id": "island"}],
            "pose": [{"id": "p1"}],
            "agent": [{"id": "agent", "location": "east"}]
        },
        "links": ["east↔p1", "p1↔west", "east↔agent"]})");
    NavGraph nav = build_nav_graph(g);
    CHECK(nav.adjacency.at("island").empty());
    CHECK_FALSE(shortest_path(nav, "east", "island").has_value());
    CHECK_FALSE(shortest_path(nav, "island", "east").has_value());
}

TEST_CASE("euclidean weights reroute around long corridors") {
    SceneGraph g = parse_environment(R"({
        "nodes": {
            "room": [{"id": "a", "position": [0.0, 0.0, 0.0]},
                      {"id": "b", "position": [4.0, 0.0, 0.0]}],
            "pose": [{"id": "far", "position": [2.0, 30.0, 0.0]},
                      {"id": "near1", "position": [1.0, 0.0, 0.0]},
                      {"id": "near2", "position": [3.0, 0.0, 0.0]}],
            "agent": [{"id": "agent", "location": "a"}]
        },
        "links": ["a↔far", "far↔b", "a↔near1", "near1↔near2", "near2↔b", "a↔agent"]})");

    NavGraph unit = build_nav_graph(g, false);
    auto hop_path = shortest_path(unit, "a", "b");
    REQUIRE(hop_path.has_value());
    CHECK(hop_path->nodes == std::vector<std::string>{"a", "far", "b"});

    NavGraph metric = build_nav_graph(g, true);
    auto metric_path = shortest_path(metric, "a", "b");
    REQUIRE(metric_path.has_value());
    CHECK(metric_path->nodes == std::vector<std::string>{"a", "near1", "near2", "b"});
    CHECK(metric_path->cost == Catch::Approx(4.0));
}

TEST_CASE("plan completion expands room hops into pose walks") {
    SceneGraph g = support::load_fixture("demo_home.json");
    Plan sketch;
    sketch.push_back(*parse_action("goto(kitchen)"));
    sketch.push_back(*parse_action("access(coffee_machine)"));

    auto result = complete_plan(sketch, g, "bobs_room");
    REQUIRE(std::holds_alternative<Plan>(result));
    Plan completed = std::get<Plan>(result);

    std::vector<std::string> rendered;
    for (const auto& a : completed) rendered.push_back(to_string(a));
    CHECK(rendered == std::vector<std::string>{"goto(pose1)", "goto(jacks_room)", "goto(pose3)",
                                               "goto(kitchen)", "access(coffee_machine)"});

    // Completion is idempotent: a pose-level plan passes through unchanged.
    auto recompleted = complete_plan(completed, g, "bobs_room");
    REQUIRE(std::holds_alternative<Plan>(recompleted));
    CHECK(std::get<Plan>(recompleted) == completed);

    Plan stay;
    stay.push_back(*parse_action("goto(bobs_room)"));
    auto nothing = complete_plan(stay, g, "bobs_room");
    REQUIRE(std::holds_alternative<Plan>(nothing));
    CHECK(std::get<Plan>(nothing).empty());
}

TEST_CASE("plan completion reports unknown and unreachable targets") {
    SceneGraph g = support::load_fixture("demo_home.json");

    Plan ghost;
    ghost.push_back(*parse_action("goto(pose9)"));
    auto unknown = complete_plan(ghost, g, "bobs_room");
    REQUIRE(std::holds_alternative<CompletionError>(unknown));
    CHECK(std::get<CompletionError>(unknown).node == "pose9");
    CHECK(std::get<CompletionError>(unknown).unknown);

    Plan wrong_kind;
    wrong_kind.push_back(*parse_action("goto(coffee_mug)"));
    auto not_navigable = complete_plan(wrong_kind, g, "bobs_room");
    REQUIRE(std::holds_alternative<CompletionError>(not_navigable));
    CHECK(std::get<CompletionError>(not_navigable).unknown);

    SceneGraph split = parse_environment(R"({
        "nodes": {
            "room": [{"id": "east"}, {"id": "island"}],
            "agent": [{"id": "agent", "location": "east"}]
        },
        "links": ["east↔agent"]})");
    Plan cross;
    cross.push_back(*parse_action("goto(island)"));
    auto unreachable = complete_plan(cross, split, "east");
    REQUIRE(std::holds_alternative<CompletionError>(unreachable));
    const CompletionError& err = std::get<CompletionError>(unreachable);
    CHECK_FALSE(err.unknown);
    CHECK(err.node == "island");
    CHECK(err.from == "east");
}

TEST_CASE("completed navigation always verifies hop by hop") {
    SceneGraph g = support::load_fixture("demo_home.json");
    std::vector<std::string> rooms;
    for (const auto& n : g.nodes)
        if (n.kind == NodeKind::room) rooms.push_back(n.id);

    std::mt19937 rng(1234);
    std::uniform_int_distribution<std::size_t> pick(0, rooms.size() - 1);
    std::uniform_int_distribution<int> len(1, 6);
    for (int trial = 0; trial < 200; ++trial) {
        Plan sketch;
        int hops = len(rng);
        for (int i = 0; i < hops; ++i)
            sketch.push_back(PlanAction{Verb::goto_, rooms[pick(rng)]});

        auto result = complete_plan(sketch, g, "bobs_room");
        REQUIRE(std::holds_alternative<Plan>(result));
        WorldState s = init_state(g);
        VerifyOutcome out = verify_plan(s, g, std::get<Plan>(result));
        REQUIRE(out.ok);
    }
}
