#include <catch2/catch_amalgamated.hpp>
#include <sgplan/sgplan.hpp>

#include "support.hpp"

#include <algorithm>

using namespace sgplan;

namespace {

std::string expand_response(const std::string& node) {
    LlmTurn turn;
    turn.mode = TurnMode::exploring;
    turn.command = CommandKind::expand_node;
    turn.node_name = node;
    return turn.to_json().dump();
}

std::string terminate_response() {
    LlmTurn turn;
    turn.mode = TurnMode::exploring;
    turn.command = CommandKind::terminate;
    return turn.to_json().dump();
}

std::string plan_response(std::initializer_list<const char*> actions) {
    LlmTurn turn;
    turn.mode = TurnMode::planning;
    turn.command = CommandKind::verify_plan;
    for (const char* a : actions) {
        auto parsed = parse_action(a);
        REQUIRE(parsed.has_value());
        turn.plan.push_back(*parsed);
    }
    return turn.to_json().dump();
}

ModeConfig config_for(PipelineMode mode) {
    ModeConfig config;
    config.pipeline = mode;
    return config;
}

int count_occurrences(const std::string& text, const std::string& needle) {
    int n = 0;
    for (std::size_t at = text.find(needle); at != std::string::npos;
         at = text.find(needle, at + needle.size()))
        ++n;
    return n;
}

}  // namespace

TEST_CASE("the golden search explores and remembers in script order") {
    SceneGraph g = support::load_fixture("demo_home.json");
    ScriptedBackend backend = support::scripted("demo_home_coffee.jsonl");
    ModeConfig config = config_for(PipelineMode::sayplan);

    SearchResult search =
        semantic_search(g, "make a coffee for Tom and place it in his room", backend, config,
                        make_token_counter(config.tokenizer));

    REQUIRE_FALSE(search.failed);
    CHECK(search.state.steps == 5);
    CHECK(search.state.memory == support::golden_memory());
    REQUIRE(search.pending.has_value());
    CHECK(search.pending->mode == TurnMode::planning);

    std::vector<std::string> ops;
    for (const auto& e : search.events)
        if (e.graph_op) ops.push_back(*e.graph_op);
    CHECK(ops == std::vector<std::string>{"expand(toms_room)", "expand(kitchen)",
                                          "expand(jacks_room)", "contract(jacks_room)",
                                          "expand(bobs_room)"});

    // The working view ends with the task subgraph revealed.
    CHECK(search.state.graph.is_visible("coffee_mug"));
    CHECK(search.state.graph.is_visible("coffee_machine"));
    CHECK(search.state.graph.is_visible("wardrobe2"));
    CHECK(search.state.seen.count("coffee_mug") == 1);

    // One prompt per handled turn plus the planning turn.
    CHECK(search.state.token_trace.size() == 6);
    CHECK(backend.remaining() == 1);  // the repaired plan is never requested
}

TEST_CASE("search prompts are Markovian and carry op feedback") {
    SceneGraph g = support::load_fixture("demo_home.json");
    ScriptedBackend backend({expand_response("toms_room"), expand_response("toms_room"),
                             expand_response("pose1"), terminate_response()});
    ModeConfig config = config_for(PipelineMode::sayplan);

    SearchResult search =
        semantic_search(g, "tidy up", backend, config, make_token_counter(config.tokenizer));
    REQUIRE_FALSE(search.failed);
    REQUIRE_FALSE(search.pending.has_value());

    const auto& prompts = backend.prompts();
    REQUIRE(prompts.size() == 4);
    CHECK(prompts[0].memory == "[]");
    CHECK(prompts[0].feedback.empty());
    CHECK(prompts[1].memory == "[toms_room]");
    CHECK(prompts[1].feedback.empty());  // successful ops clear feedback
    CHECK(prompts[2].feedback == "node already expanded");
    CHECK(prompts[3].feedback == "cannot expand pose1: not a floor or room");

    // Every prompt is self-contained: one instruction line, no accumulated
    // transcript, no copy of the system text in the dynamic part.
    for (const auto& p : prompts) {
        std::string dynamic = p.dynamic_text();
        CHECK(count_occurrences(dynamic, "Instruction:") == 1);
        CHECK(count_occurrences(dynamic, "3D Scene Graph:") == 1);
        CHECK(dynamic.find("Agent Role:") == std::string::npos);
        CHECK(count_occurrences(p.full_text(), "Agent Role:") == 1);
    }

    // The second prompt serializes the expanded room.
    CHECK(prompts[1].graph_json.find("wardrobe2") != std::string::npos);
    CHECK(prompts[0].graph_json.find("wardrobe2") == std::string::npos);
}

TEST_CASE("unparseable responses are retried against the parse budget") {
    SceneGraph g = support::load_fixture("demo_home.json");
    ModeConfig config = config_for(PipelineMode::sayplan);

    SECTION("recovery within budget") {
        ScriptedBackend backend({"gibberish with no braces", expand_response("kitchen"),
                                 terminate_response()});
        SearchResult search =
            semantic_search(g, "look around", backend, config, make_token_counter("heuristic"));
        REQUIRE_FALSE(search.failed);
        CHECK(search.state.steps == 1);
        CHECK(search.state.memory == std::vector<std::string>{"kitchen"});
        CHECK(search.state.token_trace.size() == 2);  // retries reuse the outer prompt slot

        REQUIRE(backend.prompts().size() == 3);
        CHECK(backend.prompts()[1].feedback.rfind("response was not valid JSON", 0) == 0);

        REQUIRE(search.events.size() == 3);
        CHECK(search.events[0].parse_error.has_value());
        CHECK_FALSE(search.events[1].parse_error.has_value());
    }
    SECTION("exhaustion fails the search") {
        ScriptedBackend backend({"junk", "more junk", "still junk", terminate_response()});
        SearchResult search =
            semantic_search(g, "look around", backend, config, make_token_counter("heuristic"));
        REQUIRE(search.failed);
        CHECK(search.failure.rfind("parse budget exhausted", 0) == 0);

        ScriptedBackend hopeless({"junk", "more junk", "still junk"});
        RunResult run = run_task(g, {"look around", {}}, hopeless, config);
        CHECK(run.outcome == Outcome::search_failed);
    }
}

TEST_CASE("the search step budget is enforced") {
    SceneGraph g = support::load_fixture("demo_home.json");
    ModeConfig config = config_for(PipelineMode::sayplan);
    config.max_search_steps = 2;
    ScriptedBackend backend({expand_response("toms_room"), expand_response("kitchen"),
                             expand_response("jacks_room"), terminate_response()});
    SearchResult search =
        semantic_search(g, "look around", backend, config, make_token_counter("heuristic"));
    REQUIRE(search.failed);
    CHECK(search.failure == "search budget exhausted after 2 steps");
    CHECK(search.state.steps == 2);
}

TEST_CASE("the golden replay verifies after one repair") {
    SceneGraph g = support::load_fixture("demo_home.json");
    ScriptedBackend backend = support::scripted("demo_home_coffee.jsonl");
    RunResult run = run_task(g, {"make a coffee for Tom and place it in his room", {}}, backend,
                             config_for(PipelineMode::sayplan));

    CHECK(run.outcome == Outcome::verified_plan);
    CHECK(run.replanning_iterations == 1);
    CHECK(run.memory == support::golden_memory());
    CHECK(run.last_feedback == "Plan Verified");
    REQUIRE(run.final_plan.has_value());
    CHECK(*run.final_plan == support::golden_plan());
    CHECK(run.error_class == ErrorClass::missing_action);  // the repaired first attempt

    // The failed first verification is on the trace with its exact feedback.
    std::vector<const TraceEvent*> verifications;
    for (const auto& e : run.trace)
        if (e.verify) verifications.push_back(&e);
    REQUIRE(verifications.size() == 2);
    CHECK_FALSE(verifications[0]->verify->ok);
    CHECK(verifications[0]->verify->feedback == "coffee mug is not accessible");
    CHECK(verifications[0]->error_class == ErrorClass::missing_action);
    CHECK(verifications[1]->verify->ok);
    CHECK(verifications[1]->verify->feedback == "Plan Verified");
    CHECK_FALSE(verifications[1]->error_class.has_value());

    // A verified plan re-verifies from the same initial state.
    WorldState s = init_state(g);
    CHECK(verify_plan(s, g, *run.final_plan).ok);
}

TEST_CASE("replanning prompts carry the simulator feedback") {
    SceneGraph g = support::load_fixture("demo_home.json");
    ScriptedBackend backend = support::scripted("demo_home_coffee.jsonl");
    RunResult run = run_task(g, {"make a coffee for Tom and place it in his room", {}}, backend,
                             config_for(PipelineMode::sayplan));
    REQUIRE(run.outcome == Outcome::verified_plan);

    const auto& prompts = backend.prompts();
    REQUIRE(prompts.size() == 7);
    CHECK(prompts[6].feedback == "coffee mug is not accessible");
    CHECK(prompts[5].feedback.empty());
}

TEST_CASE("traces are deterministic and round trip through jsonl") {
    SceneGraph g = support::load_fixture("demo_home.json");
    TaskSpec task{"make a coffee for Tom and place it in his room", {}};
    ModeConfig config = config_for(PipelineMode::sayplan);

    ScriptedBackend first = support::scripted("demo_home_coffee.jsonl");
    ScriptedBackend second = support::scripted("demo_home_coffee.jsonl");
    RunResult a = run_task(g, task, first, config);
    RunResult b = run_task(g, task, second, config);

    std::string jsonl = trace_to_jsonl(a.trace);
    CHECK(jsonl == trace_to_jsonl(b.trace));

    auto reparsed = trace_from_jsonl(jsonl);
    REQUIRE(reparsed.size() == a.trace.size());
    for (std::size_t i = 0; i < reparsed.size(); ++i)
        CHECK(trace_event_to_json(reparsed[i]).dump() == trace_event_to_json(a.trace[i]).dump());

    // Search events expose the graph ops; the verification events reference
    // the prompts that elicited them.
    REQUIRE(a.trace.size() >= 2);
    CHECK(a.trace[0].stage == "search");
    CHECK(a.trace[0].prompt_hash.size() == 16);
    for (const auto& e : a.trace)
        if (e.verify && e.graph_op) CHECK(*e.graph_op == "verify_plan");
}

TEST_CASE("token trace counts prompts for search and planning") {
    SceneGraph g = support::load_fixture("demo_home.json");
    ScriptedBackend backend = support::scripted("demo_home_coffee.jsonl");
    ModeConfig config = config_for(PipelineMode::sayplan);
    RunResult run = run_task(g, {"make a coffee for Tom and place it in his room", {}}, backend,
                             config);

    REQUIRE(run.token_trace.size() == 7);  // six search prompts, one replan prompt
    SceneGraph collapsed = g;
    collapse(collapsed);
    CHECK(run.token_trace[0].graph_tokens == heuristic_tokens(serialize_visible(collapsed)));
    for (const auto& entry : run.token_trace) {
        CHECK(entry.prompt_tokens > entry.graph_tokens);
        CHECK(entry.graph_tokens >= run.token_trace[0].graph_tokens);
    }
}

TEST_CASE("an always failing planner exhausts the replanning budget") {
    SceneGraph g = support::load_fixture("demo_home.json");

    SECTION("default budget of five") {
        ScriptedBackend backend = support::scripted("always_failing.jsonl");
        RunResult run =
            run_task(g, {"fetch the mug", {}}, backend, config_for(PipelineMode::sayplan));
        CHECK(run.outcome == Outcome::budget_exhausted);
        CHECK(run.replanning_iterations == 5);
        CHECK(backend.remaining() == 0);  // exactly six planning responses consumed
        CHECK(run.last_feedback == "coffee mug is not accessible");
    }
    SECTION("budget zero stops at the first failure") {
        ScriptedBackend backend = support::scripted("always_failing.jsonl");
        ModeConfig config = config_for(PipelineMode::sayplan);
        config.max_replanning_iterations = 0;
        RunResult run = run_task(g, {"fetch the mug", {}}, backend, config);
        CHECK(run.outcome == Outcome::budget_exhausted);
        CHECK(run.replanning_iterations == 0);
        CHECK(backend.remaining() == 5);
    }
}

TEST_CASE("pipeline modes differ exactly on pose completion") {
    SceneGraph g = support::load_fixture("demo_home.json");

    auto run_mode = [&](PipelineMode mode) {
        ScriptedBackend backend = support::scripted("missing_pose.jsonl");
        return run_task(g, {"turn on the coffee machine", {}}, backend, config_for(mode));
    };

    RunResult raw = run_mode(PipelineMode::llm_as_planner);
    CHECK(raw.outcome == Outcome::plan_failed);
    CHECK(raw.replanning_iterations == 0);
    CHECK(raw.error_class == ErrorClass::missing_pose);
    CHECK(raw.last_feedback == "cannot goto kitchen: no direct connection from bobs_room");

    RunResult completed = run_mode(PipelineMode::llm_plus_p);
    CHECK(completed.outcome == Outcome::verified_plan);
    REQUIRE(completed.final_plan.has_value());
    CHECK(to_string((*completed.final_plan)[0]) == "goto(pose1)");

    RunResult full = run_mode(PipelineMode::sayplan);
    CHECK(full.outcome == Outcome::verified_plan);
}

TEST_CASE("completion failures feed back into replanning") {
    SceneGraph g = support::load_fixture("demo_home.json");

    SECTION("unknown goto targets read as hallucinations") {
        ScriptedBackend backend({plan_response({"goto(pose9)", "done"}), plan_response({"done"})});
        RunResult run =
            run_task(g, {"wander", {}}, backend, config_for(PipelineMode::sayplan));
        CHECK(run.outcome == Outcome::verified_plan);
        CHECK(run.replanning_iterations == 1);
        CHECK(run.error_class == ErrorClass::hallucinated_nodes);

        const TraceEvent* failed = nullptr;
        for (const auto& e : run.trace)
            if (e.verify && !e.verify->ok) failed = &e;
        REQUIRE(failed);
        CHECK(failed->verify->reason == ReasonCode::unknown_node);
        CHECK(failed->verify->feedback == "pose9 does not exist");
        CHECK(backend.prompts().back().feedback == "pose9 does not exist");
    }
    SECTION("unreachable rooms surface the agent location") {
        SceneGraph split = parse_environment(R"({
            "nodes": {
                "room": [{"id": "east"}, {"id": "island"}],
                "agent": [{"id": "agent", "location": "east"}]
            },
            "links": ["east↔agent"]})");
        ScriptedBackend backend({plan_response({"goto(island)", "done"})});
        RunResult run =
            run_task(split, {"cross the water", {}}, backend, config_for(PipelineMode::llm_plus_p));
        CHECK(run.outcome == Outcome::plan_failed);
        CHECK(run.error_class == ErrorClass::missing_pose);
        CHECK(run.last_feedback == "cannot goto island: no direct connection from east");
    }
}

TEST_CASE("failure classification follows the precedence ladder") {
    SceneGraph full = support::load_fixture("demo_home.json");
    WorldState initial = init_state(full);

    SceneGraph collapsed_view = full;
    collapse(collapsed_view);
    SceneGraph opened_view = full;
    collapse(opened_view);
    REQUIRE(expand(opened_view, "bobs_room").status == OpStatus::ok);
    REQUIRE(expand(opened_view, "kitchen").status == OpStatus::ok);

    std::unordered_set<std::string> seen_collapsed(collapsed_view.visible.begin(),
                                                   collapsed_view.visible.end());
    std::unordered_set<std::string> seen_opened(opened_view.visible.begin(),
                                                opened_view.visible.end());

    auto verify_fail = [&](std::initializer_list<const char*> actions) {
        Plan plan;
        for (const char* a : actions) plan.push_back(*parse_action(a));
        VerifyOutcome out = verify_plan(initial, full, plan);
        REQUIRE_FALSE(out.ok);
        return std::make_pair(plan, out);
    };

    SECTION("missing required nodes dominate everything else") {
        auto [plan, out] = verify_fail({"goto(pose9)"});
        ErrorClass c = classify_failure(
            {collapsed_view, initial, plan, out, {"coffee_mug"}, seen_collapsed});
        CHECK(c == ErrorClass::incomplete_search);
    }
    SECTION("unknown nodes are hallucinations") {
        auto [plan, out] = verify_fail({"goto(pose9)"});
        ErrorClass c = classify_failure({collapsed_view, initial, plan, out, {}, seen_collapsed});
        CHECK(c == ErrorClass::hallucinated_nodes);
    }
    SECTION("acting on hidden nodes is hallucination even when repairable") {
        auto [plan, out] = verify_fail({"pickup(coffee_mug)"});
        ErrorClass c = classify_failure({collapsed_view, initial, plan, out, {}, seen_collapsed});
        CHECK(c == ErrorClass::hallucinated_nodes);
    }
    SECTION("adjacency failures are missing poses") {
        auto [plan, out] = verify_fail({"goto(kitchen)"});
        ErrorClass c = classify_failure({collapsed_view, initial, plan, out, {}, seen_collapsed});
        CHECK(c == ErrorClass::missing_pose);
    }
    SECTION("a single insertable action is a missing action") {
        auto [plan, out] = verify_fail({"access(wardrobe1)", "pickup(coffee_mug)", "done"});
        REQUIRE(out.reason == ReasonCode::not_accessible);
        ErrorClass c = classify_failure({opened_view, initial, plan, out, {}, seen_opened});
        CHECK(c == ErrorClass::missing_action);
    }
    SECTION("affordance violations are wrong actions") {
        auto [plan, out] = verify_fail({"access(bed1)", "open(bed1)"});
        REQUIRE(out.reason == ReasonCode::no_affordance);
        ErrorClass c = classify_failure({opened_view, initial, plan, out, {}, seen_opened});
        CHECK(c == ErrorClass::wrong_action);
    }

    CHECK(to_string(ErrorClass::missing_action) == std::string("Missing Action"));
    CHECK(to_string(ErrorClass::missing_pose) == std::string("Missing Pose"));
    CHECK(to_string(ErrorClass::wrong_action) == std::string("Wrong Action"));
    CHECK(to_string(ErrorClass::incomplete_search) == std::string("Incomplete Search"));
    CHECK(to_string(ErrorClass::hallucinated_nodes) == std::string("Hallucinated Nodes"));
}

TEST_CASE("empty plans are rejected and reprompted") {
    SceneGraph g = support::load_fixture("demo_home.json");
    ScriptedBackend backend({plan_response({}), plan_response({"done"})});
    RunResult run = run_task(g, {"do nothing", {}}, backend, config_for(PipelineMode::sayplan));
    CHECK(run.outcome == Outcome::verified_plan);
    CHECK(run.replanning_iterations == 0);
    REQUIRE(backend.prompts().size() == 2);
    CHECK(backend.prompts()[1].feedback == "the plan must contain at least one action");
}
