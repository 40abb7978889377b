#pragma once

// Pipeline orchestration: semantic search over the collapsed graph, then
// iterative plan/verify/feedback until the plan verifies or the replanning
// budget runs out.
//
// Replanning accounting: the initial planning attempt is not a replanning
// iteration; replanning_iterations counts re-planned attempts after it, so a
// budget of N allows N+1 verification attempts and max-replans 0 still
// verifies the first plan once.

#include <algorithm>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "llm.hpp"
#include "path_planner.hpp"
#include "scene_graph.hpp"
#include "simulator.hpp"

namespace sgplan {

enum class PipelineMode { sayplan, llm_plus_p, llm_as_planner };

inline const char* to_string(PipelineMode m) {
    switch (m) {
        case PipelineMode::sayplan: return "sayplan";
        case PipelineMode::llm_plus_p: return "llm_plus_p";
        case PipelineMode::llm_as_planner: return "llm_as_planner";
    }
    return "?";
}

inline std::optional<PipelineMode> pipeline_mode_from(const std::string& s) {
    if (s == "sayplan") return PipelineMode::sayplan;
    if (s == "llm_plus_p") return PipelineMode::llm_plus_p;
    if (s == "llm_as_planner") return PipelineMode::llm_as_planner;
    return std::nullopt;
}

struct ModeConfig {
    PipelineMode pipeline = PipelineMode::sayplan;
    int max_replanning_iterations = 5;
    int max_search_steps = 30;
    int parse_retry_budget = 3;  // attempts per turn
    bool euclidean_weights = false;
    std::string tokenizer = "heuristic";
};

enum class ErrorClass {
    missing_action,
    missing_pose,
    wrong_action,
    incomplete_search,
    hallucinated_nodes,
};

inline const char* to_string(ErrorClass e) {
    switch (e) {
        case ErrorClass::missing_action: return "Missing Action";
        case ErrorClass::missing_pose: return "Missing Pose";
        case ErrorClass::wrong_action: return "Wrong Action";
        case ErrorClass::incomplete_search: return "Incomplete Search";
        case ErrorClass::hallucinated_nodes: return "Hallucinated Nodes";
    }
    return "?";
}

inline std::optional<ErrorClass> error_class_from(const std::string& s) {
    for (ErrorClass e : {ErrorClass::missing_action, ErrorClass::missing_pose,
                         ErrorClass::wrong_action, ErrorClass::incomplete_search,
                         ErrorClass::hallucinated_nodes})
        if (s == to_string(e)) return e;
    return std::nullopt;
}

enum class Outcome { verified_plan, plan_failed, budget_exhausted, search_failed };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::verified_plan: return "verified_plan";
        case Outcome::plan_failed: return "plan_failed";
        case Outcome::budget_exhausted: return "budget_exhausted";
        case Outcome::search_failed: return "search_failed";
    }
    return "?";
}

inline std::optional<Outcome> outcome_from(const std::string& s) {
    for (Outcome o : {Outcome::verified_plan, Outcome::plan_failed, Outcome::budget_exhausted,
                      Outcome::search_failed})
        if (s == to_string(o)) return o;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Traces

struct TraceEvent {
    int step = 0;
    std::string stage;  // "search" | "plan"
    std::string prompt_hash;
    std::string response;
    std::optional<std::string> graph_op;  // "expand(x)" / "contract(x)"
    std::size_t visible_size = 0;         // tokens of the serialized view sent
    std::optional<VerifyOutcome> verify;
    std::optional<ErrorClass> error_class;    // set on failed plan events
    std::optional<std::string> parse_error;   // set on rejected responses
};

inline ordered_json trace_event_to_json(const TraceEvent& e) {
    ordered_json j = ordered_json::object();
    j["step"] = e.step;
    j["stage"] = e.stage;
    j["prompt_hash"] = e.prompt_hash;
    j["response"] = e.response;
    j["graph_op"] = e.graph_op ? ordered_json(*e.graph_op) : ordered_json(nullptr);
    j["visible_size"] = e.visible_size;
    if (e.verify) {
        ordered_json v = ordered_json::object();
        v["ok"] = e.verify->ok;
        v["failed_index"] =
            e.verify->failed_index ? ordered_json(*e.verify->failed_index) : ordered_json(nullptr);
        v["reason"] =
            e.verify->reason ? ordered_json(to_string(*e.verify->reason)) : ordered_json(nullptr);
        v["feedback"] = e.verify->feedback;
        if (e.error_class) v["error_class"] = to_string(*e.error_class);
        j["verify"] = std::move(v);
    } else {
        j["verify"] = nullptr;
    }
    if (e.parse_error) j["parse_error"] = *e.parse_error;
    return j;
}

inline TraceEvent trace_event_from_json(const ordered_json& j) {
    TraceEvent e;
    e.step = j.at("step").get<int>();
    e.stage = j.at("stage").get<std::string>();
    e.prompt_hash = j.at("prompt_hash").get<std::string>();
    e.response = j.at("response").get<std::string>();
    if (!j.at("graph_op").is_null()) e.graph_op = j.at("graph_op").get<std::string>();
    e.visible_size = j.at("visible_size").get<std::size_t>();
    if (!j.at("verify").is_null()) {
        const auto& v = j.at("verify");
        VerifyOutcome out;
        out.ok = v.at("ok").get<bool>();
        if (!v.at("failed_index").is_null())
            out.failed_index = v.at("failed_index").get<std::size_t>();
        if (!v.at("reason").is_null()) {
            std::string r = v.at("reason").get<std::string>();
            for (ReasonCode code :
                 {ReasonCode::not_accessible, ReasonCode::hand_occupied, ReasonCode::wrong_location,
                  ReasonCode::no_affordance, ReasonCode::bad_state, ReasonCode::unknown_node,
                  ReasonCode::not_adjacent, ReasonCode::wrong_kind, ReasonCode::not_holding,
                  ReasonCode::no_access})
                if (r == to_string(code)) out.reason = code;
        }
        out.feedback = v.at("feedback").get<std::string>();
        e.verify = out;
        if (v.contains("error_class")) e.error_class = error_class_from(v.at("error_class"));
    }
    if (j.contains("parse_error")) e.parse_error = j.at("parse_error").get<std::string>();
    return e;
}

inline std::string trace_to_jsonl(const std::vector<TraceEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        out += trace_event_to_json(e).dump();
        out += "\n";
    }
    return out;
}

inline std::vector<TraceEvent> trace_from_jsonl(const std::string& text) {
    std::vector<TraceEvent> events;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        events.push_back(trace_event_from_json(ordered_json::parse(line)));
    }
    return events;
}

struct TokenTraceEntry {
    std::size_t prompt_tokens = 0;
    std::size_t graph_tokens = 0;
};

// ---------------------------------------------------------------------------
// Semantic search

struct SearchState {
    SceneGraph graph;                  // full graph with post-search visibility
    std::vector<std::string> memory;   // expanded node ids in expansion order
    std::unordered_set<std::string> seen;  // ever-visible ids (collapse + reveals)
    int steps = 0;
    std::vector<TokenTraceEntry> token_trace;  // one entry per prompt sent
};

struct SearchResult {
    SearchState state;
    std::optional<LlmTurn> pending;  // planning turn that ended the search
    bool failed = false;
    std::string failure;
    std::vector<TraceEvent> events;
};

namespace detail {

struct TurnRequest {
    std::optional<LlmTurn> turn;   // empty when the parse budget ran out
    std::string last_response;
    std::string failure;
};

// Prompts until the response parses (and satisfies `require_planning` when
// asked), burning one parse-budget attempt per rejected response. Each
// attempt is recorded as a trace event.
inline TurnRequest request_turn(Backend& backend, PromptDocument prompt, const ModeConfig& config,
                                const std::string& stage, int step, std::size_t graph_tokens,
                                bool require_planning, std::vector<TraceEvent>& events) {
    TurnRequest out;
    for (int attempt = 0; attempt < config.parse_retry_budget; ++attempt) {
        std::string response = backend.complete(prompt);
        out.last_response = response;
        TraceEvent event;
        event.step = step;
        event.stage = stage;
        event.prompt_hash = fnv1a64_hex(prompt.full_text());
        event.response = response;
        event.visible_size = graph_tokens;
        ParsedTurn parsed = parse_response(response);
        if (auto* error = std::get_if<ParseError>(&parsed)) {
            event.parse_error = error->message;
            events.push_back(std::move(event));
            prompt.feedback = "response was not valid JSON: " + error->message;
            out.failure = "parse budget exhausted: " + error->message;
            continue;
        }
        LlmTurn turn = std::get<LlmTurn>(parsed);
        if (require_planning && turn.mode != TurnMode::planning) {
            event.parse_error = "expected a planning response";
            events.push_back(std::move(event));
            prompt.feedback = "expected a planning response with a plan";
            out.failure = "parse budget exhausted: expected a planning response";
            continue;
        }
        if (turn.command == CommandKind::verify_plan && turn.plan.empty()) {
            event.parse_error = "empty plan";
            events.push_back(std::move(event));
            prompt.feedback = "the plan must contain at least one action";
            out.failure = "parse budget exhausted: empty plan";
            continue;
        }
        events.push_back(std::move(event));
        out.turn = std::move(turn);
        out.failure.clear();
        return out;
    }
    return out;
}

}  // namespace detail

inline SearchResult semantic_search(const SceneGraph& full, const std::string& instruction,
                                    Backend& backend, const ModeConfig& config,
                                    const TokenCounter& tokens) {
    SearchResult result;
    SearchState& st = result.state;
    st.graph = full;
    collapse(st.graph);
    st.seen.insert(st.graph.visible.begin(), st.graph.visible.end());

    std::string feedback;
    while (true) {
        if (st.steps >= config.max_search_steps) {
            result.failed = true;
            result.failure = "search budget exhausted after " + std::to_string(st.steps) + " steps";
            return result;
        }
        std::string graph_json = serialize_visible(st.graph);
        std::size_t graph_tokens = tokens(graph_json);
        PromptDocument prompt = build_prompt(instruction, graph_json, st.memory, feedback);
        st.token_trace.push_back({tokens(prompt.full_text()), graph_tokens});
        auto req = detail::request_turn(backend, prompt, config, "search", st.steps, graph_tokens,
                                        false, result.events);
        if (!req.turn) {
            result.failed = true;
            result.failure = req.failure;
            return result;
        }
        LlmTurn turn = *req.turn;
        if (turn.mode == TurnMode::planning) {
            result.pending = std::move(turn);
            return result;
        }
        if (turn.command == CommandKind::terminate) return result;

        // Graph operation; the next prompt carries feedback only on misuse.
        std::string op_name = turn.command == CommandKind::expand_node ? "expand" : "contract";
        result.events.back().graph_op = op_name + "(" + turn.node_name + ")";
        OpResult op = turn.command == CommandKind::expand_node ? expand(st.graph, turn.node_name)
                                                               : contract(st.graph, turn.node_name);
        if (op.status == OpStatus::ok) {
            feedback.clear();
            if (turn.command == CommandKind::expand_node) {
                if (std::find(st.memory.begin(), st.memory.end(), turn.node_name) ==
                    st.memory.end())
                    st.memory.push_back(turn.node_name);
                st.seen.insert(op.changed.begin(), op.changed.end());
            }
        } else if (op.status == OpStatus::noop && turn.command == CommandKind::expand_node) {
            feedback = "node already expanded";
        } else {
            feedback = op.message;
        }
        ++st.steps;
    }
}

// ---------------------------------------------------------------------------
// Failure classification

struct ClassifyContext {
    const SceneGraph& graph;  // visibility as of the end of search
    const WorldState& initial;
    const Plan& plan;  // the plan that was verified (completed form)
    VerifyOutcome outcome;
    std::vector<std::string> required_nodes;
    const std::unordered_set<std::string>& seen;  // nodes ever revealed
};

inline ErrorClass classify_failure(const ClassifyContext& ctx) {
    for (const auto& r : ctx.required_nodes)
        if (!ctx.seen.count(r)) return ErrorClass::incomplete_search;

    std::optional<PlanAction> failing;
    if (ctx.outcome.failed_index && *ctx.outcome.failed_index < ctx.plan.size())
        failing = ctx.plan[*ctx.outcome.failed_index];

    if (ctx.outcome.reason == ReasonCode::unknown_node) return ErrorClass::hallucinated_nodes;
    if (failing && failing->verb != Verb::done && !ctx.graph.is_visible(failing->arg))
        return ErrorClass::hallucinated_nodes;

    if (ctx.outcome.reason == ReasonCode::not_adjacent) return ErrorClass::missing_pose;

    // Missing action: one inserted action immediately before the failing one
    // makes the prefix (through the failing action) verify.
    bool repairable_reason = ctx.outcome.reason == ReasonCode::not_accessible ||
                             ctx.outcome.reason == ReasonCode::bad_state ||
                             ctx.outcome.reason == ReasonCode::no_access ||
                             ctx.outcome.reason == ReasonCode::wrong_location;
    if (failing && repairable_reason && ctx.outcome.failed_index) {
        std::size_t k = *ctx.outcome.failed_index;
        Plan prefix(ctx.plan.begin(), ctx.plan.begin() + static_cast<std::ptrdiff_t>(k) + 1);
        auto try_candidate = [&](const PlanAction& candidate) {
            Plan repaired(prefix.begin(), prefix.end() - 1);
            repaired.push_back(candidate);
            repaired.push_back(prefix.back());
            return verify_plan(ctx.initial, ctx.graph, repaired).ok;
        };
        for (const auto& n : ctx.graph.nodes) {
            if (n.kind == NodeKind::asset) {
                if (try_candidate({Verb::open, n.id})) return ErrorClass::missing_action;
                if (try_candidate({Verb::access, n.id})) return ErrorClass::missing_action;
            } else if (n.kind == NodeKind::room || n.kind == NodeKind::pose) {
                if (try_candidate({Verb::goto_, n.id})) return ErrorClass::missing_action;
            }
        }
    }
    return ErrorClass::wrong_action;
}

// ---------------------------------------------------------------------------
// Iterative replanning and the top-level pipeline

struct RunResult {
    Outcome outcome = Outcome::search_failed;
    std::optional<Plan> final_plan;  // present when verified
    int replanning_iterations = 0;
    std::optional<ErrorClass> error_class;
    std::string last_feedback;
    std::vector<std::string> memory;
    std::vector<TokenTraceEntry> token_trace;  // every prompt in the session
    std::vector<TraceEvent> trace;
};

struct TaskSpec {
    std::string instruction;
    std::vector<std::string> required_nodes;  // optional ground truth for classification
};

inline RunResult run_task(const SceneGraph& full, const TaskSpec& task, Backend& backend,
                          const ModeConfig& config) {
    TokenCounter tokens = make_token_counter(config.tokenizer);
    RunResult result;

    SearchResult search = semantic_search(full, task.instruction, backend, config, tokens);
    result.trace = std::move(search.events);
    result.memory = search.state.memory;
    result.token_trace = search.state.token_trace;
    if (search.failed) {
        result.outcome = Outcome::search_failed;
        result.last_feedback = search.failure;
        return result;
    }

    const SceneGraph& view = search.state.graph;
    WorldState initial = init_state(full);
    const std::string agent_start = initial.agent_at;

    std::optional<LlmTurn> turn = std::move(search.pending);
    std::string feedback;
    int iterations = 0;
    while (true) {
        if (!turn) {
            std::string graph_json = serialize_visible(view);
            std::size_t graph_tokens = tokens(graph_json);
            PromptDocument prompt =
                build_prompt(task.instruction, graph_json, search.state.memory, feedback);
            result.token_trace.push_back({tokens(prompt.full_text()), graph_tokens});
            auto req = detail::request_turn(backend, prompt, config, "plan", iterations,
                                            graph_tokens, true, result.trace);
            if (!req.turn) {
                result.outcome = Outcome::search_failed;
                result.last_feedback = req.failure;
                return result;
            }
            turn = std::move(req.turn);
        }

        // Path completion (sayplan and llm_plus_p); completion failures flow
        // back through the same feedback loop as verification failures.
        Plan plan = turn->plan;
        VerifyOutcome outcome;
        bool completed_ok = true;
        if (config.pipeline != PipelineMode::llm_as_planner) {
            auto completion = complete_plan(plan, full, agent_start, config.euclidean_weights);
            if (auto* error = std::get_if<CompletionError>(&completion)) {
                completed_ok = false;
                std::size_t failing = 0;
                for (std::size_t i = 0; i < plan.size(); ++i)
                    if (plan[i].verb == Verb::goto_ && plan[i].arg == error->node) {
                        failing = i;
                        break;
                    }
                outcome.ok = false;
                outcome.failed_index = failing;
                outcome.reason = error->unknown ? ReasonCode::unknown_node : ReasonCode::not_adjacent;
                outcome.feedback = error->unknown
                                       ? error->node + " does not exist"
                                       : "cannot goto " + error->node + ": no direct connection from " +
                                             error->from;
            } else {
                plan = std::get<Plan>(completion);
            }
        }
        if (completed_ok) outcome = verify_plan(initial, full, plan);

        TraceEvent event;
        event.step = iterations;
        event.stage = "plan";
        event.prompt_hash = result.trace.empty() ? "" : result.trace.back().prompt_hash;
        event.response = "";
        event.graph_op = "verify_plan";
        event.visible_size = tokens(serialize_visible(view));
        event.verify = outcome;

        if (outcome.ok) {
            result.trace.push_back(std::move(event));
            result.outcome = Outcome::verified_plan;
            result.final_plan = std::move(plan);
            result.replanning_iterations = iterations;
            result.last_feedback = outcome.feedback;
            return result;
        }

        // Classification sees the post-search visibility.
        ErrorClass error_class = classify_failure(
            {view, initial, plan, outcome, task.required_nodes, search.state.seen});
        event.error_class = error_class;
        result.trace.push_back(std::move(event));
        result.error_class = error_class;
        result.last_feedback = outcome.feedback;

        if (config.pipeline != PipelineMode::sayplan) {
            result.outcome = Outcome::plan_failed;
            result.replanning_iterations = 0;
            return result;
        }
        if (iterations >= config.max_replanning_iterations) {
            result.outcome = Outcome::budget_exhausted;
            result.replanning_iterations = iterations;
            return result;
        }
        feedback = outcome.feedback;
        turn.reset();
        ++iterations;
    }
}

}  // namespace sgplan
