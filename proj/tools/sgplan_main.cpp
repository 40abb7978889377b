// sgplan command line tool.
//
// Exit codes: 0 success, 1 validation/verification failure, 2 usage or
// configuration errors (unknown flags, missing files, backend setup).
//
// Option precedence: command-line flags > config file > environment
// variables (SGPLAN_ENDPOINT, SGPLAN_MODEL) > built-in defaults. The API key
// is read from the environment variable named in the backend config
// (SGPLAN_API_KEY by default) at request time.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sgplan/bench.hpp"
#include "sgplan/remote_backend.hpp"
#include "sgplan/sgplan.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Flags {
    std::string config_path;
    std::string mode;
    std::string backend_kind;
    std::string cassette;
    std::string endpoint;
    std::string model;
    std::string record;
    std::string tokenizer;
    std::string trace_out;
    std::string plan_out;
    std::string report_out;
    std::string trace_dir;
    int max_replans = -1;
    int max_search_steps = -1;
    int jobs = 1;
    bool collapsed = false;
    bool euclidean = false;
};

sgplan::ordered_json load_config_file(const std::string& path) {
    if (path.empty()) return sgplan::ordered_json::object();
    auto doc = sgplan::ordered_json::parse(sgplan::read_text_file(path), nullptr, false);
    if (doc.is_discarded()) throw sgplan::IoError("config file is not valid JSON: " + path);
    if (!doc.is_object()) throw sgplan::IoError("config file must hold a JSON object: " + path);
    return doc;
}

sgplan::ModeConfig resolve_mode_config(const Flags& flags, const sgplan::ordered_json& config) {
    sgplan::ModeConfig mode;
    if (config.contains("mode")) {
        auto m = sgplan::pipeline_mode_from(config["mode"].get<std::string>());
        if (!m) throw sgplan::IoError("unknown mode in config: " + config["mode"].get<std::string>());
        mode.pipeline = *m;
    }
    if (config.contains("max_replans"))
        mode.max_replanning_iterations = config["max_replans"].get<int>();
    if (config.contains("max_search_steps"))
        mode.max_search_steps = config["max_search_steps"].get<int>();
    if (config.contains("parse_retry_budget"))
        mode.parse_retry_budget = config["parse_retry_budget"].get<int>();
    if (config.contains("tokenizer")) mode.tokenizer = config["tokenizer"].get<std::string>();
    if (config.contains("euclidean_weights"))
        mode.euclidean_weights = config["euclidean_weights"].get<bool>();

    if (!flags.mode.empty()) {
        auto m = sgplan::pipeline_mode_from(flags.mode);
        if (!m) throw sgplan::IoError("unknown mode: " + flags.mode);
        mode.pipeline = *m;
    }
    if (flags.max_replans >= 0) mode.max_replanning_iterations = flags.max_replans;
    if (flags.max_search_steps >= 0) mode.max_search_steps = flags.max_search_steps;
    if (!flags.tokenizer.empty()) mode.tokenizer = flags.tokenizer;
    if (flags.euclidean) mode.euclidean_weights = true;
    return mode;
}

sgplan::BackendConfig resolve_backend_config(const Flags& flags,
                                             const sgplan::ordered_json& config) {
    sgplan::BackendConfig backend;
    if (const char* e = std::getenv("SGPLAN_ENDPOINT")) backend.endpoint = e;
    if (const char* m = std::getenv("SGPLAN_MODEL")) backend.model = m;
    if (config.contains("backend")) {
        const auto& b = config["backend"];
        if (b.contains("kind")) backend.kind = b["kind"].get<std::string>();
        if (b.contains("cassette")) backend.cassette = b["cassette"].get<std::string>();
        if (b.contains("endpoint")) backend.endpoint = b["endpoint"].get<std::string>();
        if (b.contains("model")) backend.model = b["model"].get<std::string>();
        if (b.contains("temperature")) backend.temperature = b["temperature"].get<double>();
        if (b.contains("max_tokens")) backend.max_tokens = b["max_tokens"].get<int>();
        if (b.contains("timeout_seconds")) backend.timeout_seconds = b["timeout_seconds"].get<int>();
        if (b.contains("retries")) backend.retries = b["retries"].get<int>();
        if (b.contains("api_key_env")) backend.api_key_env = b["api_key_env"].get<std::string>();
        if (b.contains("record")) backend.record_path = b["record"].get<std::string>();
    }
    if (!flags.backend_kind.empty()) backend.kind = flags.backend_kind;
    if (!flags.cassette.empty()) backend.cassette = flags.cassette;
    if (!flags.endpoint.empty()) backend.endpoint = flags.endpoint;
    if (!flags.model.empty()) backend.model = flags.model;
    if (!flags.record.empty()) backend.record_path = flags.record;
    // --cassette alone implies the scripted backend.
    if (!flags.cassette.empty() && flags.backend_kind.empty()) backend.kind = "scripted";
    return backend;
}

std::string describe_plan(const sgplan::Plan& plan) {
    std::string out;
    for (const auto& a : plan) {
        out += "  " + sgplan::to_string(a) + "\n";
    }
    return out;
}

int cmd_validate(const std::string& env_path) {
    std::string text = sgplan::read_text_file(env_path);
    sgplan::SceneGraph graph;
    try {
        graph = sgplan::parse_environment(text);
    } catch (const sgplan::GraphError& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return kExitFailure;
    }
    auto violations = sgplan::validate(graph);
    if (!violations.empty()) {
        for (const auto& v : violations)
            std::cerr << "violation [" << v.rule << "] " << v.subject << ": " << v.message << "\n";
        return kExitFailure;
    }
    std::cout << "valid: " << graph.nodes.size() << " nodes, " << graph.edges.size()
              << " edges\n";
    return kExitOk;
}

int cmd_stats(const std::string& env_path, const Flags& flags) {
    sgplan::SceneGraph graph;
    try {
        graph = sgplan::load_graph(sgplan::read_text_file(env_path));
    } catch (const sgplan::GraphError& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return kExitFailure;
    }
    auto counter = sgplan::make_token_counter(flags.tokenizer.empty() ? "heuristic"
                                                                      : flags.tokenizer);
    sgplan::SceneGraph collapsed_view = graph;
    sgplan::collapse(collapsed_view);
    sgplan::EntityStats s = sgplan::stats(collapsed_view, counter);
    if (!flags.collapsed) {
        for (auto kind : {sgplan::NodeKind::floor, sgplan::NodeKind::room, sgplan::NodeKind::pose,
                          sgplan::NodeKind::agent, sgplan::NodeKind::asset,
                          sgplan::NodeKind::object}) {
            auto it = s.counts.find(kind);
            if (it != s.counts.end() && it->second > 0)
                std::cout << sgplan::to_string(kind) << ": " << it->second << "\n";
        }
        std::cout << "edges: " << s.edge_count << "\n";
        std::cout << "full: " << s.full_chars << " chars, " << s.full_tokens << " tokens\n";
    }
    std::cout << "collapsed: " << s.visible_chars << " chars, " << s.visible_tokens
              << " tokens\n";
    std::cout << "collapsed_entities: " << collapsed_view.visible.size() << "\n";
    char ratio[32];
    std::snprintf(ratio, sizeof(ratio), "%.4f", s.compression_ratio);
    std::cout << "compression_ratio: " << ratio << "\n";
    return kExitOk;
}

int run_pipeline(const std::string& env_path, const std::string& instruction, const Flags& flags,
                 bool search_only) {
    auto config = load_config_file(flags.config_path);
    sgplan::ModeConfig mode = resolve_mode_config(flags, config);
    sgplan::BackendConfig backend_config = resolve_backend_config(flags, config);
    auto backend = sgplan::make_backend(backend_config);
    sgplan::SceneGraph graph = sgplan::load_graph(sgplan::read_text_file(env_path));

    if (search_only) {
        auto counter = sgplan::make_token_counter(mode.tokenizer);
        auto search = sgplan::semantic_search(graph, instruction, *backend, mode, counter);
        std::cout << "memory: " << sgplan::render_memory(search.state.memory) << "\n";
        std::cout << "steps: " << search.state.steps << "\n";
        std::cout << "visible: " << sgplan::serialize_visible(search.state.graph) << "\n";
        if (!flags.trace_out.empty())
            sgplan::write_text_file(flags.trace_out, sgplan::trace_to_jsonl(search.events));
        if (search.failed) {
            std::cerr << "search failed: " << search.failure << "\n";
            return kExitFailure;
        }
        return kExitOk;
    }

    sgplan::RunResult run = sgplan::run_task(graph, {instruction, {}}, *backend, mode);
    std::cout << "outcome: " << sgplan::to_string(run.outcome) << "\n";
    std::cout << "replanning_iterations: " << run.replanning_iterations << "\n";
    std::cout << "memory: " << sgplan::render_memory(run.memory) << "\n";
    if (run.error_class && run.outcome != sgplan::Outcome::verified_plan)
        std::cout << "error_class: " << sgplan::to_string(*run.error_class) << "\n";
    std::cout << "feedback: " << run.last_feedback << "\n";
    if (run.final_plan) std::cout << "plan:\n" << describe_plan(*run.final_plan);

    if (!flags.trace_out.empty())
        sgplan::write_text_file(flags.trace_out, sgplan::trace_to_jsonl(run.trace));
    if (!flags.plan_out.empty() && run.final_plan) {
        sgplan::ordered_json steps = sgplan::ordered_json::array();
        for (const auto& a : *run.final_plan) steps.push_back(sgplan::to_string(a));
        sgplan::write_text_file(flags.plan_out, steps.dump() + "\n");
    }
    return run.outcome == sgplan::Outcome::verified_plan ? kExitOk : kExitFailure;
}

int cmd_verify(const std::string& env_path, const std::string& plan_path) {
    sgplan::SceneGraph graph = sgplan::load_graph(sgplan::read_text_file(env_path));
    auto doc = sgplan::ordered_json::parse(sgplan::read_text_file(plan_path), nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        std::cerr << "plan file must be a JSON array of action strings\n";
        return kExitUsage;
    }
    sgplan::Plan plan;
    for (const auto& step : doc) {
        if (!step.is_string()) {
            std::cerr << "plan file must contain only strings\n";
            return kExitUsage;
        }
        auto action = sgplan::parse_action(step.get<std::string>());
        if (!action) {
            std::cerr << "malformed action: " << step.get<std::string>() << "\n";
            return kExitUsage;
        }
        plan.push_back(*action);
    }
    auto outcome = sgplan::verify_plan(sgplan::init_state(graph), graph, plan);
    if (outcome.ok) {
        std::cout << outcome.feedback << "\n";
        return kExitOk;
    }
    std::cout << "failed at index " << *outcome.failed_index << " ["
              << sgplan::to_string(*outcome.reason) << "]: " << outcome.feedback << "\n";
    return kExitFailure;
}

int cmd_bench(const std::string& suite_path, const Flags& flags) {
    auto config = load_config_file(flags.config_path);
    sgplan::ModeConfig mode = resolve_mode_config(flags, config);
    sgplan::Suite suite = sgplan::load_suite(suite_path);

    sgplan::BenchOptions options;
    options.mode = mode;
    options.jobs = flags.jobs;
    options.trace_dir = flags.trace_dir;
    if (!flags.backend_kind.empty() && flags.backend_kind != "scripted") {
        sgplan::BackendConfig backend_config = resolve_backend_config(flags, config);
        options.backend_factory = [backend_config](const sgplan::TaskFixture&) {
            return sgplan::make_backend(backend_config);
        };
    }

    sgplan::BenchReport report = sgplan::run_bench(suite, options);
    for (const auto& row : report.rows) {
        std::cout << row.id << " [" << row.family << "] " << sgplan::to_string(row.outcome)
                  << " replans=" << row.replanning_iterations;
        if (row.error_class) std::cout << " error_class=" << sgplan::to_string(*row.error_class);
        if (row.correct.has_value()) std::cout << (*row.correct ? " correct" : " WRONG");
        std::cout << "\n";
    }
    for (const auto& [family, agg] : report.families) {
        std::cout << family << ": " << agg.executable << "/" << agg.count << " executable, mean "
                  << agg.mean_replanning_iterations << " replans\n";
    }
    if (!flags.report_out.empty())
        sgplan::write_text_file(flags.report_out, sgplan::report_to_json(report).dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scene-graph task planning engine"};
    app.require_subcommand(1);
    Flags flags;
    std::string env_path, instruction, plan_path, suite_path;

    auto add_backend_options = [&flags](CLI::App* cmd) {
        cmd->add_option("--config", flags.config_path, "JSON config file");
        cmd->add_option("--backend", flags.backend_kind, "backend kind: scripted | remote");
        cmd->add_option("--cassette", flags.cassette, "response cassette for the scripted backend");
        cmd->add_option("--endpoint", flags.endpoint, "chat-completions endpoint URL");
        cmd->add_option("--model", flags.model, "model name for the remote backend");
        cmd->add_option("--record", flags.record, "append request/response pairs to this cassette");
        cmd->add_option("--mode", flags.mode, "pipeline: sayplan | llm_plus_p | llm_as_planner");
        cmd->add_option("--max-replans", flags.max_replans, "replanning budget");
        cmd->add_option("--max-search-steps", flags.max_search_steps, "search step budget");
        cmd->add_option("--tokenizer", flags.tokenizer, "token counter: heuristic | chars");
        cmd->add_flag("--euclidean-weights", flags.euclidean,
                      "weight navigation edges by node distance");
        cmd->add_option("--trace-out", flags.trace_out, "write the event trace (JSON lines)");
    };

    auto* validate_cmd = app.add_subcommand("validate", "check an environment file");
    validate_cmd->add_option("environment", env_path, "environment JSON file")->required();

    auto* stats_cmd = app.add_subcommand("stats", "entity counts and serialized sizes");
    stats_cmd->add_option("environment", env_path, "environment JSON file")->required();
    stats_cmd->add_flag("--collapsed", flags.collapsed, "print only the collapsed view sizes");
    stats_cmd->add_option("--tokenizer", flags.tokenizer, "token counter: heuristic | chars");

    auto* plan_cmd = app.add_subcommand("plan", "run the full pipeline on one instruction");
    plan_cmd->add_option("environment", env_path, "environment JSON file")->required();
    plan_cmd->add_option("instruction", instruction, "natural language task")->required();
    add_backend_options(plan_cmd);
    plan_cmd->add_option("--plan-out", flags.plan_out, "write the verified plan as a JSON array");

    auto* verify_cmd = app.add_subcommand("verify", "verify a plan file against an environment");
    verify_cmd->add_option("environment", env_path, "environment JSON file")->required();
    verify_cmd->add_option("plan", plan_path, "plan file: JSON array of action strings")->required();

    auto* search_cmd = app.add_subcommand("search", "run semantic search only");
    search_cmd->add_option("environment", env_path, "environment JSON file")->required();
    search_cmd->add_option("instruction", instruction, "natural language task")->required();
    add_backend_options(search_cmd);

    auto* bench_cmd = app.add_subcommand("bench", "run a task suite and report results");
    bench_cmd->add_option("suite", suite_path, "suite JSON file")->required();
    add_backend_options(bench_cmd);
    bench_cmd->add_option("--jobs", flags.jobs, "parallel workers");
    bench_cmd->add_option("--report-out", flags.report_out, "write the report JSON");
    bench_cmd->add_option("--trace-dir", flags.trace_dir, "write one trace file per task");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (validate_cmd->parsed()) return cmd_validate(env_path);
        if (stats_cmd->parsed()) return cmd_stats(env_path, flags);
        if (plan_cmd->parsed()) return run_pipeline(env_path, instruction, flags, false);
        if (verify_cmd->parsed()) return cmd_verify(env_path, plan_path);
        if (search_cmd->parsed()) return run_pipeline(env_path, instruction, flags, true);
        if (bench_cmd->parsed()) return cmd_bench(suite_path, flags);
    } catch (const sgplan::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sgplan::BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sgplan::BenchError& e) {
        std::cerr << "bench error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sgplan::GraphError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
