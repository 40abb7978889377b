#pragma once

// Batch evaluation over task suites. A suite is a JSON file with task
// fixtures; paths inside it resolve relative to the suite file. Reports are
// pure functions of the recorded traces: report_from_traces rebuilds the
// exact same report from trace files, the suite, and the mode config.

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "llm.hpp"
#include "orchestrator.hpp"
#include "util.hpp"

namespace sgplan {

class BenchError : public std::runtime_error {
public:
    explicit BenchError(const std::string& what) : std::runtime_error(what) {}
};

struct TaskFixture {
    std::string id;
    std::string instruction;
    std::string environment;  // path, resolved against the suite directory
    std::string family = "default";
    std::vector<std::string> required_nodes;
    std::optional<std::string> cassette;
    std::optional<Outcome> expected;
};

struct Suite {
    std::vector<TaskFixture> tasks;
    std::string base_dir;

    std::string resolve(const std::string& path) const {
        std::filesystem::path p(path);
        if (p.is_absolute()) return path;
        return (std::filesystem::path(base_dir) / p).string();
    }
};

inline Suite load_suite(const std::string& path) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw BenchError("suite " + path + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("tasks") || !doc["tasks"].is_array())
        throw BenchError("suite " + path + ": expected {\"tasks\": [...]}");
    Suite suite;
    suite.base_dir = std::filesystem::path(path).parent_path().string();
    if (suite.base_dir.empty()) suite.base_dir = ".";
    for (const auto& t : doc["tasks"]) {
        if (!t.is_object()) throw BenchError("suite " + path + ": task must be an object");
        TaskFixture fixture;
        for (const auto& [key, value] : t.items()) {
            if (key == "id") fixture.id = value.get<std::string>();
            else if (key == "instruction") fixture.instruction = value.get<std::string>();
            else if (key == "environment") fixture.environment = value.get<std::string>();
            else if (key == "family") fixture.family = value.get<std::string>();
            else if (key == "required_nodes") {
                for (const auto& n : value) fixture.required_nodes.push_back(n.get<std::string>());
            } else if (key == "cassette") fixture.cassette = value.get<std::string>();
            else if (key == "expected") {
                auto o = outcome_from(value.get<std::string>());
                if (!o)
                    throw BenchError("suite " + path + ": unknown expected outcome \"" +
                                     value.get<std::string>() + "\"");
                fixture.expected = o;
            } else {
                throw BenchError("suite " + path + ": unknown task field \"" + key + "\"");
            }
        }
        if (fixture.id.empty() || fixture.instruction.empty() || fixture.environment.empty())
            throw BenchError("suite " + path + ": tasks need id, instruction and environment");
        suite.tasks.push_back(std::move(fixture));
    }
    return suite;
}

struct BenchRow {
    std::string id;
    std::string family;
    Outcome outcome = Outcome::search_failed;
    bool executable = false;
    std::optional<bool> correct;  // only when the fixture declares an expectation
    int replanning_iterations = 0;
    std::optional<ErrorClass> error_class;
};

struct FamilyAggregate {
    int count = 0;
    int executable = 0;
    int with_expectation = 0;
    int correct = 0;
    double mean_replanning_iterations = 0.0;
    std::map<std::string, int> error_classes;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    std::map<std::string, FamilyAggregate> families;  // includes an "all" aggregate
};

using BackendFactory = std::function<std::unique_ptr<Backend>(const TaskFixture&)>;

struct BenchOptions {
    ModeConfig mode;
    int jobs = 1;
    std::string trace_dir;           // non-empty: write <id>.jsonl per task
    BackendFactory backend_factory;  // default: scripted from the task cassette
};

namespace detail {

inline BenchRow row_from_result(const TaskFixture& task, Outcome outcome, int replans,
                                std::optional<ErrorClass> error_class) {
    BenchRow row;
    row.id = task.id;
    row.family = task.family;
    row.outcome = outcome;
    row.executable = outcome == Outcome::verified_plan;
    if (task.expected) row.correct = outcome == *task.expected;
    row.replanning_iterations = replans;
    row.error_class = outcome == Outcome::verified_plan ? std::nullopt : error_class;
    return row;
}

inline void aggregate_rows(BenchReport& report) {
    auto add = [&](const std::string& family, const BenchRow& row) {
        FamilyAggregate& agg = report.families[family];
        ++agg.count;
        if (row.executable) ++agg.executable;
        if (row.correct.has_value()) {
            ++agg.with_expectation;
            if (*row.correct) ++agg.correct;
        }
        agg.mean_replanning_iterations += row.replanning_iterations;
        if (row.error_class) ++agg.error_classes[to_string(*row.error_class)];
    };
    for (const auto& row : report.rows) {
        add(row.family, row);
        add("all", row);
    }
    for (auto& [_, agg] : report.families)
        if (agg.count > 0) agg.mean_replanning_iterations /= agg.count;
}

}  // namespace detail

inline BenchReport run_bench(const Suite& suite, const BenchOptions& options) {
    BackendFactory factory = options.backend_factory;
    if (!factory) {
        factory = [&suite](const TaskFixture& task) -> std::unique_ptr<Backend> {
            if (!task.cassette)
                throw BenchError("task " + task.id + " has no cassette and no backend factory");
            return std::make_unique<ScriptedBackend>(load_cassette(suite.resolve(*task.cassette)));
        };
    }

    BenchReport report;
    report.rows.resize(suite.tasks.size());
    std::vector<std::exception_ptr> errors(suite.tasks.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= suite.tasks.size()) return;
            const TaskFixture& task = suite.tasks[i];
            try {
                SceneGraph graph = load_graph(read_text_file(suite.resolve(task.environment)));
                auto backend = factory(task);
                RunResult run = run_task(graph, {task.instruction, task.required_nodes}, *backend,
                                         options.mode);
                report.rows[i] = detail::row_from_result(task, run.outcome,
                                                         run.replanning_iterations, run.error_class);
                if (!options.trace_dir.empty()) {
                    std::filesystem::create_directories(options.trace_dir);
                    write_text_file(
                        (std::filesystem::path(options.trace_dir) / (task.id + ".jsonl")).string(),
                        trace_to_jsonl(run.trace));
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    int jobs = std::max(1, options.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    detail::aggregate_rows(report);
    return report;
}

// Rebuilds the report from per-task traces. Outcomes are recovered from the
// plan-stage events: the run verified iff the last one verified; a sayplan
// run that burned max+1 attempts exhausted its budget.
inline BenchReport report_from_traces(const Suite& suite, const ModeConfig& mode,
                                      const std::map<std::string, std::vector<TraceEvent>>& traces) {
    BenchReport report;
    for (const auto& task : suite.tasks) {
        auto it = traces.find(task.id);
        if (it == traces.end()) throw BenchError("no trace for task " + task.id);
        std::vector<const TraceEvent*> plan_events;
        for (const auto& e : it->second)
            if (e.verify) plan_events.push_back(&e);
        Outcome outcome;
        int replans = 0;
        std::optional<ErrorClass> error_class;
        if (plan_events.empty()) {
            outcome = Outcome::search_failed;
        } else {
            const TraceEvent& last = *plan_events.back();
            replans = static_cast<int>(plan_events.size()) - 1;
            if (last.verify->ok) {
                outcome = Outcome::verified_plan;
            } else if (mode.pipeline == PipelineMode::sayplan) {
                outcome = static_cast<int>(plan_events.size()) ==
                                  mode.max_replanning_iterations + 1
                              ? Outcome::budget_exhausted
                              : Outcome::search_failed;
                error_class = last.error_class;
            } else {
                outcome = Outcome::plan_failed;
                replans = 0;
                error_class = last.error_class;
            }
        }
        report.rows.push_back(detail::row_from_result(task, outcome, replans, error_class));
    }
    detail::aggregate_rows(report);
    return report;
}

inline ordered_json report_to_json(const BenchReport& report) {
    ordered_json doc = ordered_json::object();
    doc["rows"] = ordered_json::array();
    for (const auto& row : report.rows) {
        ordered_json r = ordered_json::object();
        r["id"] = row.id;
        r["family"] = row.family;
        r["outcome"] = to_string(row.outcome);
        r["executable"] = row.executable;
        r["correct"] = row.correct ? ordered_json(*row.correct) : ordered_json(nullptr);
        r["replanning_iterations"] = row.replanning_iterations;
        r["error_class"] =
            row.error_class ? ordered_json(to_string(*row.error_class)) : ordered_json(nullptr);
        doc["rows"].push_back(std::move(r));
    }
    doc["families"] = ordered_json::object();
    for (const auto& [family, agg] : report.families) {
        ordered_json f = ordered_json::object();
        f["count"] = agg.count;
        f["executable"] = agg.executable;
        f["executability"] =
            agg.count == 0 ? 0.0 : static_cast<double>(agg.executable) / agg.count;
        f["with_expectation"] = agg.with_expectation;
        f["correct"] = agg.correct;
        f["mean_replanning_iterations"] = agg.mean_replanning_iterations;
        ordered_json classes = ordered_json::object();
        for (const auto& [name, count] : agg.error_classes) classes[name] = count;
        f["error_classes"] = std::move(classes);
        doc["families"][family] = std::move(f);
    }
    return doc;
}

}  // namespace sgplan
