#pragma once

// LLM interface: prompt assembly, response parsing, and backends.
//
// Prompts are Markovian: only the current serialized view, the memory list,
// and the latest feedback line vary between calls; the static sections are a
// process constant. Responses must contain one JSON object in the documented
// envelope; the parser extracts the first balanced object from surrounding
// prose or code fences.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"

#include "actions.hpp"
#include "prompt_text.hpp"
#include "scene_graph.hpp"

namespace sgplan {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string fnv1a64_hex(std::string_view s) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(s);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompt assembly

struct PromptDocument {
    std::string instruction;
    std::string graph_json;
    std::string memory;   // rendered "[a, b, c]"
    std::string feedback;

    static std::string_view static_text() { return static_prompt_text; }

    std::string dynamic_text() const {
        auto line = [](const char* label, const std::string& value) {
            std::string out = label;
            if (!value.empty()) {
                out += " ";
                out += value;
            }
            out += "\n";
            return out;
        };
        return line("Instruction:", instruction) + line("3D Scene Graph:", graph_json) +
               line("Memory:", memory) + line("Feedback:", feedback);
    }

    std::string full_text() const {
        return std::string(static_text()) + "\n" + dynamic_text();
    }
};

inline std::string render_memory(const std::vector<std::string>& memory) {
    std::string out = "[";
    for (std::size_t i = 0; i < memory.size(); ++i) {
        if (i) out += ", ";
        out += memory[i];
    }
    out += "]";
    return out;
}

inline PromptDocument build_prompt(const std::string& instruction, const std::string& graph_json,
                                   const std::vector<std::string>& memory,
                                   const std::string& feedback) {
    return PromptDocument{instruction, graph_json, render_memory(memory), feedback};
}

// ---------------------------------------------------------------------------
// Response parsing

enum class TurnMode { exploring, planning };

inline const char* to_string(TurnMode m) {
    return m == TurnMode::exploring ? "exploring" : "planning";
}

enum class CommandKind { expand_node, contract_node, verify_plan, terminate };

inline const char* to_string(CommandKind c) {
    switch (c) {
        case CommandKind::expand_node: return "expand_node";
        case CommandKind::contract_node: return "contract_node";
        case CommandKind::verify_plan: return "verify_plan";
        case CommandKind::terminate: return "terminate";
    }
    return "?";
}

struct LlmTurn {
    std::string chain_of_thought;
    std::string reasoning;
    TurnMode mode = TurnMode::exploring;
    CommandKind command = CommandKind::terminate;
    std::string node_name;  // expand_node / contract_node
    Plan plan;              // verify_plan

    bool operator==(const LlmTurn& o) const {
        return chain_of_thought == o.chain_of_thought && reasoning == o.reasoning &&
               mode == o.mode && command == o.command && node_name == o.node_name && plan == o.plan;
    }

    ordered_json to_json() const {
        ordered_json j = ordered_json::object();
        j["chain_of_thought"] = chain_of_thought;
        j["reasoning"] = reasoning;
        j["mode"] = to_string(mode);
        ordered_json cmd = ordered_json::object();
        cmd["command_name"] = to_string(command);
        if (command == CommandKind::expand_node || command == CommandKind::contract_node)
            cmd["node_name"] = node_name;
        if (command == CommandKind::verify_plan) {
            ordered_json steps = ordered_json::array();
            for (const auto& a : plan) steps.push_back(sgplan::to_string(a));
            cmd["plan"] = std::move(steps);
        }
        j["command"] = std::move(cmd);
        return j;
    }
};

enum class ParseErrorKind {
    no_json,
    missing_field,
    unknown_mode,
    unknown_command,
    inconsistent,
    malformed_action,
};

struct ParseError {
    ParseErrorKind kind = ParseErrorKind::no_json;
    std::string message;
};

using ParsedTurn = std::variant<LlmTurn, ParseError>;

namespace detail {

// First balanced {...} span starting at or after `from` that is valid JSON.
inline std::optional<std::string> extract_json_object(std::string_view text) {
    constexpr int depth_cap = 512;
    std::size_t from = 0;
    while (true) {
        std::size_t start = text.find('{', from);
        if (start == std::string_view::npos) return std::nullopt;
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                if (++depth > depth_cap) break;
            } else if (c == '}') {
                if (--depth == 0) {
                    std::string candidate(text.substr(start, i - start + 1));
                    if (ordered_json::accept(candidate)) return candidate;
                    break;  // balanced but not JSON; try the next opening brace
                }
            }
        }
        from = start + 1;
    }
}

}  // namespace detail

inline ParsedTurn parse_response(const std::string& text) {
    auto object_text = detail::extract_json_object(text);
    if (!object_text)
        return ParseError{ParseErrorKind::no_json, "no JSON object found in response"};
    ordered_json j = ordered_json::parse(*object_text);
    if (!j.is_object()) return ParseError{ParseErrorKind::no_json, "response is not a JSON object"};

    LlmTurn turn;
    if (j.contains("chain_of_thought") && j["chain_of_thought"].is_string())
        turn.chain_of_thought = j["chain_of_thought"].get<std::string>();
    if (j.contains("reasoning") && j["reasoning"].is_string())
        turn.reasoning = j["reasoning"].get<std::string>();

    if (!j.contains("mode") || !j["mode"].is_string())
        return ParseError{ParseErrorKind::missing_field, "missing \"mode\""};
    std::string mode = j["mode"].get<std::string>();
    if (mode == "exploring")
        turn.mode = TurnMode::exploring;
    else if (mode == "planning")
        turn.mode = TurnMode::planning;
    else
        return ParseError{ParseErrorKind::unknown_mode, "unknown mode \"" + mode + "\""};

    if (!j.contains("command") || !j["command"].is_object())
        return ParseError{ParseErrorKind::missing_field, "missing \"command\""};
    const auto& cmd = j["command"];
    if (!cmd.contains("command_name") || !cmd["command_name"].is_string())
        return ParseError{ParseErrorKind::missing_field, "missing \"command_name\""};
    std::string name = cmd["command_name"].get<std::string>();

    if (name == "expand_node" || name == "contract_node") {
        turn.command = name == "expand_node" ? CommandKind::expand_node : CommandKind::contract_node;
        if (turn.mode != TurnMode::exploring)
            return ParseError{ParseErrorKind::inconsistent, name + " requires mode \"exploring\""};
        if (!cmd.contains("node_name") || !cmd["node_name"].is_string())
            return ParseError{ParseErrorKind::missing_field, "missing \"node_name\""};
        turn.node_name = cmd["node_name"].get<std::string>();
        return turn;
    }
    if (name == "verify_plan") {
        turn.command = CommandKind::verify_plan;
        if (turn.mode != TurnMode::planning)
            return ParseError{ParseErrorKind::inconsistent, "verify_plan requires mode \"planning\""};
        if (!cmd.contains("plan") || !cmd["plan"].is_array())
            return ParseError{ParseErrorKind::missing_field, "missing \"plan\""};
        for (const auto& step : cmd["plan"]) {
            if (!step.is_string())
                return ParseError{ParseErrorKind::malformed_action, "plan steps must be strings"};
            auto action = parse_action(step.get<std::string>());
            if (!action)
                return ParseError{ParseErrorKind::malformed_action,
                                  "malformed action \"" + step.get<std::string>() + "\""};
            turn.plan.push_back(*action);
        }
        return turn;
    }
    if (name == "terminate") {
        turn.command = CommandKind::terminate;
        if (turn.mode != TurnMode::exploring)
            return ParseError{ParseErrorKind::inconsistent, "terminate requires mode \"exploring\""};
        return turn;
    }
    return ParseError{ParseErrorKind::unknown_command, "unknown command \"" + name + "\""};
}

// ---------------------------------------------------------------------------
// Backends

class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete(const PromptDocument& prompt) = 0;
    virtual std::string name() const = 0;
};

class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}

    std::string complete(const PromptDocument& prompt) override {
        prompts_.push_back(prompt);
        if (cursor_ >= responses_.size())
            throw BackendError("script exhausted after " + std::to_string(responses_.size()) +
                               " responses");
        return responses_[cursor_++];
    }

    std::string name() const override { return "scripted"; }

    const std::vector<PromptDocument>& prompts() const { return prompts_; }
    std::size_t remaining() const { return responses_.size() - cursor_; }

private:
    std::vector<std::string> responses_;
    std::size_t cursor_ = 0;
    std::vector<PromptDocument> prompts_;  // received prompts, for inspection
};

// Cassette: JSON lines of {"request_hash": "...", "response": "..."}. Replay
// ignores hashes; they identify the originating prompts in recordings.
inline std::vector<std::string> load_cassette(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw BackendError("cannot open cassette: " + path);
    std::vector<std::string> responses;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError("cassette " + path + " line " + std::to_string(line_no) + ": " +
                               e.what());
        }
        if (!j.is_object() || !j.contains("response") || !j["response"].is_string())
            throw BackendError("cassette " + path + " line " + std::to_string(line_no) +
                               ": expected {\"request_hash\", \"response\"}");
        responses.push_back(j["response"].get<std::string>());
    }
    return responses;
}

struct BackendConfig {
    std::string kind = "scripted";  // scripted | remote
    std::string cassette;           // scripted: path to the response script
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4";
    double temperature = 0.0;
    int max_tokens = 1024;
    int timeout_seconds = 60;
    int retries = 2;  // additional attempts after the first
    std::string api_key_env = "SGPLAN_API_KEY";
    std::string record_path;  // non-empty: wrap the backend in a recorder
};

class RecordingBackend : public Backend {
public:
    RecordingBackend(std::unique_ptr<Backend> inner, std::string path)
        : inner_(std::move(inner)), path_(std::move(path)) {}

    std::string complete(const PromptDocument& prompt) override {
        std::string response = inner_->complete(prompt);
        ordered_json line = ordered_json::object();
        line["request_hash"] = fnv1a64_hex(prompt.full_text());
        line["response"] = response;
        std::ofstream out(path_, std::ios::app);
        if (!out) throw BackendError("cannot open cassette for append: " + path_);
        out << line.dump() << "\n";
        return response;
    }

    std::string name() const override { return "recording(" + inner_->name() + ")"; }

private:
    std::unique_ptr<Backend> inner_;
    std::string path_;
};

}  // namespace sgplan

// RemoteBackend lives in its own header so that tests and tools that never
// talk to a server do not pay for compiling the HTTP client.
