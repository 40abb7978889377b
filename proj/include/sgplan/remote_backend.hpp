#pragma once

// HTTP chat-completions backend. Separate header so that scripted-only users
// do not compile the HTTP client. Define SGPLAN_ENABLE_TLS (and link OpenSSL)
// before including this header to reach https endpoints.

#ifdef SGPLAN_ENABLE_TLS
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#endif

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>

#include "httplib.h"

#include "llm.hpp"

namespace sgplan {

class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(BackendConfig config) : config_(std::move(config)) {
        auto scheme_end = config_.endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw BackendError("endpoint must include a scheme: " + config_.endpoint);
        auto path_start = config_.endpoint.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            base_ = config_.endpoint;
            path_ = "/";
        } else {
            base_ = config_.endpoint.substr(0, path_start);
            path_ = config_.endpoint.substr(path_start);
        }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (base_.rfind("https://", 0) == 0)
            throw BackendError("https endpoint requires a TLS-enabled build: " + config_.endpoint);
#endif
    }

    std::string complete(const PromptDocument& prompt) override {
        ordered_json body = ordered_json::object();
        body["model"] = config_.model;
        body["temperature"] = config_.temperature;
        body["max_tokens"] = config_.max_tokens;
        body["messages"] = ordered_json::array();
        body["messages"].push_back(
            {{"role", "system"}, {"content", std::string(PromptDocument::static_text())}});
        body["messages"].push_back({{"role", "user"}, {"content", prompt.dynamic_text()}});
        std::string payload = body.dump();

        std::string last_error;
        for (int attempt = 0; attempt <= config_.retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(250 << (attempt - 1)));
            httplib::Client client(base_);
            client.set_connection_timeout(config_.timeout_seconds, 0);
            client.set_read_timeout(config_.timeout_seconds, 0);
            client.set_write_timeout(config_.timeout_seconds, 0);
            httplib::Headers headers;
            if (const char* key = std::getenv(config_.api_key_env.c_str()))
                headers.emplace("Authorization", std::string("Bearer ") + key);
            auto res = client.Post(path_, headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;  // retry
            }
            if (res->status >= 500) {
                last_error = "server error " + std::to_string(res->status);
                continue;  // retry
            }
            if (res->status != 200)
                throw BackendError("remote returned " + std::to_string(res->status) + ": " +
                                   res->body.substr(0, 200));
            return extract_content(res->body);
        }
        throw BackendError("remote request failed after " + std::to_string(config_.retries + 1) +
                           " attempts: " + last_error);
    }

    std::string name() const override { return "remote(" + config_.model + ")"; }

private:
    static std::string extract_content(const std::string& body) {
        ordered_json j;
        try {
            j = ordered_json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("unparseable completion response: ") + e.what());
        }
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            throw BackendError("completion response has no choices");
        const auto& first = j["choices"][0];
        if (!first.contains("message") || !first["message"].contains("content") ||
            !first["message"]["content"].is_string())
            throw BackendError("completion response has no message content");
        return first["message"]["content"].get<std::string>();
    }

    BackendConfig config_;
    std::string base_;
    std::string path_;
};

inline std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    std::unique_ptr<Backend> backend;
    if (config.kind == "scripted") {
        if (config.cassette.empty())
            throw BackendError("scripted backend requires a cassette path");
        backend = std::make_unique<ScriptedBackend>(load_cassette(config.cassette));
    } else if (config.kind == "remote") {
        backend = std::make_unique<RemoteBackend>(config);
    } else {
        throw BackendError("unknown backend kind: " + config.kind);
    }
    if (!config.record_path.empty())
        backend = std::make_unique<RecordingBackend>(std::move(backend), config.record_path);
    return backend;
}

}  // namespace sgplan
