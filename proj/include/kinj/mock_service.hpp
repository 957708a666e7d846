// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinj/transport.hpp"

namespace kinj {

/// Deterministic stand-in for every backend the harness talks to.
///
/// Routes (same paths over HTTP via `kinj mock-server` or in-process via mock:// URLs):
///   POST /v1/chat/completions   chat; behaviour picked by model-name prefix
///   POST /v1/completions        echo + logprobs scoring over whitespace tokens
///   POST /v1/tokenize           whitespace tokenizer with byte boundaries
///   POST /v1/jobs, GET /v1/jobs/{id}, GET /v1/jobs/{id}/artifact   trainer contract
///
/// Model prefixes: mock-subject[@run_id], mock-judge, mock-generator, mock-instruct, mock-echo.
/// Outputs depend only on the request, so identical requests give identical bytes.
class MockService {
public:
    explicit MockService(std::filesystem::path state_dir = {});

    /// Instance behind mock:// URLs.
    static MockService& shared();

    HttpResult handle_post(const std::string& path, const std::string& body);
    HttpResult handle_get(const std::string& path);

    using ChatHandler = std::function<std::string(const nlohmann::json& request)>;
    /// Overrides the reply for one exact model name.
    void set_chat_handler(const std::string& model, ChatHandler handler);
    void set_token_logprob(const std::string& token, double logprob);
    /// Fixed logprob for tokens absent from the table; unset means a hash-derived value.
    void set_default_logprob(std::optional<double> logprob);
    void set_logprobs_supported(bool supported);
    /// The next `count` requests fail with `status` before any routing.
    void fail_next(int count, int status = 503);
    void set_delay(std::chrono::milliseconds delay);
    /// Trainer reports lr * (1 + relative) at `step`.
    void set_lr_perturbation(std::optional<std::pair<std::size_t, double>> perturbation);
    void set_state_dir(std::filesystem::path dir);
    /// base_url advertised in trainer artifact replies.
    void set_artifact_base_url(std::string url);
    void reset();

    [[nodiscard]] int peak_in_flight() const { return peak_in_flight_.load(); }
    [[nodiscard]] std::size_t request_count() const { return requests_.load(); }

    /// Hash-derived logprob in [-5.5, -0.5) used when no table entry or default applies.
    static double hashed_logprob(const std::string& model, const std::string& token);

private:
    struct Job {
        nlohmann::json manifest;
        int polls = 0;
    };

    HttpResult chat(const nlohmann::json& req);
    HttpResult completions(const nlohmann::json& req);
    HttpResult tokenize(const nlohmann::json& req);
    HttpResult submit_job(const nlohmann::json& manifest);
    HttpResult job_status(const std::string& run_id);
    HttpResult job_artifact(const std::string& run_id);

    std::string subject_reply(const std::string& model, const std::string& prompt);
    std::vector<std::string> memory_for(const std::string& run_id);
    double token_logprob(const std::string& model, const std::string& token) const;

    mutable std::mutex mu_;
    std::filesystem::path state_dir_;
    std::string artifact_base_url_ = "mock://";
    std::map<std::string, ChatHandler> handlers_;
    std::map<std::string, double> logprob_table_;
    std::optional<double> default_logprob_;
    bool logprobs_supported_ = true;
    std::chrono::milliseconds delay_{0};
    std::optional<std::pair<std::size_t, double>> lr_perturbation_;
    std::map<std::string, Job> jobs_;
    std::map<std::string, std::vector<std::string>> memory_;

    std::atomic<int> fail_remaining_{0};
    std::atomic<int> fail_status_{503};
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_in_flight_{0};
    std::atomic<std::size_t> requests_{0};
};

/// Serves a MockService over HTTP on a background thread.
class MockHttpServer {
public:
    explicit MockHttpServer(MockService& service, int worker_threads = 32);
    ~MockHttpServer();
    MockHttpServer(const MockHttpServer&) = delete;
    MockHttpServer& operator=(const MockHttpServer&) = delete;

    /// Binds (port 0 picks a free port) and starts serving; returns the bound port.
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop() is called from elsewhere.
    void listen_blocking(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace kinj
