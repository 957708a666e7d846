// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinj/transport.hpp"

namespace kinj {

enum class Role { system, user, assistant };

struct Message {
    Role role = Role::user;
    std::string content;
};

struct ChatRequest {
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 256;
    std::optional<std::int64_t> seed;
    bool logprobs = false;

    /// Non-empty, ends with a user message, temperature >= 0, max_tokens > 0.
    void validate() const;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct Usage {
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::optional<std::vector<TokenLogprob>> token_logprobs; // present iff requested
    Usage usage;
    int attempts = 1;
};

struct EndpointConfig {
    std::string base_url;
    std::string model_name;
    std::string api_key;
    std::chrono::milliseconds timeout{120'000};
    int max_retries = 3;
    int max_parallel = 4;
    /// First retry delay; later retries double it, each jittered by a factor in [0.5, 1.5).
    std::chrono::milliseconds backoff_base{1'000};

    void validate(const std::string& where = "endpoint") const;
};

nlohmann::json to_json(const EndpointConfig& e);
EndpointConfig endpoint_from_json(const nlohmann::json& j, const std::string& where = "endpoint");

struct ContinuationScore {
    double sum_logprob = 0.0;
    std::size_t num_tokens = 0;
};

/// Append-only line-delimited log of every backend exchange.
class Journal {
public:
    explicit Journal(std::filesystem::path path);
    void append(const nlohmann::json& record);
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mu_;
    std::ofstream out_;
};

/// Key a request is journaled and replayed under.
std::string request_key(const std::string& path, const std::string& body);

/// Serves previously journaled replies; an unseen request is a BackendError(replay_miss).
class ReplayTransport : public Transport {
public:
    explicit ReplayTransport(const std::vector<std::filesystem::path>& journals);
    HttpResult post(const std::string& path, const std::string& body, std::chrono::milliseconds timeout) override;
    HttpResult get(const std::string& path, std::chrono::milliseconds timeout) override;
    [[nodiscard]] std::size_t size() const { return replies_.size(); }

private:
    std::unordered_map<std::string, std::string> replies_;
};

/// Caps concurrent requests and remembers the highest concurrency reached.
class AdmissionGate {
public:
    explicit AdmissionGate(int limit);
    void acquire();
    void release();
    [[nodiscard]] int peak() const;

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    int limit_;
    int in_flight_ = 0;
    int peak_ = 0;
};

/// Chat-completions client shared by every model role.
///
/// Safe to call from many threads; at most `max_parallel` requests are in flight at once.
/// Transient failures (no HTTP status, 408, 429, 5xx) are retried up to max_retries times.
class LlmClient {
public:
    explicit LlmClient(EndpointConfig endpoint, std::shared_ptr<Transport> transport = nullptr,
                       std::shared_ptr<Journal> journal = nullptr);

    ChatResponse complete(const ChatRequest& request);

    /// Sum of continuation token log-probabilities given the prompt, via the completions
    /// endpoint with echo. Throws BackendError(unsupported) when the backend returns no logprobs.
    std::vector<ContinuationScore> score_continuations(const std::string& prompt,
                                                       const std::vector<std::string>& continuations);

    [[nodiscard]] const EndpointConfig& endpoint() const noexcept { return endpoint_; }
    [[nodiscard]] int peak_in_flight() const { return gate_->peak(); }

private:
    struct Exchange {
        nlohmann::json reply;
        int attempts = 0;
    };
    Exchange exchange(const std::string& path, const nlohmann::json& body);

    EndpointConfig endpoint_;
    std::shared_ptr<Transport> transport_;
    std::shared_ptr<Journal> journal_;
    std::shared_ptr<AdmissionGate> gate_;
};

std::string to_string(Role role);

} // namespace kinj
