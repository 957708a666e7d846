// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/llm.hpp"

#include <cmath>
#include <random>
#include <thread>

#include "kinj/error.hpp"
#include "kinj/hashing.hpp"
#include "kinj/jsonl.hpp"

namespace kinj {

namespace {

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int retry) {
    thread_local std::mt19937 rng{std::random_device{}()};
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    double ms = static_cast<double>(base.count()) * std::pow(2.0, retry - 1) * jitter(rng);
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

struct GateLease {
    explicit GateLease(AdmissionGate& g) : gate(g) { gate.acquire(); }
    ~GateLease() { gate.release(); }
    GateLease(const GateLease&) = delete;
    GateLease& operator=(const GateLease&) = delete;
    AdmissionGate& gate;
};

std::string trim_slash(std::string url) {
    while (!url.empty() && url.back() == '/' && !url.ends_with("://")) url.pop_back();
    return url;
}

} // namespace

std::string to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

void ChatRequest::validate() const {
    if (messages.empty()) throw ValidationError("chat request has no messages");
    if (messages.back().role != Role::user) throw ValidationError("chat request must end with a user message");
    if (!(temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
    if (max_tokens <= 0) throw ValidationError("max_tokens must be positive");
}

void EndpointConfig::validate(const std::string& where) const {
    if (base_url.empty()) throw ValidationError(where + ".base_url: required");
    if (model_name.empty()) throw ValidationError(where + ".model_name: required");
    if (max_parallel < 1) throw ValidationError(where + ".max_parallel: must be >= 1");
    if (max_retries < 0) throw ValidationError(where + ".max_retries: must be >= 0");
    if (timeout.count() <= 0) throw ValidationError(where + ".timeout_ms: must be positive");
    if (backoff_base.count() < 0) throw ValidationError(where + ".backoff_ms: must be >= 0");
}

nlohmann::json to_json(const EndpointConfig& e) {
    // api_key is deliberately absent: secrets never reach run artifacts.
    return {{"base_url", e.base_url},         {"model_name", e.model_name},
            {"timeout_ms", e.timeout.count()}, {"max_retries", e.max_retries},
            {"max_parallel", e.max_parallel}, {"backoff_ms", e.backoff_base.count()}};
}

EndpointConfig endpoint_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    EndpointConfig e;
    try {
        e.base_url = j.value("base_url", std::string());
        e.model_name = j.value("model_name", std::string());
        e.api_key = j.value("api_key", std::string());
        e.timeout = std::chrono::milliseconds(j.value("timeout_ms", std::int64_t{120'000}));
        e.max_retries = j.value("max_retries", 3);
        e.max_parallel = j.value("max_parallel", 4);
        e.backoff_base = std::chrono::milliseconds(j.value("backoff_ms", std::int64_t{1'000}));
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(where + ": " + ex.what());
    }
    e.validate(where);
    return e;
}

Journal::Journal(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw Error("cannot open journal " + path_.string());
}

void Journal::append(const nlohmann::json& record) {
    std::string line = record.dump() + "\n";
    std::lock_guard lock(mu_);
    out_ << line;
    out_.flush();
}

std::string request_key(const std::string& path, const std::string& body) {
    return hex64(hash_parts(path, body));
}

ReplayTransport::ReplayTransport(const std::vector<std::filesystem::path>& journals) {
    for (const auto& j : journals) {
        for_each_jsonl(j, [&](std::size_t, const json& rec) {
            if (rec.value("status", 0) != 200) return;
            replies_[rec.at("request_hash").get<std::string>()] = rec.at("response").dump();
        });
    }
}

HttpResult ReplayTransport::post(const std::string& path, const std::string& body, std::chrono::milliseconds) {
    auto it = replies_.find(request_key(path, body));
    if (it == replies_.end()) {
        throw BackendError(BackendError::Kind::replay_miss, "request " + request_key(path, body) + " not in journal");
    }
    return {200, it->second};
}

HttpResult ReplayTransport::get(const std::string& path, std::chrono::milliseconds timeout) {
    return post(path, "", timeout);
}

AdmissionGate::AdmissionGate(int limit) : limit_(limit < 1 ? 1 : limit) {}

void AdmissionGate::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
}

void AdmissionGate::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

int AdmissionGate::peak() const {
    std::lock_guard lock(mu_);
    return peak_;
}

LlmClient::LlmClient(EndpointConfig endpoint, std::shared_ptr<Transport> transport, std::shared_ptr<Journal> journal)
    : endpoint_(std::move(endpoint)),
      transport_(std::move(transport)),
      journal_(std::move(journal)),
      gate_(std::make_shared<AdmissionGate>(endpoint_.max_parallel)) {
    endpoint_.validate();
    endpoint_.base_url = trim_slash(endpoint_.base_url);
    if (!transport_) transport_ = make_transport(endpoint_.base_url, endpoint_.api_key);
}

LlmClient::Exchange LlmClient::exchange(const std::string& path, const nlohmann::json& body) {
    const std::string payload = body.dump();
    const std::string key = request_key(path, payload);
    std::string last_error;
    BackendError::Kind last_kind = BackendError::Kind::exhausted;

    for (int attempt = 1; attempt <= endpoint_.max_retries + 1; ++attempt) {
        if (attempt > 1) std::this_thread::sleep_for(backoff_delay(endpoint_.backoff_base, attempt - 1));
        HttpResult res;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            GateLease lease(*gate_);
            res = transport_->post(path, payload, endpoint_.timeout);
        } catch (const BackendError& e) {
            if (e.kind() != BackendError::Kind::timeout && e.kind() != BackendError::Kind::unreachable) throw;
            last_kind = e.kind() == BackendError::Kind::timeout ? BackendError::Kind::timeout
                                                                 : BackendError::Kind::exhausted;
            last_error = e.what();
            continue;
        }
        const auto latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);

        nlohmann::json reply;
        if (res.status == 200) {
            reply = nlohmann::json::parse(res.body, nullptr, false);
            if (reply.is_discarded()) {
                throw BackendError(BackendError::Kind::protocol, endpoint_.base_url + path + ": reply is not JSON");
            }
        }
        if (journal_) {
            nlohmann::json rec = {{"request_hash", key},
                                  {"endpoint", endpoint_.base_url},
                                  {"model", endpoint_.model_name},
                                  {"path", path},
                                  {"request", body},
                                  {"status", res.status},
                                  {"attempt", attempt},
                                  {"latency_ms", latency.count()}};
            if (res.status == 200) {
                rec["response"] = reply;
                if (reply.contains("usage")) rec["usage"] = reply["usage"];
            } else {
                rec["error_body"] = res.body;
            }
            journal_->append(rec);
        }
        if (res.status == 200) return {std::move(reply), attempt};
        last_error = "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200);
        if (!transient_status(res.status)) {
            throw BackendError(BackendError::Kind::protocol, endpoint_.base_url + path + " " + last_error);
        }
        last_kind = BackendError::Kind::exhausted;
    }
    throw BackendError(last_kind, endpoint_.base_url + path + ": gave up after " +
                                      std::to_string(endpoint_.max_retries + 1) + " attempts: " + last_error);
}

ChatResponse LlmClient::complete(const ChatRequest& request) {
    request.validate();
    nlohmann::json body = {{"model", endpoint_.model_name},
                           {"temperature", request.temperature},
                           {"max_tokens", request.max_tokens},
                           {"logprobs", request.logprobs}};
    auto& msgs = body["messages"] = nlohmann::json::array();
    for (const auto& m : request.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    if (request.seed) body["seed"] = *request.seed;

    auto [reply, attempts] = exchange("/v1/chat/completions", body);
    ChatResponse out;
    out.attempts = attempts;
    try {
        const auto& choice = reply.at("choices").at(0);
        const auto& content = choice.at("message").at("content");
        out.text = content.is_null() ? std::string() : content.get<std::string>();
        if (request.logprobs) {
            auto lp = choice.find("logprobs");
            if (lp == choice.end() || lp->is_null() || !lp->contains("content")) {
                throw BackendError(BackendError::Kind::unsupported, endpoint_.model_name + " returned no logprobs");
            }
            std::vector<TokenLogprob> tokens;
            for (const auto& t : lp->at("content")) {
                tokens.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
            }
            out.token_logprobs = std::move(tokens);
        }
        if (auto u = reply.find("usage"); u != reply.end() && u->is_object()) {
            out.usage.prompt_tokens = u->value("prompt_tokens", std::size_t{0});
            out.usage.completion_tokens = u->value("completion_tokens", std::size_t{0});
        }
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(BackendError::Kind::protocol, std::string("malformed chat reply: ") + e.what());
    }
    return out;
}

std::vector<ContinuationScore> LlmClient::score_continuations(const std::string& prompt,
                                                              const std::vector<std::string>& continuations) {
    if (continuations.empty()) throw ValidationError("score_continuations needs at least one continuation");
    std::vector<ContinuationScore> scores;
    scores.reserve(continuations.size());
    for (const auto& cont : continuations) {
        nlohmann::json body = {{"model", endpoint_.model_name}, {"prompt", prompt + cont}, {"max_tokens", 0},
                               {"echo", true},                  {"logprobs", 0},         {"temperature", 0}};
        auto [reply, attempts] = exchange("/v1/completions", body);
        (void)attempts;
        ContinuationScore s;
        try {
            const auto& choice = reply.at("choices").at(0);
            auto lp = choice.find("logprobs");
            if (lp == choice.end() || lp->is_null()) {
                throw BackendError(BackendError::Kind::unsupported, endpoint_.model_name + " returned no logprobs");
            }
            const auto& offsets = lp->at("text_offset");
            const auto& values = lp->at("token_logprobs");
            if (offsets.size() != values.size()) {
                throw BackendError(BackendError::Kind::protocol, "logprob arrays differ in length");
            }
            for (std::size_t i = 0; i < offsets.size(); ++i) {
                if (offsets[i].get<std::size_t>() < prompt.size()) continue;
                if (values[i].is_null()) throw BackendError(BackendError::Kind::protocol, "null continuation logprob");
                s.sum_logprob += values[i].get<double>();
                ++s.num_tokens;
            }
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(BackendError::Kind::protocol, std::string("malformed completions reply: ") + e.what());
        }
        if (s.num_tokens == 0) {
            throw BackendError(BackendError::Kind::protocol, "continuation '" + cont + "' produced no tokens");
        }
        scores.push_back(s);
    }
    return scores;
}

} // namespace kinj
