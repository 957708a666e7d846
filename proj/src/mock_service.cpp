// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/mock_service.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "kinj/error.hpp"
#include "kinj/hashing.hpp"
#include "kinj/jsonl.hpp"
#include "kinj/retrieval.hpp"
#include "kinj/textproc.hpp"
#include "kinj/training.hpp"

namespace kinj {

namespace {

using nlohmann::json;

HttpResult ok(const json& j) { return {200, j.dump()}; }
HttpResult error(int status, const std::string& message) {
    return {status, json{{"error", {{"message", message}}}}.dump()};
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            if (auto t = trim(cur); !t.empty()) out.push_back(t);
            cur.clear();
            continue;
        }
        cur += c;
        const bool boundary = i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n';
        if ((c == '.' || c == '!' || c == '?') && boundary) {
            if (auto t = trim(cur); !t.empty()) out.push_back(t);
            cur.clear();
        }
    }
    if (auto t = trim(cur); !t.empty()) out.push_back(t);
    return out;
}

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {"a",  "an",  "the", "of",   "in",   "on",    "to",    "at",
                                                "by", "for", "and", "or",   "is",   "was",   "were",  "are",
                                                "did", "do", "does", "what", "who", "whom", "when", "where",
                                                "which", "how", "why", "with", "from", "that", "this", "it"};
    return words;
}

std::set<std::string> content_terms(std::string_view text) {
    std::set<std::string> out;
    for (auto& t : analyze(text)) {
        if (!stopwords().count(t)) out.insert(std::move(t));
    }
    return out;
}

std::string between(const std::string& text, std::string_view open, std::string_view close, bool last_open) {
    auto b = last_open ? text.rfind(open) : text.find(open);
    if (b == std::string::npos) return {};
    b += open.size();
    auto e = close.empty() ? std::string::npos : text.find(close, b);
    return text.substr(b, e == std::string::npos ? std::string::npos : e - b);
}

std::string last_user_message(const json& req) {
    const auto& msgs = req.at("messages");
    for (auto it = msgs.rbegin(); it != msgs.rend(); ++it) {
        if (it->value("role", "") == "user") return it->at("content").get<std::string>();
    }
    return {};
}

std::string judge_reply(const std::string& prompt) {
    auto reference = trim(between(prompt, "Reference answer:", "\nCandidate answer:", false));
    auto cand_start = prompt.find("Candidate answer:");
    std::string candidate;
    if (cand_start != std::string::npos) {
        cand_start += std::string_view("Candidate answer:").size();
        auto cand_end = prompt.rfind("\n\n");
        if (cand_end == std::string::npos || cand_end < cand_start) cand_end = prompt.size();
        candidate = trim(std::string_view(prompt).substr(cand_start, cand_end - cand_start));
    }
    auto ref_terms = analyze(reference);
    auto cand_list = analyze(candidate);
    std::set<std::string> cand_terms(cand_list.begin(), cand_list.end());
    bool correct = !ref_terms.empty() &&
                   std::all_of(ref_terms.begin(), ref_terms.end(), [&](const auto& t) { return cand_terms.count(t) > 0; });
    return correct ? "The candidate contains every fact in the reference.\nVERDICT: CORRECT"
                   : "The candidate does not state the reference facts.\nVERDICT: INCORRECT";
}

std::string generator_reply(const std::string& prompt, std::int64_t seed, double temperature) {
    auto sents = sentences(prompt);
    if (sents.empty()) return {};
    const std::size_t shift = temperature > 0.0 ? static_cast<std::size_t>(seed) % sents.size() : 0;
    std::rotate(sents.begin(), sents.begin() + static_cast<std::ptrdiff_t>(shift), sents.end());
    std::string out;
    if (prompt.find("question-and-answer") != std::string::npos) {
        for (const auto& s : sents) {
            auto terms = analyze(s);
            if (terms.size() < 3) continue;
            if (!out.empty()) out += "\n\n";
            out += "Q: What is reported about " + terms[0] + " " + terms[1] + " " + terms[2] + "?\nA: " + s;
        }
        return out;
    }
    for (const auto& s : sents) {
        if (!out.empty()) out += ' ';
        out += s;
    }
    return out;
}

std::string instruct_reply(const std::string& prompt, std::int64_t seed) {
    auto doc = prompt;
    if (auto pos = prompt.rfind("Text:\n"); pos != std::string::npos) doc = prompt.substr(pos + 6);
    auto sents = sentences(doc);
    if (sents.empty()) return "I cannot help with that.";
    std::string out;
    const std::size_t start = static_cast<std::size_t>(seed) % sents.size();
    for (std::size_t k = 0; k < std::min<std::size_t>(2, sents.size()); ++k) {
        const auto& s = sents[(start + k) % sents.size()];
        auto terms = analyze(s);
        std::string topic;
        for (std::size_t i = 0; i < std::min<std::size_t>(3, terms.size()); ++i) topic += (i ? " " : "") + terms[i];
        out += "<QUE> What does the text say about " + topic + "? <ANS> " + s + " </END>\n";
    }
    return out;
}

} // namespace

MockService::MockService(std::filesystem::path state_dir) : state_dir_(std::move(state_dir)) {}

MockService& MockService::shared() {
    static MockService instance;
    return instance;
}

void MockService::set_chat_handler(const std::string& model, ChatHandler handler) {
    std::lock_guard lock(mu_);
    handlers_[model] = std::move(handler);
}

void MockService::set_token_logprob(const std::string& token, double logprob) {
    std::lock_guard lock(mu_);
    logprob_table_[token] = logprob;
}

void MockService::set_default_logprob(std::optional<double> logprob) {
    std::lock_guard lock(mu_);
    default_logprob_ = logprob;
}

void MockService::set_logprobs_supported(bool supported) {
    std::lock_guard lock(mu_);
    logprobs_supported_ = supported;
}

void MockService::fail_next(int count, int status) {
    fail_status_ = status;
    fail_remaining_ = count;
}

void MockService::set_delay(std::chrono::milliseconds delay) {
    std::lock_guard lock(mu_);
    delay_ = delay;
}

void MockService::set_lr_perturbation(std::optional<std::pair<std::size_t, double>> perturbation) {
    std::lock_guard lock(mu_);
    lr_perturbation_ = perturbation;
}

void MockService::set_state_dir(std::filesystem::path dir) {
    std::lock_guard lock(mu_);
    state_dir_ = std::move(dir);
}

void MockService::set_artifact_base_url(std::string url) {
    std::lock_guard lock(mu_);
    artifact_base_url_ = std::move(url);
}

void MockService::reset() {
    std::lock_guard lock(mu_);
    handlers_.clear();
    logprob_table_.clear();
    default_logprob_.reset();
    logprobs_supported_ = true;
    delay_ = std::chrono::milliseconds(0);
    lr_perturbation_.reset();
    jobs_.clear();
    memory_.clear();
    state_dir_.clear();
    artifact_base_url_ = "mock://";
    fail_remaining_ = 0;
    in_flight_ = 0;
    peak_in_flight_ = 0;
    requests_ = 0;
}

double MockService::hashed_logprob(const std::string& model, const std::string& token) {
    // Trained variants share the base model's scores so control accuracy is comparable.
    auto base = model.substr(0, model.find('@'));
    return -0.5 - static_cast<double>(hash_parts(base, token) % 5000) / 1000.0;
}

double MockService::token_logprob(const std::string& model, const std::string& token) const {
    std::lock_guard lock(mu_);
    if (auto it = logprob_table_.find(token); it != logprob_table_.end()) return it->second;
    if (default_logprob_) return *default_logprob_;
    return hashed_logprob(model, token);
}

HttpResult MockService::handle_post(const std::string& path, const std::string& body) {
    ++requests_;
    const int now = ++in_flight_;
    int peak = peak_in_flight_.load();
    while (now > peak && !peak_in_flight_.compare_exchange_weak(peak, now)) {
    }
    struct Leave {
        std::atomic<int>& n;
        ~Leave() { --n; }
    } leave{in_flight_};

    std::chrono::milliseconds delay;
    {
        std::lock_guard lock(mu_);
        delay = delay_;
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);

    for (int left = fail_remaining_.load(); left > 0;) {
        if (fail_remaining_.compare_exchange_weak(left, left - 1)) return error(fail_status_.load(), "injected failure");
    }

    json req = json::parse(body, nullptr, false);
    if (req.is_discarded() || !req.is_object()) return error(400, "body is not a JSON object");
    try {
        if (path == "/v1/chat/completions") return chat(req);
        if (path == "/v1/completions") return completions(req);
        if (path == "/v1/tokenize") return tokenize(req);
        if (path == "/v1/jobs") return submit_job(req);
    } catch (const json::exception& e) {
        return error(400, e.what());
    }
    return error(404, "no route " + path);
}

HttpResult MockService::handle_get(const std::string& path) {
    ++requests_;
    constexpr std::string_view prefix = "/v1/jobs/";
    if (!starts_with(path, prefix)) return error(404, "no route " + path);
    auto rest = path.substr(prefix.size());
    constexpr std::string_view artifact_suffix = "/artifact";
    if (rest.size() > artifact_suffix.size() &&
        rest.compare(rest.size() - artifact_suffix.size(), artifact_suffix.size(), artifact_suffix) == 0) {
        return job_artifact(rest.substr(0, rest.size() - artifact_suffix.size()));
    }
    return job_status(rest);
}

HttpResult MockService::chat(const json& req) {
    const auto model = req.at("model").get<std::string>();
    const auto prompt = last_user_message(req);
    const double temperature = req.value("temperature", 0.0);
    const std::int64_t seed = req.value("seed", std::int64_t{0});

    ChatHandler custom;
    {
        std::lock_guard lock(mu_);
        if (auto it = handlers_.find(model); it != handlers_.end()) custom = it->second;
    }
    std::string text;
    if (custom) {
        text = custom(req);
    } else if (starts_with(model, "mock-echo")) {
        text = prompt;
    } else if (starts_with(model, "mock-judge")) {
        text = judge_reply(prompt);
    } else if (starts_with(model, "mock-subject")) {
        text = subject_reply(model, prompt);
    } else if (starts_with(model, "mock-generator")) {
        text = generator_reply(prompt, seed, temperature);
    } else if (starts_with(model, "mock-instruct")) {
        text = instruct_reply(prompt, seed);
    } else {
        return error(404, "unknown model '" + model + "'");
    }

    std::size_t prompt_tokens = 0;
    for (const auto& m : req.at("messages")) {
        prompt_tokens += count_tokens(m.at("content").get<std::string>(), TokenizerSpec{});
    }
    json choice = {{"index", 0}, {"finish_reason", "stop"}, {"message", {{"role", "assistant"}, {"content", text}}}};
    if (req.value("logprobs", false)) {
        bool supported;
        {
            std::lock_guard lock(mu_);
            supported = logprobs_supported_;
        }
        if (supported) {
            json content = json::array();
            for (const auto& span : kinj::tokenize(text, TokenizerSpec{})) {
                auto tok = text.substr(span.begin, span.end - span.begin);
                content.push_back({{"token", tok}, {"logprob", token_logprob(model, tok)}});
            }
            choice["logprobs"] = {{"content", content}};
        } else {
            choice["logprobs"] = nullptr;
        }
    }
    return ok({{"object", "chat.completion"},
               {"model", model},
               {"choices", json::array({choice})},
               {"usage",
                {{"prompt_tokens", prompt_tokens},
                 {"completion_tokens", count_tokens(text, TokenizerSpec{})},
                 {"total_tokens", prompt_tokens + count_tokens(text, TokenizerSpec{})}}}});
}

HttpResult MockService::completions(const json& req) {
    const auto model = req.at("model").get<std::string>();
    const auto prompt = req.at("prompt").get<std::string>();
    bool supported;
    {
        std::lock_guard lock(mu_);
        supported = logprobs_supported_;
    }
    json choice = {{"index", 0}, {"text", req.value("echo", false) ? prompt : std::string()}, {"finish_reason", "length"}};
    if (!supported || !req.contains("logprobs") || req["logprobs"].is_null()) {
        choice["logprobs"] = nullptr;
    } else {
        json tokens = json::array(), lps = json::array(), offsets = json::array();
        bool first = true;
        for (const auto& span : kinj::tokenize(prompt, TokenizerSpec{})) {
            auto tok = prompt.substr(span.begin, span.end - span.begin);
            tokens.push_back(tok);
            offsets.push_back(span.begin);
            if (first) {
                lps.push_back(nullptr);
                first = false;
            } else {
                lps.push_back(token_logprob(model, tok));
            }
        }
        choice["logprobs"] = {{"tokens", tokens}, {"token_logprobs", lps}, {"text_offset", offsets}};
    }
    return ok({{"object", "text_completion"}, {"model", model}, {"choices", json::array({choice})}});
}

HttpResult MockService::tokenize(const json& req) {
    const auto text = req.at("text").get<std::string>();
    json bounds = json::array();
    for (const auto& s : kinj::tokenize(text, TokenizerSpec{})) bounds.push_back({s.begin, s.end});
    return ok({{"count", bounds.size()}, {"boundaries", bounds}});
}

std::string MockService::subject_reply(const std::string& model, const std::string& prompt) {
    const auto question = trim(between(prompt, "Question:", "\nAnswer:", true));
    const auto q_terms = content_terms(question);

    std::vector<std::string> candidates;
    auto ctx_begin = prompt.find("[Context ");
    auto ctx_end = prompt.rfind("Question:");
    if (ctx_begin != std::string::npos && ctx_end != std::string::npos && ctx_begin < ctx_end) {
        for (auto& s : sentences(std::string_view(prompt).substr(ctx_begin, ctx_end - ctx_begin))) {
            if (!starts_with(s, "[Context ")) candidates.push_back(std::move(s));
        }
    }
    if (auto at = model.find('@'); at != std::string::npos) {
        for (const auto& text : memory_for(model.substr(at + 1))) {
            for (auto& s : sentences(text)) candidates.push_back(std::move(s));
        }
    }

    std::size_t best_score = 0;
    const std::string* best = nullptr;
    for (const auto& s : candidates) {
        auto terms = content_terms(s);
        std::size_t score = 0;
        for (const auto& t : q_terms) score += terms.count(t);
        if (score > best_score) {
            best_score = score;
            best = &s;
        }
    }
    if (best == nullptr || best_score < 2) return "I don't know.";
    return *best;
}

std::vector<std::string> MockService::memory_for(const std::string& run_id) {
    std::filesystem::path dir;
    {
        std::lock_guard lock(mu_);
        if (auto it = memory_.find(run_id); it != memory_.end()) return it->second;
        dir = state_dir_;
    }
    std::vector<std::string> texts;
    if (!dir.empty()) {
        auto file = dir / "jobs" / (run_id + ".json");
        if (std::filesystem::exists(file)) {
            auto j = json::parse(read_text_file(file));
            for (const auto& e : j.at("manifest").at("examples")) texts.push_back(e.at("text").get<std::string>());
        }
    }
    std::lock_guard lock(mu_);
    memory_[run_id] = texts;
    return texts;
}

HttpResult MockService::submit_job(const json& manifest) {
    TrainingManifest parsed;
    try {
        parsed = TrainingManifest::from_json(manifest);
    } catch (const ValidationError& e) {
        return error(400, e.what());
    }
    std::vector<std::string> texts;
    for (const auto& e : parsed.examples) texts.push_back(e.text);
    std::filesystem::path dir;
    {
        std::lock_guard lock(mu_);
        jobs_[parsed.run_id] = Job{manifest, 0};
        memory_[parsed.run_id] = texts;
        dir = state_dir_;
    }
    if (!dir.empty()) {
        write_text_file(dir / "jobs" / (parsed.run_id + ".json"), json{{"manifest", manifest}}.dump());
    }
    return ok({{"run_id", parsed.run_id}});
}

HttpResult MockService::job_status(const std::string& run_id) {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(run_id);
    if (it == jobs_.end()) return error(404, "unknown job '" + run_id + "'");
    auto& job = it->second;
    ++job.polls;
    auto manifest = TrainingManifest::from_json(job.manifest);
    const auto total = manifest.schedule.total_steps();

    JobStatus status;
    status.run_id = run_id;
    std::size_t reported = 0;
    if (job.polls == 1) {
        status.state = JobState::queued;
    } else if (job.polls == 2) {
        status.state = JobState::running;
        reported = total / 2;
    } else {
        status.state = JobState::succeeded;
        reported = total;
        status.artifact_ref = "mock-subject@" + run_id;
    }
    const std::size_t per_epoch = manifest.schedule.steps_epoch1;
    for (std::size_t t = 0; t < reported; ++t) {
        double lr = lr_at_step(manifest.schedule, t);
        if (lr_perturbation_ && lr_perturbation_->first == t) lr *= 1.0 + lr_perturbation_->second;
        const double epoch_progress = static_cast<double>(t) / static_cast<double>(per_epoch);
        status.steps.push_back({t, lr, 3.0 / (1.0 + 0.5 * epoch_progress)});
    }
    if (!status.steps.empty()) {
        status.current_step = status.steps.back().step;
        status.reported_lr = status.steps.back().lr;
        status.train_loss = status.steps.back().loss;
    }
    return ok(status.to_json());
}

HttpResult MockService::job_artifact(const std::string& run_id) {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(run_id);
    if (it == jobs_.end()) return error(404, "unknown job '" + run_id + "'");
    if (it->second.polls < 3) return error(409, "job has not succeeded");
    return ok({{"model_name", "mock-subject@" + run_id}, {"base_url", artifact_base_url_}});
}

} // namespace kinj
