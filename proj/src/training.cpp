// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/training.hpp"

#include <cmath>
#include <numbers>
#include <thread>

#include "kinj/error.hpp"
#include "kinj/hashing.hpp"

namespace kinj {

void Hyperparams::validate() const {
    if (batch_size == 0) throw ValidationError("hyperparams.batch_size: must be positive");
    if (!(peak_lr > 0.0)) throw ValidationError("hyperparams.peak_lr: must be positive");
    if (min_lr < 0.0 || min_lr > peak_lr) throw ValidationError("hyperparams.min_lr: must be in [0, peak_lr]");
    if (epochs != 2) throw ValidationError("hyperparams.epochs: the warmup/decay schedule spans exactly 2 epochs");
    if (optimizer != "adamw") throw ValidationError("hyperparams.optimizer: only adamw is supported");
}

nlohmann::json to_json(const Hyperparams& hp) {
    return {{"batch_size", hp.batch_size}, {"peak_lr", hp.peak_lr}, {"min_lr", hp.min_lr},
            {"epochs", hp.epochs},         {"optimizer", hp.optimizer}, {"weight_decay", hp.weight_decay},
            {"beta1", hp.beta1},           {"beta2", hp.beta2},     {"eps", hp.eps}};
}

Hyperparams hyperparams_from_json(const nlohmann::json& j) {
    Hyperparams hp;
    try {
        hp.batch_size = j.value("batch_size", hp.batch_size);
        hp.peak_lr = j.value("peak_lr", hp.peak_lr);
        hp.min_lr = j.value("min_lr", hp.min_lr);
        hp.epochs = j.value("epochs", hp.epochs);
        hp.optimizer = j.value("optimizer", hp.optimizer);
        hp.weight_decay = j.value("weight_decay", hp.weight_decay);
        hp.beta1 = j.value("beta1", hp.beta1);
        hp.beta2 = j.value("beta2", hp.beta2);
        hp.eps = j.value("eps", hp.eps);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("hyperparams: ") + e.what());
    }
    hp.validate();
    return hp;
}

LrSchedule plan_schedule(std::size_t num_examples, const Hyperparams& hp) {
    hp.validate();
    if (num_examples == 0) throw ValidationError("cannot plan a schedule for zero examples");
    const std::size_t steps = (num_examples + hp.batch_size - 1) / hp.batch_size;
    return LrSchedule{steps, steps, hp.peak_lr, hp.min_lr};
}

double lr_at_step(const LrSchedule& s, std::size_t t) {
    if (s.steps_epoch1 == 0 || s.steps_epoch2 == 0) throw ValidationError("schedule phases must be non-empty");
    if (t >= s.total_steps()) {
        throw ValidationError("step " + std::to_string(t) + " outside schedule of " + std::to_string(s.total_steps()));
    }
    if (t < s.steps_epoch1) {
        // The ratio is exactly 1.0 at t = S1 - 1, so the last warmup step hits peak_lr exactly.
        return s.peak_lr * (static_cast<double>(t + 1) / static_cast<double>(s.steps_epoch1));
    }
    const double u = static_cast<double>(t - s.steps_epoch1 + 1) / static_cast<double>(s.steps_epoch2);
    return s.min_lr + (s.peak_lr - s.min_lr) * (1.0 + std::cos(std::numbers::pi * u)) / 2.0;
}

nlohmann::json TrainingManifest::to_json() const {
    nlohmann::json ex = nlohmann::json::array();
    for (const auto& e : examples) {
        ex.push_back({{"text", e.text},
                      {"provenance",
                       {{"source", e.provenance.source},
                        {"doc_id", e.provenance.doc_id},
                        {"recipe", e.provenance.recipe},
                        {"style", e.provenance.style},
                        {"round", e.provenance.round},
                        {"variant", e.provenance.variant}}}});
    }
    nlohmann::json lrs = nlohmann::json::array();
    for (std::size_t t = 0; t < schedule.total_steps(); ++t) lrs.push_back(lr_at_step(schedule, t));
    return {{"run_id", run_id},
            {"base_model", base_model},
            {"recipe", recipe},
            {"variations_n", variations_n},
            {"seed", seed},
            {"total_tokens", total_tokens},
            {"hyperparams", kinj::to_json(hyperparams)},
            {"schedule",
             {{"steps_epoch1", schedule.steps_epoch1},
              {"steps_epoch2", schedule.steps_epoch2},
              {"peak_lr", schedule.peak_lr},
              {"min_lr", schedule.min_lr},
              {"lr_by_step", lrs}}},
            {"examples", ex}};
}

TrainingManifest TrainingManifest::from_json(const nlohmann::json& j) {
    TrainingManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        m.base_model = j.at("base_model").get<std::string>();
        m.recipe = j.value("recipe", std::string());
        m.variations_n = j.value("variations_n", std::size_t{0});
        m.seed = j.at("seed").get<std::int64_t>();
        m.total_tokens = j.at("total_tokens").get<std::size_t>();
        m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
        const auto& s = j.at("schedule");
        m.schedule = {s.at("steps_epoch1").get<std::size_t>(), s.at("steps_epoch2").get<std::size_t>(),
                      s.at("peak_lr").get<double>(), s.at("min_lr").get<double>()};
        for (const auto& e : j.at("examples")) {
            const auto& p = e.at("provenance");
            m.examples.push_back({e.at("text").get<std::string>(),
                                  {p.at("source").get<std::string>(), p.at("doc_id").get<std::string>(),
                                   p.value("recipe", std::string()), p.value("style", std::string()),
                                   p.value("round", std::size_t{0}), p.value("variant", std::size_t{0})}});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("manifest: ") + e.what());
    }
    if (m.examples.empty()) throw ValidationError("manifest: no examples");
    return m;
}

TrainingManifest build_manifest(const TrainingSet& ts, const Hyperparams& hp, const std::string& base_model,
                                std::int64_t seed) {
    if (ts.size() == 0) throw ValidationError("cannot build a manifest from an empty training set");
    TrainingManifest m;
    m.base_model = base_model;
    m.recipe = to_string(ts.recipe.kind);
    m.variations_n = ts.recipe.kind == RecipeKind::cpt ? 0 : ts.recipe.variations;
    m.hyperparams = hp;
    m.schedule = plan_schedule(ts.size(), hp);
    m.total_tokens = ts.total_tokens;
    m.seed = seed;
    for (const auto& d : ts.originals) m.examples.push_back({d.text, {"original", d.id, m.recipe, "", 0, 0}});
    for (const auto& s : ts.synthetic) {
        m.examples.push_back(
            {s.text, {"synthetic", s.doc_id, to_string(s.recipe_kind), to_string(s.style_tag), s.round, s.variant}});
    }
    m.run_id = "run-" + hex64(fnv1a64(m.to_json().dump()));
    return m;
}

std::string to_string(JobState state) {
    switch (state) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::succeeded: return "succeeded";
        case JobState::failed: return "failed";
    }
    return "?";
}

JobState job_state_from_string(const std::string& name) {
    for (auto s : {JobState::queued, JobState::running, JobState::succeeded, JobState::failed}) {
        if (to_string(s) == name) return s;
    }
    throw BackendError(BackendError::Kind::protocol, "unknown job state '" + name + "'");
}

nlohmann::json JobStatus::to_json() const {
    nlohmann::json steps_json = nlohmann::json::array();
    for (const auto& s : steps) steps_json.push_back({{"step", s.step}, {"lr", s.lr}, {"loss", s.loss}});
    nlohmann::json j = {{"run_id", run_id},           {"state", to_string(state)},
                        {"current_step", current_step}, {"reported_lr", reported_lr},
                        {"train_loss", train_loss},   {"steps", steps_json}};
    if (artifact_ref) j["artifact_ref"] = *artifact_ref;
    if (!reason.empty()) j["reason"] = reason;
    return j;
}

JobStatus JobStatus::from_json(const nlohmann::json& j) {
    JobStatus s;
    try {
        s.run_id = j.value("run_id", std::string());
        s.state = job_state_from_string(j.at("state").get<std::string>());
        s.current_step = j.value("current_step", std::size_t{0});
        s.reported_lr = j.value("reported_lr", 0.0);
        s.train_loss = j.value("train_loss", 0.0);
        if (j.contains("artifact_ref") && !j["artifact_ref"].is_null()) {
            s.artifact_ref = j["artifact_ref"].get<std::string>();
        }
        s.reason = j.value("reason", std::string());
        for (const auto& r : j.value("steps", nlohmann::json::array())) {
            s.steps.push_back({r.at("step").get<std::size_t>(), r.at("lr").get<double>(), r.at("loss").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(BackendError::Kind::protocol, std::string("malformed job status: ") + e.what());
    }
    return s;
}

std::vector<LrMismatch> check_reported_lrs(const LrSchedule& schedule, const std::vector<StepRecord>& steps,
                                           double rel_tol) {
    std::vector<LrMismatch> out;
    for (const auto& s : steps) {
        if (s.step >= schedule.total_steps()) {
            out.push_back({s.step, std::nan(""), s.lr});
            continue;
        }
        const double expected = lr_at_step(schedule, s.step);
        if (!(std::abs(s.lr - expected) <= rel_tol * std::abs(expected) + 1e-15)) {
            out.push_back({s.step, expected, s.lr});
        }
    }
    return out;
}

TrainerClient::TrainerClient(EndpointConfig endpoint, std::shared_ptr<Transport> transport)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)) {
    if (endpoint_.base_url.empty()) throw ValidationError("trainer.base_url: required");
    if (!transport_) transport_ = make_transport(endpoint_.base_url, endpoint_.api_key);
}

nlohmann::json TrainerClient::call(bool post, const std::string& path, const std::string& body) {
    std::string last;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(endpoint_.backoff_base * (1 << (attempt - 1)));
        HttpResult res;
        try {
            res = post ? transport_->post(path, body, endpoint_.timeout) : transport_->get(path, endpoint_.timeout);
        } catch (const BackendError& e) {
            if (e.kind() != BackendError::Kind::timeout && e.kind() != BackendError::Kind::unreachable) throw;
            last = e.what();
            continue;
        }
        if (res.status == 200) {
            auto j = nlohmann::json::parse(res.body, nullptr, false);
            if (j.is_discarded()) throw BackendError(BackendError::Kind::protocol, "trainer reply is not JSON");
            return j;
        }
        last = "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200);
        if (res.status < 500 && res.status != 429) {
            throw BackendError(BackendError::Kind::protocol, "trainer " + path + " " + last);
        }
    }
    throw BackendError(BackendError::Kind::unreachable, "trainer " + path + ": " + last);
}

std::string TrainerClient::submit_job(const TrainingManifest& manifest) {
    auto reply = call(true, "/v1/jobs", manifest.to_json().dump());
    if (!reply.contains("run_id")) throw BackendError(BackendError::Kind::protocol, "trainer reply lacks run_id");
    return reply["run_id"].get<std::string>();
}

JobStatus TrainerClient::poll_job(const std::string& run_id) {
    return JobStatus::from_json(call(false, "/v1/jobs/" + run_id, ""));
}

EndpointConfig TrainerClient::artifact(const std::string& run_id) {
    auto reply = call(false, "/v1/jobs/" + run_id + "/artifact", "");
    EndpointConfig e = endpoint_;
    try {
        e.model_name = reply.at("model_name").get<std::string>();
        e.base_url = reply.value("base_url", endpoint_.base_url);
    } catch (const nlohmann::json::exception& ex) {
        throw BackendError(BackendError::Kind::protocol, std::string("malformed artifact reply: ") + ex.what());
    }
    return e;
}

JobOutcome TrainerClient::run(const TrainingManifest& manifest, std::chrono::milliseconds poll_interval,
                              std::chrono::milliseconds max_wait) {
    JobOutcome out;
    const auto run_id = submit_job(manifest);
    const auto deadline = std::chrono::steady_clock::now() + max_wait;
    int last_rank = 0;
    for (;;) {
        out.status = poll_job(run_id);
        const int rank = static_cast<int>(out.status.state);
        if (rank < last_rank) {
            out.failure = "job state went backwards to " + to_string(out.status.state);
            return out;
        }
        last_rank = rank;
        if (out.status.state == JobState::succeeded || out.status.state == JobState::failed) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            out.failure = "timed out waiting for job " + run_id;
            return out;
        }
        std::this_thread::sleep_for(poll_interval);
    }
    out.mismatches = check_reported_lrs(manifest.schedule, out.status.steps);
    if (out.status.state == JobState::failed) {
        out.failure = "trainer failed: " + out.status.reason;
    } else if (!out.mismatches.empty()) {
        out.failure = std::to_string(out.mismatches.size()) + " learning-rate mismatch(es), first at step " +
                      std::to_string(out.mismatches.front().step);
    } else if (out.status.steps.size() != manifest.schedule.total_steps()) {
        out.failure = "trainer reported " + std::to_string(out.status.steps.size()) + " of " +
                      std::to_string(manifest.schedule.total_steps()) + " steps";
    } else if (!out.status.artifact_ref) {
        out.failure = "succeeded job has no artifact_ref";
    }
    return out;
}

} // namespace kinj
