// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinj/augment.hpp"
#include "kinj/llm.hpp"

namespace kinj {

struct Hyperparams {
    std::size_t batch_size = 8;
    double peak_lr = 5e-5;
    double min_lr = 0.0;
    int epochs = 2;
    std::string optimizer = "adamw";
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

nlohmann::json to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(const nlohmann::json& j);

/// Re-warmup over epoch one, cosine re-decay over epoch two.
struct LrSchedule {
    std::size_t steps_epoch1 = 1;
    std::size_t steps_epoch2 = 1;
    double peak_lr = 5e-5;
    double min_lr = 0.0;

    [[nodiscard]] std::size_t total_steps() const noexcept { return steps_epoch1 + steps_epoch2; }
};

/// One step per batch per epoch, final partial batch kept: S1 = S2 = ceil(n / batch_size).
LrSchedule plan_schedule(std::size_t num_examples, const Hyperparams& hp);

/// Warmup t < S1:  peak * (t + 1) / S1
/// Decay  t >= S1: min + (peak - min) * (1 + cos(pi * u)) / 2,  u = (t - S1 + 1) / S2
/// Throws ValidationError when t >= S1 + S2.
double lr_at_step(const LrSchedule& schedule, std::size_t global_step);

struct ExampleProvenance {
    std::string source; // "original" or "synthetic"
    std::string doc_id;
    std::string recipe;
    std::string style;
    std::size_t round = 0;
    std::size_t variant = 0;
};

struct ManifestExample {
    std::string text;
    ExampleProvenance provenance;
};

struct TrainingManifest {
    std::string run_id;
    std::string base_model;
    std::string recipe;
    std::size_t variations_n = 0;
    std::vector<ManifestExample> examples;
    Hyperparams hyperparams;
    LrSchedule schedule;
    std::size_t total_tokens = 0;
    std::int64_t seed = 0;

    [[nodiscard]] nlohmann::json to_json() const;
    static TrainingManifest from_json(const nlohmann::json& j);
};

/// Deterministic manifest; run_id is a content hash so identical inputs give identical bytes.
/// Throws ValidationError for an empty training set.
TrainingManifest build_manifest(const TrainingSet& ts, const Hyperparams& hp, const std::string& base_model,
                                std::int64_t seed);

enum class JobState { queued, running, succeeded, failed };

std::string to_string(JobState state);
JobState job_state_from_string(const std::string& name);

struct StepRecord {
    std::size_t step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct JobStatus {
    std::string run_id;
    JobState state = JobState::queued;
    std::size_t current_step = 0;
    double reported_lr = 0.0;
    double train_loss = 0.0;
    std::optional<std::string> artifact_ref;
    std::vector<StepRecord> steps;
    std::string reason;

    [[nodiscard]] nlohmann::json to_json() const;
    static JobStatus from_json(const nlohmann::json& j);
};

struct LrMismatch {
    std::size_t step = 0;
    double expected = 0.0;
    double reported = 0.0;
};

/// Relative tolerance for trainer-reported learning rates.
inline constexpr double kLrRelativeTolerance = 1e-6;

/// Steps whose reported lr differs from lr_at_step by more than `rel_tol` relative
/// (plus a 1e-15 absolute floor so an exact-zero expectation is checkable). Out-of-range steps mismatch.
std::vector<LrMismatch> check_reported_lrs(const LrSchedule& schedule, const std::vector<StepRecord>& steps,
                                           double rel_tol = kLrRelativeTolerance);

struct JobOutcome {
    JobStatus status;
    std::vector<LrMismatch> mismatches;
    std::string failure; // empty when the run succeeded and every lr matched

    [[nodiscard]] bool ok() const noexcept { return failure.empty(); }
};

/// Client for the trainer wire contract:
///   POST /v1/jobs                   manifest     -> {"run_id"}
///   GET  /v1/jobs/{run_id}                       -> JobStatus
///   GET  /v1/jobs/{run_id}/artifact              -> {"model_name", "base_url"}
class TrainerClient {
public:
    explicit TrainerClient(EndpointConfig endpoint, std::shared_ptr<Transport> transport = nullptr);

    std::string submit_job(const TrainingManifest& manifest);
    JobStatus poll_job(const std::string& run_id);
    /// Model handle of a succeeded job, usable as an EndpointConfig.
    EndpointConfig artifact(const std::string& run_id);

    /// Submits, polls until terminal, then cross-checks every reported lr.
    JobOutcome run(const TrainingManifest& manifest, std::chrono::milliseconds poll_interval,
                   std::chrono::milliseconds max_wait);

private:
    nlohmann::json call(bool post, const std::string& path, const std::string& body);

    EndpointConfig endpoint_;
    std::shared_ptr<Transport> transport_;
};

} // namespace kinj
