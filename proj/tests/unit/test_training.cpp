// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kinj/error.hpp"
#include "kinj/mock_service.hpp"
#include "kinj/training.hpp"
#include "util.hpp"

using namespace kinj;
using namespace std::chrono_literals;

namespace {

Corpus corpus_of(std::size_t docs) {
    Corpus c;
    for (std::size_t i = 0; i < docs; ++i) {
        c.documents.push_back({"d" + std::to_string(i), "document number " + std::to_string(i) + " text", {}, "x", 0});
    }
    return c;
}

TrainingManifest manifest_of(std::size_t docs, std::int64_t seed = 3) {
    auto corpus = corpus_of(docs);
    auto recipe = make_recipe(RecipeKind::cpt, 0, PromptLibrary::defaults());
    auto ts = assemble_training_set(corpus, {}, recipe, TokenizerSpec{});
    Hyperparams hp;
    hp.batch_size = 4;
    return build_manifest(ts, hp, "base-model", seed);
}

EndpointConfig trainer_endpoint() {
    EndpointConfig e;
    e.base_url = "mock://local";
    e.model_name = "mock-trainer";
    e.backoff_base = 1ms;
    return e;
}

} // namespace

TEST_CASE("schedule plan uses ceil(n / batch) steps per epoch") {
    Hyperparams hp;
    hp.batch_size = 8;
    CHECK(plan_schedule(117, hp).steps_epoch1 == 15);
    CHECK(plan_schedule(117, hp).steps_epoch2 == 15);
    CHECK(plan_schedule(120, hp).steps_epoch1 == 15);
    CHECK(plan_schedule(121, hp).steps_epoch1 == 16);
    CHECK(plan_schedule(1, hp).total_steps() == 2);
    CHECK_THROWS_AS(plan_schedule(0, hp), ValidationError);
}

TEST_CASE("hyperparameters reject anything but two epochs of AdamW") {
    Hyperparams hp;
    hp.epochs = 3;
    CHECK_THROWS_AS(hp.validate(), ValidationError);
    hp = Hyperparams{};
    hp.optimizer = "sgd";
    CHECK_THROWS_AS(hp.validate(), ValidationError);
    hp = Hyperparams{};
    hp.batch_size = 0;
    CHECK_THROWS_AS(hp.validate(), ValidationError);
    hp = Hyperparams{};
    hp.min_lr = 1e-3;
    CHECK_THROWS_AS(hp.validate(), ValidationError);
    CHECK(to_json(hyperparams_from_json(to_json(Hyperparams{}))) == to_json(Hyperparams{}));
}

TEST_CASE("lr closed forms for S1 = S2 = 15") {
    const LrSchedule s{15, 15, 5e-5, 0.0};
    CHECK(lr_at_step(s, 14) == 5e-5);
    CHECK(std::abs(lr_at_step(s, 0) - 5e-5 / 15) <= 1e-12 * (5e-5 / 15));
    CHECK(lr_at_step(s, 29) == 0.0);
    for (std::size_t t = 0; t < 15; ++t) {
        const double expected = 5e-5 * static_cast<double>(t + 1) / 15.0;
        CHECK(lr_at_step(s, t) == doctest::Approx(expected).epsilon(1e-14));
    }
    for (std::size_t t = 15; t < 30; ++t) {
        const double u = static_cast<double>(t - 15 + 1) / 15.0;
        const double expected = 5e-5 * (1 + std::cos(std::numbers::pi * u)) / 2;
        CHECK(lr_at_step(s, t) == doctest::Approx(expected).epsilon(1e-12).scale(1e-10));
        CHECK(lr_at_step(s, t) < lr_at_step(s, t - 1));
    }
    CHECK_THROWS_AS(lr_at_step(s, 30), ValidationError);
}

TEST_CASE("min lr floors the decay") {
    const LrSchedule s{3, 4, 1e-3, 1e-4};
    CHECK(lr_at_step(s, 6) == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(lr_at_step(s, 3) > 1e-4);
}

TEST_CASE("reported lrs are checked at 1e-6 relative") {
    const LrSchedule s{4, 4, 5e-5, 0.0};
    std::vector<StepRecord> steps;
    for (std::size_t t = 0; t < 8; ++t) steps.push_back({t, lr_at_step(s, t), 1.0});
    CHECK(check_reported_lrs(s, steps).empty());

    auto off = steps;
    off[2].lr *= 1 + 2e-6;
    auto m = check_reported_lrs(s, off);
    REQUIRE(m.size() == 1);
    CHECK(m[0].step == 2);

    auto close = steps;
    close[5].lr *= 1 + 5e-7;
    CHECK(check_reported_lrs(s, close).empty());

    auto zero = steps;
    zero[7].lr = 1e-9; // expected exactly 0
    CHECK(check_reported_lrs(s, zero).size() == 1);

    auto beyond = steps;
    beyond.push_back({8, 0.0, 1.0});
    CHECK(check_reported_lrs(s, beyond).size() == 1);
}

TEST_CASE("manifest is deterministic and content addressed") {
    auto a = manifest_of(10);
    auto b = manifest_of(10);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.run_id.rfind("run-", 0) == 0);
    CHECK(manifest_of(10, 4).run_id != a.run_id);
    CHECK(a.examples.size() == 10);
    CHECK(a.schedule.steps_epoch1 == 3);
    CHECK(a.total_tokens == 40);
    auto j = a.to_json();
    CHECK(j["schedule"]["lr_by_step"].size() == 6);
    CHECK(TrainingManifest::from_json(j).to_json() == j);
    j.erase("seed");
    CHECK_THROWS_AS(TrainingManifest::from_json(j), ValidationError);
}

TEST_CASE("job status JSON round trip") {
    JobStatus s;
    s.run_id = "run-1";
    s.state = JobState::running;
    s.current_step = 3;
    s.reported_lr = 1e-5;
    s.train_loss = 2.5;
    s.steps = {{0, 1e-6, 3.0}, {1, 2e-6, 2.9}};
    auto back = JobStatus::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
    CHECK_THROWS_AS(job_state_from_string("paused"), BackendError);
}

TEST_CASE("mock trainer rejects a manifest without a seed") {
    MockService::shared().reset();
    auto j = manifest_of(4).to_json();
    j.erase("seed");
    auto res = MockService::shared().handle_post("/v1/jobs", j.dump());
    CHECK(res.status == 400);
}

TEST_CASE("trainer client drives a job to success and returns the model handle") {
    MockService::shared().reset();
    TrainerClient trainer(trainer_endpoint());
    auto m = manifest_of(9);
    auto outcome = trainer.run(m, 0ms, 5s);
    CHECK(outcome.ok());
    CHECK(outcome.status.state == JobState::succeeded);
    CHECK(outcome.status.steps.size() == m.schedule.total_steps());
    CHECK(outcome.mismatches.empty());
    CHECK(outcome.status.steps.back().loss < outcome.status.steps.front().loss);
    auto model = trainer.artifact(m.run_id);
    CHECK(model.model_name == "mock-subject@" + m.run_id);
}

TEST_CASE("a trainer lr off by 2e-6 relative fails the run with a mismatch report") {
    MockService::shared().reset();
    MockService::shared().set_lr_perturbation(std::pair<std::size_t, double>{3, 2e-6});
    TrainerClient trainer(trainer_endpoint());
    auto outcome = trainer.run(manifest_of(9), 0ms, 5s);
    CHECK_FALSE(outcome.ok());
    REQUIRE(outcome.mismatches.size() == 1);
    CHECK(outcome.mismatches[0].step == 3);
    CHECK(outcome.failure.find("learning-rate") != std::string::npos);

    MockService::shared().set_lr_perturbation(std::pair<std::size_t, double>{3, 5e-7});
    CHECK(trainer.run(manifest_of(9), 0ms, 5s).ok());
    MockService::shared().reset();
}

TEST_CASE("unknown jobs and early artifact requests are backend errors") {
    MockService::shared().reset();
    TrainerClient trainer(trainer_endpoint());
    CHECK_THROWS_AS(trainer.poll_job("run-missing"), BackendError);
    auto m = manifest_of(5);
    auto id = trainer.submit_job(m);
    CHECK(id == m.run_id);
    CHECK_THROWS_AS(trainer.artifact(id), BackendError);
}
