// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <map>
#include <sstream>

#include "kinj/cli.hpp"
#include "kinj/config.hpp"
#include "kinj/error.hpp"
#include "kinj/jsonl.hpp"
#include "kinj/mock_service.hpp"
#include "kinj/rundir.hpp"
#include "util.hpp"

using namespace kinj;
namespace fs = std::filesystem;

namespace {

json base_config(const fs::path& out_dir) {
    auto ep = [](const std::string& model) {
        return json{{"base_url", "mock://local"}, {"model_name", model}, {"backoff_ms", 1}};
    };
    return {{"paths",
             {{"corpus", test::fixture("docs.jsonl").string()},
              {"qa", test::fixture("qa.jsonl").string()},
              {"control_tasks", test::fixture("control.jsonl").string()},
              {"output_dir", out_dir.string()}}},
            {"endpoints",
             {{"subject", ep("mock-subject")},
              {"generator", ep("mock-generator")},
              {"ipt", ep("mock-instruct")},
              {"judge", ep("mock-judge")},
              {"trainer", ep("mock-trainer")}}},
            {"recipe", {{"kind", "para"}, {"n", 2}, {"max_tokens", 512}}},
            {"hyperparams", {{"batch_size", 4}}},
            {"retrieval", {{"chunk_size", 16}, {"chunk_overlap", 4}}},
            {"training", {{"poll_interval_ms", 0}, {"max_wait_ms", 10000}}},
            {"seed", 20240101}};
}

EnvLookup env_of(std::map<std::string, std::string> vars) {
    return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
        auto it = vars.find(name);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
}

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome kinj_cli(std::vector<std::string> args) {
    std::vector<const char*> argv{"kinj"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path write_config(const fs::path& dir, const json& cfg) {
    const auto p = dir / "config.json";
    test::write_file(p, cfg.dump(2));
    return p;
}

std::size_t regular_files(const fs::path& dir) {
    if (!fs::exists(dir)) return 0;
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
    return n;
}

} // namespace

TEST_CASE("config errors name the offending field") {
    auto dir = test::scratch("cfg_errors");
    auto env = env_of({});
    auto cfg = base_config(dir / "run");
    CHECK_NOTHROW(parse_config(cfg, dir, env));

    auto missing = cfg;
    missing["paths"].erase("corpus");
    CHECK_THROWS_WITH_AS(parse_config(missing, dir, env), doctest::Contains("paths.corpus"), ValidationError);

    auto k1 = cfg;
    k1["retrieval"]["k1"] = 0;
    CHECK_THROWS_WITH_AS(parse_config(k1, dir, env), doctest::Contains("retrieval.k1"), ValidationError);

    auto overlap = cfg;
    overlap["retrieval"]["chunk_overlap"] = 16;
    CHECK_THROWS_WITH_AS(parse_config(overlap, dir, env), doctest::Contains("retrieval.chunk_overlap"), ValidationError);

    auto judge = cfg;
    judge["endpoints"].erase("judge");
    CHECK_THROWS_WITH_AS(parse_config(judge, dir, env), doctest::Contains("endpoints.judge"), ValidationError);

    auto type = cfg;
    type["recipe"]["n"] = "two";
    CHECK_THROWS_WITH_AS(parse_config(type, dir, env), doctest::Contains("recipe.n"), ValidationError);

    auto seedless = cfg;
    seedless.erase("seed");
    CHECK_THROWS_WITH_AS(parse_config(seedless, dir, env), doctest::Contains("seed"), ValidationError);

    auto epochs = cfg;
    epochs["hyperparams"]["epochs"] = 3;
    CHECK_THROWS_WITH_AS(parse_config(epochs, dir, env), doctest::Contains("hyperparams"), ValidationError);

    auto recipe = cfg;
    recipe["recipe"]["kind"] = "rewrite";
    CHECK_THROWS_WITH_AS(parse_config(recipe, dir, env), doctest::Contains("recipe.kind"), ValidationError);

    test::write_file(dir / "broken.json", "{ not json");
    CHECK_THROWS_AS(load_config(dir / "broken.json", env), ValidationError);
    auto nowhere = cfg;
    nowhere["paths"]["qa"] = "missing.jsonl";
    CHECK_THROWS_WITH_AS(load_config(write_config(dir, nowhere), env), doctest::Contains("paths.qa"), ValidationError);
}

TEST_CASE("defaults, relative paths and the ipt fallback") {
    auto dir = test::scratch("cfg_defaults");
    auto cfg = base_config(dir / "run");
    cfg["endpoints"].erase("ipt");
    cfg["paths"]["output_dir"] = "runs/x";
    auto c = parse_config(cfg, dir, env_of({}));
    CHECK(c.ipt.model_name == "mock-generator");
    CHECK(c.output_dir == (dir / "runs/x").lexically_normal());
    CHECK(c.base_model == "mock-subject");
    CHECK(c.retrieval.chunk_top_n == 5);
    CHECK(c.retrieval.bm25.k1 == 1.2);
    CHECK(c.eval_max_tokens == 256);
}

TEST_CASE("secrets come from the environment and never reach serialized config") {
    auto dir = test::scratch("cfg_env");
    auto env = env_of({{"KINJ_JUDGE_API_KEY", "sk-judge-secret"}, {"KINJ_SUBJECT_BASE_URL", "http://127.0.0.1:9"}});
    auto c = parse_config(base_config(dir / "run"), dir, env);
    CHECK(c.judge.api_key == "sk-judge-secret");
    CHECK(c.subject.base_url == "http://127.0.0.1:9");
    CHECK(c.generator.base_url == "mock://local");
    CHECK(c.to_json().dump().find("sk-judge-secret") == std::string::npos);
    CHECK_FALSE(c.to_json()["endpoints"]["judge"].contains("api_key"));
}

TEST_CASE("run directory versions artifacts and reports missing producers") {
    auto dir = test::scratch("rundir");
    RunDir rd(dir / "r");
    CHECK_FALSE(rd.latest("eval-oracle", "json"));
    CHECK(rd.next("eval-oracle", "json").filename() == "eval-oracle-v1.json");
    test::write_file(rd.next("eval-oracle", "json"), "{}");
    test::write_file(dir / "r" / "eval-oracle-v10.json", "{}");
    test::write_file(dir / "r" / "eval-oracle-partial-v1.json", "{}");
    CHECK(rd.latest("eval-oracle", "json")->filename() == "eval-oracle-v10.json");
    CHECK(rd.next("eval-oracle", "json").filename() == "eval-oracle-v11.json");
    CHECK(rd.next("report", "").filename() == "report-v1");
    CHECK_THROWS_WITH_AS((void)rd.require("index-docs", "bin", "index"), doctest::Contains("kinj index"), ArtifactMissing);
}

TEST_CASE("a run directory admits one writer at a time") {
    auto dir = test::scratch("lock");
    {
        RunLock first(dir);
        CHECK(fs::exists(dir / ".lock"));
        CHECK_THROWS_AS(RunLock{dir}, ValidationError);
    }
    CHECK_FALSE(fs::exists(dir / ".lock"));
    CHECK_NOTHROW(RunLock{dir});
}

TEST_CASE("cli exit codes: usage and config errors are 1, missing artifacts 2") {
    auto dir = test::scratch("cli_codes");
    auto config = write_config(dir, base_config(dir / "run")).string();
    CHECK(kinj_cli({}).code == cli::kValidation);
    CHECK(kinj_cli({"frobnicate"}).code == cli::kValidation);
    CHECK(kinj_cli({"ingest"}).code == cli::kValidation);
    CHECK(kinj_cli({"ingest", "--config", (dir / "nope.json").string()}).code == cli::kValidation);

    auto eval = kinj_cli({"eval", "--config", config});
    CHECK(eval.code == cli::kArtifactMissing);
    CHECK(eval.err.find("kinj ingest") != std::string::npos);
    CHECK(kinj_cli({"ingest", "--config", config}).code == cli::kOk);
    CHECK(kinj_cli({"eval", "--config", config, "--mode", "rag_doc_top1"}).code == cli::kArtifactMissing);
    CHECK(kinj_cli({"train", "--config", config}).code == cli::kArtifactMissing);
    CHECK(kinj_cli({"eval", "--config", config, "--mode", "bogus"}).code == cli::kValidation);
    CHECK(kinj_cli({"control", "--config", config, "--mode", "oracle"}).code == cli::kValidation);
    CHECK(kinj_cli({"report", (dir / "absent").string()}).code == cli::kArtifactMissing);
}

TEST_CASE("cli exit code 3 on backend failure keeps partial results") {
    MockService::shared().reset();
    auto dir = test::scratch("cli_backend");
    auto cfg = base_config(dir / "run");
    cfg["endpoints"]["subject"]["model_name"] = "no-such-model";
    auto config = write_config(dir, cfg).string();
    REQUIRE(kinj_cli({"ingest", "--config", config}).code == cli::kOk);
    auto r = kinj_cli({"eval", "--config", config, "--mode", "closed_book"});
    CHECK(r.code == cli::kBackend);
    CHECK(fs::exists(dir / "run" / "eval-closed_book-partial-v1.json"));
    CHECK_FALSE(fs::exists(dir / "run" / "eval-closed_book-v1.json"));
    CHECK_FALSE(fs::exists(dir / "run" / ".lock"));
}

TEST_CASE("dry runs print a plan and write nothing") {
    MockService::shared().reset();
    auto dir = test::scratch("cli_dry");
    auto config = write_config(dir, base_config(dir / "run")).string();
    auto ingest = kinj_cli({"ingest", "--config", config, "--dry-run"});
    CHECK(ingest.code == cli::kOk);
    CHECK(ingest.out.find("documents: 5 of 5") != std::string::npos);
    CHECK(ingest.out.find("tokens: total 188, min 34, max 43") != std::string::npos);
    CHECK(regular_files(dir / "run") == 0);

    REQUIRE(kinj_cli({"ingest", "--config", config}).code == cli::kOk);
    const auto before = regular_files(dir / "run");
    const auto requests = MockService::shared().request_count();
    auto aug = kinj_cli({"augment", "--config", config, "--dry-run", "--recipe", "rtw_all", "--n", "3"});
    CHECK(aug.code == cli::kOk);
    CHECK(aug.out.find("generation requests: 60") != std::string::npos);
    CHECK(aug.out.find("planned training examples: 65") != std::string::npos);
    CHECK(kinj_cli({"eval", "--config", config, "--dry-run", "--mode", "oracle"}).code == cli::kOk);
    CHECK(kinj_cli({"train", "--config", config, "--dry-run"}).code == cli::kArtifactMissing);
    CHECK(regular_files(dir / "run") == before);
    CHECK(MockService::shared().request_count() == requests);
}

TEST_CASE("artifacts carry the seed and never the api key") {
    MockService::shared().reset();
    auto dir = test::scratch("cli_secret");
    auto config = write_config(dir, base_config(dir / "run")).string();
    ::setenv("KINJ_GENERATOR_API_KEY", "sk-never-written", 1);
    REQUIRE(kinj_cli({"ingest", "--config", config, "--seed", "77"}).code == cli::kOk);
    REQUIRE(kinj_cli({"augment", "--config", config, "--seed", "77"}).code == cli::kOk);
    ::unsetenv("KINJ_GENERATOR_API_KEY");
    auto augment = json::parse(test::read_file(dir / "run" / "augment-v1.json"));
    CHECK(augment["seed"] == 77);
    CHECK(augment["examples"] == 10);
    for (const auto& e : fs::recursive_directory_iterator(dir / "run")) {
        if (e.is_regular_file()) CHECK(test::read_file(e.path()).find("sk-never-written") == std::string::npos);
    }
}

TEST_CASE("train then eval uses the trained model and replay reproduces the artifacts offline") {
    MockService::shared().reset();
    auto dir = test::scratch("cli_train");
    auto config = write_config(dir, base_config(dir / "run")).string();
    for (auto stage : {"ingest", "augment", "index", "train"}) REQUIRE(kinj_cli({stage, "--config", config}).code == cli::kOk);
    auto job = json::parse(test::read_file(dir / "run" / "job-v1.json"));
    CHECK(job["state"] == "succeeded");
    const auto model = job["model_name"].get<std::string>();
    CHECK(model.rfind("mock-subject@run-", 0) == 0);
    auto manifest = json::parse(test::read_file(dir / "run" / "manifest-v1.json"));
    CHECK(manifest["examples"].size() == 15);
    CHECK(manifest["run_id"] == job["run_id"]);

    REQUIRE(kinj_cli({"eval", "--config", config, "--mode", "closed_book"}).code == cli::kOk);
    auto live = json::parse(test::read_file(dir / "run" / "eval-closed_book-v1.json"));
    CHECK(live["model"] == model);
    CHECK(live["accuracy"].get<double>() > 0.0);

    const auto requests = MockService::shared().request_count();
    auto replay = kinj_cli({"eval", "--config", config, "--mode", "closed_book", "--replay"});
    REQUIRE(replay.code == cli::kOk);
    CHECK(MockService::shared().request_count() == requests);
    CHECK(test::read_file(dir / "run" / "eval-closed_book-v2.json") ==
          test::read_file(dir / "run" / "eval-closed_book-v1.json"));
    CHECK(kinj_cli({"eval", "--config", config, "--mode", "oracle", "--replay"}).code == cli::kBackend);
    CHECK(kinj_cli({"train", "--config", config, "--replay"}).code == cli::kValidation);
}

TEST_CASE("a trainer lr mismatch fails the train stage with exit 3") {
    MockService::shared().reset();
    auto dir = test::scratch("cli_mismatch");
    auto config = write_config(dir, base_config(dir / "run")).string();
    for (auto stage : {"ingest", "augment"}) REQUIRE(kinj_cli({stage, "--config", config}).code == cli::kOk);
    MockService::shared().set_lr_perturbation(std::pair<std::size_t, double>{1, 2e-6});
    auto r = kinj_cli({"train", "--config", config});
    MockService::shared().reset();
    CHECK(r.code == cli::kBackend);
    auto job = json::parse(test::read_file(dir / "run" / "job-v1.json"));
    CHECK(job["mismatches"].size() == 1);
    CHECK_FALSE(job.contains("model_name"));
}
