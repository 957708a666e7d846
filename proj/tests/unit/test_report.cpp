// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <regex>

#include "kinj/error.hpp"
#include "kinj/jsonl.hpp"
#include "kinj/evaluation.hpp"
#include "kinj/report.hpp"
#include "kinj/training.hpp"
#include "util.hpp"

using namespace kinj;
namespace fs = std::filesystem;

namespace {

TrainingManifest manifest_for(std::size_t docs, RecipeKind kind, std::size_t n, std::int64_t seed) {
    Corpus c;
    for (std::size_t i = 0; i < docs; ++i) {
        c.documents.push_back({"d" + std::to_string(i), "one two three four five", {}, "x", 0});
    }
    auto recipe = make_recipe(kind, n, PromptLibrary::defaults(), "gen");
    std::vector<SyntheticExample> synthetic;
    if (kind != RecipeKind::cpt) {
        for (std::size_t i = 0; i < docs; ++i) {
            for (std::size_t v = 0; v < n; ++v) {
                SyntheticExample e;
                e.doc_id = c.documents[i].id;
                e.recipe_kind = kind;
                e.round = v + 1;
                e.text = "syn " + std::to_string(v) + " of " + e.doc_id;
                synthetic.push_back(e);
            }
        }
    }
    auto ts = assemble_training_set(c, synthetic, recipe, TokenizerSpec{});
    return build_manifest(ts, Hyperparams{}, "base", seed);
}

void put_json(const fs::path& p, const json& j) { test::write_file(p, j.dump(2)); }

QAEvalResult eval_of(EvalMode mode, const std::string& model, double acc) {
    QAEvalResult r;
    r.mode = mode;
    r.model = model;
    r.accuracy = acc;
    return r;
}

ControlResult control_of(EvalMode mode, const std::string& model, double avg) {
    ControlResult r;
    r.mode = mode;
    r.model = model;
    r.per_task_accuracy = {{"t", avg}};
    r.per_task_accuracy_raw = {{"t", avg}};
    r.average = r.average_raw = avg;
    return r;
}

/// Trained run directory: manifest, succeeded job, closed-book eval and (optionally) control.
fs::path trained_run(const fs::path& dir, const TrainingManifest& m, double acc, std::optional<double> control) {
    const auto model = "mock-subject@" + m.run_id;
    put_json(dir / "run-v1.json", {{"run_id", "ingest-run"}, {"seed", m.seed}});
    put_json(dir / "manifest-v1.json", m.to_json());
    put_json(dir / "job-v1.json", {{"run_id", m.run_id}, {"state", "succeeded"}, {"model_name", model}});
    put_json(dir / "eval-closed_book-v1.json", eval_of(EvalMode::closed_book, model, acc).to_json());
    if (control) put_json(dir / "control-closed_book-v1.json", control_of(EvalMode::closed_book, model, *control).to_json());
    return dir;
}

} // namespace

TEST_CASE("numbers use the shortest round-trip form") {
    CHECK(format_number(0.75) == "0.75");
    CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
    CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("CSV round trips with quoting and empty cells") {
    std::vector<TradeoffRow> rows = {
        {"closed_book", 0, 0, 0.25, 0.5, "run-a"},
        {"para", 5, 12345, 0.6, std::nullopt, "run \"b\", odd"},
        {"rtw_all", 40, 999999, std::nullopt, 0.4, "run-c"},
    };
    auto csv = to_csv(rows);
    CHECK(csv.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
    CHECK(csv.find("para,5,12345,0.6,,\"run \"\"b\"\", odd\"\n") != std::string::npos);
    CHECK(csv.find("rtw_all,40,999999,,0.4,run-c\n") != std::string::npos);
    CHECK(parse_csv(csv) == rows);
    CHECK_FALSE(rows[1].complete());
    CHECK(rows[0].is_reference());

    auto one = to_csv({rows[0]});
    CHECK(std::count(one.begin(), one.end(), '\n') == 2);
    CHECK_THROWS_AS(parse_csv("method,n\n"), ValidationError);
    CHECK_THROWS_AS(parse_csv(std::string(kCsvHeader) + "\npara,1,2\n"), ValidationError);
    CHECK_THROWS_AS(parse_csv(std::string(kCsvHeader) + "\npara,x,2,,,r\n"), ValidationError);
}

TEST_CASE("log axis maps decades to equal distances") {
    LogAxis axis{1e3, 1e6, 0.0, 300.0};
    CHECK(axis.map(1e3) == doctest::Approx(0.0));
    CHECK(axis.map(1e6) == doctest::Approx(300.0));
    const double mid = axis.map(std::pow(10.0, 3.5));
    CHECK(mid - axis.map(1e3) == doctest::Approx(axis.map(1e4) - mid).epsilon(1e-12));
    CHECK_THROWS_AS((void)axis.map(0.0), ValidationError);
    CHECK_THROWS_AS((void)axis.map(-5.0), ValidationError);
}

TEST_CASE("aggregate builds one row per trained run from manifest totals") {
    auto root = test::scratch("aggregate");
    auto m1 = manifest_for(3, RecipeKind::para, 1, 7);
    auto m5 = manifest_for(3, RecipeKind::para, 5, 7);
    auto cpt = manifest_for(3, RecipeKind::cpt, 0, 7);
    std::vector<fs::path> dirs = {trained_run(root / "a", m1, 0.3, 0.5), trained_run(root / "b", m5, 0.6, 0.45),
                                  trained_run(root / "c", cpt, 0.2, std::nullopt)};
    auto rows = aggregate(dirs);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].method == "cpt");
    CHECK(rows[0].variations_n == 0);
    CHECK_FALSE(rows[0].complete());
    CHECK(rows[1].method == "para");
    CHECK(rows[1].variations_n == 1);
    CHECK(rows[1].training_tokens == m1.total_tokens);
    CHECK(rows[1].run_id == m1.run_id);
    CHECK(rows[1].in_domain_accuracy == 0.3);
    CHECK(rows[1].control_average == 0.5);
    CHECK(rows[2].variations_n == 5);
    CHECK(rows[2].training_tokens == m5.total_tokens);
    CHECK(m5.total_tokens > m1.total_tokens);
    CHECK(aggregate(dirs) == rows);
}

TEST_CASE("aggregate adds reference rows and rejects inconsistent metadata") {
    auto root = test::scratch("aggregate_ref");
    auto base = root / "base";
    put_json(base / "run-v1.json", {{"run_id", "run-base"}, {"seed", 1}});
    put_json(base / "eval-closed_book-v1.json", eval_of(EvalMode::closed_book, "mock-subject", 0.1).to_json());
    put_json(base / "eval-oracle-v1.json", eval_of(EvalMode::oracle, "mock-subject", 0.9).to_json());
    put_json(base / "control-closed_book-v1.json", control_of(EvalMode::closed_book, "mock-subject", 0.55).to_json());
    auto rows = aggregate({base});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].method == "closed_book");
    CHECK(rows[1].method == "oracle");
    CHECK(rows[1].control_average == 0.55);
    CHECK(rows[1].run_id == "run-base");
    CHECK(rows[1].is_reference());

    CHECK_THROWS_WITH_AS(aggregate({base, base}), doctest::Contains("duplicate"), ValidationError);

    auto m = manifest_for(2, RecipeKind::para, 1, 9);
    auto bad = trained_run(root / "bad", m, 0.5, 0.5);
    put_json(bad / "run-v1.json", {{"run_id", "x"}, {"seed", 10}});
    CHECK_THROWS_AS(aggregate({bad}), ValidationError);

    auto orphan = root / "orphan";
    put_json(orphan / "job-v1.json", {{"run_id", "r"}, {"state", "succeeded"}, {"model_name", "m"}});
    CHECK_THROWS_AS(aggregate({orphan}), ValidationError);

    auto swapped = root / "swapped";
    put_json(swapped / "eval-oracle-v1.json", eval_of(EvalMode::closed_book, "m", 0.5).to_json());
    CHECK_THROWS_AS(aggregate({swapped}), ValidationError);

    CHECK_THROWS_AS(aggregate({root / "nowhere"}), ArtifactMissing);
}

TEST_CASE("newest artifact version wins") {
    auto root = test::scratch("aggregate_versions");
    auto dir = root / "r";
    put_json(dir / "eval-closed_book-v1.json", eval_of(EvalMode::closed_book, "mock-subject", 0.1).to_json());
    put_json(dir / "eval-closed_book-v2.json", eval_of(EvalMode::closed_book, "mock-subject", 0.4).to_json());
    auto rows = aggregate({dir});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].in_domain_accuracy == 0.4);
}

TEST_CASE("charts are deterministic with one point per row and dashed reference lines") {
    std::vector<TradeoffRow> rows = {
        {"closed_book", 0, 0, 0.1, 0.5, "r0"},
        {"para", 1, 2000, 0.3, 0.48, "r1"},
        {"para", 5, 9000, 0.5, 0.45, "r2"},
        {"rtw_all", 40, 400000, 0.7, 0.41, "r3"},
        {"cpt", 0, 1500, 0.2, 0.49, "r4"},
    };
    auto acc = render_accuracy_chart(rows);
    auto ctl = render_control_chart(rows);
    CHECK(acc == render_accuracy_chart(rows));
    CHECK(ctl == render_control_chart(rows));
    CHECK(acc.rfind("<svg", 0) == 0);

    auto count = [](const std::string& s, const std::string& needle) {
        std::size_t n = 0;
        for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
        return n;
    };
    CHECK(count(ctl, "class=\"point\"") == 4);
    CHECK(count(ctl, "class=\"reference\"") == 1);
    CHECK(count(ctl, "stroke-dasharray=\"6 4\"") == 1);
    CHECK(count(acc, "class=\"point\"") + count(acc, "class=\"reference\"") >= 4);

    auto dir = test::scratch("emit");
    auto files = emit(rows, EmitFormat::svg_lines, dir);
    CHECK(files.size() == 2);
    CHECK(test::read_file(dir / "control_vs_tokens.svg") == ctl);
    emit(rows, EmitFormat::csv, dir);
    CHECK(parse_csv(test::read_file(dir / "tradeoff.csv")) == rows);
    CHECK_THROWS_AS(emit({}, EmitFormat::csv, dir), ValidationError);
}

TEST_CASE("labels are XML escaped") {
    std::vector<TradeoffRow> rows = {{"a<b&c", 2, 3000, 0.5, 0.5, "r"}};
    auto svg = render_control_chart(rows);
    CHECK(svg.find("a&lt;b&amp;c") != std::string::npos);
    CHECK(svg.find("a<b&c") == std::string::npos);
}
