// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>
#include <sstream>

#include "kinj/augment.hpp"
#include "kinj/error.hpp"
#include "kinj/mock_service.hpp"
#include "util.hpp"

using namespace kinj;
using namespace std::chrono_literals;

namespace {

EndpointConfig mock_endpoint(const std::string& model) {
    EndpointConfig e;
    e.base_url = "mock://local";
    e.model_name = model;
    e.max_parallel = 4;
    e.max_retries = 1;
    e.backoff_base = 1ms;
    return e;
}

Corpus small_corpus(std::size_t docs) {
    Corpus c;
    for (std::size_t i = 0; i < docs; ++i) {
        const auto n = std::to_string(i);
        c.documents.push_back({"doc" + n,
                               "Report " + n + " says the council approved a new bridge. Work starts in spring " + n +
                                   ". The bridge will carry trams and bicycles.",
                               Date{2023, 5, 1}, "local", 0});
    }
    return c;
}

std::size_t word_count(const std::string& s) {
    std::istringstream in(s);
    std::size_t n = 0;
    for (std::string w; in >> w;) ++n;
    return n;
}

SyntheticExample synth(std::string doc, std::size_t round, StyleTag style, std::size_t variant, std::string text) {
    SyntheticExample s;
    s.doc_id = std::move(doc);
    s.round = round;
    s.style_tag = style;
    s.template_id = to_string(style);
    s.variant = variant;
    s.text = std::move(text);
    return s;
}

} // namespace

TEST_CASE("recipes apply the expected templates") {
    CHECK(recipe_template_ids(RecipeKind::rtw_all) == std::vector<std::string>{"rtw_easy", "rtw_medium", "rtw_hard", "rtw_qa"});
    CHECK(recipe_template_ids(RecipeKind::rtw_no_qa) == std::vector<std::string>{"rtw_easy", "rtw_medium", "rtw_hard"});
    CHECK(recipe_template_ids(RecipeKind::rtw_qa_only) == std::vector<std::string>{"rtw_qa"});
    CHECK(recipe_template_ids(RecipeKind::para) == std::vector<std::string>{"para"});
    CHECK(recipe_template_ids(RecipeKind::ipt) == std::vector<std::string>{"ipt"});
    CHECK(recipe_template_ids(RecipeKind::cpt).empty());
    for (auto k : {RecipeKind::cpt, RecipeKind::rtw_all, RecipeKind::rtw_no_qa, RecipeKind::rtw_qa_only,
                   RecipeKind::para, RecipeKind::ipt}) {
        CHECK(recipe_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(recipe_kind_from_string("rtw"), ValidationError);
    CHECK_THROWS_AS(make_recipe(RecipeKind::para, 0, PromptLibrary::defaults()), ValidationError);
    CHECK_NOTHROW(make_recipe(RecipeKind::cpt, 0, PromptLibrary::defaults()));
}

TEST_CASE("templates need exactly one document placeholder") {
    PromptTemplate t{"x", "Rewrite: {document}", StyleTag::para};
    CHECK_NOTHROW(t.validate());
    CHECK(render_prompt(t, Document{"d", "body {question}", {}, "c", 0}) == "Rewrite: body {question}");
    t.body = "no placeholder";
    CHECK_THROWS_AS(t.validate(), ValidationError);
    t.body = "{document} and {document}";
    CHECK_THROWS_AS(t.validate(), ValidationError);
    CHECK_THROWS_AS(render_template("{a}", {{"a", "1"}, {"b", "2"}}), ValidationError);
}

TEST_CASE("prompt assets on disk match the compiled defaults") {
    auto loaded = PromptLibrary::load(KINJ_ASSET_DIR);
    auto defaults = PromptLibrary::defaults();
    for (const auto& [id, body] : default_prompt_assets()) {
        auto text = test::read_file(std::filesystem::path(KINJ_ASSET_DIR) / (id + ".txt"));
        CHECK(text == body + "\n");
    }
    CHECK(loaded.eval_prompt == defaults.eval_prompt);
    CHECK(loaded.judge_prompt == defaults.judge_prompt);
    CHECK(loaded.get("rtw_qa").body == defaults.get("rtw_qa").body);
}

TEST_CASE("generation seeds are deterministic and depend on every coordinate") {
    const auto s = generation_seed(42, "doc1", 1, "para");
    CHECK(s == generation_seed(42, "doc1", 1, "para"));
    CHECK(s >= 0);
    std::set<std::int64_t> seen{s, generation_seed(43, "doc1", 1, "para"), generation_seed(42, "doc2", 1, "para"),
                                generation_seed(42, "doc1", 2, "para"), generation_seed(42, "doc1", 1, "rtw_easy")};
    CHECK(seen.size() == 5);
}

TEST_CASE("mixing arithmetic on a small corpus") {
    MockService::shared().reset();
    const auto corpus = small_corpus(6);
    LlmClient gen(mock_endpoint("mock-generator"));
    const std::size_t n = 3;
    const std::map<RecipeKind, std::size_t> per_round{
        {RecipeKind::rtw_all, 4}, {RecipeKind::rtw_no_qa, 3}, {RecipeKind::rtw_qa_only, 1}, {RecipeKind::para, 1}};
    for (const auto& [kind, k] : per_round) {
        auto recipe = make_recipe(kind, n, PromptLibrary::defaults(), "mock-generator");
        auto rep = generate_variations(corpus, recipe, gen, TokenizerSpec{}, 7);
        CHECK(rep.gaps.empty());
        CHECK(rep.examples.size() == 6 * n * k);
        auto ts = assemble_training_set(corpus, rep.examples, recipe, TokenizerSpec{});
        CHECK(ts.size() == 6 + 6 * n * k);

        std::size_t recount = 0;
        for (const auto& d : corpus.documents) recount += word_count(d.text);
        for (const auto& s : rep.examples) recount += word_count(s.text);
        CHECK(ts.total_tokens == recount);
    }
}

TEST_CASE("generation is deterministic for a fixed seed and varies with it") {
    MockService::shared().reset();
    const auto corpus = small_corpus(3);
    LlmClient gen(mock_endpoint("mock-generator"));
    auto recipe = make_recipe(RecipeKind::rtw_no_qa, 2, PromptLibrary::defaults(), "mock-generator");
    auto a = generate_variations(corpus, recipe, gen, TokenizerSpec{}, 99);
    auto b = generate_variations(corpus, recipe, gen, TokenizerSpec{}, 99);
    CHECK(a.examples == b.examples);
    auto c = generate_variations(corpus, recipe, gen, TokenizerSpec{}, 100);
    CHECK_FALSE(a.examples == c.examples);
}

TEST_CASE("failed generations become gaps and the run carries on") {
    MockService::shared().reset();
    const auto corpus = small_corpus(3);
    auto ep = mock_endpoint("mock-generator");
    ep.max_parallel = 1;
    LlmClient gen(ep);
    MockService::shared().fail_next(2, 503); // with max_retries 1 the first request is lost
    auto recipe = make_recipe(RecipeKind::para, 1, PromptLibrary::defaults(), "mock-generator");
    auto rep = generate_variations(corpus, recipe, gen, TokenizerSpec{}, 1);
    REQUIRE(rep.gaps.size() == 1);
    CHECK(rep.gaps[0].doc_id == "doc0");
    CHECK(rep.gaps[0].template_id == "para");
    CHECK(rep.examples.size() == 2);
}

TEST_CASE("instruction pairs parse and malformed fragments are counted") {
    auto p = parse_instruction_pairs("<QUE> What opened? <ANS> A bridge. </END>\n<QUE> Broken one </END>\n"
                                     "<QUE> When? <ANS> In May. </END>");
    REQUIRE(p.pairs.size() == 2);
    CHECK(p.pairs[0] == InstructionPair{"What opened?", "A bridge."});
    CHECK(p.pairs[1] == InstructionPair{"When?", "In May."});
    CHECK(p.parse_failures == 1);
    CHECK(parse_instruction_pairs("no tags at all").parse_failures == 1);
    CHECK(parse_instruction_pairs("").parse_failures == 0);
    CHECK(parse_instruction_pairs("<QUE>  <ANS> x </END>").parse_failures == 1);
    CHECK(format_instruction_example({"Q?", "A."}) == "Q?\nA.");
}

TEST_CASE("ipt generation flattens pairs into examples") {
    MockService::shared().reset();
    const auto corpus = small_corpus(2);
    LlmClient inst(mock_endpoint("mock-instruct"));
    auto recipe = make_recipe(RecipeKind::ipt, 2, PromptLibrary::defaults(), "mock-instruct");
    auto rep = generate_variations(corpus, recipe, inst, TokenizerSpec{}, 5);
    CHECK(rep.gaps.empty());
    CHECK(rep.examples.size() == 2 * 2 * 2); // two pairs per reply
    for (const auto& e : rep.examples) {
        CHECK(e.style_tag == StyleTag::instruct);
        CHECK(e.text.find('\n') != std::string::npos);
    }
    auto direct = synthesize_instructions(corpus.documents[0], inst);
    CHECK(direct.pairs.size() == 2);
}

TEST_CASE("assembly orders originals then synthetic by doc, round, style, variant") {
    Corpus corpus;
    corpus.documents = {{"b", "second doc", {}, "x", 0}, {"a", "first doc", {}, "x", 0}};
    std::vector<SyntheticExample> s = {
        synth("b", 1, StyleTag::easy, 0, "b1e"), synth("a", 2, StyleTag::easy, 0, "a2e"),
        synth("a", 1, StyleTag::qa, 0, "a1q"),   synth("a", 1, StyleTag::easy, 1, "a1e1"),
        synth("a", 1, StyleTag::easy, 0, "a1e0"), synth("a", 1, StyleTag::hard, 0, "a1h"),
    };
    auto recipe = make_recipe(RecipeKind::rtw_all, 2, PromptLibrary::defaults());
    auto ts = assemble_training_set(corpus, s, recipe, TokenizerSpec{});
    CHECK(ts.originals[0].id == "b");
    std::vector<std::string> order;
    for (const auto& e : ts.synthetic) order.push_back(e.text);
    CHECK(order == std::vector<std::string>{"a1e0", "a1e1", "a1h", "a1q", "a2e", "b1e"});
    CHECK(ts.total_tokens == 2 + 2 + 6);

    s.push_back(synth("zz", 1, StyleTag::easy, 0, "foreign"));
    CHECK_THROWS_AS(assemble_training_set(corpus, s, recipe, TokenizerSpec{}), ValidationError);
}

TEST_CASE("duplicates are counted within a (doc, template) group and kept") {
    std::vector<SyntheticExample> s = {synth("a", 1, StyleTag::para, 0, "same"), synth("a", 2, StyleTag::para, 0, "same"),
                                       synth("a", 3, StyleTag::para, 0, "same"), synth("b", 1, StyleTag::para, 0, "same"),
                                       synth("a", 1, StyleTag::easy, 0, "same")};
    CHECK(count_duplicates(s) == 2);
}

TEST_CASE("term jaccard and the contamination audit") {
    CHECK(term_jaccard("a b c", "b c d") == doctest::Approx(2.0 / 4.0));
    CHECK(term_jaccard("Who won?", "who WON") == 1.0);
    CHECK(term_jaccard("", "") == 0.0);

    auto qa_example = synth("d5", 1, StyleTag::qa, 0,
                            "Q: Who was elected governor of Eastmarch in 2024?\nA: Tomas Varga.\n\n"
                            "Q: What did the campaign focus on?\nA: Rail.");
    auto ipt_example = synth("d5", 1, StyleTag::instruct, 0, "What share of the vote did Varga receive?\n54 percent");
    auto para_example = synth("d5", 1, StyleTag::para, 0, "Q: Who was elected governor of Eastmarch in 2024?");
    CHECK(extract_generated_questions(qa_example).size() == 2);
    CHECK(extract_generated_questions(para_example).empty());

    std::vector<QAPair> test_qs = {{"d5", "Who was elected governor of Eastmarch in 2024?", "Tomas Varga"},
                                   {"d5", "What share of the vote did Varga receive?", "54 percent"},
                                   {"d1", "What comet was discovered?", "Vela-7"}};
    auto hits = audit_contamination({qa_example, ipt_example, para_example}, test_qs, 0.8);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].jaccard == 1.0);
    CHECK(hits[1].test_question == test_qs[1].question);
}

TEST_CASE("synthetic examples round trip through JSONL") {
    auto dir = test::scratch("synthetic_io");
    std::vector<SyntheticExample> s = {synth("a", 1, StyleTag::qa, 0, "Q: x?\nA: \"quoted\""),
                                       synth("b", 2, StyleTag::instruct, 3, "caf\xc3\xa9")};
    s[1].recipe_kind = RecipeKind::ipt;
    s[1].token_count = 1;
    save_synthetic(s, dir / "s.jsonl");
    CHECK(load_synthetic(dir / "s.jsonl") == s);
}
