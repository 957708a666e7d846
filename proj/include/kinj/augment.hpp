// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kinj/corpus.hpp"
#include "kinj/llm.hpp"
#include "kinj/prompts.hpp"

namespace kinj {

enum class RecipeKind { cpt, rtw_all, rtw_no_qa, rtw_qa_only, para, ipt };

std::string to_string(RecipeKind kind);
RecipeKind recipe_kind_from_string(std::string_view name);

/// Template ids a recipe applies, in application order.
std::vector<std::string> recipe_template_ids(RecipeKind kind);

struct Recipe {
    RecipeKind kind = RecipeKind::cpt;
    std::vector<PromptTemplate> prompts;
    /// Model name of the generator, recorded as provenance.
    std::string generator_model;
    double temperature = 1.0;
    /// Number of rounds; each round applies every prompt once to every document.
    std::size_t variations = 1;
    int max_tokens = 4096;

    void validate() const;
};

Recipe make_recipe(RecipeKind kind, std::size_t variations, const PromptLibrary& library,
                   std::string generator_model = {}, double temperature = 1.0);

std::string render_prompt(const PromptTemplate& tmpl, const Document& doc);

struct SyntheticExample {
    std::string doc_id;
    RecipeKind recipe_kind = RecipeKind::para;
    StyleTag style_tag = StyleTag::para;
    std::string template_id;
    std::size_t round = 1;   // 1..N
    std::size_t variant = 0; // position among several examples from one generation (IPT pairs)
    std::string text;
    std::string generator_model;
    std::size_t token_count = 0;

    bool operator==(const SyntheticExample&) const = default;
};

struct GenerationGap {
    std::string doc_id;
    std::string template_id;
    std::size_t round = 0;
    std::string error;
};

struct GenerationReport {
    std::vector<SyntheticExample> examples;
    std::vector<GenerationGap> gaps;
    /// IPT fragments that could not be parsed into a pair.
    std::size_t parse_failures = 0;
    /// Exact duplicate texts within one (doc, template) group; retained, only counted.
    std::size_t duplicates = 0;
};

/// Seed sent with one generation request, derived from the run seed and the request coordinates.
std::int64_t generation_seed(std::int64_t run_seed, std::string_view doc_id, std::size_t round,
                             std::string_view template_id);

/// Runs every (document, round, prompt) generation once, fanned out up to the generator's
/// max_parallel. Failures after the client's retries become gaps; the run carries on.
GenerationReport generate_variations(const Corpus& corpus, const Recipe& recipe, LlmClient& generator,
                                     const TokenizerSpec& tokenizer, std::int64_t seed);

struct InstructionPair {
    std::string instruction;
    std::string response;
    bool operator==(const InstructionPair&) const = default;
};

struct InstructionParse {
    std::vector<InstructionPair> pairs;
    std::size_t parse_failures = 0;
};

/// Parses "<QUE> ... <ANS> ... </END>" blocks. Fragments missing either half count as failures.
InstructionParse parse_instruction_pairs(std::string_view text);

InstructionParse synthesize_instructions(const Document& doc, LlmClient& backend, const PromptTemplate& tmpl,
                                         double temperature = 1.0, std::int64_t seed = 0, int max_tokens = 4096);
InstructionParse synthesize_instructions(const Document& doc, LlmClient& backend);

/// Text an instruction pair is trained on.
std::string format_instruction_example(const InstructionPair& pair);

struct TrainingSet {
    std::vector<Document> originals;
    std::vector<SyntheticExample> synthetic;
    Recipe recipe;
    std::size_t total_tokens = 0;

    [[nodiscard]] std::size_t size() const noexcept { return originals.size() + synthetic.size(); }
};

/// Originals in corpus order, then synthetic sorted by (doc_id, round, style_tag, variant).
/// Token counts are recomputed with `tokenizer`. Throws ValidationError on a foreign doc_id.
TrainingSet assemble_training_set(const Corpus& corpus, std::vector<SyntheticExample> synthetic,
                                  const Recipe& recipe, const TokenizerSpec& tokenizer);

std::size_t count_duplicates(const std::vector<SyntheticExample>& synthetic);

struct ContaminationHit {
    std::string doc_id;
    std::size_t round = 0;
    std::string generated_question;
    std::string test_question;
    double jaccard = 0.0;
};

/// Jaccard similarity of the analyzed term sets of two strings.
double term_jaccard(std::string_view a, std::string_view b);

/// Questions found in a generated text: "Q:" lines for QA style, the instruction for IPT.
std::vector<std::string> extract_generated_questions(const SyntheticExample& example);

/// Every generated question whose term-set Jaccard with a test question reaches `threshold`.
std::vector<ContaminationHit> audit_contamination(const std::vector<SyntheticExample>& synthetic,
                                                  const std::vector<QAPair>& test_questions,
                                                  double threshold = 0.8);

void save_synthetic(const std::vector<SyntheticExample>& synthetic, const std::filesystem::path& path);
std::vector<SyntheticExample> load_synthetic(const std::filesystem::path& path);

} // namespace kinj
