// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/augment.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <unordered_set>

#include "kinj/error.hpp"
#include "kinj/hashing.hpp"
#include "kinj/jsonl.hpp"
#include "kinj/parallel.hpp"
#include "kinj/retrieval.hpp"

namespace kinj {

namespace {

constexpr std::string_view kQue = "<QUE>";
constexpr std::string_view kAns = "<ANS>";
constexpr std::string_view kEnd = "</END>";

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

struct GenerationJob {
    const Document* doc;
    std::size_t round;
    const PromptTemplate* tmpl;
};

} // namespace

std::string to_string(RecipeKind kind) {
    switch (kind) {
        case RecipeKind::cpt: return "cpt";
        case RecipeKind::rtw_all: return "rtw_all";
        case RecipeKind::rtw_no_qa: return "rtw_no_qa";
        case RecipeKind::rtw_qa_only: return "rtw_qa_only";
        case RecipeKind::para: return "para";
        case RecipeKind::ipt: return "ipt";
    }
    return "?";
}

RecipeKind recipe_kind_from_string(std::string_view name) {
    for (auto k : {RecipeKind::cpt, RecipeKind::rtw_all, RecipeKind::rtw_no_qa, RecipeKind::rtw_qa_only,
                   RecipeKind::para, RecipeKind::ipt}) {
        if (to_string(k) == name) return k;
    }
    throw ValidationError("unknown recipe '" + std::string(name) + "'");
}

std::vector<std::string> recipe_template_ids(RecipeKind kind) {
    switch (kind) {
        case RecipeKind::cpt: return {};
        case RecipeKind::rtw_all: return {"rtw_easy", "rtw_medium", "rtw_hard", "rtw_qa"};
        case RecipeKind::rtw_no_qa: return {"rtw_easy", "rtw_medium", "rtw_hard"};
        case RecipeKind::rtw_qa_only: return {"rtw_qa"};
        case RecipeKind::para: return {"para"};
        case RecipeKind::ipt: return {"ipt"};
    }
    return {};
}

void Recipe::validate() const {
    if (prompts.size() != recipe_template_ids(kind).size()) {
        throw ValidationError("recipe " + to_string(kind) + " needs " +
                              std::to_string(recipe_template_ids(kind).size()) + " prompts, got " +
                              std::to_string(prompts.size()));
    }
    for (const auto& p : prompts) p.validate();
    if (kind != RecipeKind::cpt && variations == 0) throw ValidationError("recipe variations must be positive");
    if (!(temperature >= 0.0)) throw ValidationError("recipe temperature must be >= 0");
    if (max_tokens <= 0) throw ValidationError("recipe max_tokens must be positive");
}

Recipe make_recipe(RecipeKind kind, std::size_t variations, const PromptLibrary& library,
                   std::string generator_model, double temperature) {
    Recipe r;
    r.kind = kind;
    r.variations = variations;
    r.temperature = temperature;
    r.generator_model = std::move(generator_model);
    for (const auto& id : recipe_template_ids(kind)) r.prompts.push_back(library.get(id));
    r.validate();
    return r;
}

std::string render_prompt(const PromptTemplate& tmpl, const Document& doc) {
    tmpl.validate();
    return render_template(tmpl.body, {{"document", doc.text}});
}

std::int64_t generation_seed(std::int64_t run_seed, std::string_view doc_id, std::size_t round,
                             std::string_view template_id) {
    auto h = hash_parts(std::to_string(run_seed), doc_id, std::to_string(round), template_id);
    return static_cast<std::int64_t>(h & 0x7fffffffffffffffULL);
}

InstructionParse parse_instruction_pairs(std::string_view text) {
    InstructionParse out;
    std::size_t pos = text.find(kQue);
    if (pos == std::string_view::npos) {
        if (!trim(text).empty()) out.parse_failures = 1;
        return out;
    }
    while (pos != std::string_view::npos) {
        const std::size_t body = pos + kQue.size();
        std::size_t next = text.find(kQue, body);
        std::string_view block = text.substr(body, next == std::string_view::npos ? std::string_view::npos : next - body);
        if (auto end = block.find(kEnd); end != std::string_view::npos) block = block.substr(0, end);
        auto ans = block.find(kAns);
        if (ans == std::string_view::npos) {
            ++out.parse_failures;
        } else {
            InstructionPair p{trim(block.substr(0, ans)), trim(block.substr(ans + kAns.size()))};
            if (p.instruction.empty() || p.response.empty()) {
                ++out.parse_failures;
            } else {
                out.pairs.push_back(std::move(p));
            }
        }
        pos = next;
    }
    return out;
}

InstructionParse synthesize_instructions(const Document& doc, LlmClient& backend, const PromptTemplate& tmpl,
                                         double temperature, std::int64_t seed, int max_tokens) {
    ChatRequest req;
    req.messages.push_back({Role::user, render_prompt(tmpl, doc)});
    req.temperature = temperature;
    req.max_tokens = max_tokens;
    req.seed = seed;
    return parse_instruction_pairs(backend.complete(req).text);
}

InstructionParse synthesize_instructions(const Document& doc, LlmClient& backend) {
    static const PromptLibrary lib = PromptLibrary::defaults();
    return synthesize_instructions(doc, backend, lib.get("ipt"), 1.0, generation_seed(0, doc.id, 1, "ipt"));
}

std::string format_instruction_example(const InstructionPair& pair) {
    return pair.instruction + "\n" + pair.response;
}

GenerationReport generate_variations(const Corpus& corpus, const Recipe& recipe, LlmClient& generator,
                                     const TokenizerSpec& tokenizer, std::int64_t seed) {
    recipe.validate();
    std::vector<GenerationJob> jobs;
    for (const auto& doc : corpus.documents) {
        for (std::size_t round = 1; round <= recipe.variations; ++round) {
            for (const auto& tmpl : recipe.prompts) jobs.push_back({&doc, round, &tmpl});
        }
    }

    struct Outcome {
        std::vector<SyntheticExample> examples;
        std::optional<std::string> error;
        std::size_t parse_failures = 0;
    };
    std::vector<Outcome> outcomes(jobs.size());

    const std::string generator_model =
        recipe.generator_model.empty() ? generator.endpoint().model_name : recipe.generator_model;

    parallel_for(jobs.size(), static_cast<std::size_t>(generator.endpoint().max_parallel), [&](std::size_t i) {
        const auto& job = jobs[i];
        auto& out = outcomes[i];
        const auto job_seed = generation_seed(seed, job.doc->id, job.round, job.tmpl->template_id);
        auto make = [&](std::string text, std::size_t variant) {
            SyntheticExample ex;
            ex.doc_id = job.doc->id;
            ex.recipe_kind = recipe.kind;
            ex.style_tag = job.tmpl->style;
            ex.template_id = job.tmpl->template_id;
            ex.round = job.round;
            ex.variant = variant;
            ex.token_count = count_tokens(text, tokenizer);
            ex.text = std::move(text);
            ex.generator_model = generator_model;
            return ex;
        };
        try {
            if (recipe.kind == RecipeKind::ipt) {
                auto parsed = synthesize_instructions(*job.doc, generator, *job.tmpl, recipe.temperature, job_seed,
                                                      recipe.max_tokens);
                out.parse_failures = parsed.parse_failures;
                if (parsed.pairs.empty()) {
                    out.error = "no parseable instruction pairs";
                    return;
                }
                for (std::size_t v = 0; v < parsed.pairs.size(); ++v) {
                    out.examples.push_back(make(format_instruction_example(parsed.pairs[v]), v));
                }
            } else {
                ChatRequest req;
                req.messages.push_back({Role::user, render_prompt(*job.tmpl, *job.doc)});
                req.temperature = recipe.temperature;
                req.max_tokens = recipe.max_tokens;
                req.seed = job_seed;
                auto text = generator.complete(req).text;
                if (trim(text).empty()) {
                    out.error = "empty generation";
                    return;
                }
                out.examples.push_back(make(std::move(text), 0));
            }
        } catch (const Error& e) {
            out.error = e.what();
        }
    });

    GenerationReport report;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        auto& o = outcomes[i];
        report.parse_failures += o.parse_failures;
        if (o.error) {
            report.gaps.push_back({jobs[i].doc->id, jobs[i].tmpl->template_id, jobs[i].round, *o.error});
        }
        for (auto& ex : o.examples) report.examples.push_back(std::move(ex));
    }
    report.duplicates = count_duplicates(report.examples);
    return report;
}

TrainingSet assemble_training_set(const Corpus& corpus, std::vector<SyntheticExample> synthetic,
                                  const Recipe& recipe, const TokenizerSpec& tokenizer) {
    std::unordered_set<std::string> ids;
    for (const auto& d : corpus.documents) ids.insert(d.id);
    for (const auto& s : synthetic) {
        if (!ids.count(s.doc_id)) throw ValidationError("synthetic example references foreign document '" + s.doc_id + "'");
    }

    TrainingSet ts;
    ts.recipe = recipe;
    ts.originals = corpus.documents;
    for (auto& d : ts.originals) {
        d.token_count = count_tokens(d.text, tokenizer);
        ts.total_tokens += d.token_count;
    }
    std::stable_sort(synthetic.begin(), synthetic.end(), [](const SyntheticExample& a, const SyntheticExample& b) {
        return std::tie(a.doc_id, a.round, a.style_tag, a.variant) < std::tie(b.doc_id, b.round, b.style_tag, b.variant);
    });
    for (auto& s : synthetic) {
        s.token_count = count_tokens(s.text, tokenizer);
        ts.total_tokens += s.token_count;
    }
    ts.synthetic = std::move(synthetic);
    return ts;
}

std::size_t count_duplicates(const std::vector<SyntheticExample>& synthetic) {
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::size_t dups = 0;
    for (const auto& s : synthetic) {
        if (!seen.emplace(s.doc_id, s.template_id, s.text).second) ++dups;
    }
    return dups;
}

double term_jaccard(std::string_view a, std::string_view b) {
    auto ta = analyze(a);
    auto tb = analyze(b);
    std::set<std::string> sa(ta.begin(), ta.end());
    std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

std::vector<std::string> extract_generated_questions(const SyntheticExample& example) {
    std::vector<std::string> out;
    if (example.style_tag == StyleTag::instruct) {
        auto nl = example.text.find('\n');
        out.push_back(trim(std::string_view(example.text).substr(0, nl)));
        return out;
    }
    if (example.style_tag != StyleTag::qa) return out;
    std::size_t start = 0;
    while (start <= example.text.size()) {
        auto nl = example.text.find('\n', start);
        auto line = trim(std::string_view(example.text).substr(start, nl == std::string::npos ? std::string::npos : nl - start));
        if (line.size() > 2 && (line[0] == 'Q' || line[0] == 'q') && line[1] == ':') out.push_back(trim(line.substr(2)));
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return out;
}

std::vector<ContaminationHit> audit_contamination(const std::vector<SyntheticExample>& synthetic,
                                                  const std::vector<QAPair>& test_questions, double threshold) {
    std::vector<ContaminationHit> hits;
    for (const auto& s : synthetic) {
        for (const auto& gq : extract_generated_questions(s)) {
            for (const auto& qa : test_questions) {
                double j = term_jaccard(gq, qa.question);
                if (j >= threshold) hits.push_back({s.doc_id, s.round, gq, qa.question, j});
            }
        }
    }
    return hits;
}

void save_synthetic(const std::vector<SyntheticExample>& synthetic, const std::filesystem::path& path) {
    std::vector<json> records;
    records.reserve(synthetic.size());
    for (const auto& s : synthetic) {
        records.push_back({{"doc_id", s.doc_id},
                           {"recipe", to_string(s.recipe_kind)},
                           {"style", to_string(s.style_tag)},
                           {"template_id", s.template_id},
                           {"round", s.round},
                           {"variant", s.variant},
                           {"text", s.text},
                           {"generator_model", s.generator_model},
                           {"token_count", s.token_count}});
    }
    write_text_file(path, to_jsonl(records));
}

std::vector<SyntheticExample> load_synthetic(const std::filesystem::path& path) {
    std::vector<SyntheticExample> out;
    for_each_jsonl(path, [&](std::size_t line, const json& r) {
        try {
            SyntheticExample s;
            s.doc_id = require_string(r, "doc_id");
            s.recipe_kind = recipe_kind_from_string(require_string(r, "recipe"));
            s.style_tag = style_tag_from_string(require_string(r, "style"));
            s.template_id = require_string(r, "template_id");
            s.round = require_field(r, "round").get<std::size_t>();
            s.variant = r.value("variant", std::size_t{0});
            s.text = require_string(r, "text");
            s.generator_model = require_string(r, "generator_model");
            s.token_count = require_field(r, "token_count").get<std::size_t>();
            if (s.text.empty()) throw ValidationError("empty text");
            out.push_back(std::move(s));
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

} // namespace kinj
