// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/prompts.hpp"

#include "kinj/error.hpp"
#include "kinj/jsonl.hpp"

namespace kinj {

namespace {

constexpr const char* kRtwEasy =
    R"(Rewrite the following news article in very simple language that a small child could follow. Use short sentences and everyday words, and keep every fact.

{document})";

constexpr const char* kRtwMedium =
    R"(Rewrite the following news article as clear, well-written encyclopedic prose, in the style of a Wikipedia entry. Keep every fact.

{document})";

constexpr const char* kRtwHard =
    R"(Rewrite the following news article in dense, terse and highly technical language, the way a specialist would write for other specialists. Keep every fact.

{document})";

constexpr const char* kRtwQa =
    R"(Turn the following news article into question-and-answer pairs covering the facts it states. Write each pair as two lines, "Q: <question>" and then "A: <answer>", with a blank line between pairs.

{document})";

constexpr const char* kPara =
    R"(Paraphrase the following news article. Keep every fact accurate and make the paraphrase about as long as the original text.

{document})";

constexpr const char* kIpt =
    R"(Read the text and write question-answer pairs that can be answered from it. Wrap each pair as <QUE> question <ANS> answer </END>.

Text:
The city council approved a new bike lane on Main Street on Tuesday. Construction starts in May and is expected to take six weeks.

<QUE> What did the city council approve on Tuesday? <ANS> A new bike lane on Main Street. </END>
<QUE> How long is construction expected to take? <ANS> About six weeks. </END>

Text:
{document})";

constexpr const char* kEval =
    R"(Answer the following question about recent news. Reply with a short answer.

{context}Question: {question}
Answer:)";

constexpr const char* kJudge =
    R"(You are grading a candidate answer to a question about a news article. Compare it with the reference answer. The candidate is correct if it states the same key facts as the reference, even in different words. It is incorrect if it is wrong, missing, or only partly matches.

Question: {question}
Reference answer: {reference}
Candidate answer: {candidate}

Give a one-sentence justification, then end with a final line that is exactly "VERDICT: CORRECT" or "VERDICT: INCORRECT".)";

struct AugmentationDefault {
    const char* id;
    const char* body;
    StyleTag style;
};

constexpr AugmentationDefault kAugmentation[] = {
    {"rtw_easy", kRtwEasy, StyleTag::easy}, {"rtw_medium", kRtwMedium, StyleTag::medium},
    {"rtw_hard", kRtwHard, StyleTag::hard}, {"rtw_qa", kRtwQa, StyleTag::qa},
    {"para", kPara, StyleTag::para},         {"ipt", kIpt, StyleTag::instruct},
};

std::size_t count_occurrences(std::string_view body, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = body.find(needle); pos != std::string_view::npos; pos = body.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

std::string strip_final_newline(std::string s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

} // namespace

std::string to_string(StyleTag tag) {
    switch (tag) {
        case StyleTag::easy: return "easy";
        case StyleTag::medium: return "medium";
        case StyleTag::hard: return "hard";
        case StyleTag::qa: return "qa";
        case StyleTag::para: return "para";
        case StyleTag::instruct: return "instruct";
    }
    return "?";
}

StyleTag style_tag_from_string(std::string_view name) {
    for (auto tag : {StyleTag::easy, StyleTag::medium, StyleTag::hard, StyleTag::qa, StyleTag::para,
                     StyleTag::instruct}) {
        if (to_string(tag) == name) return tag;
    }
    throw ValidationError("unknown style tag '" + std::string(name) + "'");
}

void PromptTemplate::validate() const {
    const auto n = count_occurrences(body, "{document}");
    if (n != 1) {
        throw ValidationError("template '" + template_id + "' must contain {document} exactly once (found " +
                              std::to_string(n) + ")");
    }
}

std::string render_template(std::string_view body, const std::map<std::string, std::string>& values) {
    std::map<std::string, int> seen;
    std::string out;
    out.reserve(body.size());
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '{') {
            bool matched = false;
            for (const auto& [name, value] : values) {
                if (body.compare(i + 1, name.size(), name) == 0 && i + 1 + name.size() < body.size() &&
                    body[i + 1 + name.size()] == '}') {
                    out += value;
                    ++seen[name];
                    i += name.size() + 2;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }
        out += body[i++];
    }
    for (const auto& [name, value] : values) {
        if (seen[name] != 1) {
            throw ValidationError("placeholder {" + name + "} must occur exactly once (found " +
                                  std::to_string(seen[name]) + ")");
        }
    }
    return out;
}

PromptLibrary PromptLibrary::defaults() {
    PromptLibrary lib;
    for (const auto& d : kAugmentation) lib.augmentation[d.id] = PromptTemplate{d.id, d.body, d.style};
    lib.eval_prompt = kEval;
    lib.judge_prompt = kJudge;
    return lib;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    PromptLibrary lib = defaults();
    auto read = [&](const std::string& stem, std::string& target) {
        auto path = dir / (stem + ".txt");
        if (std::filesystem::exists(path)) target = strip_final_newline(read_text_file(path));
    };
    for (auto& [id, tmpl] : lib.augmentation) {
        read(id, tmpl.body);
        tmpl.validate();
    }
    read("eval", lib.eval_prompt);
    read("judge", lib.judge_prompt);
    render_template(lib.eval_prompt, {{"context", ""}, {"question", ""}});
    render_template(lib.judge_prompt, {{"question", ""}, {"reference", ""}, {"candidate", ""}});
    return lib;
}

const PromptTemplate& PromptLibrary::get(const std::string& template_id) const {
    auto it = augmentation.find(template_id);
    if (it == augmentation.end()) throw ValidationError("no prompt template '" + template_id + "'");
    return it->second;
}

std::vector<std::pair<std::string, std::string>> default_prompt_assets() {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& d : kAugmentation) out.emplace_back(d.id, d.body);
    out.emplace_back("eval", kEval);
    out.emplace_back("judge", kJudge);
    return out;
}

} // namespace kinj
