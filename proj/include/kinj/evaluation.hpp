// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinj/corpus.hpp"
#include "kinj/error.hpp"
#include "kinj/llm.hpp"
#include "kinj/prompts.hpp"
#include "kinj/retrieval.hpp"

namespace kinj {

enum class EvalMode { closed_book, oracle, rag_doc_top1, rag_chunk_top5 };

std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(std::string_view name);
inline constexpr EvalMode kAllEvalModes[] = {EvalMode::closed_book, EvalMode::oracle, EvalMode::rag_doc_top1,
                                             EvalMode::rag_chunk_top5};

struct EvalSettings {
    int max_tokens = 256;
    std::size_t doc_top_n = 1;
    std::size_t chunk_top_n = 5;
};

/// "[Context k]\n<text>\n\n", the block prepended for each context passage.
std::string format_context_block(std::size_t rank, std::string_view text);

/// Same instruction text for every mode; context blocks (rank order) precede the question.
/// Throws ValidationError if context is given for closed_book or missing otherwise.
ChatRequest build_eval_prompt(const QAPair& qa, EvalMode mode, const std::optional<std::vector<std::string>>& context,
                              const std::string& eval_template = PromptLibrary::defaults().eval_prompt,
                              int max_tokens = 256);

enum class Verdict { correct, incorrect, unparseable };

std::string to_string(Verdict v);

struct JudgeVerdict {
    std::string qa_id;
    Verdict verdict = Verdict::unparseable;
    std::string raw_judge_text;
};

/// Verdict of the last line reading "VERDICT: CORRECT|INCORRECT" (any case); unparseable otherwise.
Verdict parse_verdict(std::string_view judge_text);

ChatRequest build_judge_request(const QAPair& qa, const std::string& candidate,
                                const std::string& judge_template = PromptLibrary::defaults().judge_prompt);

/// A failed judge call is recorded as unparseable, never thrown.
JudgeVerdict judge_answer(const QAPair& qa, const std::string& qa_id, const std::string& candidate, LlmClient& judge,
                          const std::string& judge_template = PromptLibrary::defaults().judge_prompt);

struct QAItemResult {
    std::string qa_id;
    std::string question;
    std::string reference_answer;
    std::vector<std::string> context_ids;
    std::string candidate;
    JudgeVerdict verdict;
};

struct QAEvalResult {
    EvalMode mode = EvalMode::closed_book;
    std::string model;
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t unparseable = 0;
    std::vector<QAItemResult> items;

    [[nodiscard]] nlohmann::json to_json() const;
    static QAEvalResult from_json(const nlohmann::json& j);
};

/// Accuracy over verdicts, unparseable scored as incorrect. Empty input scores 0.
double verdict_accuracy(const std::vector<JudgeVerdict>& verdicts);

/// Subject failures abort the run; the items finished so far travel with the exception.
class EvalAborted : public BackendError {
public:
    EvalAborted(const std::string& what, QAEvalResult partial)
        : BackendError(Kind::exhausted, what), partial_(std::move(partial)) {}
    [[nodiscard]] const QAEvalResult& partial() const noexcept { return partial_; }

private:
    QAEvalResult partial_;
};

/// Answers every QA pair once at temperature 0 and judges it. `index` holds whole documents
/// for rag_doc_top1 and chunks for rag_chunk_top5; it is ignored for the other modes.
QAEvalResult run_qa_eval(LlmClient& subject, const Corpus& corpus, EvalMode mode, const RetrievalIndex* index,
                         LlmClient& judge, const PromptLibrary& prompts = PromptLibrary::defaults(),
                         const EvalSettings& settings = {});

struct ControlItem {
    std::string context;
    std::vector<std::string> choices;
    std::size_t gold_index = 0;
};

struct ControlTask {
    std::string task_id;
    std::vector<ControlItem> items;
};

/// Reads {task_id, context, choices[], gold_index} records, grouping by task in first-seen order.
std::vector<ControlTask> load_control_tasks(const std::filesystem::path& path);

struct ControlResult {
    std::string model;
    EvalMode mode = EvalMode::closed_book;
    std::map<std::string, double> per_task_accuracy;     // argmax of per-token-normalized logprob
    std::map<std::string, double> per_task_accuracy_raw; // argmax of summed logprob
    double average = 0.0;
    double average_raw = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
    static ControlResult from_json(const nlohmann::json& j);
};

/// Index of the best-scoring continuation; ties go to the lowest index.
std::size_t pick_choice(const std::vector<ContinuationScore>& scores, bool normalize_by_tokens);

/// Plain mean over tasks, independent of task sizes.
double unweighted_mean(const std::map<std::string, double>& per_task);

/// Optional hook returning text to prepend to a control item's context (RAG control runs).
using ContextProvider = std::function<std::string(const std::string& item_context)>;

/// Scores every choice as " " + choice after the item context and reports per-task and
/// average accuracy. Needs a backend with logprob support.
ControlResult run_control_eval(LlmClient& subject, const std::vector<ControlTask>& tasks,
                               EvalMode mode = EvalMode::closed_book, const ContextProvider& context = {});

} // namespace kinj
