// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>

#include "kinj/jsonl.hpp"
#include "kinj/parallel.hpp"

namespace kinj {

namespace {

std::string lower_trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n*");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n*.");
    std::string out(s.substr(b, e - b + 1));
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<Verdict> verdict_of_line(std::string_view line) {
    auto l = lower_trim(line);
    constexpr std::string_view key = "verdict:";
    if (l.rfind(key, 0) != 0) return std::nullopt;
    auto value = lower_trim(std::string_view(l).substr(key.size()));
    if (value == "correct") return Verdict::correct;
    if (value == "incorrect") return Verdict::incorrect;
    return std::nullopt;
}

} // namespace

std::string to_string(EvalMode mode) {
    switch (mode) {
        case EvalMode::closed_book: return "closed_book";
        case EvalMode::oracle: return "oracle";
        case EvalMode::rag_doc_top1: return "rag_doc_top1";
        case EvalMode::rag_chunk_top5: return "rag_chunk_top5";
    }
    return "?";
}

EvalMode eval_mode_from_string(std::string_view name) {
    for (auto m : kAllEvalModes) {
        if (to_string(m) == name) return m;
    }
    throw ValidationError("unknown eval mode '" + std::string(name) + "'");
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::correct: return "correct";
        case Verdict::incorrect: return "incorrect";
        case Verdict::unparseable: return "unparseable";
    }
    return "?";
}

std::string format_context_block(std::size_t rank, std::string_view text) {
    return "[Context " + std::to_string(rank) + "]\n" + std::string(text) + "\n\n";
}

ChatRequest build_eval_prompt(const QAPair& qa, EvalMode mode, const std::optional<std::vector<std::string>>& context,
                              const std::string& eval_template, int max_tokens) {
    if ((mode == EvalMode::closed_book) == context.has_value()) {
        throw ValidationError("context must be given exactly when the mode is not closed_book (mode " +
                              to_string(mode) + ")");
    }
    std::string blocks;
    if (context) {
        for (std::size_t i = 0; i < context->size(); ++i) blocks += format_context_block(i + 1, (*context)[i]);
    }
    ChatRequest req;
    req.messages.push_back({Role::user, render_template(eval_template, {{"context", blocks}, {"question", qa.question}})});
    req.temperature = 0.0;
    req.max_tokens = max_tokens;
    return req;
}

Verdict parse_verdict(std::string_view text) {
    std::optional<Verdict> last;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (auto v = verdict_of_line(line)) last = v;
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return last.value_or(Verdict::unparseable);
}

ChatRequest build_judge_request(const QAPair& qa, const std::string& candidate, const std::string& judge_template) {
    ChatRequest req;
    req.messages.push_back(
        {Role::user, render_template(judge_template, {{"question", qa.question},
                                                      {"reference", qa.reference_answer},
                                                      {"candidate", candidate}})});
    req.temperature = 0.0;
    req.max_tokens = 256;
    return req;
}

JudgeVerdict judge_answer(const QAPair& qa, const std::string& qa_id, const std::string& candidate, LlmClient& judge,
                          const std::string& judge_template) {
    JudgeVerdict v;
    v.qa_id = qa_id;
    try {
        v.raw_judge_text = judge.complete(build_judge_request(qa, candidate, judge_template)).text;
        v.verdict = parse_verdict(v.raw_judge_text);
    } catch (const BackendError& e) {
        v.raw_judge_text = std::string("judge call failed: ") + e.what();
        v.verdict = Verdict::unparseable;
    }
    return v;
}

double verdict_accuracy(const std::vector<JudgeVerdict>& verdicts) {
    if (verdicts.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& v : verdicts) correct += v.verdict == Verdict::correct;
    return static_cast<double>(correct) / static_cast<double>(verdicts.size());
}

nlohmann::json QAEvalResult::to_json() const {
    nlohmann::json items_json = nlohmann::json::array();
    for (const auto& it : items) {
        items_json.push_back({{"qa_id", it.qa_id},
                              {"question", it.question},
                              {"reference_answer", it.reference_answer},
                              {"context_ids", it.context_ids},
                              {"candidate", it.candidate},
                              {"verdict", to_string(it.verdict.verdict)},
                              {"raw_judge_text", it.verdict.raw_judge_text}});
    }
    return {{"mode", to_string(mode)}, {"model", model},           {"accuracy", accuracy},
            {"correct", correct},      {"unparseable", unparseable}, {"items", items_json}};
}

QAEvalResult QAEvalResult::from_json(const nlohmann::json& j) {
    QAEvalResult r;
    try {
        r.mode = eval_mode_from_string(j.at("mode").get<std::string>());
        r.model = j.at("model").get<std::string>();
        r.accuracy = j.at("accuracy").get<double>();
        r.correct = j.at("correct").get<std::size_t>();
        r.unparseable = j.at("unparseable").get<std::size_t>();
        for (const auto& it : j.at("items")) {
            QAItemResult item;
            item.qa_id = it.at("qa_id").get<std::string>();
            item.question = it.at("question").get<std::string>();
            item.reference_answer = it.at("reference_answer").get<std::string>();
            item.context_ids = it.at("context_ids").get<std::vector<std::string>>();
            item.candidate = it.at("candidate").get<std::string>();
            item.verdict.qa_id = item.qa_id;
            const auto v = it.at("verdict").get<std::string>();
            item.verdict.verdict = v == "correct" ? Verdict::correct
                                   : v == "incorrect" ? Verdict::incorrect
                                                      : Verdict::unparseable;
            item.verdict.raw_judge_text = it.at("raw_judge_text").get<std::string>();
            r.items.push_back(std::move(item));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("eval result: ") + e.what());
    }
    return r;
}

QAEvalResult run_qa_eval(LlmClient& subject, const Corpus& corpus, EvalMode mode, const RetrievalIndex* index,
                         LlmClient& judge, const PromptLibrary& prompts, const EvalSettings& settings) {
    const bool rag = mode == EvalMode::rag_doc_top1 || mode == EvalMode::rag_chunk_top5;
    if (rag && index == nullptr) throw ValidationError(to_string(mode) + " needs a retrieval index");

    const auto ids = corpus.qa_ids();
    const std::size_t n = corpus.qa_pairs.size();
    std::vector<QAItemResult> items(n);
    std::vector<std::optional<std::string>> subject_errors(n);
    std::vector<char> done(n, 0);

    const auto workers = static_cast<std::size_t>(std::min(subject.endpoint().max_parallel, judge.endpoint().max_parallel));
    parallel_for(n, workers, [&](std::size_t i) {
        const auto& qa = corpus.qa_pairs[i];
        auto& item = items[i];
        item.qa_id = ids[i];
        item.question = qa.question;
        item.reference_answer = qa.reference_answer;

        std::optional<std::vector<std::string>> context;
        if (mode == EvalMode::oracle) {
            const auto* doc = corpus.find(qa.doc_id);
            if (doc == nullptr) throw ValidationError("QA pair references missing document '" + qa.doc_id + "'");
            context = std::vector<std::string>{doc->text};
            item.context_ids.push_back(doc->id);
        } else if (rag) {
            const std::size_t top = mode == EvalMode::rag_doc_top1 ? settings.doc_top_n : settings.chunk_top_n;
            context.emplace();
            for (const auto& hit : index->retrieve(qa.question, top)) {
                const auto& units = index->units();
                auto u = std::find_if(units.begin(), units.end(), [&](const auto& x) { return x.unit_id == hit.unit_id; });
                context->push_back(u->text);
                item.context_ids.push_back(hit.unit_id);
            }
        }
        try {
            item.candidate = subject.complete(build_eval_prompt(qa, mode, context, prompts.eval_prompt, settings.max_tokens)).text;
        } catch (const BackendError& e) {
            subject_errors[i] = e.what();
            return;
        }
        item.verdict = judge_answer(qa, item.qa_id, item.candidate, judge, prompts.judge_prompt);
        done[i] = 1;
    });

    QAEvalResult result;
    result.mode = mode;
    result.model = subject.endpoint().model_name;
    std::optional<std::string> first_error;
    for (std::size_t i = 0; i < n; ++i) {
        if (subject_errors[i] && !first_error) first_error = items[i].qa_id + ": " + *subject_errors[i];
        if (!done[i]) continue;
        result.correct += items[i].verdict.verdict == Verdict::correct;
        result.unparseable += items[i].verdict.verdict == Verdict::unparseable;
        result.items.push_back(std::move(items[i]));
    }
    result.accuracy = result.items.empty() ? 0.0
                                           : static_cast<double>(result.correct) / static_cast<double>(result.items.size());
    if (first_error) throw EvalAborted("subject failed on " + *first_error, std::move(result));
    return result;
}

std::vector<ControlTask> load_control_tasks(const std::filesystem::path& path) {
    std::vector<ControlTask> tasks;
    std::map<std::string, std::size_t> index;
    for_each_jsonl(path, [&](std::size_t line, const json& r) {
        auto where = path.string() + ":" + std::to_string(line) + ": ";
        ControlItem item;
        std::string task_id;
        try {
            task_id = require_string(r, "task_id");
            item.context = require_string(r, "context");
            item.choices = require_field(r, "choices").get<std::vector<std::string>>();
            item.gold_index = require_field(r, "gold_index").get<std::size_t>();
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        } catch (const json::exception& e) {
            throw ValidationError(where + e.what());
        }
        if (item.choices.empty()) throw ValidationError(where + "no choices");
        if (item.gold_index >= item.choices.size()) throw ValidationError(where + "gold_index out of range");
        auto [it, inserted] = index.emplace(task_id, tasks.size());
        if (inserted) tasks.push_back({task_id, {}});
        tasks[it->second].items.push_back(std::move(item));
    });
    return tasks;
}

nlohmann::json ControlResult::to_json() const {
    return {{"model", model},
            {"mode", to_string(mode)},
            {"per_task_accuracy", per_task_accuracy},
            {"per_task_accuracy_raw", per_task_accuracy_raw},
            {"average", average},
            {"average_raw", average_raw}};
}

ControlResult ControlResult::from_json(const nlohmann::json& j) {
    ControlResult r;
    try {
        r.model = j.at("model").get<std::string>();
        r.mode = eval_mode_from_string(j.value("mode", std::string("closed_book")));
        r.per_task_accuracy = j.at("per_task_accuracy").get<std::map<std::string, double>>();
        r.per_task_accuracy_raw = j.at("per_task_accuracy_raw").get<std::map<std::string, double>>();
        r.average = j.at("average").get<double>();
        r.average_raw = j.at("average_raw").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("control result: ") + e.what());
    }
    return r;
}

std::size_t pick_choice(const std::vector<ContinuationScore>& scores, bool normalize_by_tokens) {
    auto value = [&](const ContinuationScore& s) {
        return normalize_by_tokens ? s.sum_logprob / static_cast<double>(s.num_tokens) : s.sum_logprob;
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (value(scores[i]) > value(scores[best])) best = i;
    }
    return best;
}

double unweighted_mean(const std::map<std::string, double>& per_task) {
    if (per_task.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [task, acc] : per_task) sum += acc;
    return sum / static_cast<double>(per_task.size());
}

ControlResult run_control_eval(LlmClient& subject, const std::vector<ControlTask>& tasks, EvalMode mode,
                               const ContextProvider& context) {
    ControlResult result;
    result.model = subject.endpoint().model_name;
    result.mode = mode;

    struct Flat {
        std::size_t task;
        std::size_t item;
    };
    std::vector<Flat> flat;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        for (std::size_t i = 0; i < tasks[t].items.size(); ++i) flat.push_back({t, i});
    }
    std::vector<std::pair<bool, bool>> hits(flat.size()); // (normalized, raw)

    parallel_for(flat.size(), static_cast<std::size_t>(subject.endpoint().max_parallel), [&](std::size_t k) {
        const auto& item = tasks[flat[k].task].items[flat[k].item];
        std::string prompt = context ? context(item.context) + item.context : item.context;
        std::vector<std::string> continuations;
        for (const auto& c : item.choices) continuations.push_back(" " + c);
        auto scores = subject.score_continuations(prompt, continuations);
        hits[k] = {pick_choice(scores, true) == item.gold_index, pick_choice(scores, false) == item.gold_index};
    });

    std::vector<std::size_t> norm_correct(tasks.size(), 0), raw_correct(tasks.size(), 0);
    for (std::size_t k = 0; k < flat.size(); ++k) {
        norm_correct[flat[k].task] += hits[k].first;
        raw_correct[flat[k].task] += hits[k].second;
    }
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const double n = static_cast<double>(tasks[t].items.size());
        result.per_task_accuracy[tasks[t].task_id] = n > 0 ? static_cast<double>(norm_correct[t]) / n : 0.0;
        result.per_task_accuracy_raw[tasks[t].task_id] = n > 0 ? static_cast<double>(raw_correct[t]) / n : 0.0;
    }
    result.average = unweighted_mean(result.per_task_accuracy);
    result.average_raw = unweighted_mean(result.per_task_accuracy_raw);
    return result;
}

} // namespace kinj
