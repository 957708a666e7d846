// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/corpus.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "kinj/error.hpp"
#include "kinj/jsonl.hpp"

namespace kinj {

namespace {

bool parse_uint(std::string_view s, unsigned& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(int y, unsigned m) {
    static constexpr unsigned days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && leap(y) ? 29 : days[m - 1];
}

std::string at_line(const std::filesystem::path& p, std::size_t line) {
    return p.string() + ":" + std::to_string(line) + ": ";
}

} // namespace

Date Date::parse(std::string_view text) {
    auto fail = [&] { return ValidationError("unparseable date '" + std::string(text) + "' (want YYYY-MM-DD)"); };
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') throw fail();
    if (text.size() > 10 && text[10] != 'T' && text[10] != ' ') throw fail();
    unsigned y = 0, m = 0, d = 0;
    if (!parse_uint(text.substr(0, 4), y) || !parse_uint(text.substr(5, 2), m) ||
        !parse_uint(text.substr(8, 2), d)) {
        throw fail();
    }
    if (m < 1 || m > 12 || d < 1 || d > days_in_month(static_cast<int>(y), m)) throw fail();
    return Date{static_cast<int>(y), m, d};
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
    return buf;
}

const Document* Corpus::find(std::string_view doc_id) const {
    for (const auto& d : documents) {
        if (d.id == doc_id) return &d;
    }
    return nullptr;
}

std::vector<std::string> Corpus::qa_ids() const {
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<std::string> ids;
    ids.reserve(qa_pairs.size());
    for (const auto& qa : qa_pairs) {
        ids.push_back(qa.doc_id + "/q" + std::to_string(seen[qa.doc_id]++));
    }
    return ids;
}

void Corpus::validate() const {
    std::unordered_set<std::string> ids;
    for (const auto& d : documents) {
        if (d.id.empty()) throw ValidationError("document with empty id");
        if (!ids.insert(d.id).second) throw ValidationError("duplicate document id '" + d.id + "'");
        if (d.text.empty()) throw ValidationError("document '" + d.id + "' has empty text");
    }
    for (const auto& qa : qa_pairs) {
        if (!ids.count(qa.doc_id)) throw ValidationError("QA pair references missing document '" + qa.doc_id + "'");
        if (qa.question.empty() || qa.reference_answer.empty()) {
            throw ValidationError("QA pair for '" + qa.doc_id + "' has an empty question or answer");
        }
    }
}

Corpus load_corpus(const std::filesystem::path& doc_path, const std::filesystem::path& qa_path,
                   const TokenizerSpec& tokenizer) {
    tokenizer.validate();
    Corpus corpus;
    corpus.tokenizer = tokenizer;
    std::unordered_set<std::string> ids;

    for_each_jsonl(doc_path, [&](std::size_t line, const json& rec) {
        Document doc;
        try {
            doc.id = require_string(rec, "id");
            doc.text = require_string(rec, "text");
            doc.date = Date::parse(require_string(rec, "date"));
            if (auto it = rec.find("category"); it != rec.end() && it->is_string()) {
                doc.category = it->get<std::string>();
            }
        } catch (const ValidationError& e) {
            throw ValidationError(at_line(doc_path, line) + e.what());
        }
        if (doc.id.empty()) throw ValidationError(at_line(doc_path, line) + "empty id");
        if (doc.text.empty()) throw ValidationError(at_line(doc_path, line) + "empty text");
        if (!ids.insert(doc.id).second) {
            throw ValidationError(at_line(doc_path, line) + "duplicate id '" + doc.id + "'");
        }
        doc.token_count = count_tokens(doc.text, tokenizer);
        corpus.documents.push_back(std::move(doc));
    });

    for_each_jsonl(qa_path, [&](std::size_t line, const json& rec) {
        QAPair qa;
        try {
            qa.doc_id = require_string(rec, "doc_id");
            qa.question = require_string(rec, "question");
            qa.reference_answer = require_string(rec, "answer");
        } catch (const ValidationError& e) {
            throw ValidationError(at_line(qa_path, line) + e.what());
        }
        if (!ids.count(qa.doc_id)) {
            throw ValidationError(at_line(qa_path, line) + "dangling doc_id '" + qa.doc_id + "'");
        }
        if (qa.question.empty() || qa.reference_answer.empty()) {
            throw ValidationError(at_line(qa_path, line) + "empty question or answer");
        }
        corpus.qa_pairs.push_back(std::move(qa));
    });
    return corpus;
}

Corpus filter_corpus(const Corpus& corpus, const CorpusFilter& filter) {
    if (filter.max_tokens == 0) throw ValidationError("filter: max_tokens must be positive");
    if (filter.date_max < filter.date_min) throw ValidationError("filter: date_min after date_max");

    Corpus out;
    out.tokenizer = corpus.tokenizer;
    std::set<std::string> kept;
    for (const auto& d : corpus.documents) {
        if (d.token_count > filter.max_tokens) continue;
        if (d.date < filter.date_min || filter.date_max < d.date) continue;
        // "unknown" never matches: documents without a category fail any category filter.
        if (filter.category && (d.category == "unknown" || d.category != *filter.category)) continue;
        kept.insert(d.id);
        out.documents.push_back(d);
    }
    for (const auto& qa : corpus.qa_pairs) {
        if (kept.count(qa.doc_id)) out.qa_pairs.push_back(qa);
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& doc_path,
                 const std::filesystem::path& qa_path) {
    std::vector<json> docs;
    docs.reserve(corpus.documents.size());
    for (const auto& d : corpus.documents) {
        docs.push_back({{"id", d.id},
                        {"text", d.text},
                        {"date", d.date.to_string()},
                        {"category", d.category},
                        {"token_count", d.token_count}});
    }
    std::vector<json> qas;
    qas.reserve(corpus.qa_pairs.size());
    for (const auto& q : corpus.qa_pairs) {
        qas.push_back({{"doc_id", q.doc_id}, {"question", q.question}, {"answer", q.reference_answer}});
    }
    write_text_file(doc_path, to_jsonl(docs));
    write_text_file(qa_path, to_jsonl(qas));
}

} // namespace kinj
