// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kinj/textproc.hpp"

namespace kinj {

/// Calendar day. Only YYYY-MM-DD is accepted on input.
struct Date {
    int year = 1970;
    unsigned month = 1;
    unsigned day = 1;

    /// Parses "YYYY-MM-DD", optionally followed by a 'T' or ' ' time part that is dropped.
    static Date parse(std::string_view text);
    [[nodiscard]] std::string to_string() const;

    auto operator<=>(const Date&) const = default;
};

struct Document {
    std::string id;
    std::string text;
    Date date;
    std::string category = "unknown";
    std::size_t token_count = 0;

    bool operator==(const Document&) const = default;
};

struct QAPair {
    std::string doc_id;
    std::string question;
    std::string reference_answer;

    bool operator==(const QAPair&) const = default;
};

struct Corpus {
    std::vector<Document> documents;
    std::vector<QAPair> qa_pairs;
    /// Tokenizer that produced every token_count.
    TokenizerSpec tokenizer;

    [[nodiscard]] const Document* find(std::string_view doc_id) const;

    /// Stable id of the i-th QA pair: "<doc_id>/q<k>", k counting that document's pairs.
    [[nodiscard]] std::vector<std::string> qa_ids() const;

    /// Throws ValidationError on duplicate ids, empty text, or dangling QA references.
    void validate() const;

    bool operator==(const Corpus&) const = default;
};

Corpus load_corpus(const std::filesystem::path& doc_path, const std::filesystem::path& qa_path,
                   const TokenizerSpec& tokenizer);

struct CorpusFilter {
    std::size_t max_tokens = 3500;
    Date date_min{2023, 1, 1};
    Date date_max{2024, 12, 31};
    std::optional<std::string> category;
};

Corpus filter_corpus(const Corpus& corpus, const CorpusFilter& filter);

/// Writes both files in the same record format load_corpus reads.
void save_corpus(const Corpus& corpus, const std::filesystem::path& doc_path,
                 const std::filesystem::path& qa_path);

} // namespace kinj
