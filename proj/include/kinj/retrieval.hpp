// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kinj {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    bool operator==(const Bm25Params&) const = default;
};

struct RetrievalUnit {
    std::string unit_id;
    std::string doc_id;
    std::string text;
    /// Number of analyzed terms; filled in by the index.
    std::size_t length_tokens = 0;
    bool operator==(const RetrievalUnit&) const = default;
};

struct RankedHit {
    std::string unit_id;
    double score = 0.0;
    std::size_t rank = 0; // 1-based
};

/// Lowercases ASCII letters and splits on runs of non-alphanumeric ASCII bytes.
/// Bytes >= 0x80 are kept inside terms so UTF-8 words survive intact.
std::vector<std::string> analyze(std::string_view text);

/// Okapi BM25 over a fixed set of retrieval units.
///
/// idf(t) = ln(1 + (M - df + 0.5) / (df + 0.5)) is never negative, so every score is >= 0.
/// Query terms are summed per occurrence, so a repeated query term counts twice.
class RetrievalIndex {
public:
    explicit RetrievalIndex(Bm25Params params = {});

    /// Appends units and updates all statistics. Throws ValidationError on duplicate
    /// unit ids or a unit whose text has no terms; on error the index is unchanged.
    void add(std::vector<RetrievalUnit> units);

    [[nodiscard]] const std::vector<RetrievalUnit>& units() const noexcept { return units_; }
    [[nodiscard]] const Bm25Params& params() const noexcept { return params_; }
    [[nodiscard]] double avg_length() const;
    [[nodiscard]] const std::map<std::string, std::uint32_t>& document_frequencies() const noexcept { return df_; }
    [[nodiscard]] const std::unordered_map<std::string, std::uint32_t>& term_frequencies(std::size_t unit) const {
        return tf_.at(unit);
    }

    [[nodiscard]] double idf(const std::string& term) const;

    /// Throws ValidationError for an unknown unit id.
    [[nodiscard]] double score(std::string_view query, std::string_view unit_id) const;

    /// The n best units, score-descending with ties broken by ascending unit_id.
    [[nodiscard]] std::vector<RankedHit> retrieve(std::string_view query, std::size_t n) const;

    [[nodiscard]] std::string serialize() const;
    static RetrievalIndex deserialize(std::string_view bytes);

    void save(const std::filesystem::path& path) const;
    static RetrievalIndex load(const std::filesystem::path& path);

    bool operator==(const RetrievalIndex& other) const;

private:
    [[nodiscard]] double term_score(std::size_t unit, std::uint32_t tf, const std::string& term) const;

    Bm25Params params_;
    std::vector<RetrievalUnit> units_;
    std::vector<std::unordered_map<std::string, std::uint32_t>> tf_;
    std::map<std::string, std::uint32_t> df_;
    std::unordered_map<std::string, std::vector<std::pair<std::size_t, std::uint32_t>>> postings_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::size_t total_length_ = 0;
};

/// Throws ValidationError for an empty unit list.
RetrievalIndex build_index(std::vector<RetrievalUnit> units, Bm25Params params = {});

} // namespace kinj
