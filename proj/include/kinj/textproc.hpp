// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace kinj {

struct Document;

enum class TokenizerKind { whitespace, byte, external };

struct TokenizerSpec {
    TokenizerKind kind = TokenizerKind::whitespace;
    /// Name of a served tokenizer; present iff kind == external.
    std::optional<std::string> external_name;
    /// Where the served tokenizer lives (external only).
    std::string base_url;

    void validate() const;
    [[nodiscard]] std::string describe() const;

    bool operator==(const TokenizerSpec&) const = default;
};

std::string to_string(TokenizerKind kind);
TokenizerKind tokenizer_kind_from_string(std::string_view name);

nlohmann::json to_json(const TokenizerSpec& spec);
TokenizerSpec tokenizer_from_json(const nlohmann::json& j);

/// Byte range [begin, end) of one token inside the source text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const TokenSpan&) const = default;
};

std::vector<TokenSpan> tokenize(std::string_view text, const TokenizerSpec& tokenizer);

std::size_t count_tokens(std::string_view text, const TokenizerSpec& tokenizer);

struct Chunk {
    std::string doc_id;
    std::size_t index = 0;
    std::size_t start_token = 0;
    std::size_t end_token = 0; // exclusive
    std::string text;
};

struct ChunkSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    bool operator==(const ChunkSpan&) const = default;
};

/// Fixed-stride windows over `num_tokens` tokens. Windows start at multiples of
/// size - overlap and stop once the last token is covered; the tail window is never merged.
/// Throws ValidationError unless 0 <= overlap < size.
std::vector<ChunkSpan> chunk_spans(std::size_t num_tokens, std::size_t size, std::size_t overlap);

/// Splits a document into token windows. Whitespace chunks are re-joined with single spaces,
/// byte and external chunks are byte slices of the original text.
std::vector<Chunk> chunk_document(const Document& doc, const TokenizerSpec& tokenizer,
                                  std::size_t size = 512, std::size_t overlap = 64);

} // namespace kinj
