// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/textproc.hpp"

#include <algorithm>
#include <chrono>

#include <nlohmann/json.hpp>

#include "kinj/corpus.hpp"
#include "kinj/error.hpp"
#include "kinj/transport.hpp"

namespace kinj {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

std::vector<TokenSpan> whitespace_spans(std::string_view text) {
    std::vector<TokenSpan> spans;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
        if (i == text.size()) break;
        std::size_t begin = i;
        while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
        spans.push_back({begin, i});
    }
    return spans;
}

std::vector<TokenSpan> external_spans(std::string_view text, const TokenizerSpec& spec) {
    auto transport = make_transport(spec.base_url);
    nlohmann::json body = {{"model", *spec.external_name}, {"text", std::string(text)}};
    HttpResult res = transport->post("/v1/tokenize", body.dump(), std::chrono::seconds(60));
    if (res.status != 200) {
        throw BackendError(BackendError::Kind::protocol,
                           "tokenizer " + spec.describe() + " returned HTTP " + std::to_string(res.status));
    }
    try {
        auto reply = nlohmann::json::parse(res.body);
        std::vector<TokenSpan> spans;
        for (const auto& b : reply.at("boundaries")) {
            TokenSpan span{b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>()};
            if (span.begin > span.end || span.end > text.size()) {
                throw BackendError(BackendError::Kind::protocol, "tokenizer boundary out of range");
            }
            spans.push_back(span);
        }
        if (reply.at("count").get<std::size_t>() != spans.size()) {
            throw BackendError(BackendError::Kind::protocol, "tokenizer count disagrees with boundaries");
        }
        return spans;
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(BackendError::Kind::protocol, std::string("bad tokenizer reply: ") + e.what());
    }
}

} // namespace

std::string to_string(TokenizerKind kind) {
    switch (kind) {
        case TokenizerKind::whitespace: return "whitespace";
        case TokenizerKind::byte: return "byte";
        case TokenizerKind::external: return "external";
    }
    return "?";
}

TokenizerKind tokenizer_kind_from_string(std::string_view name) {
    if (name == "whitespace") return TokenizerKind::whitespace;
    if (name == "byte") return TokenizerKind::byte;
    if (name == "external") return TokenizerKind::external;
    throw ValidationError("unknown tokenizer kind '" + std::string(name) + "'");
}

void TokenizerSpec::validate() const {
    if ((kind == TokenizerKind::external) != external_name.has_value()) {
        throw ValidationError("tokenizer: external_name must be set exactly when kind is external");
    }
    if (kind == TokenizerKind::external && base_url.empty()) {
        throw ValidationError("tokenizer: external tokenizer needs base_url");
    }
}

std::string TokenizerSpec::describe() const {
    if (kind == TokenizerKind::external) return "external:" + external_name.value_or("") + "@" + base_url;
    return to_string(kind);
}

nlohmann::json to_json(const TokenizerSpec& spec) {
    nlohmann::json j = {{"kind", to_string(spec.kind)}};
    if (spec.external_name) j["external_name"] = *spec.external_name;
    if (!spec.base_url.empty()) j["base_url"] = spec.base_url;
    return j;
}

TokenizerSpec tokenizer_from_json(const nlohmann::json& j) {
    TokenizerSpec spec;
    spec.kind = tokenizer_kind_from_string(j.value("kind", std::string("whitespace")));
    if (j.contains("external_name")) spec.external_name = j.at("external_name").get<std::string>();
    spec.base_url = j.value("base_url", std::string());
    spec.validate();
    return spec;
}

std::vector<TokenSpan> tokenize(std::string_view text, const TokenizerSpec& tokenizer) {
    switch (tokenizer.kind) {
        case TokenizerKind::whitespace: return whitespace_spans(text);
        case TokenizerKind::byte: {
            std::vector<TokenSpan> spans(text.size());
            for (std::size_t i = 0; i < text.size(); ++i) spans[i] = {i, i + 1};
            return spans;
        }
        case TokenizerKind::external: return external_spans(text, tokenizer);
    }
    return {};
}

std::size_t count_tokens(std::string_view text, const TokenizerSpec& tokenizer) {
    if (tokenizer.kind == TokenizerKind::byte) return text.size();
    return tokenize(text, tokenizer).size();
}

std::vector<ChunkSpan> chunk_spans(std::size_t num_tokens, std::size_t size, std::size_t overlap) {
    if (size == 0 || overlap >= size) {
        throw ValidationError("chunk size must exceed overlap (size=" + std::to_string(size) +
                              ", overlap=" + std::to_string(overlap) + ")");
    }
    std::vector<ChunkSpan> spans;
    const std::size_t stride = size - overlap;
    for (std::size_t start = 0; start < num_tokens; start += stride) {
        std::size_t end = std::min(start + size, num_tokens);
        spans.push_back({start, end});
        if (end == num_tokens) break;
    }
    return spans;
}

std::vector<Chunk> chunk_document(const Document& doc, const TokenizerSpec& tokenizer,
                                  std::size_t size, std::size_t overlap) {
    auto tokens = tokenize(doc.text, tokenizer);
    auto spans = chunk_spans(tokens.size(), size, overlap);
    std::vector<Chunk> chunks;
    chunks.reserve(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        Chunk c{doc.id, i, spans[i].start, spans[i].end, {}};
        if (tokenizer.kind == TokenizerKind::whitespace) {
            for (std::size_t t = c.start_token; t < c.end_token; ++t) {
                if (t != c.start_token) c.text += ' ';
                c.text.append(doc.text, tokens[t].begin, tokens[t].end - tokens[t].begin);
            }
        } else {
            std::size_t begin = tokens[c.start_token].begin;
            std::size_t end = tokens[c.end_token - 1].end;
            c.text = doc.text.substr(begin, end - begin);
        }
        chunks.push_back(std::move(c));
    }
    return chunks;
}

} // namespace kinj
