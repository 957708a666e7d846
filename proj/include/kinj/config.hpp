// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "kinj/augment.hpp"
#include "kinj/corpus.hpp"
#include "kinj/evaluation.hpp"
#include "kinj/llm.hpp"
#include "kinj/retrieval.hpp"
#include "kinj/textproc.hpp"
#include "kinj/training.hpp"

namespace kinj {

struct RetrievalSettings {
    Bm25Params bm25;
    std::size_t chunk_size = 512;
    std::size_t chunk_overlap = 64;
    std::size_t doc_top_n = 1;
    std::size_t chunk_top_n = 5;
};

struct RecipeSettings {
    RecipeKind kind = RecipeKind::para;
    std::size_t n = 1;
    double temperature = 1.0;
    int max_tokens = 4096;
};

struct RunConfig {
    std::filesystem::path corpus_path;
    std::filesystem::path qa_path;
    std::filesystem::path control_path;
    std::filesystem::path output_dir;
    std::optional<std::filesystem::path> prompt_dir;

    TokenizerSpec tokenizer;
    CorpusFilter filter;

    EndpointConfig subject;
    EndpointConfig generator;
    /// Instruction-synthesis model; defaults to the generator.
    EndpointConfig ipt;
    EndpointConfig judge;
    EndpointConfig trainer;

    RecipeSettings recipe;
    Hyperparams hyperparams;
    RetrievalSettings retrieval;
    int eval_max_tokens = 256;
    std::chrono::milliseconds poll_interval{2'000};
    std::chrono::milliseconds max_train_wait{6 * 3'600'000};

    std::int64_t seed = 0;
    /// Model the trainer starts from.
    std::string base_model;

    /// Echo of the resolved config with secrets removed.
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Environment lookup, injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

EnvLookup process_env();

/// Parses a config document. Relative paths resolve against `base_dir`. For each role
/// (SUBJECT, GENERATOR, IPT, JUDGE, TRAINER) KINJ_<ROLE>_API_KEY and KINJ_<ROLE>_BASE_URL override
/// the file. Errors name the offending field path, e.g. "endpoints.judge.max_parallel".
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir, const EnvLookup& env);

/// Reads and parses a config file; every referenced input path must exist.
RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env());

} // namespace kinj
