// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/config.hpp"

#include <cstdlib>

#include "kinj/error.hpp"
#include "kinj/jsonl.hpp"

namespace kinj {

namespace fs = std::filesystem;

namespace {

const json& section(const json& doc, const char* name) {
    static const json empty = json::object();
    if (!doc.contains(name)) return empty;
    const auto& s = doc.at(name);
    if (!s.is_object()) throw ValidationError(std::string(name) + ": expected an object");
    return s;
}

template <typename T>
T field(const json& obj, const std::string& where, const char* key, T fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + "." + key + ": wrong type (" + obj.at(key).dump() + ")");
    }
}

template <typename T>
T required(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) throw ValidationError(where + "." + key + ": required");
    return field<T>(obj, where, key, T{});
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

EndpointConfig endpoint(const json& endpoints, const char* role, const std::string& env_role, const EnvLookup& env,
                        const json* fallback = nullptr) {
    const std::string where = std::string("endpoints.") + role;
    json e;
    if (endpoints.contains(role)) {
        e = endpoints.at(role);
    } else if (fallback) {
        e = *fallback;
    } else {
        throw ValidationError(where + ": required");
    }
    if (!e.is_object()) throw ValidationError(where + ": expected an object");
    if (auto url = env("KINJ_" + env_role + "_BASE_URL")) e["base_url"] = *url;
    if (auto key = env("KINJ_" + env_role + "_API_KEY")) e["api_key"] = *key;
    return endpoint_from_json(e, where);
}

} // namespace

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v) return std::nullopt;
        return std::string(v);
    };
}

RunConfig parse_config(const json& doc, const fs::path& base_dir, const EnvLookup& env) {
    if (!doc.is_object()) throw ValidationError("config: expected an object");
    RunConfig c;

    const auto& paths = section(doc, "paths");
    c.corpus_path = resolve(base_dir, required<std::string>(paths, "paths", "corpus"));
    c.qa_path = resolve(base_dir, required<std::string>(paths, "paths", "qa"));
    c.control_path = resolve(base_dir, required<std::string>(paths, "paths", "control_tasks"));
    c.output_dir = resolve(base_dir, field<std::string>(paths, "paths", "output_dir", "runs/default"));
    if (paths.contains("prompt_dir") && !paths.at("prompt_dir").is_null()) {
        c.prompt_dir = resolve(base_dir, field<std::string>(paths, "paths", "prompt_dir", ""));
    }

    if (doc.contains("tokenizer")) {
        try {
            c.tokenizer = tokenizer_from_json(doc.at("tokenizer"));
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("tokenizer: ") + e.what());
        }
    }

    const auto& filter = section(doc, "filter");
    c.filter.max_tokens = field<std::size_t>(filter, "filter", "max_tokens", c.filter.max_tokens);
    try {
        if (filter.contains("date_min")) c.filter.date_min = Date::parse(required<std::string>(filter, "filter", "date_min"));
        if (filter.contains("date_max")) c.filter.date_max = Date::parse(required<std::string>(filter, "filter", "date_max"));
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("filter: ") + e.what());
    }
    if (c.filter.date_max < c.filter.date_min) throw ValidationError("filter.date_max: earlier than filter.date_min");
    if (filter.contains("category") && !filter.at("category").is_null()) {
        c.filter.category = field<std::string>(filter, "filter", "category", "");
    }

    const auto& endpoints = section(doc, "endpoints");
    c.subject = endpoint(endpoints, "subject", "SUBJECT", env);
    c.generator = endpoint(endpoints, "generator", "GENERATOR", env);
    const json generator_json = endpoints.contains("generator") ? endpoints.at("generator") : json::object();
    c.ipt = endpoint(endpoints, "ipt", "IPT", env, &generator_json);
    c.judge = endpoint(endpoints, "judge", "JUDGE", env);
    c.trainer = endpoint(endpoints, "trainer", "TRAINER", env);

    const auto& recipe = section(doc, "recipe");
    try {
        c.recipe.kind = recipe_kind_from_string(field<std::string>(recipe, "recipe", "kind", "para"));
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("recipe.kind: ") + e.what());
    }
    c.recipe.n = field<std::size_t>(recipe, "recipe", "n", 1);
    c.recipe.temperature = field<double>(recipe, "recipe", "temperature", 1.0);
    c.recipe.max_tokens = field<int>(recipe, "recipe", "max_tokens", 4096);
    if (c.recipe.temperature < 0) throw ValidationError("recipe.temperature: must be >= 0");
    if (c.recipe.max_tokens <= 0) throw ValidationError("recipe.max_tokens: must be positive");

    if (doc.contains("hyperparams")) {
        try {
            c.hyperparams = hyperparams_from_json(section(doc, "hyperparams"));
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("hyperparams: ") + e.what());
        }
    }

    const auto& retrieval = section(doc, "retrieval");
    auto& r = c.retrieval;
    r.bm25.k1 = field<double>(retrieval, "retrieval", "k1", r.bm25.k1);
    r.bm25.b = field<double>(retrieval, "retrieval", "b", r.bm25.b);
    r.chunk_size = field<std::size_t>(retrieval, "retrieval", "chunk_size", r.chunk_size);
    r.chunk_overlap = field<std::size_t>(retrieval, "retrieval", "chunk_overlap", r.chunk_overlap);
    r.doc_top_n = field<std::size_t>(retrieval, "retrieval", "doc_top_n", r.doc_top_n);
    r.chunk_top_n = field<std::size_t>(retrieval, "retrieval", "chunk_top_n", r.chunk_top_n);
    if (!(r.bm25.k1 > 0)) throw ValidationError("retrieval.k1: must be positive");
    if (r.bm25.b < 0 || r.bm25.b > 1) throw ValidationError("retrieval.b: must lie in [0, 1]");
    if (r.chunk_size == 0) throw ValidationError("retrieval.chunk_size: must be positive");
    if (r.chunk_overlap >= r.chunk_size) throw ValidationError("retrieval.chunk_overlap: must be below chunk_size");
    if (r.doc_top_n == 0) throw ValidationError("retrieval.doc_top_n: must be positive");
    if (r.chunk_top_n == 0) throw ValidationError("retrieval.chunk_top_n: must be positive");

    const auto& eval = section(doc, "eval");
    c.eval_max_tokens = field<int>(eval, "eval", "max_tokens", 256);
    if (c.eval_max_tokens <= 0) throw ValidationError("eval.max_tokens: must be positive");

    const auto& training = section(doc, "training");
    c.poll_interval = std::chrono::milliseconds(field<std::int64_t>(training, "training", "poll_interval_ms", 2'000));
    c.max_train_wait =
        std::chrono::milliseconds(field<std::int64_t>(training, "training", "max_wait_ms", 6 * 3'600'000));
    if (c.poll_interval.count() < 0) throw ValidationError("training.poll_interval_ms: must be >= 0");
    if (c.max_train_wait.count() <= 0) throw ValidationError("training.max_wait_ms: must be positive");

    c.seed = required<std::int64_t>(doc, "config", "seed");
    c.base_model = field<std::string>(doc, "config", "base_model", c.subject.model_name);
    if (c.base_model.empty()) throw ValidationError("config.base_model: must not be empty");
    return c;
}

RunConfig load_config(const fs::path& path, const EnvLookup& env) {
    if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed config: " + e.what());
    }
    RunConfig c = parse_config(doc, fs::absolute(path).parent_path(), env);
    auto must_exist = [](const fs::path& p, const char* field) {
        if (!fs::exists(p)) throw ValidationError(std::string(field) + ": path does not exist: " + p.string());
    };
    must_exist(c.corpus_path, "paths.corpus");
    must_exist(c.qa_path, "paths.qa");
    must_exist(c.control_path, "paths.control_tasks");
    if (c.prompt_dir) must_exist(*c.prompt_dir, "paths.prompt_dir");
    return c;
}

json RunConfig::to_json() const {
    auto ep = [](const EndpointConfig& e) { return kinj::to_json(e); };
    json filt = {{"max_tokens", filter.max_tokens},
                 {"date_min", filter.date_min.to_string()},
                 {"date_max", filter.date_max.to_string()},
                 {"category", filter.category ? json(*filter.category) : json(nullptr)}};
    return json{
        {"paths",
         {{"corpus", corpus_path.string()},
          {"qa", qa_path.string()},
          {"control_tasks", control_path.string()},
          {"output_dir", output_dir.string()},
          {"prompt_dir", prompt_dir ? json(prompt_dir->string()) : json(nullptr)}}},
        {"tokenizer", kinj::to_json(tokenizer)},
        {"filter", filt},
        {"endpoints",
         {{"subject", ep(subject)}, {"generator", ep(generator)}, {"ipt", ep(ipt)}, {"judge", ep(judge)},
          {"trainer", ep(trainer)}}},
        {"recipe",
         {{"kind", to_string(recipe.kind)},
          {"n", recipe.n},
          {"temperature", recipe.temperature},
          {"max_tokens", recipe.max_tokens}}},
        {"hyperparams", kinj::to_json(hyperparams)},
        {"retrieval",
         {{"k1", retrieval.bm25.k1},
          {"b", retrieval.bm25.b},
          {"chunk_size", retrieval.chunk_size},
          {"chunk_overlap", retrieval.chunk_overlap},
          {"doc_top_n", retrieval.doc_top_n},
          {"chunk_top_n", retrieval.chunk_top_n}}},
        {"eval", {{"max_tokens", eval_max_tokens}}},
        {"training", {{"poll_interval_ms", poll_interval.count()}, {"max_wait_ms", max_train_wait.count()}}},
        {"seed", seed},
        {"base_model", base_model},
    };
}

} // namespace kinj
