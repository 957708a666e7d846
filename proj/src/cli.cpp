// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "kinj/augment.hpp"
#include "kinj/config.hpp"
#include "kinj/error.hpp"
#include "kinj/evaluation.hpp"
#include "kinj/hashing.hpp"
#include "kinj/jsonl.hpp"
#include "kinj/mock_service.hpp"
#include "kinj/report.hpp"
#include "kinj/retrieval.hpp"
#include "kinj/rundir.hpp"
#include "kinj/training.hpp"

namespace kinj::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::string run_dir;
    std::string recipe;
    std::string mode;
    std::optional<std::size_t> n;
    std::optional<std::int64_t> seed;
    bool dry_run = false;
    bool replay = false;
    bool base_subject = false;
    double threshold = 0.8;
    std::vector<std::string> runs;
    std::string host = "127.0.0.1";
    int port = 8089;
    std::string state_dir;
};

/// Everything a pipeline stage needs: resolved config, its run directory and backend clients.
class Stage {
public:
    Stage(const Options& opt, bool needs_lock) {
        if (opt.config.empty()) throw ValidationError("--config is required");
        cfg = load_config(opt.config);
        if (opt.seed) cfg.seed = *opt.seed;
        dir.emplace(opt.run_dir.empty() ? cfg.output_dir : fs::path(opt.run_dir));
        if (needs_lock) lock = std::make_unique<RunLock>(dir->root());
        MockService::shared().set_state_dir(dir->root() / "mock");
        prompts = cfg.prompt_dir ? PromptLibrary::load(*cfg.prompt_dir) : PromptLibrary::defaults();
        dry_run = opt.dry_run;
        if (opt.replay) {
            auto journals = dir->journals();
            if (journals.empty()) throw ArtifactMissing("--replay needs journals under " + (dir->root() / "journal").string());
            replay = std::make_shared<ReplayTransport>(journals);
        }
    }

    std::unique_ptr<LlmClient> client(const EndpointConfig& endpoint, const std::string& role) {
        std::shared_ptr<Journal> journal;
        if (!replay) journal = std::make_shared<Journal>(dir->journal(role));
        return std::make_unique<LlmClient>(endpoint, replay, journal);
    }

    Corpus corpus() const {
        return load_corpus(dir->require("corpus", "jsonl", "ingest"), dir->require("qa", "jsonl", "ingest"),
                           cfg.tokenizer);
    }

    /// Trained model from the latest successful job, unless told to stay on the configured subject.
    EndpointConfig subject(bool force_base) const {
        EndpointConfig e = cfg.subject;
        if (force_base) return e;
        if (auto p = dir->latest("job", "json")) {
            auto j = json::parse(read_text_file(*p));
            if (j.value("state", "") == "succeeded" && j.contains("model_name")) {
                e.model_name = j.at("model_name").get<std::string>();
                e.base_url = j.value("base_url", e.base_url);
            }
        }
        return e;
    }

    void write_json(std::string_view stem, json j, std::ostream& out) const {
        j["seed"] = cfg.seed;
        const auto path = dir->next(stem, "json");
        write_text_file(path, j.dump(2) + "\n");
        out << "wrote " << path.string() << "\n";
    }

    RunConfig cfg;
    std::optional<RunDir> dir;
    std::unique_ptr<RunLock> lock;
    PromptLibrary prompts;
    std::shared_ptr<Transport> replay;
    bool dry_run = false;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

int cmd_ingest(const Options& opt, std::ostream& out) {
    Stage st(opt, !opt.dry_run);
    const Corpus raw = load_corpus(st.cfg.corpus_path, st.cfg.qa_path, st.cfg.tokenizer);
    const Corpus kept = filter_corpus(raw, st.cfg.filter);
    std::size_t total = 0, lo = 0, hi = 0;
    for (std::size_t i = 0; i < kept.documents.size(); ++i) {
        const auto t = kept.documents[i].token_count;
        total += t;
        lo = i == 0 ? t : std::min(lo, t);
        hi = std::max(hi, t);
    }
    out << "documents: " << kept.documents.size() << " of " << raw.documents.size() << "\n"
        << "qa_pairs: " << kept.qa_pairs.size() << " of " << raw.qa_pairs.size() << "\n"
        << "tokens: total " << total << ", min " << lo << ", max " << hi << " (" << st.cfg.tokenizer.describe() << ")\n";
    if (st.dry_run) return kOk;
    if (kept.documents.empty()) throw ValidationError("filter kept no documents");

    save_corpus(kept, st.dir->next("corpus", "jsonl"), st.dir->next("qa", "jsonl"));
    st.write_json("ingest",
                  {{"documents", kept.documents.size()},
                   {"documents_before_filter", raw.documents.size()},
                   {"qa_pairs", kept.qa_pairs.size()},
                   {"qa_pairs_before_filter", raw.qa_pairs.size()},
                   {"total_tokens", total},
                   {"min_tokens", lo},
                   {"max_tokens", hi},
                   {"tokenizer", to_json(st.cfg.tokenizer)}},
                  out);
    std::string ids;
    for (const auto& d : kept.documents) ids += d.id + "\n";
    const std::string run_id = "run-" + hex64(hash_parts(std::to_string(st.cfg.seed), st.cfg.base_model, ids));
    st.write_json("run", {{"run_id", run_id}, {"base_model", st.cfg.base_model}}, out);
    return kOk;
}

Recipe stage_recipe(const Stage& st, RecipeKind kind, std::size_t n) {
    const auto& gen = kind == RecipeKind::ipt ? st.cfg.ipt : st.cfg.generator;
    Recipe r = make_recipe(kind, kind == RecipeKind::cpt ? 0 : n, st.prompts, gen.model_name, st.cfg.recipe.temperature);
    r.max_tokens = st.cfg.recipe.max_tokens;
    r.validate();
    return r;
}

int cmd_augment(const Options& opt, std::ostream& out) {
    Stage st(opt, !opt.dry_run);
    const RecipeKind kind = opt.recipe.empty() ? st.cfg.recipe.kind : recipe_kind_from_string(opt.recipe);
    const std::size_t n = opt.n.value_or(st.cfg.recipe.n);
    const Recipe recipe = stage_recipe(st, kind, n);
    const Corpus corpus = st.corpus();

    const std::size_t requests = corpus.documents.size() * recipe.variations * recipe.prompts.size();
    std::size_t prompt_tokens = 0;
    for (const auto& d : corpus.documents)
        for (const auto& p : recipe.prompts) prompt_tokens += count_tokens(render_prompt(p, d), st.cfg.tokenizer);
    prompt_tokens *= recipe.variations;
    out << "recipe: " << to_string(kind) << ", N = " << recipe.variations << ", prompts: " << recipe.prompts.size()
        << "\n"
        << "generation requests: " << requests << " (prompt tokens ~" << prompt_tokens << ", completion cap "
        << requests * static_cast<std::size_t>(recipe.max_tokens) << ")\n";
    if (kind != RecipeKind::ipt) out << "planned training examples: " << corpus.documents.size() + requests << "\n";
    if (st.dry_run) return kOk;

    GenerationReport rep;
    if (kind != RecipeKind::cpt) {
        auto gen = st.client(kind == RecipeKind::ipt ? st.cfg.ipt : st.cfg.generator,
                             kind == RecipeKind::ipt ? "ipt" : "generator");
        rep = generate_variations(corpus, recipe, *gen, st.cfg.tokenizer, st.cfg.seed);
    }
    const auto path = st.dir->next("synthetic", "jsonl");
    save_synthetic(rep.examples, path);
    out << "wrote " << path.string() << "\n";

    json gaps = json::array();
    for (const auto& g : rep.gaps) {
        gaps.push_back({{"doc_id", g.doc_id}, {"template_id", g.template_id}, {"round", g.round}, {"error", g.error}});
    }
    st.write_json("augment",
                  {{"recipe", to_string(kind)},
                   {"n", recipe.variations},
                   {"generator_model", recipe.generator_model},
                   {"requests", requests},
                   {"examples", rep.examples.size()},
                   {"gaps", gaps},
                   {"parse_failures", rep.parse_failures},
                   {"duplicates", rep.duplicates}},
                  out);
    out << "synthetic examples: " << rep.examples.size() << ", gaps: " << rep.gaps.size()
        << ", duplicates: " << rep.duplicates << "\n";
    return kOk;
}

std::vector<RetrievalUnit> document_units(const Corpus& corpus) {
    std::vector<RetrievalUnit> units;
    for (const auto& d : corpus.documents) units.push_back({d.id, d.id, d.text, 0});
    return units;
}

std::vector<RetrievalUnit> chunk_units(const Corpus& corpus, const RunConfig& cfg) {
    std::vector<RetrievalUnit> units;
    for (const auto& d : corpus.documents) {
        for (auto& c : chunk_document(d, cfg.tokenizer, cfg.retrieval.chunk_size, cfg.retrieval.chunk_overlap)) {
            char id[32];
            std::snprintf(id, sizeof id, "#%04zu", c.index);
            units.push_back({d.id + id, d.id, std::move(c.text), 0});
        }
    }
    return units;
}

int cmd_index(const Options& opt, std::ostream& out) {
    Stage st(opt, !opt.dry_run);
    const Corpus corpus = st.corpus();
    auto docs = document_units(corpus);
    auto chunks = chunk_units(corpus, st.cfg);
    out << "document units: " << docs.size() << ", chunk units: " << chunks.size() << " (size "
        << st.cfg.retrieval.chunk_size << ", overlap " << st.cfg.retrieval.chunk_overlap << ")\n";
    if (st.dry_run) return kOk;
    for (auto [stem, units] : {std::pair{"index-docs", &docs}, std::pair{"index-chunks", &chunks}}) {
        const auto path = st.dir->next(stem, "bin");
        build_index(std::move(*units), st.cfg.retrieval.bm25).save(path);
        out << "wrote " << path.string() << "\n";
    }
    return kOk;
}

json job_json(const std::string& run_id, const JobOutcome& outcome) {
    json mismatches = json::array();
    for (const auto& m : outcome.mismatches) {
        mismatches.push_back({{"step", m.step}, {"expected", m.expected}, {"reported", m.reported}});
    }
    return {{"run_id", run_id},
            {"state", to_string(outcome.status.state)},
            {"status", outcome.status.to_json()},
            {"mismatches", mismatches},
            {"failure", outcome.failure}};
}

int cmd_train(const Options& opt, std::ostream& out) {
    if (opt.replay) throw ValidationError("train cannot run from replayed journals");
    Stage st(opt, !opt.dry_run);
    const Corpus corpus = st.corpus();
    const auto aug = json::parse(read_text_file(st.dir->require("augment", "json", "augment")));
    auto synthetic = load_synthetic(st.dir->require("synthetic", "jsonl", "augment"));
    const auto kind = recipe_kind_from_string(aug.at("recipe").get<std::string>());
    const Recipe recipe = stage_recipe(st, kind, aug.at("n").get<std::size_t>());
    const auto ts = assemble_training_set(corpus, std::move(synthetic), recipe, st.cfg.tokenizer);
    const auto manifest = build_manifest(ts, st.cfg.hyperparams, st.cfg.base_model, st.cfg.seed);
    const auto& s = manifest.schedule;
    out << "training examples: " << ts.size() << " (" << ts.originals.size() << " original, " << ts.synthetic.size()
        << " synthetic), tokens: " << ts.total_tokens << "\n"
        << "schedule: " << s.steps_epoch1 << " warmup + " << s.steps_epoch2 << " decay steps, lr "
        << lr_at_step(s, 0) << " -> " << lr_at_step(s, s.steps_epoch1 - 1) << " -> " << lr_at_step(s, s.total_steps() - 1)
        << "\n";
    if (st.dry_run) return kOk;

    const auto mpath = st.dir->next("manifest", "json");
    write_text_file(mpath, manifest.to_json().dump(2) + "\n");
    out << "wrote " << mpath.string() << " (" << manifest.run_id << ")\n";

    TrainerClient trainer(st.cfg.trainer);
    const auto outcome = trainer.run(manifest, st.cfg.poll_interval, st.cfg.max_train_wait);
    json job = job_json(manifest.run_id, outcome);
    if (!outcome.ok()) {
        st.write_json("job", job, out);
        throw BackendError(BackendError::Kind::protocol, "training run " + manifest.run_id + " failed: " + outcome.failure);
    }
    const auto model = trainer.artifact(manifest.run_id);
    job["model_name"] = model.model_name;
    job["base_url"] = model.base_url;
    st.write_json("job", job, out);
    out << "trained model: " << model.model_name << "\n";
    return kOk;
}

std::vector<EvalMode> selected_modes(const Options& opt) {
    if (opt.mode.empty() || opt.mode == "all") return {std::begin(kAllEvalModes), std::end(kAllEvalModes)};
    return {eval_mode_from_string(opt.mode)};
}

int cmd_eval(const Options& opt, std::ostream& out) {
    Stage st(opt, !opt.dry_run);
    const Corpus corpus = st.corpus();
    const auto modes = selected_modes(opt);
    const auto subject_ep = st.subject(opt.base_subject);

    std::optional<RetrievalIndex> docs, chunks;
    for (auto m : modes) {
        if (m == EvalMode::rag_doc_top1 && !docs) docs = RetrievalIndex::load(st.dir->require("index-docs", "bin", "index"));
        if (m == EvalMode::rag_chunk_top5 && !chunks) {
            chunks = RetrievalIndex::load(st.dir->require("index-chunks", "bin", "index"));
        }
    }
    out << "subject: " << subject_ep.model_name << ", qa pairs: " << corpus.qa_pairs.size() << ", modes: " << modes.size()
        << " (" << 2 * corpus.qa_pairs.size() * modes.size() << " requests)\n";
    if (st.dry_run) return kOk;

    auto subject = st.client(subject_ep, "subject");
    auto judge = st.client(st.cfg.judge, "judge");
    const EvalSettings settings{st.cfg.eval_max_tokens, st.cfg.retrieval.doc_top_n, st.cfg.retrieval.chunk_top_n};
    for (auto m : modes) {
        const RetrievalIndex* index = m == EvalMode::rag_doc_top1 ? &*docs : m == EvalMode::rag_chunk_top5 ? &*chunks : nullptr;
        try {
            const auto r = run_qa_eval(*subject, corpus, m, index, *judge, st.prompts, settings);
            st.write_json("eval-" + to_string(m), r.to_json(), out);
            out << to_string(m) << ": accuracy " << fmt(r.accuracy) << " (" << r.correct << "/" << r.items.size()
                << ", unparseable " << r.unparseable << ")\n";
        } catch (const EvalAborted& e) {
            st.write_json("eval-" + to_string(m) + "-partial", e.partial().to_json(), out);
            throw;
        }
    }
    return kOk;
}

int cmd_control(const Options& opt, std::ostream& out) {
    Stage st(opt, !opt.dry_run);
    const auto tasks = load_control_tasks(st.cfg.control_path);
    const EvalMode mode = opt.mode.empty() ? EvalMode::closed_book : eval_mode_from_string(opt.mode);
    if (mode == EvalMode::oracle) {
        throw ValidationError("--mode oracle: control tasks have no gold document; oracle rows reuse the closed_book control");
    }
    const auto subject_ep = st.subject(opt.base_subject);
    std::size_t items = 0, choices = 0;
    for (const auto& t : tasks) {
        items += t.items.size();
        for (const auto& i : t.items) choices += i.choices.size();
    }
    out << "subject: " << subject_ep.model_name << ", tasks: " << tasks.size() << ", items: " << items
        << ", scored continuations: " << choices << "\n";
    if (st.dry_run) return kOk;

    std::optional<RetrievalIndex> index;
    std::size_t top = 0;
    if (mode == EvalMode::rag_doc_top1) {
        index = RetrievalIndex::load(st.dir->require("index-docs", "bin", "index"));
        top = st.cfg.retrieval.doc_top_n;
    } else if (mode == EvalMode::rag_chunk_top5) {
        index = RetrievalIndex::load(st.dir->require("index-chunks", "bin", "index"));
        top = st.cfg.retrieval.chunk_top_n;
    }
    ContextProvider provider;
    if (index) {
        provider = [&](const std::string& query) {
            std::string ctx;
            for (const auto& hit : index->retrieve(query, top)) {
                const auto& units = index->units();
                auto u = std::find_if(units.begin(), units.end(), [&](const auto& x) { return x.unit_id == hit.unit_id; });
                ctx += format_context_block(hit.rank, u->text);
            }
            return ctx;
        };
    }
    auto subject = st.client(subject_ep, "subject");
    const auto r = run_control_eval(*subject, tasks, mode, provider);
    st.write_json("control-" + to_string(mode), r.to_json(), out);
    for (const auto& [task, acc] : r.per_task_accuracy) {
        out << "  " << task << ": " << fmt(acc) << " (raw " << fmt(r.per_task_accuracy_raw.at(task)) << ")\n";
    }
    out << "control average: " << fmt(r.average) << " (raw " << fmt(r.average_raw) << ")\n";
    return kOk;
}

int cmd_audit(const Options& opt, std::ostream& out) {
    Stage st(opt, !opt.dry_run);
    const Corpus corpus = st.corpus();
    const auto synthetic = load_synthetic(st.dir->require("synthetic", "jsonl", "augment"));
    const auto hits = audit_contamination(synthetic, corpus.qa_pairs, opt.threshold);
    json list = json::array();
    for (const auto& h : hits) {
        list.push_back({{"doc_id", h.doc_id},
                        {"round", h.round},
                        {"generated_question", h.generated_question},
                        {"test_question", h.test_question},
                        {"jaccard", h.jaccard}});
        out << h.doc_id << " round " << h.round << " (" << fmt(h.jaccard, 3) << "): " << h.generated_question << "\n";
    }
    out << "contaminated questions: " << hits.size() << " (threshold " << fmt(opt.threshold, 2) << ")\n";
    if (!st.dry_run) st.write_json("contamination", {{"threshold", opt.threshold}, {"hits", list}}, out);
    return kOk;
}

int cmd_report(const Options& opt, std::ostream& out) {
    if (opt.runs.empty()) throw ValidationError("report needs at least one run directory");
    std::vector<fs::path> runs(opt.runs.begin(), opt.runs.end());
    const auto rows = aggregate(runs);
    const std::string csv = to_csv(rows);
    out << csv;
    std::size_t incomplete = 0;
    for (const auto& r : rows) incomplete += !r.complete();
    if (incomplete) out << incomplete << " incomplete row(s)\n";
    if (opt.dry_run) return kOk;
    RunDir dest(opt.run_dir.empty() ? fs::path(".") : fs::path(opt.run_dir));
    RunLock lock(dest.root());
    const auto target = dest.next("report", "");
    for (auto f : {EmitFormat::csv, EmitFormat::svg_lines}) {
        for (const auto& p : emit(rows, f, target)) out << "wrote " << p.string() << "\n";
    }
    return kOk;
}

int cmd_mock_server(const Options& opt, std::ostream& out) {
    MockService service(opt.state_dir.empty() ? fs::path() : fs::path(opt.state_dir));
    service.set_artifact_base_url("http://" + opt.host + ":" + std::to_string(opt.port));
    MockHttpServer server(service);
    out << "mock backend listening on http://" << opt.host << ":" << opt.port << std::endl;
    server.listen_blocking(opt.host, opt.port);
    return kOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"kinj: knowledge-injection experiment harness"};
    app.require_subcommand(1);
    Options opt;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "run configuration file");
        sub->add_option("--run-dir", opt.run_dir, "run directory (default: paths.output_dir)");
        sub->add_option("--seed", opt.seed, "override the configured seed");
        sub->add_flag("--dry-run", opt.dry_run, "print the planned work without calling backends or writing");
        sub->add_flag("--replay", opt.replay, "serve backend replies from the run directory's journals");
        return sub;
    };
    struct Command {
        CLI::App* app;
        int (*fn)(const Options&, std::ostream&);
    };
    std::vector<Command> commands;
    commands.push_back({common(app.add_subcommand("ingest", "load, filter and store the corpus")), cmd_ingest});
    auto* augment = common(app.add_subcommand("augment", "generate synthetic training text"));
    augment->add_option("--recipe", opt.recipe, "cpt, rtw_all, rtw_no_qa, rtw_qa_only, para or ipt");
    augment->add_option("--n", opt.n, "number of variation rounds");
    commands.push_back({augment, cmd_augment});
    commands.push_back({common(app.add_subcommand("index", "build document and chunk BM25 indexes")), cmd_index});
    commands.push_back({common(app.add_subcommand("train", "submit the training manifest and verify the run")), cmd_train});
    auto* eval = common(app.add_subcommand("eval", "judge in-domain QA accuracy"));
    eval->add_option("--mode", opt.mode, "closed_book, oracle, rag_doc_top1, rag_chunk_top5 or all");
    eval->add_flag("--base", opt.base_subject, "evaluate the configured subject even after training");
    commands.push_back({eval, cmd_eval});
    auto* control = common(app.add_subcommand("control", "multiple-choice control tasks"));
    control->add_option("--mode", opt.mode, "closed_book, rag_doc_top1 or rag_chunk_top5");
    control->add_flag("--base", opt.base_subject, "score the configured subject even after training");
    commands.push_back({control, cmd_control});
    auto* report = app.add_subcommand("report", "aggregate run directories into tradeoff tables and charts");
    report->add_option("runs", opt.runs, "run directories")->required();
    report->add_option("--run-dir", opt.run_dir, "where report-v<N>/ is written (default: .)");
    report->add_flag("--dry-run", opt.dry_run, "print the table only");
    commands.push_back({report, cmd_report});
    auto* mock = app.add_subcommand("mock-server", "serve the deterministic mock backends over HTTP");
    mock->add_option("--host", opt.host);
    mock->add_option("--port", opt.port);
    mock->add_option("--state-dir", opt.state_dir, "where trainer jobs are persisted");
    commands.push_back({mock, cmd_mock_server});
    auto* audit = common(app.add_subcommand("audit-contamination", "find generated questions overlapping test questions"));
    audit->add_option("--threshold", opt.threshold, "term-set Jaccard threshold")->check(CLI::Range(0.0, 1.0));
    commands.push_back({audit, cmd_audit});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }

    try {
        for (const auto& c : commands) {
            if (c.app->parsed()) return c.fn(opt, out);
        }
        return kValidation;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const ArtifactMissing& e) {
        err << "error: " << e.what() << "\n";
        return kArtifactMissing;
    } catch (const BackendError& e) {
        err << "backend error: " << e.what() << "\n";
        return kBackend;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
}

} // namespace kinj::cli
