// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "kinj/error.hpp"
#include "kinj/retrieval.hpp"
#include "util.hpp"

using namespace kinj;

namespace {

std::vector<std::string> oracle_terms(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
        if (keep) {
            cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Textbook BM25 straight from term counts, no postings.
std::vector<double> oracle_scores(const std::vector<std::string>& texts, const std::string& query, double k1, double b) {
    const double m = static_cast<double>(texts.size());
    std::vector<std::map<std::string, int>> tf(texts.size());
    std::vector<double> len(texts.size());
    double total = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        auto terms = oracle_terms(texts[i]);
        len[i] = static_cast<double>(terms.size());
        total += len[i];
        for (const auto& t : terms) ++tf[i][t];
    }
    const double avg = total / m;
    std::vector<double> scores(texts.size(), 0.0);
    for (const auto& q : oracle_terms(query)) {
        double df = 0;
        for (const auto& m_tf : tf) df += m_tf.count(q) ? 1 : 0;
        const double idf = std::log(1.0 + (m - df + 0.5) / (df + 0.5));
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto it = tf[i].find(q);
            if (it == tf[i].end()) continue;
            const double f = it->second;
            scores[i] += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len[i] / avg));
        }
    }
    return scores;
}

RetrievalIndex index_of(const std::vector<std::string>& texts, Bm25Params p = {}) {
    std::vector<RetrievalUnit> units;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "u%03zu", i);
        units.push_back({id, "doc" + std::to_string(i), texts[i], 0});
    }
    return build_index(units, p);
}

} // namespace

TEST_CASE("analyzer lowercases ASCII and keeps non-ASCII bytes inside terms") {
    CHECK(analyze("Hello, WORLD-42!") == std::vector<std::string>{"hello", "world", "42"});
    CHECK(analyze("caf\xc3\xa9 au lait") == std::vector<std::string>{"caf\xc3\xa9", "au", "lait"});
    CHECK(analyze(" ...  ").empty());
}

TEST_CASE("idf matches the closed form") {
    auto idx = index_of({"apple banana", "apple cherry", "date"});
    CHECK(idx.idf("apple") == doctest::Approx(std::log(1 + (3 - 2 + 0.5) / (2 + 0.5))).epsilon(1e-15));
    CHECK(idx.idf("date") == doctest::Approx(std::log(1 + (3 - 1 + 0.5) / (1 + 0.5))).epsilon(1e-15));
    CHECK(idx.idf("absent") == doctest::Approx(std::log(1 + 3.5 / 0.5)).epsilon(1e-15));
    CHECK(idx.avg_length() == doctest::Approx(5.0 / 3.0));
    CHECK(idx.document_frequencies().at("apple") == 2);
}

TEST_CASE("scores equal the brute-force oracle on random corpora") {
    std::mt19937_64 rng(11);
    const std::vector<std::string> vocab = {"rate", "bank", "comet", "team", "vote", "water", "solar", "race",
                                            "city", "river", "price", "food",  "rail", "camera", "sun", "cup"};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::string> texts;
        for (int d = 0; d < 30; ++d) {
            std::string t;
            const int len = 1 + static_cast<int>(rng() % 25);
            for (int w = 0; w < len; ++w) t += vocab[rng() % vocab.size()] + " ";
            texts.push_back(t);
        }
        Bm25Params p{0.5 + static_cast<double>(rng() % 100) / 50.0, static_cast<double>(rng() % 101) / 100.0};
        auto idx = index_of(texts, p);
        std::string query = vocab[rng() % vocab.size()] + " " + vocab[rng() % vocab.size()] + " " + vocab[rng() % vocab.size()];
        auto expected = oracle_scores(texts, query, p.k1, p.b);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            CHECK(idx.score(query, idx.units()[i].unit_id) == doctest::Approx(expected[i]).epsilon(1e-12));
        }
        auto hits = idx.retrieve(query, 5);
        std::vector<std::size_t> order(texts.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return expected[a] > expected[b]; });
        for (std::size_t r = 0; r < hits.size(); ++r) {
            CHECK(hits[r].rank == r + 1);
            CHECK(hits[r].score == doctest::Approx(expected[order[r]]).epsilon(1e-12));
        }
    }
}

TEST_CASE("repeated query terms count per occurrence") {
    auto idx = index_of({"comet comet sun", "sun moon", "rail"});
    CHECK(idx.score("comet comet", "u000") == doctest::Approx(2 * idx.score("comet", "u000")).epsilon(1e-15));
}

TEST_CASE("ties break by ascending unit id") {
    auto idx = index_of({"same words", "other", "same words", "same words"});
    auto hits = idx.retrieve("same", 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].unit_id == "u000");
    CHECK(hits[1].unit_id == "u002");
    CHECK(hits[2].unit_id == "u003");
}

TEST_CASE("zero-score units still fill n and n may exceed the corpus") {
    auto idx = index_of({"alpha", "beta", "gamma"});
    auto hits = idx.retrieve("alpha beta", 10);
    REQUIRE(hits.size() == 3);
    CHECK(hits[2].unit_id == "u002");
    CHECK(hits[2].score == 0.0);
    auto none = idx.retrieve("nothing here", 2);
    REQUIRE(none.size() == 2);
    CHECK(none[0].unit_id == "u000");
    CHECK(none[1].unit_id == "u001");
    CHECK(idx.retrieve("alpha beta", 1)[0].unit_id == idx.retrieve("alpha beta", 3)[0].unit_id);
    CHECK_THROWS_AS((void)idx.retrieve("alpha", 0), ValidationError);
}

TEST_CASE("add validates before mutating") {
    RetrievalIndex idx;
    idx.add({{"a", "d", "one two", 0}});
    CHECK_THROWS_AS(idx.add({{"b", "d", "three", 0}, {"a", "d", "dup", 0}}), ValidationError);
    CHECK_THROWS_AS(idx.add({{"c", "d", " ,,, ", 0}}), ValidationError);
    CHECK(idx.units().size() == 1);
    CHECK_THROWS_AS(build_index({}), ValidationError);
    CHECK_THROWS_AS((void)idx.score("one", "missing"), ValidationError);
}

TEST_CASE("incremental add equals one batch build") {
    auto whole = index_of({"a b c", "b c d", "c d e"});
    RetrievalIndex parts;
    parts.add({{"u000", "doc0", "a b c", 0}});
    parts.add({{"u001", "doc1", "b c d", 0}, {"u002", "doc2", "c d e", 0}});
    CHECK(parts == whole);
    CHECK(parts.score("c d", "u001") == whole.score("c d", "u001"));
}

TEST_CASE("binary persistence round trips and rejects damage") {
    auto idx = index_of({"the comet Vela-7", "rail service expands", "caf\xc3\xa9 prices rise"}, Bm25Params{1.5, 0.6});
    auto bytes = idx.serialize();
    CHECK(bytes.substr(0, 8) == "KINJBM25");
    auto back = RetrievalIndex::deserialize(bytes);
    CHECK(back == idx);
    CHECK(back.params() == Bm25Params{1.5, 0.6});
    CHECK(back.serialize() == bytes);

    CHECK_THROWS_AS(RetrievalIndex::deserialize(bytes.substr(0, bytes.size() - 3)), ValidationError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(RetrievalIndex::deserialize(bad_magic), ValidationError);

    auto dir = test::scratch("retrieval_io");
    idx.save(dir / "i.bin");
    CHECK(RetrievalIndex::load(dir / "i.bin") == idx);
}
