// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "kinj/error.hpp"
#include "kinj/jsonl.hpp"

namespace kinj {

namespace {

constexpr std::string_view kMagic = "KINJBM25";
constexpr std::uint32_t kFormatVersion = 1;

bool is_term_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u64(s.size());
        out_.append(s);
    }
    void raw(std::string_view s) { out_.append(s); }
    std::string take() { return std::move(out_); }

private:
    void put(std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        auto n = u64();
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    [[nodiscard]] bool done() const { return pos_ == in_.size(); }

private:
    void need(std::uint64_t n) const {
        if (n > in_.size() - pos_) throw ValidationError("index file truncated");
    }
    std::uint64_t get(int bytes) {
        need(static_cast<std::uint64_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::string> analyze(std::string_view text) {
    std::vector<std::string> terms;
    std::string cur;
    for (unsigned char c : text) {
        if (is_term_byte(c)) {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
        } else if (!cur.empty()) {
            terms.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) terms.push_back(std::move(cur));
    return terms;
}

RetrievalIndex::RetrievalIndex(Bm25Params params) : params_(params) {
    if (!(params.k1 > 0.0) || params.b < 0.0 || params.b > 1.0) {
        throw ValidationError("BM25 parameters need k1 > 0 and b in [0,1]");
    }
}

void RetrievalIndex::add(std::vector<RetrievalUnit> units) {
    std::unordered_set<std::string> batch_ids;
    std::vector<std::vector<std::string>> analyzed;
    analyzed.reserve(units.size());
    for (auto& u : units) {
        if (by_id_.count(u.unit_id) || !batch_ids.insert(u.unit_id).second) {
            throw ValidationError("duplicate retrieval unit id '" + u.unit_id + "'");
        }
        analyzed.push_back(analyze(u.text));
        if (analyzed.back().empty()) {
            throw ValidationError("retrieval unit '" + u.unit_id + "' has no terms");
        }
    }
    for (std::size_t i = 0; i < units.size(); ++i) {
        const std::size_t idx = units_.size();
        std::unordered_map<std::string, std::uint32_t> tf;
        for (auto& term : analyzed[i]) ++tf[term];
        for (const auto& [term, count] : tf) {
            ++df_[term];
            postings_[term].emplace_back(idx, count);
        }
        units[i].length_tokens = analyzed[i].size();
        total_length_ += analyzed[i].size();
        by_id_.emplace(units[i].unit_id, idx);
        tf_.push_back(std::move(tf));
        units_.push_back(std::move(units[i]));
    }
}

double RetrievalIndex::avg_length() const {
    return units_.empty() ? 0.0 : static_cast<double>(total_length_) / static_cast<double>(units_.size());
}

double RetrievalIndex::idf(const std::string& term) const {
    auto it = df_.find(term);
    const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    const double m = static_cast<double>(units_.size());
    return std::log(1.0 + (m - df + 0.5) / (df + 0.5));
}

double RetrievalIndex::term_score(std::size_t unit, std::uint32_t tf, const std::string& term) const {
    const double f = static_cast<double>(tf);
    const double len = static_cast<double>(units_[unit].length_tokens);
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * len / avg_length());
    return idf(term) * f * (params_.k1 + 1.0) / (f + norm);
}

double RetrievalIndex::score(std::string_view query, std::string_view unit_id) const {
    auto it = by_id_.find(std::string(unit_id));
    if (it == by_id_.end()) throw ValidationError("unknown retrieval unit '" + std::string(unit_id) + "'");
    const auto& tf = tf_[it->second];
    double total = 0.0;
    for (const auto& term : analyze(query)) {
        auto t = tf.find(term);
        if (t != tf.end()) total += term_score(it->second, t->second, term);
    }
    return total;
}

std::vector<RankedHit> RetrievalIndex::retrieve(std::string_view query, std::size_t n) const {
    if (n == 0) throw ValidationError("retrieve needs n >= 1");
    std::vector<double> scores(units_.size(), 0.0);
    for (const auto& term : analyze(query)) {
        auto p = postings_.find(term);
        if (p == postings_.end()) continue;
        for (const auto& [unit, tf] : p->second) scores[unit] += term_score(unit, tf, term);
    }
    std::vector<std::size_t> order(units_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t k = std::min(n, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return units_[a].unit_id < units_[b].unit_id;
                      });
    std::vector<RankedHit> hits;
    hits.reserve(k);
    for (std::size_t r = 0; r < k; ++r) hits.push_back({units_[order[r]].unit_id, scores[order[r]], r + 1});
    return hits;
}

std::string RetrievalIndex::serialize() const {
    Writer w;
    w.raw(kMagic);
    w.u32(kFormatVersion);
    w.f64(params_.k1);
    w.f64(params_.b);
    w.u64(units_.size());
    for (const auto& u : units_) {
        w.str(u.unit_id);
        w.str(u.doc_id);
        w.str(u.text);
        w.u64(u.length_tokens);
    }
    w.u64(df_.size());
    for (const auto& [term, df] : df_) {
        w.str(term);
        w.u32(df);
    }
    return w.take();
}

RetrievalIndex RetrievalIndex::deserialize(std::string_view bytes) {
    Reader r(bytes);
    if (r.raw(kMagic.size()) != kMagic) throw ValidationError("not a BM25 index file");
    if (auto v = r.u32(); v != kFormatVersion) {
        throw ValidationError("unsupported index format version " + std::to_string(v));
    }
    Bm25Params params;
    params.k1 = r.f64();
    params.b = r.f64();
    RetrievalIndex index(params);
    std::vector<RetrievalUnit> units(r.u64());
    std::vector<std::size_t> lengths;
    for (auto& u : units) {
        u.unit_id = r.str();
        u.doc_id = r.str();
        u.text = r.str();
        lengths.push_back(r.u64());
    }
    std::map<std::string, std::uint32_t> stored_df;
    for (auto n = r.u64(); n > 0; --n) {
        auto term = r.str();
        stored_df[term] = r.u32();
    }
    if (!r.done()) throw ValidationError("trailing bytes in index file");
    index.add(std::move(units));
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (index.units_[i].length_tokens != lengths[i]) throw ValidationError("index file statistics are inconsistent");
    }
    if (stored_df != index.df_) throw ValidationError("index file statistics are inconsistent");
    return index;
}

void RetrievalIndex::save(const std::filesystem::path& path) const { write_text_file(path, serialize()); }

RetrievalIndex RetrievalIndex::load(const std::filesystem::path& path) {
    return deserialize(read_text_file(path));
}

bool RetrievalIndex::operator==(const RetrievalIndex& other) const {
    return params_ == other.params_ && units_ == other.units_ && tf_ == other.tf_ && df_ == other.df_ &&
           total_length_ == other.total_length_;
}

RetrievalIndex build_index(std::vector<RetrievalUnit> units, Bm25Params params) {
    if (units.empty()) throw ValidationError("cannot build an index over zero units");
    RetrievalIndex index(params);
    index.add(std::move(units));
    return index;
}

} // namespace kinj
