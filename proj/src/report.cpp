// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "kinj/error.hpp"
#include "kinj/evaluation.hpp"
#include "kinj/jsonl.hpp"
#include "kinj/rundir.hpp"
#include "kinj/training.hpp"

namespace kinj {

namespace fs = std::filesystem;

namespace {

struct RunArtifacts {
    std::string run_id;
    std::optional<std::int64_t> seed;
    std::optional<TrainingManifest> manifest;
    std::optional<std::string> trained_model;
    std::map<EvalMode, QAEvalResult> evals;
    std::map<EvalMode, ControlResult> controls;
};

json read_json(const fs::path& p) {
    try {
        return json::parse(read_text_file(p));
    } catch (const json::exception& e) {
        throw ValidationError(p.string() + ": malformed artifact: " + e.what());
    }
}

RunArtifacts load_run(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ArtifactMissing("run directory not found: " + dir.string());
    RunDir rd(dir);
    RunArtifacts run;
    run.run_id = dir.filename().string();
    if (auto p = rd.latest("run", "json")) {
        auto j = read_json(*p);
        run.run_id = j.value("run_id", run.run_id);
        if (j.contains("seed")) run.seed = j.at("seed").get<std::int64_t>();
    }
    if (auto p = rd.latest("manifest", "json")) {
        run.manifest = TrainingManifest::from_json(read_json(*p));
        if (run.seed && *run.seed != run.manifest->seed) {
            throw ValidationError("inconsistent run metadata in " + dir.string() + ": manifest seed " +
                                  std::to_string(run.manifest->seed) + " differs from run seed " +
                                  std::to_string(*run.seed));
        }
    }
    if (auto p = rd.latest("job", "json")) {
        auto j = read_json(*p);
        if (!run.manifest) {
            throw ValidationError("inconsistent run metadata in " + dir.string() + ": job artifact without manifest");
        }
        if (j.value("run_id", "") != run.manifest->run_id) {
            throw ValidationError("inconsistent run metadata in " + dir.string() + ": job run_id " +
                                  j.value("run_id", "") + " does not match manifest " + run.manifest->run_id);
        }
        if (j.value("state", "") == "succeeded" && j.contains("model_name")) {
            run.trained_model = j.at("model_name").get<std::string>();
        }
    }
    for (EvalMode mode : kAllEvalModes) {
        if (auto p = rd.latest("eval-" + to_string(mode), "json")) {
            auto r = QAEvalResult::from_json(read_json(*p));
            if (r.mode != mode) {
                throw ValidationError("inconsistent run metadata: " + p->string() + " holds mode " + to_string(r.mode));
            }
            run.evals.emplace(mode, std::move(r));
        }
        if (auto p = rd.latest("control-" + to_string(mode), "json")) {
            run.controls.emplace(mode, ControlResult::from_json(read_json(*p)));
        }
    }
    return run;
}

/// Control score of `model`: the mode's own control run, else the closed-book one.
std::optional<double> control_for(const RunArtifacts& run, EvalMode mode, const std::string& model) {
    for (EvalMode m : {mode, EvalMode::closed_book}) {
        auto it = run.controls.find(m);
        if (it != run.controls.end() && it->second.model == model) return it->second.average;
    }
    return std::nullopt;
}

std::string trained_method(const TrainingManifest& m, EvalMode mode) {
    return mode == EvalMode::closed_book ? m.recipe : m.recipe + "+" + to_string(mode);
}

void rows_for_run(const RunArtifacts& run, std::vector<TradeoffRow>& out) {
    bool trained_row = false;
    bool reference_row = false;
    for (const auto& [mode, result] : run.evals) {
        TradeoffRow row;
        row.in_domain_accuracy = result.accuracy;
        row.control_average = control_for(run, mode, result.model);
        if (run.trained_model && result.model == *run.trained_model) {
            row.method = trained_method(*run.manifest, mode);
            row.variations_n = run.manifest->variations_n;
            row.training_tokens = run.manifest->total_tokens;
            row.run_id = run.manifest->run_id;
            trained_row = true;
        } else {
            row.method = to_string(mode);
            row.run_id = run.run_id;
            reference_row = true;
        }
        out.push_back(std::move(row));
    }
    if (run.manifest && !trained_row) {
        TradeoffRow row;
        row.method = run.manifest->recipe;
        row.variations_n = run.manifest->variations_n;
        row.training_tokens = run.manifest->total_tokens;
        row.run_id = run.manifest->run_id;
        if (run.trained_model) row.control_average = control_for(run, EvalMode::closed_book, *run.trained_model);
        out.push_back(std::move(row));
    } else if (!run.manifest && !reference_row) {
        TradeoffRow row;
        row.method = to_string(EvalMode::closed_book);
        row.run_id = run.run_id;
        auto it = run.controls.find(EvalMode::closed_book);
        if (it != run.controls.end()) row.control_average = it->second.average;
        out.push_back(std::move(row));
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::vector<std::string>> split_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        any = true;
        if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            fields.push_back(std::move(field));
            field.clear();
            records.push_back(std::move(fields));
            fields.clear();
            any = false;
        } else {
            field += c;
        }
    }
    if (quoted) throw ValidationError("csv: unterminated quoted field");
    if (any || !field.empty() || !fields.empty()) {
        fields.push_back(std::move(field));
        records.push_back(std::move(fields));
    }
    return records;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line, const char* column) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ValidationError("csv line " + std::to_string(line) + ": bad " + column + " '" + s + "'");
    }
    return v;
}

std::string fixed2(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    (void)ec;
    return std::string(buf, p);
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 540, kTop = 40, kBottom = 360;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"};

struct LinearAxis {
    double lo, hi, px_lo, px_hi;
    [[nodiscard]] double map(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

struct Series {
    std::string method;
    std::vector<std::pair<double, double>> points; // (x, y), x ascending
};

std::string render_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                         const std::vector<Series>& series, const std::vector<std::pair<std::string, double>>& refs,
                         const LogAxis& xa, const LinearAxis& ya, const std::vector<double>& x_ticks) {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed2(kWidth) << "\" height=\"" << fixed2(kHeight)
      << "\" viewBox=\"0 0 " << fixed2(kWidth) << ' ' << fixed2(kHeight) << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << fixed2((kLeft + kRight) / 2) << "\" y=\"24.00\" text-anchor=\"middle\" font-size=\"15\">"
      << xml_escape(title) << "</text>\n";
    s << "<g stroke=\"black\" fill=\"none\">"
      << "<line x1=\"" << fixed2(kLeft) << "\" y1=\"" << fixed2(kBottom) << "\" x2=\"" << fixed2(kRight) << "\" y2=\""
      << fixed2(kBottom) << "\"/>"
      << "<line x1=\"" << fixed2(kLeft) << "\" y1=\"" << fixed2(kTop) << "\" x2=\"" << fixed2(kLeft) << "\" y2=\""
      << fixed2(kBottom) << "\"/></g>\n";
    for (double t : x_ticks) {
        const double x = xa.map(t);
        s << "<line x1=\"" << fixed2(x) << "\" y1=\"" << fixed2(kBottom) << "\" x2=\"" << fixed2(x) << "\" y2=\""
          << fixed2(kBottom + 5) << "\" stroke=\"black\"/><text x=\"" << fixed2(x) << "\" y=\"" << fixed2(kBottom + 20)
          << "\" text-anchor=\"middle\" font-size=\"11\">" << format_number(t) << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double v = ya.lo + (ya.hi - ya.lo) * i / 4.0;
        const double y = ya.map(v);
        s << "<line x1=\"" << fixed2(kLeft - 5) << "\" y1=\"" << fixed2(y) << "\" x2=\"" << fixed2(kLeft) << "\" y2=\""
          << fixed2(y) << "\" stroke=\"black\"/><text x=\"" << fixed2(kLeft - 8) << "\" y=\"" << fixed2(y + 4)
          << "\" text-anchor=\"end\" font-size=\"11\">" << fixed2(v) << "</text>\n";
    }
    s << "<text x=\"" << fixed2((kLeft + kRight) / 2) << "\" y=\"" << fixed2(kBottom + 42)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(x_label) << "</text>\n";
    s << "<text x=\"18.00\" y=\"" << fixed2((kTop + kBottom) / 2) << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 18.00 " << fixed2((kTop + kBottom) / 2) << ")\">" << xml_escape(y_label) << "</text>\n";

    for (const auto& [label, value] : refs) {
        const double y = ya.map(value);
        s << "<line class=\"reference\" x1=\"" << fixed2(kLeft) << "\" y1=\"" << fixed2(y) << "\" x2=\"" << fixed2(kRight)
          << "\" y2=\"" << fixed2(y) << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>"
          << "<text x=\"" << fixed2(kRight + 6) << "\" y=\"" << fixed2(y + 4) << "\" font-size=\"11\">"
          << xml_escape(label) << "</text>\n";
    }
    std::size_t colour = 0;
    double legend_y = kTop + 10;
    for (const auto& sr : series) {
        const char* c = kPalette[colour++ % std::size(kPalette)];
        if (sr.points.size() > 1) {
            s << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < sr.points.size(); ++i) {
                if (i) s << ' ';
                s << fixed2(xa.map(sr.points[i].first)) << ',' << fixed2(ya.map(sr.points[i].second));
            }
            s << "\"/>\n";
        }
        for (const auto& [x, y] : sr.points) {
            s << "<circle class=\"point\" cx=\"" << fixed2(xa.map(x)) << "\" cy=\"" << fixed2(ya.map(y))
              << "\" r=\"4\" fill=\"" << c << "\"><title>" << xml_escape(sr.method) << ' ' << format_number(x) << ' '
              << fixed2(y) << "</title></circle>\n";
        }
        s << "<rect x=\"" << fixed2(kRight + 100) << "\" y=\"" << fixed2(legend_y - 8) << "\" width=\"10\" height=\"10\" fill=\""
          << c << "\"/><text x=\"" << fixed2(kRight + 114) << "\" y=\"" << fixed2(legend_y + 1) << "\" font-size=\"11\">"
          << xml_escape(sr.method) << "</text>\n";
        legend_y += 16;
    }
    s << "</svg>\n";
    return s.str();
}

LogAxis log_axis_over(const std::vector<double>& xs, double fallback_lo, double fallback_hi) {
    LogAxis a{fallback_lo, fallback_hi, kLeft + 20, kRight - 20};
    if (!xs.empty()) {
        a.lo = *std::min_element(xs.begin(), xs.end());
        a.hi = *std::max_element(xs.begin(), xs.end());
        if (a.lo == a.hi) {
            a.lo /= 2;
            a.hi *= 2;
        }
    }
    return a;
}

std::vector<Series> group_series(const std::vector<TradeoffRow>& rows, bool by_tokens) {
    std::map<std::string, Series> by_method;
    for (const auto& r : rows) {
        if (r.is_reference()) continue;
        auto y = by_tokens ? r.control_average : r.in_domain_accuracy;
        const double x = by_tokens ? static_cast<double>(r.training_tokens) : static_cast<double>(r.variations_n);
        if (!y || x <= 0) continue;
        auto& sr = by_method[r.method];
        sr.method = r.method;
        sr.points.emplace_back(x, *y);
    }
    std::vector<Series> out;
    for (auto& [m, sr] : by_method) {
        std::sort(sr.points.begin(), sr.points.end());
        out.push_back(std::move(sr));
    }
    return out;
}

std::vector<std::pair<std::string, double>> reference_lines(const std::vector<TradeoffRow>& rows, bool control) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& r : rows) {
        if (!r.is_reference()) continue;
        auto y = control ? r.control_average : r.in_domain_accuracy;
        if (y) out.emplace_back(r.method, *y);
    }
    return out;
}

std::vector<double> distinct_x(const std::vector<Series>& series) {
    std::set<double> xs;
    for (const auto& sr : series)
        for (const auto& p : sr.points) xs.insert(p.first);
    return {xs.begin(), xs.end()};
}

} // namespace

std::vector<TradeoffRow> aggregate(const std::vector<fs::path>& run_dirs) {
    std::vector<TradeoffRow> rows;
    for (const auto& dir : run_dirs) rows_for_run(load_run(dir), rows);
    std::sort(rows.begin(), rows.end(), [](const TradeoffRow& a, const TradeoffRow& b) {
        return std::tie(a.method, a.variations_n, a.run_id) < std::tie(b.method, b.variations_n, b.run_id);
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].method == rows[i - 1].method && rows[i].variations_n == rows[i - 1].variations_n) {
            throw ValidationError("inconsistent run metadata: duplicate row for method " + rows[i].method + ", n=" +
                                  std::to_string(rows[i].variations_n) + " (runs " + rows[i - 1].run_id + " and " +
                                  rows[i].run_id + ")");
        }
    }
    return rows;
}

std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

std::string to_csv(const std::vector<TradeoffRow>& rows) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += csv_field(r.method);
        out += ',' + std::to_string(r.variations_n);
        out += ',' + std::to_string(r.training_tokens);
        out += ',' + (r.in_domain_accuracy ? format_number(*r.in_domain_accuracy) : std::string());
        out += ',' + (r.control_average ? format_number(*r.control_average) : std::string());
        out += ',' + csv_field(r.run_id);
        out += '\n';
    }
    return out;
}

std::vector<TradeoffRow> parse_csv(std::string_view text) {
    auto records = split_csv(text);
    if (records.empty()) throw ValidationError("csv: missing header");
    std::string header;
    for (std::size_t i = 0; i < records[0].size(); ++i) header += (i ? "," : "") + records[0][i];
    if (header != kCsvHeader) throw ValidationError("csv: unexpected header '" + header + "'");
    std::vector<TradeoffRow> rows;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& f = records[i];
        const std::size_t line = i + 1;
        if (f.size() != 6) {
            throw ValidationError("csv line " + std::to_string(line) + ": expected 6 fields, got " +
                                  std::to_string(f.size()));
        }
        TradeoffRow r;
        r.method = f[0];
        r.variations_n = parse_number<std::size_t>(f[1], line, "n");
        r.training_tokens = parse_number<std::size_t>(f[2], line, "training_tokens");
        if (!f[3].empty()) r.in_domain_accuracy = parse_number<double>(f[3], line, "in_domain_accuracy");
        if (!f[4].empty()) r.control_average = parse_number<double>(f[4], line, "control_average");
        r.run_id = f[5];
        rows.push_back(std::move(r));
    }
    return rows;
}

double LogAxis::map(double value) const {
    if (!(value > 0) || !(lo > 0) || !(hi > lo)) throw ValidationError("log axis needs 0 < lo < hi and a positive value");
    return px_lo + (std::log10(value) - std::log10(lo)) / (std::log10(hi) - std::log10(lo)) * (px_hi - px_lo);
}

std::string render_accuracy_chart(const std::vector<TradeoffRow>& rows) {
    auto series = group_series(rows, false);
    auto ticks = distinct_x(series);
    auto xa = log_axis_over(ticks, 1, 40);
    if (ticks.empty()) ticks = {1, 40};
    return render_chart("In-domain accuracy vs. variations", "variations N (log scale)", "accuracy", series,
                        reference_lines(rows, false), xa, LinearAxis{0.0, 1.0, kBottom, kTop}, ticks);
}

std::string render_control_chart(const std::vector<TradeoffRow>& rows) {
    auto series = group_series(rows, true);
    auto xs = distinct_x(series);
    auto xa = log_axis_over(xs, 1e3, 1e6);
    std::vector<double> ticks;
    for (double d = std::floor(std::log10(xa.lo)); d <= std::ceil(std::log10(xa.hi)); d += 1) {
        const double t = std::pow(10.0, d);
        if (t >= xa.lo && t <= xa.hi) ticks.push_back(t);
    }
    if (ticks.empty()) ticks = {xa.lo, xa.hi};

    std::vector<double> ys;
    for (const auto& sr : series)
        for (const auto& p : sr.points) ys.push_back(p.second);
    for (const auto& [label, v] : reference_lines(rows, true)) ys.push_back(v);
    LinearAxis ya{0.0, 1.0, kBottom, kTop};
    if (!ys.empty()) {
        ya.lo = std::max(0.0, std::floor((*std::min_element(ys.begin(), ys.end()) - 0.05) * 20) / 20);
        ya.hi = std::min(1.0, std::ceil((*std::max_element(ys.begin(), ys.end()) + 0.05) * 20) / 20);
        if (ya.hi <= ya.lo) ya.hi = ya.lo + 0.05;
    }
    return render_chart("Control average vs. training tokens", "training tokens (log scale)", "control average",
                        series, reference_lines(rows, true), xa, ya, ticks);
}

std::vector<fs::path> emit(const std::vector<TradeoffRow>& rows, EmitFormat format, const fs::path& out_dir) {
    if (rows.empty()) throw ValidationError("report: no rows to emit");
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    if (format == EmitFormat::csv) {
        written.push_back(out_dir / "tradeoff.csv");
        write_text_file(written.back(), to_csv(rows));
    } else {
        written.push_back(out_dir / "accuracy_vs_n.svg");
        write_text_file(written.back(), render_accuracy_chart(rows));
        written.push_back(out_dir / "control_vs_tokens.svg");
        write_text_file(written.back(), render_control_chart(rows));
    }
    return written;
}

} // namespace kinj
