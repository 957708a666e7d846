// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kinj {

struct TradeoffRow {
    std::string method;
    std::size_t variations_n = 0;
    std::size_t training_tokens = 0;
    std::optional<double> in_domain_accuracy;
    std::optional<double> control_average;
    std::string run_id;

    /// Both measurements present.
    [[nodiscard]] bool complete() const noexcept { return in_domain_accuracy && control_average; }
    /// Untrained rows (baseline, oracle, RAG) have no training tokens.
    [[nodiscard]] bool is_reference() const noexcept { return training_tokens == 0; }
    bool operator==(const TradeoffRow&) const = default;
};

/// Builds rows from the latest artifacts in each run directory, sorted by (method, n, run_id).
///
/// Trained runs (manifest + job artifacts) contribute one row per evaluated mode whose model is the
/// trained model: method is the recipe, suffixed "+<mode>" for modes other than closed_book.
/// Evaluations of any other model give reference rows named after the mode with n = 0, tokens = 0.
/// A missing measurement is left empty. Throws ValidationError on a duplicate (method, n) or on
/// run metadata that disagrees across artifacts.
std::vector<TradeoffRow> aggregate(const std::vector<std::filesystem::path>& run_dirs);

inline constexpr std::string_view kCsvHeader = "method,n,training_tokens,in_domain_accuracy,control_average,run_id";

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

std::string to_csv(const std::vector<TradeoffRow>& rows);
std::vector<TradeoffRow> parse_csv(std::string_view text);

/// Maps [lo, hi] onto [px_lo, px_hi] on a log10 scale.
struct LogAxis {
    double lo = 1.0;
    double hi = 10.0;
    double px_lo = 0.0;
    double px_hi = 1.0;

    [[nodiscard]] double map(double value) const;
};

std::string render_accuracy_chart(const std::vector<TradeoffRow>& rows);
std::string render_control_chart(const std::vector<TradeoffRow>& rows);

enum class EmitFormat { csv, svg_lines };

/// Writes tradeoff.csv, or accuracy_vs_n.svg and control_vs_tokens.svg, into `out_dir`.
/// Throws ValidationError for empty rows.
std::vector<std::filesystem::path> emit(const std::vector<TradeoffRow>& rows, EmitFormat format,
                                        const std::filesystem::path& out_dir);

} // namespace kinj
