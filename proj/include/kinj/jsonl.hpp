// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kinj {

using json = nlohmann::json;

/// Calls `fn(line_number, record)` for every non-blank line. Line numbers are 1-based.
/// Throws ValidationError naming the file and line on a parse failure.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn);

std::string read_text_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

std::string to_jsonl(const std::vector<json>& records);

/// Required field accessors; errors mention the field name.
std::string require_string(const json& record, const char* field);
const json& require_field(const json& record, const char* field);

} // namespace kinj
