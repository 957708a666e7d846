// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "kinj/error.hpp"

namespace kinj {

namespace {

bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

} // namespace

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": malformed record: " + e.what());
        }
        if (!record.is_object()) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": malformed record: expected an object");
        }
        fn(line_no, record);
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string to_jsonl(const std::vector<json>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

const json& require_field(const json& record, const char* field) {
    auto it = record.find(field);
    if (it == record.end() || it->is_null()) {
        throw ValidationError(std::string("missing field '") + field + "'");
    }
    return *it;
}

std::string require_string(const json& record, const char* field) {
    const auto& v = require_field(record, field);
    if (!v.is_string()) throw ValidationError(std::string("field '") + field + "' must be a string");
    return v.get<std::string>();
}

} // namespace kinj
