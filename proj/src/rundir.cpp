// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include "kinj/rundir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <string>

#include "kinj/error.hpp"

namespace kinj {

namespace fs = std::filesystem;

namespace {

std::string versioned_name(std::string_view stem, int version, std::string_view ext) {
    std::string name = std::string(stem) + "-v" + std::to_string(version);
    if (!ext.empty()) name += "." + std::string(ext);
    return name;
}

} // namespace

RunDir::RunDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

int RunDir::latest_version(std::string_view stem, std::string_view ext) const {
    int best = 0;
    const std::string prefix = std::string(stem) + "-v";
    const std::string suffix = ext.empty() ? std::string() : "." + std::string(ext);
    for (const auto& entry : fs::directory_iterator(root_)) {
        const auto name = entry.path().filename().string();
        if (name.size() <= prefix.size() + suffix.size()) continue;
        if (name.compare(0, prefix.size(), prefix) != 0) continue;
        if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
        std::string_view digits(name.data() + prefix.size(), name.size() - prefix.size() - suffix.size());
        int v = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
        if (ec == std::errc() && p == digits.data() + digits.size()) best = std::max(best, v);
    }
    return best;
}

std::optional<fs::path> RunDir::latest(std::string_view stem, std::string_view ext) const {
    const int v = latest_version(stem, ext);
    if (v == 0) return std::nullopt;
    return root_ / versioned_name(stem, v, ext);
}

fs::path RunDir::require(std::string_view stem, std::string_view ext, std::string_view producer) const {
    auto p = latest(stem, ext);
    if (!p) {
        throw ArtifactMissing("missing upstream artifact '" + std::string(stem) + "-v*" + (ext.empty() ? "" : "." + std::string(ext)) + "' in " +
                              root_.string() + " (run `kinj " + std::string(producer) + "` first)");
    }
    return *p;
}

fs::path RunDir::next(std::string_view stem, std::string_view ext) const {
    return root_ / versioned_name(stem, latest_version(stem, ext) + 1, ext);
}

fs::path RunDir::journal(std::string_view role) const { return root_ / "journal" / (std::string(role) + ".jsonl"); }

std::vector<fs::path> RunDir::journals() const {
    std::vector<fs::path> out;
    if (!fs::exists(root_ / "journal")) return out;
    for (const auto& entry : fs::directory_iterator(root_ / "journal")) {
        if (entry.path().extension() == ".jsonl") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

RunLock::RunLock(const fs::path& root) : path_(root / ".lock") {
    fs::create_directories(root);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
        throw ValidationError("run directory " + root.string() + " is locked by another command (remove " +
                              path_.string() + " if that command is gone)");
    }
    const auto pid = std::to_string(::getpid()) + "\n";
    (void)!::write(fd_, pid.data(), pid.size());
}

RunLock::~RunLock() {
    if (fd_ >= 0) {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }
}

} // namespace kinj
