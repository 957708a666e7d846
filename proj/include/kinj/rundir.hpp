// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kinj {

/// Append-only run directory. Every artifact is written as "<stem>-v<N>.<ext>"; a re-run
/// writes N+1 and readers take the highest N. An empty extension names a directory.
class RunDir {
public:
    explicit RunDir(std::filesystem::path root);

    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }

    [[nodiscard]] std::optional<std::filesystem::path> latest(std::string_view stem, std::string_view ext) const;
    /// Like latest(), but throws ArtifactMissing naming the stage that produces it.
    [[nodiscard]] std::filesystem::path require(std::string_view stem, std::string_view ext,
                                                std::string_view producer) const;
    [[nodiscard]] std::filesystem::path next(std::string_view stem, std::string_view ext) const;

    [[nodiscard]] std::filesystem::path journal(std::string_view role) const;
    [[nodiscard]] std::vector<std::filesystem::path> journals() const;

private:
    [[nodiscard]] int latest_version(std::string_view stem, std::string_view ext) const;

    std::filesystem::path root_;
};

/// Exclusive per-directory lock held for the lifetime of one command.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& root);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

} // namespace kinj
