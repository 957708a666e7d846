// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace kinj {

/// Base of every error the harness raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input data or configuration. Maps to CLI exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A stage needs an artifact an earlier stage did not produce. Exit code 2.
class ArtifactMissing : public Error {
public:
    using Error::Error;
};

/// Anything that went wrong talking to a model, tokenizer or trainer backend. Exit code 3.
class BackendError : public Error {
public:
    enum class Kind { timeout, protocol, exhausted, unsupported, unreachable, replay_miss };

    BackendError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

} // namespace kinj
