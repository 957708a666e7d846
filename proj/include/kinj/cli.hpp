// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace kinj::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kValidation = 1, kArtifactMissing = 2, kBackend = 3 };

/// Runs one `kinj` invocation; diagnostics go to `err`, results to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace kinj::cli
