// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kinj {

// 64-bit FNV-1a. Stable across platforms; used for request keys, run ids and mock seeds.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

/// Mixes several string parts into one hash without ambiguity between part boundaries.
template <typename... Parts>
std::uint64_t hash_parts(const Parts&... parts) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    ((h = fnv1a64(std::string_view(parts), h), h = fnv1a64(std::string_view("\x1f", 1), h)), ...);
    return h;
}

} // namespace kinj
