// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <memory>
#include <string>

namespace kinj {

struct HttpResult {
    int status = 0;
    std::string body;
};

/// Moves one request body to a backend and returns its reply.
///
/// Implementations throw BackendError(timeout) or BackendError(unreachable) when no HTTP
/// status was obtained; any status code, including 5xx, is returned for the caller to classify.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResult post(const std::string& path, const std::string& body,
                            std::chrono::milliseconds timeout) = 0;
    virtual HttpResult get(const std::string& path, std::chrono::milliseconds timeout) = 0;
};

/// Picks a transport from the URL scheme: http:// and https:// go over the wire,
/// mock:// is served in-process by the shared MockService.
std::shared_ptr<Transport> make_transport(const std::string& base_url, const std::string& api_key = {});

std::shared_ptr<Transport> make_http_transport(const std::string& base_url, const std::string& api_key);

} // namespace kinj
