// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include "kinj/error.hpp"
#include "kinj/mock_service.hpp"
#include "kinj/transport.hpp"

namespace kinj {

namespace {

struct SplitUrl {
    std::string origin; // scheme://host[:port]
    std::string prefix; // path below the origin, no trailing slash
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("base_url '" + url + "' has no scheme");
    auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) out.prefix = url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    return out;
}

class HttpTransport : public Transport {
public:
    HttpTransport(const std::string& base_url, std::string api_key)
        : url_(split_url(base_url)), api_key_(std::move(api_key)) {}

    HttpResult post(const std::string& path, const std::string& body, std::chrono::milliseconds timeout) override {
        auto cli = client(timeout);
        auto res = cli.Post(url_.prefix + path, headers(), body, "application/json");
        return finish(res, path);
    }

    HttpResult get(const std::string& path, std::chrono::milliseconds timeout) override {
        auto cli = client(timeout);
        auto res = cli.Get(url_.prefix + path, headers());
        return finish(res, path);
    }

private:
    // httplib::Client is not thread-safe; one per request keeps the transport shareable.
    httplib::Client client(std::chrono::milliseconds timeout) const {
        httplib::Client cli(url_.origin);
        cli.set_connection_timeout(timeout);
        cli.set_read_timeout(timeout);
        cli.set_write_timeout(timeout);
        return cli;
    }

    httplib::Headers headers() const {
        httplib::Headers h;
        if (!api_key_.empty()) h.emplace("Authorization", "Bearer " + api_key_);
        return h;
    }

    HttpResult finish(const httplib::Result& res, const std::string& path) const {
        if (!res) {
            const auto err = res.error();
            const auto where = url_.origin + url_.prefix + path + ": " + httplib::to_string(err);
            if (err == httplib::Error::Read || err == httplib::Error::Write ||
                err == httplib::Error::ConnectionTimeout) {
                throw BackendError(BackendError::Kind::timeout, where);
            }
            throw BackendError(BackendError::Kind::unreachable, where);
        }
        return {res->status, res->body};
    }

    SplitUrl url_;
    std::string api_key_;
};

class InProcessTransport : public Transport {
public:
    explicit InProcessTransport(MockService& service) : service_(service) {}

    HttpResult post(const std::string& path, const std::string& body, std::chrono::milliseconds) override {
        return service_.handle_post(path, body);
    }
    HttpResult get(const std::string& path, std::chrono::milliseconds) override { return service_.handle_get(path); }

private:
    MockService& service_;
};

} // namespace

std::shared_ptr<Transport> make_http_transport(const std::string& base_url, const std::string& api_key) {
    return std::make_shared<HttpTransport>(base_url, api_key);
}

std::shared_ptr<Transport> make_transport(const std::string& base_url, const std::string& api_key) {
    if (base_url.rfind("mock://", 0) == 0) return std::make_shared<InProcessTransport>(MockService::shared());
    if (base_url.rfind("http://", 0) == 0 || base_url.rfind("https://", 0) == 0) {
        return make_http_transport(base_url, api_key);
    }
    throw ValidationError("unsupported base_url scheme: '" + base_url + "'");
}

} // namespace kinj
