// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <thread>

#include "kinj/error.hpp"
#include "kinj/mock_service.hpp"

namespace kinj {

struct MockHttpServer::Impl {
    MockService& service;
    httplib::Server server;
    std::thread thread;

    Impl(MockService& s, int workers) : service(s) {
        server.new_task_queue = [workers] { return new httplib::ThreadPool(static_cast<std::size_t>(workers)); };
        auto reply = [](httplib::Response& res, const HttpResult& r) {
            res.status = r.status;
            res.set_content(r.body, "application/json");
        };
        server.Post(R"(/v1/.*)", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.handle_post(req.path, req.body));
        });
        server.Get(R"(/v1/.*)", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.handle_get(req.path));
        });
    }
};

MockHttpServer::MockHttpServer(MockService& service, int worker_threads)
    : impl_(std::make_unique<Impl>(service, worker_threads)) {}

MockHttpServer::~MockHttpServer() { stop(); }

int MockHttpServer::start(const std::string& host, int port) {
    int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("mock server cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void MockHttpServer::listen_blocking(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw Error("mock server cannot listen on " + host + ":" + std::to_string(port));
}

void MockHttpServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

} // namespace kinj
