#include <httplib.h>

#include <filesystem>

#include "ctxforge/review_service.hpp"

namespace ctxforge {

namespace {

constexpr const char* kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>ctxforge review</title></head>
<body><h1>ctxforge review service</h1>
<p>The review UI is not built. The JSON API is available under <code>/api/records</code>
and expects an <code>Authorization: Bearer &lt;token&gt;</code> header.</p></body></html>
)";

}  // namespace

struct ReviewServer::Impl {
  Impl(ReviewApi& a, ServerOptions o) : api(a), options(std::move(o)) {}
  ReviewApi& api;
  ServerOptions options;
  httplib::Server server;
};

ReviewServer::ReviewServer(ReviewApi& api, ServerOptions options)
    : impl_(std::make_unique<Impl>(api, std::move(options))) {
  auto& srv = impl_->server;
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    r.body = req.body;
    r.authorization = req.get_header_value("Authorization");
    const auto out = impl_->api.handle(r);
    res.status = out.status;
    if (out.status == 401) res.set_header("WWW-Authenticate", "Bearer");
    res.set_content(out.body.dump(), "application/json");
  };
  srv.Get(R"(/api/.*)", forward);
  srv.Post(R"(/api/.*)", forward);

  const auto& dir = impl_->options.static_dir;
  if (dir.empty() || !std::filesystem::is_directory(dir) || !srv.set_mount_point("/", dir)) {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kPlaceholderPage, "text/html"); });
  }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind() {
  auto& srv = impl_->server;
  const auto& o = impl_->options;
  int port = o.port;
  if (port == 0) {
    port = srv.bind_to_any_port(o.host);
  } else if (!srv.bind_to_port(o.host, port)) {
    port = -1;
  }
  if (port < 0) throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  return port;
}

void ReviewServer::listen() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace ctxforge
