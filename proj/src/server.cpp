#include "hgrag/server.hpp"

#include <httplib.h>

#include "hgrag/errors.hpp"

namespace hgrag {

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

Server::Server(Engine& engine) : engine_(engine), http_(std::make_unique<httplib::Server>()) {
  http_->Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  http_->Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
    json env = {{"ok", true}, {"data", stats_json(engine_.stats())}, {"error", nullptr}, {"usage", nullptr}};
    reply_json(res, 200, env);
  });

  http_->Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      return reply_json(res, 400, error_envelope("request body must be a JSON object"));
    }
    auto q = body.find("question");
    if (q == body.end() || !q->is_string() || q->get_ref<const std::string&>().empty()) {
      return reply_json(res, 400, error_envelope("'question' must be a non-empty string"));
    }
    bool with_prompt = body.value("prompt", false);
    try {
      reply_json(res, 200, query_envelope(engine_.query(q->get<std::string>()), with_prompt));
    } catch (const Error& e) {
      reply_json(res, 500, error_envelope(e.what()));
    }
  });
}

Server::~Server() = default;

int Server::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = http_->bind_to_any_port(host);
  } else if (!http_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw StorageError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void Server::run() { http_->listen_after_bind(); }

void Server::stop() { http_->stop(); }

}  // namespace hgrag
