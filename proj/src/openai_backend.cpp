#include <algorithm>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hgrag/errors.hpp"
#include "hgrag/llm.hpp"

namespace hgrag {
namespace {

using nlohmann::json;

}  // namespace

OpenAIBackend::OpenAIBackend(ProviderConfig config) : config_(std::move(config)) {
  const auto& url = config_.base_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  endpoint_.origin = url.substr(0, path_start);
  endpoint_.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!endpoint_.prefix.empty() && endpoint_.prefix.back() == '/') endpoint_.prefix.pop_back();
}

int OpenAIBackend::post(const std::string& path, const std::string& body, std::string& response,
                        std::string& error) const {
  httplib::Client cli(endpoint_.origin);
  auto secs = static_cast<time_t>(config_.timeout_s);
  cli.set_connection_timeout(secs, 0);
  cli.set_read_timeout(secs, 0);
  cli.set_write_timeout(secs, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = cli.Post(endpoint_.prefix + path, headers, body, "application/json");
  if (!res) {
    error = httplib::to_string(res.error());
    return 0;
  }
  response = res->body;
  if (res->status != 200) error = res->body.substr(0, 512);
  return res->status;
}

ChatReply OpenAIBackend::complete(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json body = {{"model", config_.chat_model}, {"messages", messages}, {"temperature", request.temperature}};
  if (request.max_tokens > 0) body["max_tokens"] = request.max_tokens;

  ChatReply reply;
  std::string raw;
  reply.status = post("/chat/completions", body.dump(), raw, reply.error);
  if (reply.status != 200) return reply;
  json doc = json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    reply.status = 502;
    reply.error = "malformed chat completion response";
    return reply;
  }
  const auto& msg = doc["choices"][0].value("message", json::object());
  reply.text = msg.contains("content") && msg["content"].is_string() ? msg["content"].get<std::string>() : "";
  if (doc.contains("usage")) {
    reply.prompt_tokens = doc["usage"].value("prompt_tokens", std::size_t{0});
    reply.completion_tokens = doc["usage"].value("completion_tokens", std::size_t{0});
  }
  return reply;
}

EmbedReply OpenAIBackend::embed(const std::vector<std::string>& texts) {
  json body = {{"model", config_.embed_model}, {"input", texts}};
  EmbedReply reply;
  std::string raw;
  reply.status = post("/embeddings", body.dump(), raw, reply.error);
  if (reply.status != 200) return reply;
  json doc = json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.contains("data") || !doc["data"].is_array()) {
    reply.status = 502;
    reply.error = "malformed embeddings response";
    return reply;
  }
  std::vector<std::pair<std::size_t, Vector>> indexed;
  for (const auto& item : doc["data"]) {
    indexed.emplace_back(item.value("index", indexed.size()), item.at("embedding").get<Vector>());
  }
  std::sort(indexed.begin(), indexed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [_, v] : indexed) reply.vectors.push_back(std::move(v));
  if (doc.contains("usage")) reply.prompt_tokens = doc["usage"].value("prompt_tokens", std::size_t{0});
  return reply;
}

}  // namespace hgrag
