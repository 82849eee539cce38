#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include <nlohmann/json.hpp>

#include "hgrag/errors.hpp"
#include "hgrag/llm.hpp"
#include "hgrag/text.hpp"

namespace hgrag {
namespace {

using nlohmann::json;

const std::map<std::string, std::string>& builtin_defaults() {
  static const std::map<std::string, std::string> d = {
      {"extract", R"({"fragments": []})"},
      {"query_entities", "[]"},
      {"generate", "<think>No scripted reasoning.</think><answer>No scripted answer.</answer>"},
      {"judge",
       R"({"Correctness": 5, "Relevance": 5, "Factuality": 5, "Comprehensiveness": 5, )"
       R"("Knowledgeability": 5, "Logical Coherence": 5, "Diversity": 5})"},
  };
  return d;
}

MockProvider::ScriptedReply reply_from_json(const json& j) {
  MockProvider::ScriptedReply r;
  if (j.is_string()) {
    r.text = j.get<std::string>();
    return r;
  }
  if (!j.is_object()) throw ConfigError("mock reply must be a string or an object");
  r.status = j.value("status", 200);
  if (j.contains("text")) {
    const auto& t = j["text"];
    r.text = t.is_string() ? t.get<std::string>() : t.dump();
  }
  if (j.contains("prompt_tokens")) r.prompt_tokens = j["prompt_tokens"].get<std::size_t>();
  if (j.contains("completion_tokens")) r.completion_tokens = j["completion_tokens"].get<std::size_t>();
  return r;
}

std::vector<MockProvider::ScriptedReply> replies_from_entry(const json& entry) {
  std::vector<MockProvider::ScriptedReply> out;
  if (entry.contains("replies")) {
    for (const auto& r : entry["replies"]) out.push_back(reply_from_json(r));
  } else if (entry.contains("reply")) {
    const auto& r = entry["reply"];
    MockProvider::ScriptedReply one;
    one.text = r.is_string() ? r.get<std::string>() : r.dump();
    if (entry.contains("prompt_tokens")) one.prompt_tokens = entry["prompt_tokens"].get<std::size_t>();
    if (entry.contains("completion_tokens")) {
      one.completion_tokens = entry["completion_tokens"].get<std::size_t>();
    }
    out.push_back(std::move(one));
  }
  if (out.empty()) throw ConfigError("mock script entry has no reply");
  return out;
}

}  // namespace

MockProvider::MockProvider(std::size_t dim, std::size_t batch_limit)
    : dim_(dim), batch_limit_(batch_limit) {
  if (dim_ == 0 || batch_limit_ == 0) throw ConfigError("mock dim and batch limit must be positive");
}

std::shared_ptr<MockProvider> MockProvider::from_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ConfigError("mock script is not a JSON object: " + path.string());
  auto mock = std::make_shared<MockProvider>(doc.value("dim", std::size_t{64}),
                                             doc.value("batch_limit", std::size_t{32}));
  const json entries = doc.value("chat", json::array());
  for (const auto& entry : entries) {
    auto task = entry.value("task", std::string{});
    if (task.empty()) throw ConfigError("mock script entry lacks a task");
    if (entry.value("default", false)) {
      mock->script_default(task, replies_from_entry(entry));
    } else {
      std::string slot = entry.value("slot", std::string{});
      if (entry.contains("slot_file")) {
        auto file = path.parent_path() / entry["slot_file"].get<std::string>();
        std::ifstream sf(file, std::ios::binary);
        if (!sf) throw ConfigError("cannot open mock slot file " + file.string());
        slot.assign(std::istreambuf_iterator<char>(sf), std::istreambuf_iterator<char>());
      }
      mock->script(task, slot, replies_from_entry(entry));
    }
  }
  const json aliases = doc.value("embed_aliases", json::object());
  for (const auto& [text, as] : aliases.items()) {
    mock->alias_embedding(text, as.get<std::string>());
  }
  return mock;
}

std::string MockProvider::key(const std::string& task, const std::string& slot) {
  return text::sha256_hex(task + "\n" + text::trim(slot));
}

void MockProvider::script(const std::string& task, const std::string& slot,
                          std::vector<ScriptedReply> replies) {
  std::lock_guard lock(mu_);
  scripts_[key(task, slot)] = Sequence{std::move(replies), 0};
}

void MockProvider::script_default(const std::string& task, std::vector<ScriptedReply> replies) {
  std::lock_guard lock(mu_);
  defaults_[task] = Sequence{std::move(replies), 0};
}

void MockProvider::alias_embedding(const std::string& from, const std::string& as) {
  std::lock_guard lock(mu_);
  aliases_[text::trim(from)] = as;
}

MockProvider::ScriptedReply MockProvider::next_reply(Sequence& seq) {
  const auto& r = seq.replies[std::min(seq.next, seq.replies.size() - 1)];
  if (seq.next < seq.replies.size()) ++seq.next;
  return r;
}

ChatReply MockProvider::complete(const ChatRequest& request) {
  ++chat_calls_;
  ScriptedReply scripted;
  {
    std::lock_guard lock(mu_);
    if (auto it = scripts_.find(key(request.task, request.slot)); it != scripts_.end()) {
      scripted = next_reply(it->second);
    } else if (auto dt = defaults_.find(request.task); dt != defaults_.end()) {
      scripted = next_reply(dt->second);
    } else if (auto bt = builtin_defaults().find(request.task); bt != builtin_defaults().end()) {
      scripted.text = bt->second;
    } else {
      scripted.text = "";
    }
  }
  ChatReply reply;
  reply.status = scripted.status;
  if (scripted.status != 200) {
    reply.error = "scripted failure";
    return reply;
  }
  std::size_t prompt = 0;
  for (const auto& m : request.messages) prompt += text::count_tokens(m.content);
  reply.text = scripted.text;
  reply.prompt_tokens = scripted.prompt_tokens.value_or(prompt);
  reply.completion_tokens = scripted.completion_tokens.value_or(text::count_tokens(scripted.text));
  return reply;
}

Vector MockProvider::hash_vector(const std::string& s) const {
  auto digest = text::sha256_hex(s);
  std::uint64_t seed = std::stoull(digest.substr(0, 16), nullptr, 16);
  std::mt19937_64 rng(seed);
  Vector v(dim_);
  double norm2 = 0.0;
  for (auto& x : v) {
    // 53 random mantissa bits mapped onto [-1, 1)
    x = static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
    norm2 += x * x;
  }
  double n = std::sqrt(norm2);
  for (auto& x : v) x /= n;
  return v;
}

EmbedReply MockProvider::embed(const std::vector<std::string>& texts) {
  ++embed_calls_;
  EmbedReply reply;
  if (texts.size() > batch_limit_) {
    reply.status = 400;
    reply.error = "batch exceeds mock limit";
    return reply;
  }
  std::lock_guard lock(mu_);
  for (const auto& t : texts) {
    embedded_.push_back(t);
    auto it = aliases_.find(text::trim(t));
    reply.vectors.push_back(hash_vector(it == aliases_.end() ? t : it->second));
    reply.prompt_tokens += text::count_tokens(t);
  }
  return reply;
}

std::vector<std::string> MockProvider::embedded_texts() const {
  std::lock_guard lock(mu_);
  return embedded_;
}

}  // namespace hgrag
