#pragma once

// Chat and embedding access behind one metered gateway.
//
// Backends speak to a concrete provider (an OpenAI-compatible HTTP endpoint
// or the deterministic mock); the Gateway adds retries with exponential
// backoff, a bound on in-flight calls, and a UsageRecord per provider call.

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "hgrag/vindex.hpp"

namespace hgrag {

enum class CallKind { kChat, kEmbed };
enum class Phase { kConstruction, kGeneration, kEvaluation };

const char* to_string(CallKind k);
const char* to_string(Phase p);

/// Dollar prices per 1k tokens.
struct PriceTable {
  double input_per_1k = 0.0;
  double output_per_1k = 0.0;
  double embed_per_1k = 0.0;
};

struct UsageRecord {
  CallKind kind = CallKind::kChat;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  double wall_time = 0.0;  // seconds
  double cost = 0.0;       // dollars
  Phase phase = Phase::kGeneration;
  std::optional<std::string> query_id;
};

double cost_of(CallKind kind, std::size_t prompt_tokens, std::size_t completion_tokens,
               const PriceTable& prices);

struct ProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string chat_model = "gpt-4o-mini";
  std::string embed_model = "text-embedding-3-small";
  int max_retries = 3;
  double timeout_s = 60.0;
  double backoff_initial_s = 0.5;
  double backoff_max_s = 8.0;
  std::size_t embed_batch_size = 64;
  std::size_t concurrency = 16;
  PriceTable prices{0.00015, 0.0006, 0.00002};  // gpt-4o-mini and text-embedding-3-small list prices
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  int max_tokens = 0;  // 0 leaves the provider default
  // Which pipeline step issued the call, and the dynamic text slotted into
  // its prompt. Real providers ignore both; the mock keys its scripts on them.
  std::string task;
  std::string slot;
};

/// Outcome of one provider attempt. status 200 is success, 0 a transport
/// failure, anything else the HTTP status.
struct ChatReply {
  int status = 200;
  std::string text;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::string error;
};

struct EmbedReply {
  int status = 200;
  std::vector<Vector> vectors;
  std::size_t prompt_tokens = 0;
  std::string error;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatReply complete(const ChatRequest& request) = 0;
};

class EmbedBackend {
 public:
  virtual ~EmbedBackend() = default;
  virtual EmbedReply embed(const std::vector<std::string>& texts) = 0;
  virtual std::size_t batch_limit() const = 0;
  virtual std::string model_tag() const = 0;
};

/// Retry transient statuses (transport, 408, 409, 429, 5xx).
bool is_transient(int status);

class UsageMeter {
 public:
  void record(UsageRecord r);
  std::vector<UsageRecord> snapshot() const;
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<UsageRecord> records_;
};

class Gateway {
 public:
  Gateway(ProviderConfig config, std::shared_ptr<ChatBackend> chat,
          std::shared_ptr<EmbedBackend> embed);

  struct ChatResult {
    std::string text;
    UsageRecord usage;
  };
  /// Throws ProviderError once retries are exhausted, or at once for a
  /// permanent failure.
  ChatResult chat(const ChatRequest& request, Phase phase,
                  std::optional<std::string> query_id = std::nullopt);

  struct EmbedResult {
    std::vector<Vector> vectors;
    std::vector<UsageRecord> usage;
  };
  /// One vector per text, input order; splits into provider-sized batches.
  EmbedResult embed(const std::vector<std::string>& texts, Phase phase,
                    std::optional<std::string> query_id = std::nullopt);

  UsageMeter& meter() noexcept { return meter_; }
  const UsageMeter& meter() const noexcept { return meter_; }
  const ProviderConfig& config() const noexcept { return config_; }
  std::string embed_model_tag() const { return embed_->model_tag(); }

 private:
  template <typename Reply, typename Call>
  Reply with_retries(Call&& call, const char* what);

  ProviderConfig config_;
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<EmbedBackend> embed_;
  std::counting_semaphore<1024> inflight_;
  UsageMeter meter_;
};

/// Construction cost/time per 1k corpus tokens and generation time/cost per
/// query. Sides without a denominator are reported absent.
struct MetricsReport {
  std::optional<double> tp1kt;
  std::optional<double> cp1kt;
  std::optional<double> tpq;
  std::optional<double> cp1kq;
  double construction_time = 0.0;
  double construction_cost = 0.0;
  double generation_time = 0.0;
  double generation_cost = 0.0;
  double evaluation_cost = 0.0;
};

/// Throws ReportError when both denominators are zero.
MetricsReport report_metrics(std::span<const UsageRecord> records, std::size_t corpus_tokens,
                             std::size_t query_count);

// ---------------------------------------------------------------------------
// Deterministic mock

/// Scripted chat replies keyed by (task, trimmed slot text) plus seeded-hash
/// embeddings. A script entry may list several replies; they are served in
/// order and the last one repeats.
class MockProvider : public ChatBackend, public EmbedBackend {
 public:
  struct ScriptedReply {
    int status = 200;
    std::string text;
    std::optional<std::size_t> prompt_tokens;
    std::optional<std::size_t> completion_tokens;
  };

  explicit MockProvider(std::size_t dim = 64, std::size_t batch_limit = 32);

  /// Load a script file (see README for the schema).
  static std::shared_ptr<MockProvider> from_script(const std::filesystem::path& path);

  void script(const std::string& task, const std::string& slot, std::vector<ScriptedReply> replies);
  /// Reply used for a task when no slot-specific script matches.
  void script_default(const std::string& task, std::vector<ScriptedReply> replies);
  /// Embed `text` as if it were `as`.
  void alias_embedding(const std::string& text, const std::string& as);

  ChatReply complete(const ChatRequest& request) override;
  EmbedReply embed(const std::vector<std::string>& texts) override;
  std::size_t batch_limit() const override { return batch_limit_; }
  std::string model_tag() const override { return "mock-hash-" + std::to_string(dim_); }

  /// The unit vector the mock assigns to a text, aliases ignored.
  Vector hash_vector(const std::string& text) const;

  std::size_t chat_calls() const { return chat_calls_.load(); }
  std::size_t embed_calls() const { return embed_calls_.load(); }
  std::vector<std::string> embedded_texts() const;

 private:
  struct Sequence {
    std::vector<ScriptedReply> replies;
    std::size_t next = 0;
  };
  static std::string key(const std::string& task, const std::string& slot);
  ScriptedReply next_reply(Sequence& seq);

  std::size_t dim_;
  std::size_t batch_limit_;
  mutable std::mutex mu_;
  std::map<std::string, Sequence> scripts_;
  std::map<std::string, Sequence> defaults_;
  std::map<std::string, std::string> aliases_;
  std::vector<std::string> embedded_;
  std::atomic<std::size_t> chat_calls_{0};
  std::atomic<std::size_t> embed_calls_{0};
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backend

class OpenAIBackend : public ChatBackend, public EmbedBackend {
 public:
  explicit OpenAIBackend(ProviderConfig config);

  ChatReply complete(const ChatRequest& request) override;
  EmbedReply embed(const std::vector<std::string>& texts) override;
  std::size_t batch_limit() const override { return config_.embed_batch_size; }
  std::string model_tag() const override { return config_.embed_model; }

 private:
  struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix such as /v1
  };
  int post(const std::string& path, const std::string& body, std::string& response,
           std::string& error) const;

  ProviderConfig config_;
  Endpoint endpoint_;
};

}  // namespace hgrag
