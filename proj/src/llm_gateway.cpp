#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "hgrag/errors.hpp"
#include "hgrag/llm.hpp"

namespace hgrag {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::ptrdiff_t clamp_concurrency(std::size_t c) {
  return static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(c, 1, 1024));
}

struct SemaphoreGuard {
  explicit SemaphoreGuard(std::counting_semaphore<1024>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
  std::counting_semaphore<1024>& sem;
};

}  // namespace

const char* to_string(CallKind k) { return k == CallKind::kChat ? "chat" : "embed"; }

const char* to_string(Phase p) {
  switch (p) {
    case Phase::kConstruction: return "construction";
    case Phase::kGeneration: return "generation";
    case Phase::kEvaluation: return "evaluation";
  }
  return "unknown";
}

double cost_of(CallKind kind, std::size_t prompt_tokens, std::size_t completion_tokens,
               const PriceTable& prices) {
  if (kind == CallKind::kEmbed) return static_cast<double>(prompt_tokens) / 1000.0 * prices.embed_per_1k;
  return static_cast<double>(prompt_tokens) / 1000.0 * prices.input_per_1k +
         static_cast<double>(completion_tokens) / 1000.0 * prices.output_per_1k;
}

bool is_transient(int status) {
  return status == 0 || status == 408 || status == 409 || status == 429 || status >= 500;
}

void UsageMeter::record(UsageRecord r) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(r));
}

std::vector<UsageRecord> UsageMeter::snapshot() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t UsageMeter::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

void UsageMeter::clear() {
  std::lock_guard lock(mu_);
  records_.clear();
}

Gateway::Gateway(ProviderConfig config, std::shared_ptr<ChatBackend> chat,
                 std::shared_ptr<EmbedBackend> embed)
    : config_(std::move(config)),
      chat_(std::move(chat)),
      embed_(std::move(embed)),
      inflight_(clamp_concurrency(config_.concurrency)) {
  if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  const auto& p = config_.prices;
  if (p.input_per_1k < 0 || p.output_per_1k < 0 || p.embed_per_1k < 0) {
    throw ConfigError("prices must be >= 0");
  }
  if (!chat_ || !embed_) throw ConfigError("gateway needs both a chat and an embedding backend");
}

template <typename Reply, typename Call>
Reply Gateway::with_retries(Call&& call, const char* what) {
  Reply reply;
  for (int attempt = 0;; ++attempt) {
    {
      SemaphoreGuard guard(inflight_);
      reply = call();
    }
    if (reply.status == 200) return reply;
    if (!is_transient(reply.status) || attempt >= config_.max_retries) {
      throw ProviderError(std::string(what) + " failed with status " + std::to_string(reply.status) +
                              (reply.error.empty() ? "" : ": " + reply.error),
                          reply.status);
    }
    double delay = std::min(config_.backoff_max_s, config_.backoff_initial_s * std::pow(2.0, attempt));
    if (delay > 0) std::this_thread::sleep_for(std::chrono::duration<double>(delay));
  }
}

Gateway::ChatResult Gateway::chat(const ChatRequest& request, Phase phase,
                                  std::optional<std::string> query_id) {
  auto t0 = Clock::now();
  auto reply = with_retries<ChatReply>([&] { return chat_->complete(request); }, "chat");
  UsageRecord usage;
  usage.kind = CallKind::kChat;
  usage.prompt_tokens = reply.prompt_tokens;
  usage.completion_tokens = reply.completion_tokens;
  usage.wall_time = seconds_since(t0);
  usage.cost = cost_of(CallKind::kChat, reply.prompt_tokens, reply.completion_tokens, config_.prices);
  usage.phase = phase;
  usage.query_id = std::move(query_id);
  meter_.record(usage);
  return {std::move(reply.text), std::move(usage)};
}

Gateway::EmbedResult Gateway::embed(const std::vector<std::string>& texts, Phase phase,
                                    std::optional<std::string> query_id) {
  for (const auto& t : texts) {
    if (t.empty()) throw ContractError("cannot embed an empty text");
  }
  EmbedResult out;
  out.vectors.reserve(texts.size());
  std::size_t limit = std::max<std::size_t>(1, std::min(config_.embed_batch_size, embed_->batch_limit()));
  for (std::size_t start = 0; start < texts.size(); start += limit) {
    std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                   texts.begin() + static_cast<std::ptrdiff_t>(std::min(start + limit, texts.size())));
    auto t0 = Clock::now();
    auto reply = with_retries<EmbedReply>([&] { return embed_->embed(batch); }, "embed");
    if (reply.vectors.size() != batch.size()) {
      throw ProviderError("embedding provider returned " + std::to_string(reply.vectors.size()) +
                              " vectors for " + std::to_string(batch.size()) + " texts",
                          reply.status);
    }
    UsageRecord usage;
    usage.kind = CallKind::kEmbed;
    usage.prompt_tokens = reply.prompt_tokens;
    usage.wall_time = seconds_since(t0);
    usage.cost = cost_of(CallKind::kEmbed, reply.prompt_tokens, 0, config_.prices);
    usage.phase = phase;
    usage.query_id = query_id;
    meter_.record(usage);
    out.usage.push_back(usage);
    for (auto& v : reply.vectors) out.vectors.push_back(std::move(v));
  }
  return out;
}

MetricsReport report_metrics(std::span<const UsageRecord> records, std::size_t corpus_tokens,
                             std::size_t query_count) {
  if (corpus_tokens == 0 && query_count == 0) {
    throw ReportError("metrics need corpus_tokens > 0 or query_count > 0");
  }
  MetricsReport m;
  for (const auto& r : records) {
    switch (r.phase) {
      case Phase::kConstruction:
        m.construction_time += r.wall_time;
        m.construction_cost += r.cost;
        break;
      case Phase::kGeneration:
        m.generation_time += r.wall_time;
        m.generation_cost += r.cost;
        break;
      case Phase::kEvaluation:
        m.evaluation_cost += r.cost;
        break;
    }
  }
  if (corpus_tokens > 0) {
    double k = static_cast<double>(corpus_tokens) / 1000.0;
    m.tp1kt = m.construction_time / k;
    m.cp1kt = m.construction_cost / k;
  }
  if (query_count > 0) {
    double q = static_cast<double>(query_count);
    m.tpq = m.generation_time / q;
    m.cp1kq = m.generation_cost * 1000.0 / q;
  }
  return m;
}

}  // namespace hgrag
