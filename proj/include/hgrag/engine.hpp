#pragma once

// End-to-end pipeline over one store: corpus build, question answering,
// evaluation and statistics.

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgrag/config.hpp"
#include "hgrag/eval.hpp"
#include "hgrag/fusion.hpp"
#include "hgrag/llm.hpp"
#include "hgrag/retrieval.hpp"
#include "hgrag/store.hpp"
#include "hgrag/templates.hpp"

namespace hgrag {

struct Document {
  std::string id;  // path relative to the corpus root
  std::string text;
};

/// Regular files under `path` (or `path` itself), ordered by relative path.
/// Throws ConfigError when the path is missing or unreadable.
std::vector<Document> read_corpus(const std::filesystem::path& path);

struct BuildReport {
  std::size_t documents = 0;
  std::size_t corpus_tokens = 0;
  std::size_t chunks = 0;
  std::size_t chunks_skipped = 0;  // extracted by an earlier run
  std::size_t chunks_extracted = 0;
  std::size_t chunks_failed = 0;
  std::size_t facts = 0;
  MergeReport merged;
  StoreCounts counts;
  std::size_t embeddings = 0;
  std::optional<MetricsReport> metrics;
  Diagnostics diagnostics;
};

struct QueryTrace {
  std::string query_id;
  std::string question;
  QueryEntities entities;
  std::vector<RankedHit> entity_hits;
  std::vector<RankedHit> hyperedge_hits;
  std::vector<RankedHit> chunk_hits;
  RetrievalBundle bundle;
  std::string prompt;
  GenerationResult generation;
  std::vector<UsageRecord> usage;
  Diagnostics diagnostics;
};

struct StoreStats {
  StoreCounts counts;
  std::map<std::size_t, std::size_t> arity_histogram;  // arity -> hyperedges
  std::size_t knowledge_tokens = 0;
  std::size_t embeddings = 0;
};

/// Backend pair chosen by `cfg.provider`.
std::pair<std::shared_ptr<ChatBackend>, std::shared_ptr<EmbedBackend>> make_backends(const EngineConfig& cfg);

class Engine {
 public:
  /// Opens the configured store. Read-only engines require it to exist and
  /// throw NotFoundError otherwise.
  Engine(EngineConfig cfg, Store::Mode mode);
  Engine(EngineConfig cfg, Store::Mode mode, std::shared_ptr<ChatBackend> chat,
         std::shared_ptr<EmbedBackend> embed);

  /// Chunk, extract, validate, merge and embed every document. Chunks
  /// already extracted into the store are skipped.
  BuildReport build(const std::filesystem::path& corpus);
  BuildReport build(const std::vector<Document>& docs);

  QueryTrace query(const std::string& question, std::optional<std::string> query_id = std::nullopt);

  EvalReport evaluate(const std::vector<EvalItem>& dataset, const EvalOptions& options);

  StoreStats stats() const;
  /// Graphviz description of the bipartite graph.
  std::string to_dot() const;

  Gateway& gateway() { return *gateway_; }
  Store& store() { return *store_; }
  const EngineConfig& config() const { return cfg_; }
  const TemplateSet& templates() const { return templates_; }

 private:
  std::shared_ptr<const KnowledgeIndex> index();
  Embedder query_embedder(const std::string& query_id, Phase phase);

  EngineConfig cfg_;
  TemplateSet templates_;
  std::unique_ptr<Gateway> gateway_;
  std::unique_ptr<Store> store_;
  std::mutex index_mu_;
  std::shared_ptr<const KnowledgeIndex> index_;
  std::shared_ptr<const BipartiteGraph> indexed_graph_;
  std::size_t indexed_chunks_ = 0;
  std::atomic<std::size_t> query_counter_{0};
};

using nlohmann::json;

json stats_json(const StoreStats& s);
std::string stats_table(const StoreStats& s);
json build_report_json(const BuildReport& r);
std::string build_report_text(const BuildReport& r);
json usage_summary(const std::vector<UsageRecord>& usage);
/// Envelope {ok, data, error, usage} for a query.
json query_envelope(const QueryTrace& t, bool include_prompt);
json error_envelope(const std::string& message);
std::string trace_text(const QueryTrace& t);

}  // namespace hgrag
