#pragma once

// Durable bipartite store.
//
// Directory layout:
//   manifest.json      format version, live counts, committed byte length
//                      of every log, embedding model tag, timestamps
//   entities.jsonl     entity node records, later records supersede earlier
//   hyperedges.jsonl   hyperedge node records (no member lists)
//   incidence.jsonl    {"e", "v", "pos"} membership pairs
//   chunks.jsonl       source chunks and their extraction status
//   embeddings/        shard-<hex>.jsonl cache entries {key, dim, vector}
//
// A write appends to the logs and then atomically replaces the manifest;
// bytes past a log's committed length belong to an interrupted write and
// are discarded on the next open.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hgrag/extraction.hpp"
#include "hgrag/hypergraph.hpp"
#include "hgrag/llm.hpp"

namespace hgrag {

struct StoreCounts {
  std::size_t entities = 0;
  std::size_t hyperedges = 0;
  std::size_t incidences = 0;
  std::size_t chunks = 0;

  bool operator==(const StoreCounts&) const = default;
};

struct StoreManifest {
  int version = 1;
  StoreCounts counts;
  std::string embedding_model_tag;
  std::size_t embedding_dim = 0;
  std::string created;
  std::string updated;
  std::map<std::string, std::uint64_t> committed;  // log file -> bytes
};

struct ChunkRecord {
  Chunk chunk;
  bool extracted = false;
};

class Store {
 public:
  enum class Mode { kReadWrite, kReadOnly };

  /// Opens (creating in read-write mode) the store at `dir`. Throws
  /// LoadError on corrupted or truncated files; StorageError when another
  /// writer holds the directory lock.
  explicit Store(std::filesystem::path dir, Mode mode = Mode::kReadWrite);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  /// True when `dir` holds a committed manifest.
  static bool exists(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  Mode mode() const noexcept { return mode_; }

  /// Last committed graph; safe to hold across later writes.
  std::shared_ptr<const BipartiteGraph> graph() const;
  StoreManifest manifest() const;

  /// Union `delta` into the store. On I/O failure the logs are rolled back
  /// and the store is unchanged.
  MergeReport apply_delta(const BipartiteGraph& delta, Diagnostics* diags = nullptr);

  /// Compact the logs, reload from disk and check the result equals the
  /// in-memory graph.
  BipartiteGraph snapshot_and_reload();

  /// Rewrite every log with live records only.
  void compact();

  void record_chunks(const std::vector<ChunkRecord>& chunks);
  bool chunk_extracted(const ChunkId& id) const;
  std::vector<ChunkRecord> chunks() const;

  /// Cached embeddings for `texts`; misses go to the gateway once per
  /// distinct text and are persisted. Output follows input order.
  std::vector<Vector> get_or_embed(const std::vector<std::string>& texts, Gateway& gateway,
                                   Phase phase = Phase::kConstruction);
  std::optional<Vector> cached_embedding(const std::string& model_tag, const std::string& text) const;
  std::size_t embedding_count() const;

  /// Test hook: make the next log append fail after writing `bytes` bytes.
  void inject_write_failure(std::size_t bytes);

 private:
  struct LogWrite;
  void load();
  void commit(const std::vector<LogWrite>& writes, const StoreCounts& counts);
  void write_manifest(const StoreManifest& m);
  void truncate_uncommitted();

  std::filesystem::path dir_;
  Mode mode_;
  int lock_fd_ = -1;

  mutable std::mutex write_mu_;  // single writer
  mutable std::mutex read_mu_;   // guards the pointers below
  std::shared_ptr<const BipartiteGraph> graph_;
  StoreManifest manifest_;
  std::map<ChunkId, ChunkRecord> chunks_;
  std::unordered_map<std::string, Vector> embeddings_;
  std::optional<std::size_t> fail_after_bytes_;
};

/// Cache key for an embedding: content hash of (model tag, text).
std::string embedding_key(const std::string& model_tag, const std::string& text);

}  // namespace hgrag
