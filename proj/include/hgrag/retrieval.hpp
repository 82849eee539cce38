#pragma once

// Query-side retrieval: entity extraction from the question, weighted vector
// search over entities and hyperedges, and plain chunk search.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hgrag/diagnostics.hpp"
#include "hgrag/hypergraph.hpp"
#include "hgrag/llm.hpp"
#include "hgrag/templates.hpp"
#include "hgrag/vindex.hpp"

namespace hgrag {

class Store;

struct QueryEntities {
  std::string query;
  std::vector<std::string> entities;  // non-empty, first occurrence kept
  bool fallback = false;              // whole query used as the only entity
  Diagnostics diagnostics;
};

struct RetrievalConfig {
  std::size_t k_v = 60;
  double tau_v = 50.0;
  std::size_t k_h = 60;
  double tau_h = 5.0;
  std::size_t k_c = 5;
  double tau_c = 0.5;

  /// Throws ConfigError on non-finite thresholds.
  void check() const;
};

/// Embeds a batch of texts, one vector per input.
using Embedder = std::function<std::vector<Vector>(const std::vector<std::string>&)>;

/// Trimmed, deduplicated strings from the first JSON array of strings in
/// `raw`; nullopt when there is none.
std::optional<std::vector<std::string>> parse_entity_list(std::string_view raw);

/// Drop empty and repeated names, keeping first occurrences.
std::vector<std::string> dedup_entities(const std::vector<std::string>& names);

/// Asks the model for the question's entities. Unparsable or empty replies
/// are retried up to `attempts` times, then the question itself becomes the
/// sole entity. Throws RetrievalError on a provider failure.
QueryEntities extract_query_entities(const std::string& q, Gateway& gateway,
                                     const PromptTemplate& tmpl, int attempts = 3,
                                     std::optional<std::string> query_id = std::nullopt);

/// Vector collections over the stored graph and chunks.
class KnowledgeIndex {
 public:
  KnowledgeIndex() = default;

  /// Embeds entity names, hyperedge descriptions and chunk texts through the
  /// store's cache.
  static KnowledgeIndex build(Store& store, Gateway& gateway, Phase phase = Phase::kConstruction);

  /// Index over explicit vectors; `embedding` maps retrieval text to vector.
  static KnowledgeIndex from_vectors(std::shared_ptr<const BipartiteGraph> graph,
                                     std::map<ChunkId, std::string> chunks,
                                     const std::function<Vector(const std::string&)>& embedding);

  const BipartiteGraph& graph() const { return *graph_; }
  std::shared_ptr<const BipartiteGraph> graph_ptr() const { return graph_; }
  const VectorCollection& entities() const { return entities_; }
  const VectorCollection& hyperedges() const { return hyperedges_; }
  const VectorCollection& chunks() const { return chunks_; }
  const std::string& chunk_text(const ChunkId& id) const;

 private:
  std::shared_ptr<const BipartiteGraph> graph_ = std::make_shared<BipartiteGraph>();
  std::map<ChunkId, std::string> chunk_texts_;
  VectorCollection entities_{CollectionKind::kEntity, 1};
  VectorCollection hyperedges_{CollectionKind::kHyperedge, 1};
  VectorCollection chunks_{CollectionKind::kChunk, 1};
};

/// Query text for entity retrieval: deduplicated names joined with ", ".
std::string entity_query_text(const QueryEntities& q);

std::vector<RankedHit> retrieve_entities(const QueryEntities& q, const KnowledgeIndex& index,
                                         const RetrievalConfig& cfg, const Embedder& embed);
std::vector<RankedHit> retrieve_hyperedges(const std::string& q, const KnowledgeIndex& index,
                                           const RetrievalConfig& cfg, const Embedder& embed);
std::vector<RankedHit> retrieve_chunks(const std::string& q, const KnowledgeIndex& index,
                                       const RetrievalConfig& cfg, const Embedder& embed);

}  // namespace hgrag
