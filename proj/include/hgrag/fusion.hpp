#pragma once

// Bidirectional expansion of retrieval hits into n-ary facts, knowledge
// fusion under a token budget, and the generation prompt and answer format.

#include <string>
#include <vector>

#include "hgrag/diagnostics.hpp"
#include "hgrag/hypergraph.hpp"
#include "hgrag/templates.hpp"
#include "hgrag/vindex.hpp"

namespace hgrag {

/// A fact and the best combined score among the hits that admitted it.
struct AdmittedFact {
  NaryFact fact;
  double score = 0.0;

  bool operator==(const AdmittedFact&) const = default;
};

/// Facts incident to any hit entity; ordered by hyperedge id.
std::vector<AdmittedFact> expand_from_entities(const std::vector<RankedHit>& hits,
                                               const BipartiteGraph& g);

/// Each hit hyperedge with its members resolved; ordered by hyperedge id.
/// Throws IntegrityError on a dangling member.
std::vector<AdmittedFact> expand_from_hyperedges(const std::vector<RankedHit>& hits,
                                                 const BipartiteGraph& g);

enum class Provenance { kEntity, kHyperedge, kBoth };
const char* to_string(Provenance p);

struct FusedFact {
  NaryFact fact;
  double score = 0.0;
  Provenance provenance = Provenance::kEntity;

  bool operator==(const FusedFact&) const = default;
};

struct ChunkPassage {
  ChunkId id;
  std::string text;
  double similarity = 0.0;

  bool operator==(const ChunkPassage&) const = default;
};

struct RetrievalBundle {
  std::vector<FusedFact> facts;      // score descending, then id
  std::vector<ChunkPassage> chunks;  // similarity descending, then id
  std::size_t tokens = 0;            // approximate size of the rendered knowledge

  bool empty() const { return facts.empty() && chunks.empty(); }
  bool operator==(const RetrievalBundle&) const = default;
};

inline constexpr std::size_t kDefaultKnowledgeBudget = 6000;

/// One knowledge line per fact or chunk.
std::string render_fact(const NaryFact& fact);
std::string render_chunk(const ChunkPassage& chunk, std::size_t ordinal);
std::size_t fact_tokens(const NaryFact& fact);
std::size_t chunk_tokens(const ChunkPassage& chunk);

/// Union both expansions, then keep the longest ranked prefix of facts that
/// fits `budget_tokens`, and fill what is left with the most similar chunks.
RetrievalBundle fuse(const std::vector<AdmittedFact>& f_v, const std::vector<AdmittedFact>& f_h,
                     std::vector<ChunkPassage> chunks, std::size_t budget_tokens);

inline constexpr const char* kNoKnowledge = "No external knowledge retrieved.";

/// The knowledge section: facts, then a chunk section.
std::string render_knowledge(const RetrievalBundle& bundle);
std::string build_generation_prompt(const PromptTemplate& tmpl, const RetrievalBundle& bundle,
                                    const std::string& question);

struct GenerationResult {
  std::string answer;
  std::string reasoning;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::string raw;
  Diagnostics diagnostics;
};

/// Splits `<think>` and `<answer>` blocks. Without an answer block the
/// remaining text becomes the answer. Throws GenerationError on empty output.
GenerationResult parse_generation(const std::string& raw);

}  // namespace hgrag
