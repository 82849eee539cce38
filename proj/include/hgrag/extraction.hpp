#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "hgrag/diagnostics.hpp"
#include "hgrag/hypergraph.hpp"
#include "hgrag/templates.hpp"

namespace hgrag {

struct Chunk {
  ChunkId id;
  std::string doc_id;
  std::string text;
  std::size_t token_count = 0;
  std::size_t begin = 0;  // byte offsets into the source document
  std::size_t end = 0;

  bool operator==(const Chunk&) const = default;
};

/// Greedy fixed windows of `max_tokens` approximate tokens, consecutive
/// windows sharing `overlap_tokens`. Chunks cover the document end to end:
/// the first starts at byte 0 and the last ends at the final byte.
std::vector<Chunk> chunk_document(const std::string& doc_id, std::string_view text,
                                  std::size_t max_tokens, std::size_t overlap_tokens);

std::string build_extraction_prompt(const PromptTemplate& tmpl, const Chunk& chunk);

struct RawEntity {
  std::string name;
  std::string etype;
  std::string explanation;
  double entity_score = 0.0;

  bool operator==(const RawEntity&) const = default;
};

struct RawFragment {
  std::string description;
  double fragment_score = 0.0;
  std::vector<RawEntity> entities;

  bool operator==(const RawFragment&) const = default;
};

/// Parse-level view of one extraction response.
struct RawExtraction {
  std::vector<RawFragment> fragments;
  Diagnostics diagnostics;
};

/// Recover the `{"fragments": [...]}` block from a model response; prose
/// and code fences around it are ignored. Malformed fragments or entities
/// are dropped with a diagnostic. Throws ParseError if no block is found.
RawExtraction parse_extraction_output(std::string_view raw);

/// Render fragments in the structured format the parser accepts.
std::string print_extraction(const std::vector<RawFragment>& fragments);

enum class Strictness { kLenient, kStrict };

struct ValidatedExtraction {
  std::vector<NaryFact> facts;
  Diagnostics diagnostics;
};

/// Enforce score ranges, arity >= 2 and (strictly) entity names appearing in
/// their fragment description.
ValidatedExtraction validate_extraction(const RawExtraction& raw, const Chunk& chunk,
                                        Strictness strictness);

struct MergedDelta {
  BipartiteGraph delta;
  MergeReport report;
  Diagnostics diagnostics;
};

/// Collapse facts into one bipartite delta with the node combiners of
/// BipartiteGraph::merge.
MergedDelta merge_into_delta(const std::vector<NaryFact>& facts);

}  // namespace hgrag
