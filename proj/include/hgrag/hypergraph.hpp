#pragma once

// Knowledge hypergraph data model and its lossless bipartite encoding.
//
// A hypergraph is a set of n-ary facts; each fact is one hyperedge (a natural
// language description) together with the ordered list of entities it joins.
// BipartiteGraph stores it as two node families plus incidence in both
// directions, and supports the membership queries answered by the incidence
// matrix: row support (incident hyperedges), column support (members),
// two-step reachability (co-occurrence) and row-sum selection (hyperedges
// covering an entity set).

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hgrag/diagnostics.hpp"

namespace hgrag {

template <typename Tag>
class StrongId {
 public:
  StrongId() = default;
  explicit StrongId(std::string v) : value_(std::move(v)) {}
  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }
  auto operator<=>(const StrongId&) const = default;
  bool operator==(const StrongId&) const = default;

 private:
  std::string value_;
};

using EntityId = StrongId<struct EntityTag>;
using HyperedgeId = StrongId<struct HyperedgeTag>;
using ChunkId = StrongId<struct ChunkTag>;

inline constexpr double kMaxEntityScore = 100.0;
inline constexpr double kMaxHyperedgeScore = 10.0;

/// Id of an entity: content hash of the case-folded normalized name.
EntityId entity_id_for(std::string_view name);
/// Id of a hyperedge: content hash of the raw description.
HyperedgeId hyperedge_id_for(std::string_view description);
ChunkId chunk_id_for(std::string_view chunk_text);

struct Entity {
  EntityId id;
  std::string name;
  std::string etype;
  std::string explanation;
  double score = kMaxEntityScore;  // (0, 100]
  std::set<ChunkId> source_chunks;

  /// Builds an entity with a normalized display name and derived id.
  static Entity make(std::string_view name, std::string etype, std::string explanation,
                     double score, std::set<ChunkId> chunks = {});

  bool operator==(const Entity&) const = default;
};

struct Hyperedge {
  HyperedgeId id;
  std::string description;
  double score = kMaxHyperedgeScore;  // (0, 10]
  std::vector<EntityId> members;      // extraction order, no duplicates
  std::set<ChunkId> source_chunks;

  static Hyperedge make(std::string description, double score, std::vector<EntityId> members,
                        std::set<ChunkId> chunks = {});

  bool operator==(const Hyperedge&) const = default;
};

struct NaryFact {
  Hyperedge hyperedge;
  std::vector<Entity> entities;  // entities[i].id == hyperedge.members[i]

  bool operator==(const NaryFact&) const = default;
};

/// Throw ContractError when a node violates its field invariants.
void check_invariants(const Entity& e);
void check_invariants(const Hyperedge& h);
void check_invariants(const NaryFact& f);

struct MergeReport {
  std::size_t entities_added = 0;
  std::size_t entities_merged = 0;
  std::size_t hyperedges_added = 0;
  std::size_t hyperedges_merged = 0;
  std::size_t incidences_added = 0;

  std::size_t added() const { return entities_added + hyperedges_added + incidences_added; }
};

class BipartiteGraph {
 public:
  using EntityMap = std::map<EntityId, Entity>;
  using HyperedgeMap = std::map<HyperedgeId, Hyperedge>;
  using IncidenceMap = std::map<EntityId, std::set<HyperedgeId>>;

  BipartiteGraph() = default;

  /// Assemble a graph from raw parts without checking; call validate() to
  /// find dangling references.
  static BipartiteGraph from_parts(EntityMap entities, HyperedgeMap hyperedges,
                                   IncidenceMap incidence);

  const EntityMap& entities() const noexcept { return entities_; }
  const HyperedgeMap& hyperedges() const noexcept { return hyperedges_; }
  const IncidenceMap& incidence() const noexcept { return incidence_; }

  const Entity* find_entity(const EntityId& id) const;
  const Hyperedge* find_hyperedge(const HyperedgeId& id) const;
  const Entity& entity(const EntityId& id) const;
  const Hyperedge& hyperedge(const HyperedgeId& id) const;

  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t hyperedge_count() const noexcept { return hyperedges_.size(); }
  std::size_t incidence_count() const noexcept { return incidence_pairs_; }
  bool empty() const noexcept { return entities_.empty() && hyperedges_.empty(); }

  /// Union `delta` into this graph with the order-independent combiners:
  /// scores keep the maximum, explanation pieces and source chunks are
  /// unioned, display name and type follow the highest-scoring mention,
  /// hyperedge member lists are unioned preserving first-seen order.
  MergeReport merge(const BipartiteGraph& delta, Diagnostics* diags = nullptr);

  /// Insert one fact; member entities must be supplied in the fact.
  MergeReport add_fact(const NaryFact& fact, Diagnostics* diags = nullptr);

  /// Full-scan check of reference integrity and incidence symmetry.
  void validate() const;

  bool operator==(const BipartiteGraph&) const = default;

 private:
  void link(const HyperedgeId& e, const EntityId& v);

  EntityMap entities_;
  HyperedgeMap hyperedges_;
  IncidenceMap incidence_;
  std::size_t incidence_pairs_ = 0;
};

/// Encode a hypergraph as a bipartite incidence graph.
BipartiteGraph to_bipartite(const std::vector<NaryFact>& hypergraph);

/// Decode; facts come out ordered by hyperedge id.
std::vector<NaryFact> from_bipartite(const BipartiteGraph& g);

std::set<HyperedgeId> incident_hyperedges(const BipartiteGraph& g, const EntityId& v);
bool co_occurs(const BipartiteGraph& g, const EntityId& u, const EntityId& v);
std::set<HyperedgeId> hyperedges_containing_all(const BipartiteGraph& g,
                                                const std::set<EntityId>& s);

/// Materialize a stored hyperedge with every member resolved.
NaryFact fact_of(const BipartiteGraph& g, const HyperedgeId& e);

using EntityPair = std::pair<EntityId, EntityId>;  // first < second

/// Lossy clique expansion to pairwise entity edges.
std::set<EntityPair> binary_projection(const std::vector<NaryFact>& hypergraph);

/// Compare two hypergraphs at id level with member lists taken as sets.
bool same_hypergraph(const std::vector<NaryFact>& a, const std::vector<NaryFact>& b);

}  // namespace hgrag

template <typename Tag>
struct std::hash<hgrag::StrongId<Tag>> {
  std::size_t operator()(const hgrag::StrongId<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
