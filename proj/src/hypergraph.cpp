#include "hgrag/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <unordered_set>

#include "hgrag/errors.hpp"
#include "hgrag/text.hpp"

namespace hgrag {
namespace {

constexpr std::size_t kIdHexLen = 16;

std::string short_hash(std::string_view s) { return text::sha256_hex(s).substr(0, kIdHexLen); }

std::string merge_explanations(const std::string& a, const std::string& b) {
  std::set<std::string> pieces;
  for (const auto* src : {&a, &b}) {
    for (auto& p : text::split(*src, "; ")) {
      auto t = text::trim(p);
      if (!t.empty()) pieces.insert(std::move(t));
    }
  }
  return text::join(std::vector<std::string>(pieces.begin(), pieces.end()), "; ");
}

// Returns true when `into` changed.
bool merge_entity(Entity& into, const Entity& other, Diagnostics* diags) {
  Entity before = into;
  if (into.etype != other.etype && diags) {
    diags->push_back({Severity::kInfo, "entity_type_conflict",
                      "entity '" + into.name + "' typed both '" + into.etype + "' and '" +
                          other.etype + "'; keeping the highest-scoring label"});
  }
  bool other_wins = other.score > into.score ||
                    (other.score == into.score &&
                     std::tie(other.etype, other.name) < std::tie(into.etype, into.name));
  if (other_wins) {
    into.etype = other.etype;
    into.name = other.name;
  }
  into.score = std::max(into.score, other.score);
  into.explanation = merge_explanations(into.explanation, other.explanation);
  into.source_chunks.insert(other.source_chunks.begin(), other.source_chunks.end());
  return !(before == into);
}

}  // namespace

EntityId entity_id_for(std::string_view name) {
  return EntityId("ent-" + short_hash(text::identity_key(name)));
}

HyperedgeId hyperedge_id_for(std::string_view description) {
  return HyperedgeId("hye-" + short_hash(description));
}

ChunkId chunk_id_for(std::string_view chunk_text) {
  return ChunkId("chk-" + short_hash(chunk_text));
}

Entity Entity::make(std::string_view name, std::string etype, std::string explanation,
                    double score, std::set<ChunkId> chunks) {
  Entity e;
  e.name = text::normalize_whitespace(name);
  e.id = entity_id_for(e.name);
  e.etype = std::move(etype);
  e.explanation = std::move(explanation);
  e.score = score;
  e.source_chunks = std::move(chunks);
  check_invariants(e);
  return e;
}

Hyperedge Hyperedge::make(std::string description, double score, std::vector<EntityId> members,
                          std::set<ChunkId> chunks) {
  Hyperedge h;
  h.id = hyperedge_id_for(description);
  h.description = std::move(description);
  h.score = score;
  h.members = std::move(members);
  h.source_chunks = std::move(chunks);
  check_invariants(h);
  return h;
}

void check_invariants(const Entity& e) {
  if (!(e.score > 0.0 && e.score <= kMaxEntityScore)) {
    throw ContractError("entity score out of (0,100]: " + std::to_string(e.score));
  }
  if (text::normalize_whitespace(e.name).empty()) throw ContractError("entity name is empty");
  if (e.id != entity_id_for(e.name)) throw ContractError("entity id does not match its name");
}

void check_invariants(const Hyperedge& h) {
  if (!(h.score > 0.0 && h.score <= kMaxHyperedgeScore)) {
    throw ContractError("hyperedge score out of (0,10]: " + std::to_string(h.score));
  }
  if (h.members.size() < 2) throw ContractError("hyperedge needs at least 2 members");
  std::set<EntityId> seen(h.members.begin(), h.members.end());
  if (seen.size() != h.members.size()) throw ContractError("hyperedge has duplicate members");
}

void check_invariants(const NaryFact& f) {
  check_invariants(f.hyperedge);
  if (f.entities.size() != f.hyperedge.members.size()) {
    throw ContractError("fact entity list does not match hyperedge members");
  }
  for (std::size_t i = 0; i < f.entities.size(); ++i) {
    check_invariants(f.entities[i]);
    if (f.entities[i].id != f.hyperedge.members[i]) {
      throw ContractError("fact entity " + std::to_string(i) + " does not match member id");
    }
  }
}

BipartiteGraph BipartiteGraph::from_parts(EntityMap entities, HyperedgeMap hyperedges,
                                          IncidenceMap incidence) {
  BipartiteGraph g;
  g.entities_ = std::move(entities);
  g.hyperedges_ = std::move(hyperedges);
  g.incidence_ = std::move(incidence);
  for (const auto& [_, hs] : g.incidence_) g.incidence_pairs_ += hs.size();
  return g;
}

const Entity* BipartiteGraph::find_entity(const EntityId& id) const {
  auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : &it->second;
}

const Hyperedge* BipartiteGraph::find_hyperedge(const HyperedgeId& id) const {
  auto it = hyperedges_.find(id);
  return it == hyperedges_.end() ? nullptr : &it->second;
}

const Entity& BipartiteGraph::entity(const EntityId& id) const {
  if (const auto* e = find_entity(id)) return *e;
  throw NotFoundError("unknown entity id " + id.str());
}

const Hyperedge& BipartiteGraph::hyperedge(const HyperedgeId& id) const {
  if (const auto* h = find_hyperedge(id)) return *h;
  throw NotFoundError("unknown hyperedge id " + id.str());
}

void BipartiteGraph::link(const HyperedgeId& e, const EntityId& v) {
  if (incidence_[v].insert(e).second) ++incidence_pairs_;
}

MergeReport BipartiteGraph::merge(const BipartiteGraph& delta, Diagnostics* diags) {
  MergeReport report;
  for (const auto& [id, ent] : delta.entities_) {
    auto [it, inserted] = entities_.try_emplace(id, ent);
    if (inserted) {
      incidence_.try_emplace(id);
      ++report.entities_added;
    } else if (merge_entity(it->second, ent, diags)) {
      ++report.entities_merged;
    }
  }
  for (const auto& [id, edge] : delta.hyperedges_) {
    for (const auto& m : edge.members) {
      if (!entities_.contains(m)) {
        throw IntegrityError("hyperedge " + id.str() + " references unknown entity " + m.str());
      }
    }
    auto [it, inserted] = hyperedges_.try_emplace(id, edge);
    Hyperedge& into = it->second;
    if (inserted) {
      ++report.hyperedges_added;
    } else {
      Hyperedge before = into;
      into.score = std::max(into.score, edge.score);
      into.source_chunks.insert(edge.source_chunks.begin(), edge.source_chunks.end());
      for (const auto& m : edge.members) {
        if (std::find(into.members.begin(), into.members.end(), m) == into.members.end()) {
          into.members.push_back(m);
        }
      }
      if (!(before == into)) ++report.hyperedges_merged;
    }
    for (const auto& m : into.members) {
      std::size_t before = incidence_pairs_;
      link(id, m);
      report.incidences_added += incidence_pairs_ - before;
    }
  }
  return report;
}

MergeReport BipartiteGraph::add_fact(const NaryFact& fact, Diagnostics* diags) {
  check_invariants(fact);
  BipartiteGraph one;
  for (const auto& e : fact.entities) {
    one.entities_.emplace(e.id, e);
    one.incidence_[e.id].insert(fact.hyperedge.id);
  }
  one.hyperedges_.emplace(fact.hyperedge.id, fact.hyperedge);
  one.incidence_pairs_ = fact.entities.size();
  return merge(one, diags);
}

void BipartiteGraph::validate() const {
  std::size_t pairs = 0;
  for (const auto& [v, hs] : incidence_) {
    if (!entities_.contains(v)) {
      throw IntegrityError("incidence names missing entity " + v.str());
    }
    for (const auto& e : hs) {
      const auto* h = find_hyperedge(e);
      if (!h) throw IntegrityError("incidence names missing hyperedge " + e.str());
      if (std::find(h->members.begin(), h->members.end(), v) == h->members.end()) {
        throw IntegrityError("incidence (" + e.str() + "," + v.str() + ") not in member list");
      }
      ++pairs;
    }
  }
  for (const auto& [id, h] : hyperedges_) {
    if (entities_.contains(EntityId(id.str()))) {
      throw IntegrityError("id " + id.str() + " used by both node families");
    }
    for (const auto& m : h.members) {
      if (!entities_.contains(m)) {
        throw IntegrityError("hyperedge " + id.str() + " has dangling member " + m.str());
      }
      auto it = incidence_.find(m);
      if (it == incidence_.end() || !it->second.contains(id)) {
        throw IntegrityError("member " + m.str() + " of " + id.str() + " lacks back-reference");
      }
    }
  }
  if (pairs != incidence_pairs_) throw IntegrityError("incidence pair count is stale");
}

BipartiteGraph to_bipartite(const std::vector<NaryFact>& hypergraph) {
  BipartiteGraph g;
  for (const auto& fact : hypergraph) {
    if (const auto* existing = g.find_hyperedge(fact.hyperedge.id)) {
      std::set<EntityId> a(existing->members.begin(), existing->members.end());
      std::set<EntityId> b(fact.hyperedge.members.begin(), fact.hyperedge.members.end());
      if (a != b) {
        throw IntegrityError("hyperedge " + fact.hyperedge.id.str() +
                             " appears with conflicting member lists");
      }
    }
    g.add_fact(fact);
  }
  return g;
}

NaryFact fact_of(const BipartiteGraph& g, const HyperedgeId& e) {
  NaryFact f;
  f.hyperedge = g.hyperedge(e);
  f.entities.reserve(f.hyperedge.members.size());
  for (const auto& m : f.hyperedge.members) {
    const auto* ent = g.find_entity(m);
    if (!ent) throw IntegrityError("hyperedge " + e.str() + " has dangling member " + m.str());
    f.entities.push_back(*ent);
  }
  return f;
}

std::vector<NaryFact> from_bipartite(const BipartiteGraph& g) {
  g.validate();
  std::vector<NaryFact> out;
  out.reserve(g.hyperedge_count());
  for (const auto& [id, _] : g.hyperedges()) out.push_back(fact_of(g, id));
  return out;
}

std::set<HyperedgeId> incident_hyperedges(const BipartiteGraph& g, const EntityId& v) {
  auto it = g.incidence().find(v);
  if (it == g.incidence().end()) {
    if (!g.find_entity(v)) throw NotFoundError("unknown entity id " + v.str());
    return {};
  }
  return it->second;
}

bool co_occurs(const BipartiteGraph& g, const EntityId& u, const EntityId& v) {
  if (u == v) throw ContractError("co_occurs requires two distinct entities");
  auto hu = incident_hyperedges(g, u);
  auto hv = incident_hyperedges(g, v);
  const auto& small = hu.size() <= hv.size() ? hu : hv;
  const auto& large = hu.size() <= hv.size() ? hv : hu;
  return std::any_of(small.begin(), small.end(), [&](const auto& e) { return large.contains(e); });
}

std::set<HyperedgeId> hyperedges_containing_all(const BipartiteGraph& g,
                                                const std::set<EntityId>& s) {
  if (s.empty()) throw ContractError("entity set must be non-empty");
  std::vector<std::set<HyperedgeId>> rows;
  rows.reserve(s.size());
  for (const auto& v : s) rows.push_back(incident_hyperedges(g, v));
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.size() < b.size(); });
  std::set<HyperedgeId> out = rows.front();
  for (std::size_t i = 1; i < rows.size() && !out.empty(); ++i) {
    std::erase_if(out, [&](const auto& e) { return !rows[i].contains(e); });
  }
  return out;
}

std::set<EntityPair> binary_projection(const std::vector<NaryFact>& hypergraph) {
  std::set<EntityPair> out;
  for (const auto& f : hypergraph) {
    const auto& m = f.hyperedge.members;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = i + 1; j < m.size(); ++j) {
        if (m[i] == m[j]) continue;
        out.insert(m[i] < m[j] ? EntityPair{m[i], m[j]} : EntityPair{m[j], m[i]});
      }
    }
  }
  return out;
}

bool same_hypergraph(const std::vector<NaryFact>& a, const std::vector<NaryFact>& b) {
  using Key = std::map<HyperedgeId, std::set<EntityId>>;
  auto key = [](const std::vector<NaryFact>& h) {
    Key k;
    for (const auto& f : h) k[f.hyperedge.id].insert(f.hyperedge.members.begin(), f.hyperedge.members.end());
    return k;
  };
  auto entity_ids = [](const std::vector<NaryFact>& h) {
    std::set<EntityId> ids;
    for (const auto& f : h) {
      for (const auto& e : f.entities) ids.insert(e.id);
    }
    return ids;
  };
  return key(a) == key(b) && entity_ids(a) == entity_ids(b);
}

}  // namespace hgrag
