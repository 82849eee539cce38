#include "hgrag/retrieval.hpp"

#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "hgrag/errors.hpp"
#include "hgrag/store.hpp"
#include "hgrag/text.hpp"

namespace hgrag {

using nlohmann::json;

void RetrievalConfig::check() const {
  for (double t : {tau_v, tau_h, tau_c}) {
    if (!std::isfinite(t)) throw ConfigError("retrieval thresholds must be finite");
  }
}

std::vector<std::string> dedup_entities(const std::vector<std::string>& names) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& n : names) {
    auto t = text::normalize_whitespace(n);
    if (t.empty() || !seen.insert(t).second) continue;
    out.push_back(std::move(t));
  }
  return out;
}

std::optional<std::vector<std::string>> parse_entity_list(std::string_view raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '[') continue;
    auto end = text::match_bracket(raw, i);
    if (end == std::string_view::npos) continue;
    json value = json::parse(raw.substr(i, end - i), nullptr, false);
    if (value.is_discarded() || !value.is_array()) continue;
    bool all_strings = true;
    std::vector<std::string> names;
    for (const auto& v : value) {
      if (!v.is_string()) {
        all_strings = false;
        break;
      }
      names.push_back(v.get<std::string>());
    }
    if (all_strings) return dedup_entities(names);
  }
  return std::nullopt;
}

QueryEntities extract_query_entities(const std::string& q, Gateway& gateway, const PromptTemplate& tmpl,
                                     int attempts, std::optional<std::string> query_id) {
  if (text::trim(q).empty()) throw ContractError("query must be non-empty");
  QueryEntities out;
  out.query = q;
  ChatRequest req;
  req.messages = {{"user", tmpl.render({{"question", q}})}};
  req.task = "query_entities";
  req.slot = q;
  for (int attempt = 1; attempt <= std::max(attempts, 1); ++attempt) {
    std::string reply;
    try {
      reply = gateway.chat(req, Phase::kGeneration, query_id).text;
    } catch (const ProviderError& e) {
      throw RetrievalError(std::string("query entity extraction failed: ") + e.what());
    }
    auto parsed = parse_entity_list(reply);
    if (parsed && !parsed->empty()) {
      out.entities = std::move(*parsed);
      return out;
    }
    out.diagnostics.push_back({Severity::kWarning, parsed ? "query_entities_empty" : "query_entities_unparsable",
                               "attempt " + std::to_string(attempt) + " returned no entity list", attempt - 1});
  }
  out.fallback = true;
  out.entities = {text::normalize_whitespace(q)};
  out.diagnostics.push_back(
      {Severity::kWarning, "query_entities_fallback", "using the whole question as the only query entity"});
  return out;
}

std::string entity_query_text(const QueryEntities& q) {
  auto names = dedup_entities(q.entities);
  if (names.empty()) return text::normalize_whitespace(q.query);
  return text::join(names, ", ");
}

namespace {

std::size_t dimension_of(const std::vector<Vector>& vs) { return vs.empty() ? 0 : vs.front().size(); }

std::vector<RankedHit> search(const std::string& query_text, const VectorCollection& coll, std::size_t k,
                              double tau, const Embedder& embed) {
  if (coll.empty() || k == 0) return {};
  auto vecs = embed({query_text});
  if (vecs.size() != 1) throw RetrievalError("embedder returned no vector for the query");
  return top_k_weighted(vecs.front(), coll, k, tau);
}

}  // namespace

KnowledgeIndex KnowledgeIndex::build(Store& store, Gateway& gateway, Phase phase) {
  auto graph = store.graph();
  std::map<ChunkId, std::string> chunks;
  for (const auto& r : store.chunks()) chunks.emplace(r.chunk.id, r.chunk.text);

  std::vector<std::string> texts;
  for (const auto& [_, e] : graph->entities()) texts.push_back(e.name);
  for (const auto& [_, h] : graph->hyperedges()) texts.push_back(h.description);
  for (const auto& [_, t] : chunks) texts.push_back(t);
  auto vecs = store.get_or_embed(texts, gateway, phase);
  std::map<std::string, Vector> by_text;
  for (std::size_t i = 0; i < texts.size(); ++i) by_text.emplace(texts[i], std::move(vecs[i]));
  return from_vectors(std::move(graph), std::move(chunks), [&](const std::string& t) { return by_text.at(t); });
}

KnowledgeIndex KnowledgeIndex::from_vectors(std::shared_ptr<const BipartiteGraph> graph,
                                            std::map<ChunkId, std::string> chunks,
                                            const std::function<Vector(const std::string&)>& embedding) {
  KnowledgeIndex idx;
  std::vector<Vector> ev, hv, cv;
  for (const auto& [_, e] : graph->entities()) ev.push_back(embedding(e.name));
  for (const auto& [_, h] : graph->hyperedges()) hv.push_back(embedding(h.description));
  for (const auto& [_, t] : chunks) cv.push_back(embedding(t));
  std::size_t dim = std::max({dimension_of(ev), dimension_of(hv), dimension_of(cv), std::size_t{1}});
  idx.entities_ = VectorCollection(CollectionKind::kEntity, dim);
  idx.hyperedges_ = VectorCollection(CollectionKind::kHyperedge, dim);
  idx.chunks_ = VectorCollection(CollectionKind::kChunk, dim);
  std::size_t i = 0;
  for (const auto& [id, e] : graph->entities()) idx.entities_.add(id.str(), std::move(ev[i++]), e.score);
  i = 0;
  for (const auto& [id, h] : graph->hyperedges()) idx.hyperedges_.add(id.str(), std::move(hv[i++]), h.score);
  i = 0;
  for (const auto& [id, _] : chunks) idx.chunks_.add(id.str(), std::move(cv[i++]));
  idx.graph_ = std::move(graph);
  idx.chunk_texts_ = std::move(chunks);
  return idx;
}

const std::string& KnowledgeIndex::chunk_text(const ChunkId& id) const {
  auto it = chunk_texts_.find(id);
  if (it == chunk_texts_.end()) throw NotFoundError("no chunk " + id.str());
  return it->second;
}

std::vector<RankedHit> retrieve_entities(const QueryEntities& q, const KnowledgeIndex& index,
                                         const RetrievalConfig& cfg, const Embedder& embed) {
  return search(entity_query_text(q), index.entities(), cfg.k_v, cfg.tau_v, embed);
}

std::vector<RankedHit> retrieve_hyperedges(const std::string& q, const KnowledgeIndex& index,
                                           const RetrievalConfig& cfg, const Embedder& embed) {
  return search(q, index.hyperedges(), cfg.k_h, cfg.tau_h, embed);
}

std::vector<RankedHit> retrieve_chunks(const std::string& q, const KnowledgeIndex& index,
                                       const RetrievalConfig& cfg, const Embedder& embed) {
  return search(q, index.chunks(), cfg.k_c, cfg.tau_c, embed);
}

}  // namespace hgrag
