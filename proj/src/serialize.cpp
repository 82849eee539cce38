#include "hgrag/serialize.hpp"

namespace hgrag {
namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void to_json(json& j, const Entity& e) {
  j = json{{"id", e.id},
           {"name", e.name},
           {"type", e.etype},
           {"explanation", e.explanation},
           {"score", e.score},
           {"source_chunks", e.source_chunks}};
}

void from_json(const json& j, Entity& e) {
  e.id = j.at("id").get<EntityId>();
  e.name = j.at("name").get<std::string>();
  e.etype = j.value("type", std::string{});
  e.explanation = j.value("explanation", std::string{});
  e.score = j.at("score").get<double>();
  e.source_chunks = j.value("source_chunks", std::set<ChunkId>{});
}

void to_json(json& j, const Hyperedge& h) {
  j = json{{"id", h.id},
           {"description", h.description},
           {"score", h.score},
           {"members", h.members},
           {"source_chunks", h.source_chunks}};
}

void from_json(const json& j, Hyperedge& h) {
  h.id = j.at("id").get<HyperedgeId>();
  h.description = j.at("description").get<std::string>();
  h.score = j.at("score").get<double>();
  h.members = j.value("members", std::vector<EntityId>{});
  h.source_chunks = j.value("source_chunks", std::set<ChunkId>{});
}

void to_json(json& j, const NaryFact& f) { j = json{{"hyperedge", f.hyperedge}, {"entities", f.entities}}; }

void from_json(const json& j, NaryFact& f) {
  f.hyperedge = j.at("hyperedge").get<Hyperedge>();
  f.entities = j.at("entities").get<std::vector<Entity>>();
}

void to_json(json& j, const Chunk& c) {
  j = json{{"id", c.id},       {"doc_id", c.doc_id}, {"text", c.text},
           {"token_count", c.token_count}, {"begin", c.begin}, {"end", c.end}};
}

void from_json(const json& j, Chunk& c) {
  c.id = j.at("id").get<ChunkId>();
  c.doc_id = j.value("doc_id", std::string{});
  c.text = j.at("text").get<std::string>();
  c.token_count = j.value("token_count", std::size_t{0});
  c.begin = j.value("begin", std::size_t{0});
  c.end = j.value("end", std::size_t{0});
}

void to_json(json& j, const RankedHit& h) {
  j = json{{"id", h.id}, {"similarity", h.similarity}, {"combined", h.combined}, {"rank", h.rank}};
}

void to_json(json& j, const Diagnostic& d) {
  j = json{{"severity", to_string(d.severity)}, {"code", d.code}, {"message", d.message}};
  if (d.index >= 0) j["index"] = d.index;
}

void from_json(const json& j, Diagnostic& d) {
  auto s = j.value("severity", std::string{"warning"});
  d.severity = s == "info" ? Severity::kInfo : s == "error" ? Severity::kError : Severity::kWarning;
  d.code = j.value("code", std::string{});
  d.message = j.value("message", std::string{});
  d.index = j.value("index", -1);
}

void to_json(json& j, const UsageRecord& u) {
  j = json{{"kind", to_string(u.kind)},
           {"prompt_tokens", u.prompt_tokens},
           {"completion_tokens", u.completion_tokens},
           {"wall_time", u.wall_time},
           {"cost", u.cost},
           {"phase", to_string(u.phase)}};
  if (u.query_id) j["query_id"] = *u.query_id;
}

void to_json(json& j, const MetricsReport& m) {
  j = json{{"TP1kT", optional_number(m.tp1kt)},
           {"CP1kT", optional_number(m.cp1kt)},
           {"TPQ", optional_number(m.tpq)},
           {"CP1kQ", optional_number(m.cp1kq)},
           {"construction_time", m.construction_time},
           {"construction_cost", m.construction_cost},
           {"generation_time", m.generation_time},
           {"generation_cost", m.generation_cost},
           {"evaluation_cost", m.evaluation_cost}};
}

void to_json(json& j, const MergeReport& r) {
  j = json{{"entities_added", r.entities_added},
           {"entities_merged", r.entities_merged},
           {"hyperedges_added", r.hyperedges_added},
           {"hyperedges_merged", r.hyperedges_merged},
           {"incidences_added", r.incidences_added}};
}

json diagnostics_json(const Diagnostics& d) {
  json arr = json::array();
  for (const auto& x : d) arr.push_back(x);
  return arr;
}

}  // namespace hgrag
