#include "hgrag/fusion.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "hgrag/errors.hpp"
#include "hgrag/text.hpp"

namespace hgrag {
namespace {

std::vector<AdmittedFact> materialize(const std::map<HyperedgeId, double>& best, const BipartiteGraph& g) {
  std::vector<AdmittedFact> out;
  out.reserve(best.size());
  for (const auto& [id, score] : best) {
    try {
      out.push_back({fact_of(g, id), score});
    } catch (const NotFoundError& e) {
      throw IntegrityError(std::string("hyperedge ") + id.str() + " has a dangling member: " + e.what());
    }
  }
  return out;
}

void keep_max(std::map<HyperedgeId, double>& best, const HyperedgeId& id, double score) {
  auto [it, inserted] = best.emplace(id, score);
  if (!inserted) it->second = std::max(it->second, score);
}

bool ranked_before(const FusedFact& a, const FusedFact& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.fact.hyperedge.id < b.fact.hyperedge.id;
}

}  // namespace

std::vector<AdmittedFact> expand_from_entities(const std::vector<RankedHit>& hits, const BipartiteGraph& g) {
  std::map<HyperedgeId, double> best;
  for (const auto& hit : hits) {
    EntityId v(hit.id);
    if (!g.find_entity(v)) continue;
    for (const auto& e : incident_hyperedges(g, v)) keep_max(best, e, hit.combined);
  }
  return materialize(best, g);
}

std::vector<AdmittedFact> expand_from_hyperedges(const std::vector<RankedHit>& hits, const BipartiteGraph& g) {
  std::map<HyperedgeId, double> best;
  for (const auto& hit : hits) {
    HyperedgeId e(hit.id);
    if (!g.find_hyperedge(e)) throw IntegrityError("retrieved hyperedge " + hit.id + " is not in the graph");
    keep_max(best, e, hit.combined);
  }
  return materialize(best, g);
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kEntity:
      return "entity";
    case Provenance::kHyperedge:
      return "hyperedge";
    case Provenance::kBoth:
      return "both";
  }
  return "?";
}

std::string render_fact(const NaryFact& fact) {
  std::vector<std::string> ents;
  ents.reserve(fact.entities.size());
  for (const auto& e : fact.entities) {
    std::string s = e.name + "(" + e.etype + ")";
    if (!e.explanation.empty()) s += ": " + e.explanation;
    ents.push_back(std::move(s));
  }
  return "FACT (score " + text::format_number(fact.hyperedge.score) + "): " + fact.hyperedge.description +
         " | ENTITIES: " + text::join(ents, ", ");
}

std::string render_chunk(const ChunkPassage& chunk, std::size_t ordinal) {
  return "[" + std::to_string(ordinal) + "] " + text::normalize_whitespace(chunk.text);
}

std::size_t fact_tokens(const NaryFact& fact) { return text::count_tokens(render_fact(fact)); }

std::size_t chunk_tokens(const ChunkPassage& chunk) { return text::count_tokens(render_chunk(chunk, 0)); }

RetrievalBundle fuse(const std::vector<AdmittedFact>& f_v, const std::vector<AdmittedFact>& f_h,
                     std::vector<ChunkPassage> chunks, std::size_t budget_tokens) {
  std::map<HyperedgeId, FusedFact> merged;
  for (const auto& a : f_v) {
    auto [it, inserted] = merged.emplace(a.fact.hyperedge.id, FusedFact{a.fact, a.score, Provenance::kEntity});
    if (!inserted) it->second.score = std::max(it->second.score, a.score);
  }
  for (const auto& a : f_h) {
    auto [it, inserted] = merged.emplace(a.fact.hyperedge.id, FusedFact{a.fact, a.score, Provenance::kHyperedge});
    if (inserted) continue;
    it->second.score = std::max(it->second.score, a.score);
    if (it->second.provenance == Provenance::kEntity) it->second.provenance = Provenance::kBoth;
  }
  std::vector<FusedFact> ranked;
  ranked.reserve(merged.size());
  for (auto& [_, f] : merged) ranked.push_back(std::move(f));
  std::sort(ranked.begin(), ranked.end(), ranked_before);

  std::sort(chunks.begin(), chunks.end(), [](const ChunkPassage& a, const ChunkPassage& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  chunks.erase(std::unique(chunks.begin(), chunks.end(),
                           [](const ChunkPassage& a, const ChunkPassage& b) { return a.id == b.id; }),
               chunks.end());

  RetrievalBundle bundle;
  std::size_t used = 0;
  for (auto& f : ranked) {
    auto cost = fact_tokens(f.fact);
    if (used + cost > budget_tokens) break;
    used += cost;
    bundle.facts.push_back(std::move(f));
  }
  for (auto& c : chunks) {
    auto cost = chunk_tokens(c);
    if (used + cost > budget_tokens) break;
    used += cost;
    bundle.chunks.push_back(std::move(c));
  }
  bundle.tokens = used;
  return bundle;
}

std::string render_knowledge(const RetrievalBundle& bundle) {
  if (bundle.empty()) return kNoKnowledge;
  std::string out;
  if (!bundle.facts.empty()) {
    out += "## Hypergraph facts\n";
    for (const auto& f : bundle.facts) out += render_fact(f.fact) + "\n";
  }
  if (!bundle.chunks.empty()) {
    if (!out.empty()) out += "\n";
    out += "## Source passages\n";
    for (std::size_t i = 0; i < bundle.chunks.size(); ++i) out += render_chunk(bundle.chunks[i], i + 1) + "\n";
  }
  out.pop_back();
  return out;
}

std::string build_generation_prompt(const PromptTemplate& tmpl, const RetrievalBundle& bundle,
                                    const std::string& question) {
  return tmpl.render({{"knowledge", render_knowledge(bundle)}, {"question", question}});
}

namespace {

// Content between the first `<tag>` and the following `</tag>`; an unclosed
// block runs to the end of the text.
std::optional<std::string> block(const std::string& raw, const std::string& tag, std::size_t* end_out) {
  auto lower = text::ascii_lower(raw);
  auto open = lower.find("<" + tag + ">");
  if (open == std::string::npos) return std::nullopt;
  auto start = open + tag.size() + 2;
  auto close = lower.find("</" + tag + ">", start);
  if (end_out) *end_out = close == std::string::npos ? raw.size() : close + tag.size() + 3;
  return text::trim(raw.substr(start, close == std::string::npos ? std::string::npos : close - start));
}

}  // namespace

GenerationResult parse_generation(const std::string& raw) {
  if (text::trim(raw).empty()) throw GenerationError("model returned an empty output");
  GenerationResult r;
  r.raw = raw;
  std::size_t think_end = 0;
  if (auto t = block(raw, "think", &think_end)) r.reasoning = *t;
  if (auto a = block(raw, "answer", nullptr)) {
    r.answer = *a;
    if (r.answer.empty()) r.diagnostics.push_back({Severity::kWarning, "empty_answer", "answer block is empty"});
    return r;
  }
  r.answer = text::trim(std::string_view(raw).substr(think_end));
  if (r.answer.empty()) r.answer = text::trim(raw);
  r.diagnostics.push_back({Severity::kWarning, "unstructured_output", "no answer block; using the raw output"});
  return r;
}

}  // namespace hgrag
