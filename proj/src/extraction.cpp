#include "hgrag/extraction.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include <nlohmann/json.hpp>

#include "hgrag/errors.hpp"
#include "hgrag/text.hpp"

namespace hgrag {
namespace {

using nlohmann::json;

std::optional<json> locate_fragments(std::string_view raw) {
  std::optional<json> bare_array;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{' && raw[i] != '[') continue;
    auto end = text::match_bracket(raw, i);
    if (end == std::string_view::npos) continue;
    json value = json::parse(raw.substr(i, end - i), nullptr, false);
    if (value.is_discarded()) continue;
    if (value.is_object() && value.contains("fragments") && value["fragments"].is_array()) {
      return value["fragments"];
    }
    if (!bare_array && value.is_array() && !value.empty() && value.front().is_object() &&
        value.front().contains("description")) {
      bare_array = value;
    }
  }
  return bare_array;
}

std::optional<double> as_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    char* end = nullptr;
    double d = std::strtod(s.c_str(), &end);
    if (end != s.c_str() && text::trim(end).empty()) return d;
  }
  return std::nullopt;
}

std::string string_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

enum class ScoreCheck { kOk, kClamped, kRejected };

ScoreCheck check_score(double& score, double upper, Strictness strictness) {
  if (std::isnan(score)) return ScoreCheck::kRejected;
  if (score > 0.0 && score <= upper) return ScoreCheck::kOk;
  if (strictness == Strictness::kStrict) return ScoreCheck::kRejected;
  score = score <= 0.0 ? std::numeric_limits<double>::denorm_min() : upper;
  return ScoreCheck::kClamped;
}

}  // namespace

std::vector<Chunk> chunk_document(const std::string& doc_id, std::string_view text_in,
                                  std::size_t max_tokens, std::size_t overlap_tokens) {
  if (max_tokens == 0 || overlap_tokens >= max_tokens) {
    throw ContractError("chunking requires max_tokens > overlap_tokens >= 0");
  }
  std::vector<Chunk> chunks;
  auto spans = text::token_spans(text_in);
  if (spans.empty()) return chunks;
  const std::size_t n = spans.size();
  std::size_t start = 0;
  while (true) {
    std::size_t stop = std::min(start + max_tokens, n);
    Chunk c;
    c.doc_id = doc_id;
    c.begin = start == 0 ? 0 : spans[start].begin;
    c.end = stop == n ? text_in.size() : spans[stop].begin;
    c.text = std::string(text_in.substr(c.begin, c.end - c.begin));
    c.token_count = stop - start;
    c.id = chunk_id_for(c.text);
    chunks.push_back(std::move(c));
    if (stop == n) break;
    start = stop - overlap_tokens;
  }
  return chunks;
}

std::string build_extraction_prompt(const PromptTemplate& tmpl, const Chunk& chunk) {
  return tmpl.render({{"chunk", chunk.text}});
}

RawExtraction parse_extraction_output(std::string_view raw) {
  auto located = locate_fragments(raw);
  if (!located) throw ParseError("no structured extraction block in model output", std::string(raw));

  RawExtraction out;
  int index = -1;
  for (const auto& frag : *located) {
    ++index;
    if (!frag.is_object()) {
      out.diagnostics.push_back({Severity::kError, "fragment_not_object", "fragment is not an object", index});
      continue;
    }
    RawFragment f;
    f.description = text::trim(string_field(frag, "description"));
    if (f.description.empty()) {
      out.diagnostics.push_back({Severity::kError, "fragment_no_description", "fragment lacks a description", index});
      continue;
    }
    auto score = frag.contains("score") ? as_number(frag["score"]) : std::nullopt;
    if (!score) {
      out.diagnostics.push_back({Severity::kError, "fragment_no_score", "fragment lacks a numeric score", index});
      continue;
    }
    f.fragment_score = *score;
    if (frag.contains("entities") && frag["entities"].is_array()) {
      for (const auto& ent : frag["entities"]) {
        if (!ent.is_object()) {
          out.diagnostics.push_back({Severity::kWarning, "entity_not_object", "entity is not an object", index});
          continue;
        }
        RawEntity e;
        e.name = string_field(ent, "name");
        e.etype = string_field(ent, "type");
        e.explanation = string_field(ent, "explanation");
        auto es = ent.contains("score") ? as_number(ent["score"]) : std::nullopt;
        if (e.name.empty() || !es) {
          out.diagnostics.push_back({Severity::kWarning, "entity_malformed",
                                     "entity lacks a name or numeric score", index});
          continue;
        }
        e.entity_score = *es;
        f.entities.push_back(std::move(e));
      }
    }
    out.fragments.push_back(std::move(f));
  }
  return out;
}

std::string print_extraction(const std::vector<RawFragment>& fragments) {
  json arr = json::array();
  for (const auto& f : fragments) {
    json ents = json::array();
    for (const auto& e : f.entities) {
      ents.push_back({{"name", e.name}, {"type", e.etype}, {"explanation", e.explanation},
                      {"score", e.entity_score}});
    }
    arr.push_back({{"description", f.description}, {"score", f.fragment_score}, {"entities", ents}});
  }
  return json{{"fragments", arr}}.dump();
}

ValidatedExtraction validate_extraction(const RawExtraction& raw, const Chunk& chunk,
                                        Strictness strictness) {
  ValidatedExtraction out;
  out.diagnostics = raw.diagnostics;
  auto diag = [&](Severity s, std::string code, std::string msg, int idx) {
    out.diagnostics.push_back({s, std::move(code), std::move(msg), idx});
  };

  for (std::size_t fi = 0; fi < raw.fragments.size(); ++fi) {
    const auto& frag = raw.fragments[fi];
    const int idx = static_cast<int>(fi);
    std::string description = text::trim(frag.description);
    if (description.empty()) {
      diag(Severity::kError, "fragment_no_description", "empty description", idx);
      continue;
    }
    double fscore = frag.fragment_score;
    switch (check_score(fscore, kMaxHyperedgeScore, strictness)) {
      case ScoreCheck::kRejected:
        diag(Severity::kError, "fragment_score_rejected",
             "fragment score " + text::format_number(frag.fragment_score) + " outside (0,10]", idx);
        continue;
      case ScoreCheck::kClamped:
        diag(Severity::kWarning, "fragment_score_clamped",
             "fragment score " + text::format_number(frag.fragment_score) + " clamped into (0,10]", idx);
        break;
      case ScoreCheck::kOk:
        break;
    }

    std::vector<Entity> entities;
    std::map<EntityId, std::size_t> position;
    for (const auto& re : frag.entities) {
      std::string name = text::normalize_whitespace(re.name);
      if (name.empty()) {
        diag(Severity::kWarning, "entity_empty_name", "entity with empty name dropped", idx);
        continue;
      }
      double escore = re.entity_score;
      auto check = check_score(escore, kMaxEntityScore, strictness);
      if (check == ScoreCheck::kRejected) {
        diag(Severity::kError, "entity_score_rejected",
             "entity '" + name + "' score " + text::format_number(re.entity_score) + " outside (0,100]", idx);
        continue;
      }
      if (check == ScoreCheck::kClamped) {
        diag(Severity::kWarning, "entity_score_clamped",
             "entity '" + name + "' score clamped into (0,100]", idx);
      }
      if (!text::contains_case_insensitive(description, name)) {
        if (strictness == Strictness::kStrict) {
          diag(Severity::kError, "entity_not_in_description",
               "entity '" + name + "' does not occur in its fragment; dropped", idx);
          continue;
        }
        diag(Severity::kWarning, "entity_not_in_description",
             "entity '" + name + "' does not occur in its fragment", idx);
      }
      Entity e = Entity::make(name, text::trim(re.etype), text::trim(re.explanation), escore, {chunk.id});
      if (auto it = position.find(e.id); it != position.end()) {
        auto& kept = entities[it->second];
        kept.score = std::max(kept.score, e.score);
        diag(Severity::kInfo, "entity_duplicate_mention", "repeated entity '" + name + "' folded", idx);
        continue;
      }
      position.emplace(e.id, entities.size());
      entities.push_back(std::move(e));
    }

    if (entities.size() < 2) {
      diag(Severity::kError, "fragment_arity",
           "fragment has " + std::to_string(entities.size()) + " valid entities; needs at least 2", idx);
      continue;
    }
    std::vector<EntityId> members;
    members.reserve(entities.size());
    for (const auto& e : entities) members.push_back(e.id);
    NaryFact fact;
    fact.hyperedge = Hyperedge::make(description, fscore, std::move(members), {chunk.id});
    fact.entities = std::move(entities);
    out.facts.push_back(std::move(fact));
  }
  return out;
}

MergedDelta merge_into_delta(const std::vector<NaryFact>& facts) {
  MergedDelta out;
  for (const auto& f : facts) {
    auto r = out.delta.add_fact(f, &out.diagnostics);
    out.report.entities_added += r.entities_added;
    out.report.entities_merged += r.entities_merged;
    out.report.hyperedges_added += r.hyperedges_added;
    out.report.hyperedges_merged += r.hyperedges_merged;
    out.report.incidences_added += r.incidences_added;
  }
  return out;
}

}  // namespace hgrag
