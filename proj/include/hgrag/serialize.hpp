#pragma once

#include <nlohmann/json.hpp>

#include "hgrag/diagnostics.hpp"
#include "hgrag/extraction.hpp"
#include "hgrag/hypergraph.hpp"
#include "hgrag/llm.hpp"
#include "hgrag/vindex.hpp"

namespace hgrag {

using nlohmann::json;

template <typename Tag>
void to_json(json& j, const StrongId<Tag>& id) {
  j = id.str();
}
template <typename Tag>
void from_json(const json& j, StrongId<Tag>& id) {
  id = StrongId<Tag>(j.get<std::string>());
}

void to_json(json& j, const Entity& e);
void from_json(const json& j, Entity& e);
/// Hyperedge with its member list.
void to_json(json& j, const Hyperedge& h);
void from_json(const json& j, Hyperedge& h);
void to_json(json& j, const NaryFact& f);
void from_json(const json& j, NaryFact& f);
void to_json(json& j, const Chunk& c);
void from_json(const json& j, Chunk& c);
void to_json(json& j, const RankedHit& h);
void to_json(json& j, const Diagnostic& d);
void from_json(const json& j, Diagnostic& d);
void to_json(json& j, const UsageRecord& u);
void to_json(json& j, const MetricsReport& m);
void to_json(json& j, const MergeReport& r);

json diagnostics_json(const Diagnostics& d);

}  // namespace hgrag
