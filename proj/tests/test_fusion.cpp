#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "hgrag/errors.hpp"
#include "hgrag/fusion.hpp"
#include "hgrag/text.hpp"
#include "test_support.hpp"

using namespace hgrag;
using namespace hgrag::testing;

namespace {

std::vector<RankedHit> hits_for(const std::vector<std::string>& ids, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> score(0.1, 100.0);
  std::vector<RankedHit> out;
  for (const auto& id : ids) out.push_back({id, 0.5, score(rng), out.size() + 1});
  return out;
}

NaryFact diagnosis_fact() {
  NaryFact f;
  const std::vector<std::pair<std::string, double>> ents = {
      {kDiagnosisEntities[0], 95}, {kDiagnosisEntities[1], 90}, {kDiagnosisEntities[2], 92}, {kDiagnosisEntities[3], 94}};
  std::vector<EntityId> members;
  for (const auto& [name, score] : ents) {
    f.entities.push_back(Entity::make(name, "Concept", "", score));
    members.push_back(f.entities.back().id);
  }
  f.hyperedge = Hyperedge::make(kDiagnosisDescription, 9, members);
  return f;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Expansion, MatchesOracleOnRandomGraphs) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 60; ++trial) {
    auto facts = random_hypergraph(rng, 15, 2, 6, 25);
    auto g = to_bipartite(facts);
    std::vector<std::string> ent_ids, edge_ids;
    for (const auto& [id, _] : g.entities()) {
      if (rng() % 4 == 0) ent_ids.push_back(id.str());
    }
    for (const auto& [id, _] : g.hyperedges()) {
      if (rng() % 3 == 0) edge_ids.push_back(id.str());
    }
    auto ev = hits_for(ent_ids, rng), eh = hits_for(edge_ids, rng);
    auto fv = expand_from_entities(ev, g);
    auto fh = expand_from_hyperedges(eh, g);
    std::set<HyperedgeId> got;
    for (const auto& a : fv) got.insert(a.fact.hyperedge.id);
    for (const auto& a : fh) got.insert(a.fact.hyperedge.id);
    EXPECT_EQ(got, oracle_expansion(facts, ev, eh));
    for (const auto& a : fv) {
      // Score is the best hit among the fact's members.
      double best = 0;
      for (const auto& h : ev) {
        for (const auto& m : a.fact.hyperedge.members) {
          if (m.str() == h.id) best = std::max(best, h.combined);
        }
      }
      EXPECT_EQ(a.score, best);
      EXPECT_EQ(a.fact, fact_of(g, a.fact.hyperedge.id));
    }
  }
}

TEST(Expansion, UnknownIdsAndDanglingMembers) {
  auto g = to_bipartite({make_fact("x y", {"x", "y"})});
  EXPECT_TRUE(expand_from_entities({{"ent-missing", 1, 1, 1}}, g).empty());
  EXPECT_THROW(expand_from_hyperedges({{"edge-missing", 1, 1, 1}}, g), IntegrityError);

  auto fact = make_fact("p q", {"p", "q"});
  BipartiteGraph::EntityMap ents = {{fact.entities[0].id, fact.entities[0]}};
  BipartiteGraph::HyperedgeMap edges = {{fact.hyperedge.id, fact.hyperedge}};
  auto broken = BipartiteGraph::from_parts(ents, edges, {{fact.entities[0].id, {fact.hyperedge.id}}});
  EXPECT_THROW(expand_from_hyperedges({{fact.hyperedge.id.str(), 1, 1, 1}}, broken), IntegrityError);
}

TEST(Fuse, UnionMarksProvenance) {
  auto a = make_fact("alpha beta", {"alpha", "beta"});
  auto b = make_fact("gamma delta", {"gamma", "delta"});
  auto c = make_fact("eps zeta", {"eps", "zeta"});
  auto bundle = fuse({{a, 40}, {b, 30}}, {{b, 8}, {c, 9}}, {}, kDefaultKnowledgeBudget);
  ASSERT_EQ(bundle.facts.size(), 3u);
  std::map<HyperedgeId, FusedFact> by_id;
  for (const auto& f : bundle.facts) by_id[f.fact.hyperedge.id] = f;
  EXPECT_EQ(by_id[a.hyperedge.id].provenance, Provenance::kEntity);
  EXPECT_EQ(by_id[b.hyperedge.id].provenance, Provenance::kBoth);
  EXPECT_EQ(by_id[b.hyperedge.id].score, 30);
  EXPECT_EQ(by_id[c.hyperedge.id].provenance, Provenance::kHyperedge);
  EXPECT_EQ(bundle.facts[0].fact, a);
}

TEST(Fuse, ZeroBudgetIsEmpty) {
  auto a = make_fact("alpha beta", {"alpha", "beta"});
  auto bundle = fuse({{a, 1}}, {}, {{ChunkId("chk-1"), "text", 0.9}}, 0);
  EXPECT_TRUE(bundle.empty());
  EXPECT_EQ(bundle.tokens, 0u);
  EXPECT_EQ(render_knowledge(bundle), kNoKnowledge);
}

TEST(Fuse, PrefixOracleAndMonotoneBudget) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    auto facts = random_hypergraph(rng, 12, 2, 5, 20);
    std::vector<AdmittedFact> fv, fh;
    std::map<HyperedgeId, double> best;
    for (const auto& f : facts) {
      double s = static_cast<double>(rng() % 50);
      if (rng() % 2) fv.push_back({f, s});
      else fh.push_back({f, s});
      best[f.hyperedge.id] = s;
    }
    std::vector<std::pair<double, HyperedgeId>> order;
    for (const auto& [id, s] : best) order.emplace_back(-s, id);
    std::sort(order.begin(), order.end());
    std::map<HyperedgeId, const NaryFact*> by_id;
    for (const auto& f : facts) by_id[f.hyperedge.id] = &f;

    std::vector<HyperedgeId> previous;
    for (std::size_t budget : {0, 30, 80, 200, 500, 100000}) {
      auto bundle = fuse(fv, fh, {}, budget);
      std::size_t used = 0;
      std::vector<HyperedgeId> want;
      for (const auto& [_, id] : order) {
        auto cost = text::count_tokens(render_fact(*by_id[id]));
        if (used + cost > budget) break;
        used += cost;
        want.push_back(id);
      }
      std::vector<HyperedgeId> got;
      for (const auto& f : bundle.facts) got.push_back(f.fact.hyperedge.id);
      EXPECT_EQ(got, want);
      EXPECT_LE(bundle.tokens, budget);
      EXPECT_TRUE(std::equal(previous.begin(), previous.end(), got.begin()));
      previous = got;
    }
  }
}

TEST(Fuse, ChunksFillRemainingBudget) {
  auto a = make_fact("alpha beta", {"alpha", "beta"});
  std::vector<ChunkPassage> chunks = {{ChunkId("chk-b"), "second passage", 0.7},
                                      {ChunkId("chk-a"), "first passage", 0.9},
                                      {ChunkId("chk-a"), "first passage", 0.9}};
  auto budget = fact_tokens(a) + chunk_tokens(chunks[1]);
  auto bundle = fuse({{a, 5}}, {}, chunks, budget);
  ASSERT_EQ(bundle.chunks.size(), 1u);
  EXPECT_EQ(bundle.chunks[0].id, ChunkId("chk-a"));
  auto all = fuse({{a, 5}}, {}, chunks, kDefaultKnowledgeBudget);
  ASSERT_EQ(all.chunks.size(), 2u);
  auto k = render_knowledge(all);
  EXPECT_LT(k.find("## Hypergraph facts"), k.find("## Source passages"));
  EXPECT_NE(k.find("[1] first passage"), std::string::npos);
  EXPECT_NE(k.find("[2] second passage"), std::string::npos);
}

TEST(Fuse, Idempotent) {
  auto a = make_fact("alpha beta", {"alpha", "beta"});
  auto b = make_fact("gamma delta", {"gamma", "delta"});
  std::vector<AdmittedFact> fv = {{a, 3}, {b, 2}};
  EXPECT_EQ(fuse(fv, fv, {}, 1000).facts.size(), 2u);
  auto once = fuse(fv, {}, {}, 1000);
  std::vector<AdmittedFact> again;
  for (const auto& f : once.facts) again.push_back({f.fact, f.score});
  EXPECT_EQ(fuse(again, {}, {}, 1000), once);
}

TEST(Render, FactLineFormat) {
  auto e1 = Entity::make("Renal denervation", "Procedure", "Ablation of renal nerves", 90);
  auto e2 = Entity::make("Blood pressure", "Measurement", "", 80);
  NaryFact f{Hyperedge::make("Renal denervation lowers blood pressure.", 8.5, {e1.id, e2.id}), {e1, e2}};
  EXPECT_EQ(render_fact(f),
            "FACT (score 8.5): Renal denervation lowers blood pressure. | ENTITIES: Renal denervation(Procedure): "
            "Ablation of renal nerves, Blood pressure(Measurement)");
}

TEST(Prompt, DiagnosisFactReachesPrompt) {
  auto f = diagnosis_fact();
  auto bundle = fuse({{f, 95}}, {{f, 9}}, {}, kDefaultKnowledgeBudget);
  ASSERT_EQ(bundle.facts.size(), 1u);
  EXPECT_EQ(bundle.facts[0].provenance, Provenance::kBoth);
  auto prompt = build_generation_prompt(TemplateSet::builtin().get(TemplateKind::kGeneration), bundle,
                                        kDiagnosisQuestion);
  for (const auto& name : kDiagnosisEntities) EXPECT_NE(prompt.find(name), std::string::npos) << name;
  EXPECT_NE(prompt.find(kDiagnosisDescription), std::string::npos);
  EXPECT_NE(prompt.find(kDiagnosisQuestion), std::string::npos);
}

TEST(Prompt, MatchesGoldenFile) {
  auto f = diagnosis_fact();
  auto bundle = fuse({{f, 95}}, {{f, 9}}, {{ChunkId("chk-diag"), "Passage  about\nserum creatinine.", 0.8}},
                     kDefaultKnowledgeBudget);
  auto prompt = build_generation_prompt(TemplateSet::builtin().get(TemplateKind::kGeneration), bundle,
                                        kDiagnosisQuestion);
  auto golden = fixture_path("golden/generation_prompt.txt");
  if (std::getenv("HGRAG_UPDATE_GOLDEN")) std::ofstream(golden, std::ios::binary) << prompt;
  ASSERT_TRUE(std::filesystem::exists(golden));
  EXPECT_EQ(prompt, read_file(golden));
}

TEST(Prompt, EmptyBundleSaysNoKnowledge) {
  auto prompt = build_generation_prompt(TemplateSet::builtin().get(TemplateKind::kGeneration), {}, "q?");
  EXPECT_NE(prompt.find(kNoKnowledge), std::string::npos);
}

TEST(Generation, ParsesThinkAndAnswer) {
  auto r = parse_generation("<think>step one</think>\n<answer> Mild elevation. </answer>");
  EXPECT_EQ(r.reasoning, "step one");
  EXPECT_EQ(r.answer, "Mild elevation.");
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(Generation, CaseInsensitiveTags) {
  auto r = parse_generation("<THINK>x</THINK><Answer>y</Answer>");
  EXPECT_EQ(r.reasoning, "x");
  EXPECT_EQ(r.answer, "y");
}

TEST(Generation, UnstructuredOutputFallsBack) {
  auto r = parse_generation("<think>reasoning</think> The answer is 42.");
  EXPECT_EQ(r.answer, "The answer is 42.");
  EXPECT_EQ(r.reasoning, "reasoning");
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].code, "unstructured_output");
  EXPECT_EQ(parse_generation("plain text").answer, "plain text");
  EXPECT_EQ(parse_generation("<answer>open ended").answer, "open ended");
}

TEST(Generation, EmptyOutputIsError) {
  EXPECT_THROW(parse_generation(""), GenerationError);
  EXPECT_THROW(parse_generation(" \n "), GenerationError);
}
