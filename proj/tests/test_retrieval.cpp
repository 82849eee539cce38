#include <gtest/gtest.h>

#include "hgrag/errors.hpp"
#include "hgrag/retrieval.hpp"
#include "test_support.hpp"

using namespace hgrag;
using namespace hgrag::testing;

namespace {

struct Fixture {
  std::shared_ptr<MockProvider> mock = std::make_shared<MockProvider>(16);
  Gateway gateway;
  PromptTemplate tmpl = TemplateSet::builtin().get(TemplateKind::kQueryEntities);

  Fixture() : gateway(config(), mock, mock) {}
  static ProviderConfig config() {
    ProviderConfig c;
    c.backoff_initial_s = 0.0;
    return c;
  }
};

// Deterministic embedder backed by the mock hash.
Embedder hash_embedder(const MockProvider& mock) {
  return [&mock](const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    for (const auto& t : texts) out.push_back(mock.hash_vector(t));
    return out;
  };
}

}  // namespace

TEST(QueryEntities, ParsesScriptedList) {
  Fixture f;
  f.mock->script("query_entities", "q", {{200, R"(["Male", "hypertensive patient", "serum creatinine"])", {}, {}}});
  auto q = extract_query_entities("q", f.gateway, f.tmpl);
  EXPECT_EQ(q.entities, (std::vector<std::string>{"Male", "hypertensive patient", "serum creatinine"}));
  EXPECT_FALSE(q.fallback);
  ASSERT_EQ(f.gateway.meter().size(), 1u);
  EXPECT_EQ(f.gateway.meter().snapshot()[0].phase, Phase::kGeneration);
}

TEST(QueryEntities, ArrayInsideProse) {
  Fixture f;
  f.mock->script("query_entities", "q", {{200, "Sure. The entities are: [\"a\", \"b\", \" a \"] hope that helps", {}, {}}});
  auto q = extract_query_entities("q", f.gateway, f.tmpl);
  EXPECT_EQ(q.entities, (std::vector<std::string>{"a", "b"}));
}

TEST(QueryEntities, RetriesThenFallsBackToQuestion) {
  Fixture f;
  f.mock->script("query_entities", "  what is x?  ", {{200, "garbage", {}, {}}});
  auto q = extract_query_entities("  what is x?  ", f.gateway, f.tmpl, 3);
  EXPECT_TRUE(q.fallback);
  EXPECT_EQ(q.entities, (std::vector<std::string>{"what is x?"}));
  EXPECT_EQ(f.mock->chat_calls(), 3u);
  bool flagged = false;
  for (const auto& d : q.diagnostics) flagged = flagged || d.code == "query_entities_fallback";
  EXPECT_TRUE(flagged);
}

TEST(QueryEntities, RecoversOnSecondAttempt) {
  Fixture f;
  f.mock->script("query_entities", "q", {{200, "[]", {}, {}}, {200, "[\"x\"]", {}, {}}});
  auto q = extract_query_entities("q", f.gateway, f.tmpl, 3);
  EXPECT_FALSE(q.fallback);
  EXPECT_EQ(q.entities, (std::vector<std::string>{"x"}));
  EXPECT_EQ(f.mock->chat_calls(), 2u);
}

TEST(QueryEntities, ProviderFailureIsRetrievalError) {
  Fixture f;
  f.mock->script("query_entities", "q", {{401, "", {}, {}}});
  EXPECT_THROW(extract_query_entities("q", f.gateway, f.tmpl), RetrievalError);
}

TEST(QueryEntities, ParseEntityList) {
  EXPECT_FALSE(parse_entity_list("nothing here").has_value());
  EXPECT_FALSE(parse_entity_list("[1, 2]").has_value());
  EXPECT_EQ(*parse_entity_list("[3] then [\"p\", \"q\"]"), (std::vector<std::string>{"p", "q"}));
  EXPECT_EQ(dedup_entities({"A  b", "", "A b", "c"}), (std::vector<std::string>{"A b", "c"}));
}

TEST(EntityRetrieval, IdenticalEmbeddingScoresFullWeight) {
  auto e = Entity::make("Hypertensive patient", "Person", "x", 100);
  auto other = Entity::make("Kidney", "Organ", "y", 100);
  NaryFact f{Hyperedge::make("Hypertensive patient kidney", 10, {e.id, other.id}), {e, other}};
  auto graph = std::make_shared<BipartiteGraph>(to_bipartite({f}));
  MockProvider mock(16);
  auto index = KnowledgeIndex::from_vectors(graph, {}, [&](const std::string& t) { return mock.hash_vector(t); });
  QueryEntities q{"q", {"Hypertensive patient"}, false, {}};
  RetrievalConfig cfg;
  auto hits = retrieve_entities(q, index, cfg, hash_embedder(mock));
  ASSERT_FALSE(hits.empty());
  EXPECT_EQ(hits[0].id, e.id.str());
  EXPECT_NEAR(hits[0].combined, 100.0, 1e-9);

  auto edges = retrieve_hyperedges("Hypertensive patient kidney", index, cfg, hash_embedder(mock));
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_NEAR(edges[0].combined, 10.0, 1e-9);
}

TEST(EntityRetrieval, ThresholdLetsWeightDominate) {
  // cos 0.6 with weight 90 passes tau 50; cos 0.9 with weight 40 does not.
  auto strong = Entity::make("strong", "", "", 90);
  auto weak = Entity::make("weak", "", "", 40);
  auto graph = std::make_shared<BipartiteGraph>(
      to_bipartite({NaryFact{Hyperedge::make("strong weak", 5, {strong.id, weak.id}), {strong, weak}}}));
  std::map<std::string, Vector> vec = {
      {"strong", {0.6, 0.8}}, {"weak", {0.9, std::sqrt(1 - 0.81)}}, {"strong weak", {0, 1}}, {"query", {1, 0}}};
  auto index = KnowledgeIndex::from_vectors(graph, {}, [&](const std::string& t) { return vec.at(t); });
  Embedder embed = [&](const std::vector<std::string>& ts) {
    std::vector<Vector> out;
    for (const auto& t : ts) out.push_back(vec.at(t));
    return out;
  };
  auto hits = retrieve_entities(QueryEntities{"query", {"query"}, false, {}}, index, RetrievalConfig{}, embed);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].id, strong.id.str());
  EXPECT_NEAR(hits[0].combined, 54.0, 1e-9);
}

TEST(HyperedgeRetrieval, LowScoreEdgeFallsBelowThreshold) {
  auto a = make_entity("a"), b = make_entity("b");
  auto graph = std::make_shared<BipartiteGraph>(
      to_bipartite({NaryFact{Hyperedge::make("edge", 0.4, {a.id, b.id}), {a, b}}}));
  MockProvider mock(8);
  auto index = KnowledgeIndex::from_vectors(graph, {}, [&](const std::string& t) { return mock.hash_vector(t); });
  // Perfect similarity still gives 0.4 * 1 < 5.
  EXPECT_TRUE(retrieve_hyperedges("edge", index, RetrievalConfig{}, hash_embedder(mock)).empty());
}

TEST(EntityRetrieval, MatchesOracleOnRandomGraph) {
  std::mt19937_64 rng(17);
  auto facts = random_hypergraph(rng, 10, 2, 4, 20);
  auto graph = std::make_shared<BipartiteGraph>(to_bipartite(facts));
  MockProvider mock(4);  // low dimension gives varied similarities
  auto index = KnowledgeIndex::from_vectors(graph, {}, [&](const std::string& t) { return mock.hash_vector(t); });
  std::vector<VectorItem> items;
  for (const auto& [id, e] : graph->entities()) items.push_back({id.str(), mock.hash_vector(e.name), e.score});
  RetrievalConfig cfg;
  cfg.tau_v = 10.0;
  cfg.k_v = 7;
  for (int trial = 0; trial < 20; ++trial) {
    QueryEntities q{"q", {"query " + std::to_string(trial)}, false, {}};
    auto got = retrieve_entities(q, index, cfg, hash_embedder(mock));
    auto want = oracle_top_k(mock.hash_vector(entity_query_text(q)), items, cfg.k_v, cfg.tau_v);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].id, want[i].id);
      EXPECT_NEAR(got[i].combined, want[i].combined, 1e-9);
    }
  }
}

TEST(EntityRetrieval, DuplicateNamesDoNotChangeResult) {
  std::mt19937_64 rng(19);
  auto graph = std::make_shared<BipartiteGraph>(to_bipartite(random_hypergraph(rng, 8, 2, 3, 12)));
  MockProvider mock(4);
  auto index = KnowledgeIndex::from_vectors(graph, {}, [&](const std::string& t) { return mock.hash_vector(t); });
  RetrievalConfig cfg;
  cfg.tau_v = 0.0;
  QueryEntities once{"q", {"alpha", "beta"}, false, {}};
  QueryEntities twice{"q", {"alpha", "beta", "alpha", " beta "}, false, {}};
  EXPECT_EQ(entity_query_text(once), entity_query_text(twice));
  auto a = retrieve_entities(once, index, cfg, hash_embedder(mock));
  auto b = retrieve_entities(twice, index, cfg, hash_embedder(mock));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
}

TEST(Retrieval, ZeroKSkipsEmbedding) {
  std::mt19937_64 rng(23);
  auto graph = std::make_shared<BipartiteGraph>(to_bipartite(random_hypergraph(rng, 4)));
  MockProvider mock(8);
  auto index = KnowledgeIndex::from_vectors(graph, {{ChunkId("chk-x"), "chunk"}},
                                            [&](const std::string& t) { return mock.hash_vector(t); });
  RetrievalConfig cfg;
  cfg.k_v = cfg.k_h = cfg.k_c = 0;
  std::size_t calls = 0;
  Embedder counting = [&](const std::vector<std::string>& ts) {
    ++calls;
    return hash_embedder(mock)(ts);
  };
  EXPECT_TRUE(retrieve_entities(QueryEntities{"q", {"q"}, false, {}}, index, cfg, counting).empty());
  EXPECT_TRUE(retrieve_hyperedges("q", index, cfg, counting).empty());
  EXPECT_TRUE(retrieve_chunks("q", index, cfg, counting).empty());
  EXPECT_EQ(calls, 0u);
}

TEST(ChunkRetrieval, UnweightedCosineAboveThreshold) {
  auto graph = std::make_shared<BipartiteGraph>();
  std::map<std::string, Vector> vec = {{"near", {1, 0.2}}, {"far", {0, 1}}, {"q", {1, 0}}};
  auto index = KnowledgeIndex::from_vectors(graph, {{ChunkId("chk-near"), "near"}, {ChunkId("chk-far"), "far"}},
                                            [&](const std::string& t) { return vec.at(t); });
  Embedder embed = [&](const std::vector<std::string>& ts) { return std::vector<Vector>{vec.at(ts.at(0))}; };
  auto hits = retrieve_chunks("q", index, RetrievalConfig{}, embed);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].id, "chk-near");
  EXPECT_NEAR(hits[0].combined, 1.0 / std::sqrt(1.04), 1e-12);
  EXPECT_EQ(index.chunk_text(ChunkId("chk-near")), "near");
}

TEST(RetrievalConfig, RejectsNonFiniteThresholds) {
  RetrievalConfig cfg;
  cfg.tau_h = std::nan("");
  EXPECT_THROW(cfg.check(), ConfigError);
}
