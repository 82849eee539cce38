// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 when
// any criterion fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "hgrag/errors.hpp"
#include "hgrag/eval.hpp"
#include "hgrag/extraction.hpp"
#include "hgrag/store.hpp"
#include "hgrag/text.hpp"
#include "test_support.hpp"

using namespace hgrag;
using namespace hgrag::testing;
namespace fs = std::filesystem;

namespace {

struct Failure {
  std::string why;
};

void require(bool ok, const std::string& why) {
  if (!ok) throw Failure{why};
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int failures = 0;

void criterion(int n, const std::string& name, double limit_s, const std::function<void()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  std::string why;
  try {
    body();
  } catch (const Failure& f) {
    why = f.why;
  } catch (const std::exception& e) {
    why = std::string("exception: ") + e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (why.empty() && limit_s > 0 && secs >= limit_s) {
    why = "took " + text::format_number(secs) + " s, limit " + text::format_number(limit_s) + " s";
  }
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.2fs", secs);
  if (why.empty()) {
    std::cout << "PASS [" << n << "] " << name << " (" << timing << ")\n";
  } else {
    ++failures;
    std::cout << "FAIL [" << n << "] " << name << " (" << timing << "): " << why << "\n";
  }
}

void round_trip_and_queries() {
  std::mt19937_64 rng(1001);
  for (int i = 0; i < 1000; ++i) {
    auto h = random_hypergraph(rng, 50, 2, 8, 60);
    auto g = to_bipartite(h);
    require(from_bipartite(g) == h, "round trip differs on instance " + std::to_string(i));
    std::vector<EntityId> ids;
    for (const auto& [id, _] : g.entities()) ids.push_back(id);
    for (int probe = 0; probe < 4; ++probe) {
      const auto& v = ids[rng() % ids.size()];
      const auto& u = ids[rng() % ids.size()];
      require(incident_hyperedges(g, v) == oracle_incident(h, v), "incident_hyperedges mismatch");
      if (u != v) require(co_occurs(g, u, v) == oracle_co_occurs(h, u, v), "co_occurs mismatch");
      std::set<EntityId> s = {u, v, ids[rng() % ids.size()]};
      require(hyperedges_containing_all(g, s) == oracle_containing_all(h, s), "containing_all mismatch");
    }
    for (const auto& f : h) {
      auto got = fact_of(g, f.hyperedge.id);
      std::vector<EntityId> members;
      for (const auto& e : got.entities) members.push_back(e.id);
      require(members == oracle_members(h, f.hyperedge.id), "members mismatch");
    }
  }
}

void projection_witness() {
  auto a = make_entity("a"), b = make_entity("b"), c = make_entity("c");
  auto edge = [](const std::string& d, std::vector<Entity> es) {
    NaryFact f;
    std::vector<EntityId> m;
    for (const auto& e : es) m.push_back(e.id);
    f.entities = std::move(es);
    f.hyperedge = Hyperedge::make(d, 5, m);
    return f;
  };
  std::vector<NaryFact> triple = {edge("a b c", {a, b, c})};
  std::vector<NaryFact> pairs = {edge("a b", {a, b}), edge("a c", {a, c}), edge("b c", {b, c})};
  require(binary_projection(triple) == binary_projection(pairs), "projections differ");
  require(binary_projection(triple).size() == 3, "projection should have three pairs");
  auto g1 = to_bipartite(triple), g2 = to_bipartite(pairs);
  require(!(g1 == g2), "bipartite encodings coincide");
  require(g1.hyperedge_count() == 1 && g2.hyperedge_count() == 3, "unexpected hyperedge counts");
  require(g1.incidence_count() == 3 && g2.incidence_count() == 6, "unexpected incidence counts");
  require(from_bipartite(g1) == triple, "triple not recovered");
}

void retrieval_oracle() {
  std::mt19937_64 rng(2002);
  const std::size_t dim = 16;
  VectorCollection col(CollectionKind::kHyperedge, dim);
  std::vector<VectorItem> items;
  std::uniform_real_distribution<double> w(0.1, 10.0);
  for (std::size_t i = 0; i < 10000; ++i) {
    Vector v;
    double weight;
    if (i % 10 == 9) {
      // Exact tie with an earlier item under a different id.
      v = items[i - 5].vector;
      weight = items[i - 5].weight;
    } else {
      v = random_unit_free_vector(rng, dim);
      weight = w(rng);
    }
    char id[16];
    std::snprintf(id, sizeof id, "h%05zu", (i * 7919) % 10000);
    col.add(id, v, weight);
    items.push_back({id, v, weight});
  }
  for (int s = 0; s < 20; ++s) {
    std::size_t k = s == 0 ? 0 : s == 1 ? 10000 : 1 + rng() % 200;
    double tau = s == 2 ? -100.0 : std::uniform_real_distribution<double>(-2.0, 4.0)(rng);
    auto q = s == 3 ? items[42].vector : random_unit_free_vector(rng, dim);
    auto got = top_k_weighted(q, col, k, tau);
    auto want = oracle_top_k(q, items, k, tau);
    require(got.size() == want.size(), "size mismatch at setting " + std::to_string(s));
    for (std::size_t i = 0; i < got.size(); ++i) {
      require(got[i].id == want[i].id, "order mismatch at setting " + std::to_string(s));
      require(near(got[i].combined, want[i].combined, 1e-9), "score mismatch at setting " + std::to_string(s));
      require(got[i].rank == i + 1, "rank mismatch");
    }
  }
}

void fusion_oracle() {
  std::mt19937_64 rng(3003);
  TempDir root;
  for (int i = 0; i < 200; ++i) {
    auto h = random_hypergraph(rng, 20, 2, 6, 30);
    Store store(root / ("s" + std::to_string(i)));
    store.apply_delta(to_bipartite(h));
    const auto& g = *store.graph();
    std::uniform_real_distribution<double> score(0.1, 100.0);
    std::vector<RankedHit> ev, eh;
    for (const auto& [id, _] : g.entities()) {
      if (rng() % 5 == 0) ev.push_back({id.str(), 0.5, score(rng), ev.size() + 1});
    }
    for (const auto& [id, _] : g.hyperedges()) {
      if (rng() % 4 == 0) eh.push_back({id.str(), 0.5, score(rng) / 10.0, eh.size() + 1});
    }
    auto fv = expand_from_entities(ev, g);
    auto fh = expand_from_hyperedges(eh, g);
    std::set<HyperedgeId> got;
    for (const auto& a : fv) got.insert(a.fact.hyperedge.id);
    for (const auto& a : fh) got.insert(a.fact.hyperedge.id);
    require(got == oracle_expansion(h, ev, eh), "expansion mismatch on store " + std::to_string(i));

    auto full = fuse(fv, fh, {}, 1000000);
    require(full.facts.size() == got.size(), "fusion does not deduplicate");
    std::set<HyperedgeId> seen;
    for (const auto& f : full.facts) require(seen.insert(f.fact.hyperedge.id).second, "duplicate fused fact");
    for (std::size_t j = 1; j < full.facts.size(); ++j) {
      require(full.facts[j - 1].score >= full.facts[j].score, "fused facts not ranked");
    }
    std::vector<HyperedgeId> previous;
    for (std::size_t budget : {0, 40, 120, 400, 1500}) {
      auto b = fuse(fv, fh, {}, budget);
      require(b.tokens <= budget, "budget exceeded");
      std::vector<HyperedgeId> ids;
      for (const auto& f : b.facts) ids.push_back(f.fact.hyperedge.id);
      for (std::size_t j = 0; j < ids.size(); ++j) {
        require(ids[j] == full.facts[j].fact.hyperedge.id, "truncation is not a ranked prefix");
      }
      require(std::equal(previous.begin(), previous.end(), ids.begin()) && previous.size() <= ids.size(),
              "truncation not monotone in budget");
      previous = ids;
    }
  }
}

void metric_values() {
  struct Case {
    const char* pred;
    const char* gold;
    double want;
  };
  // Hand-derived: P = overlap/|pred|, R = overlap/|gold|, F1 = 2PR/(P+R).
  const Case cases[] = {
      {"the cat sat", "the cat ran", 2.0 / 3.0},
      {"Renal denervation", "renal denervation", 1.0},
      {"Renal denervation.", "renal, denervation!", 1.0},
      {"renal", "renal denervation lowers pressure", 0.4},
      {"a b c d", "a", 0.4},
      {"x y", "y z", 0.5},
      {"one two three", "four five", 0.0},
      {"", "gold", 0.0},
      {"pred", "", 0.0},
      {"every three months", "Every three months", 1.0},
      {"serum creatinine every three months", "every three months", 2.0 * 0.6 / 1.6},
  };
  for (const auto& c : cases) {
    require(near(f1(c.pred, c.gold), c.want, 1e-12),
            std::string("f1('") + c.pred + "', '" + c.gold + "') = " + text::format_number(f1(c.pred, c.gold)));
  }
  JudgeScores eight, ten, zero;
  eight.scores.fill(8);
  ten.scores.fill(10);
  zero.scores.fill(0);
  require(near(g_e_score(eight, 0.5), 65.0, 1e-12), "g_e(8s, 0.5) != 65");
  require(near(g_e_score(ten, 1.0), 100.0, 1e-12), "g_e(10s, 1) != 100");
  require(near(g_e_score(zero, 0.0), 0.0, 1e-12), "g_e(0s, 0) != 0");
  MockProvider mock(32);
  Embedder embed = [&](const std::vector<std::string>& ts) {
    std::vector<Vector> out;
    for (const auto& t : ts) out.push_back(mock.hash_vector(t));
    return out;
  };
  require(near(retrieval_similarity({"k1", "k2"}, {"k1", "k2"}, embed), 1.0, 1e-12), "R-S identical != 1");
  require(retrieval_similarity({}, {"k1"}, embed) == 0.0, "R-S empty retrieval != 0");
}

struct RunOutput {
  StoreCounts counts;
  std::map<std::size_t, std::size_t> arity;
  std::string trace;
  std::string prompt;
  std::string answer;
  std::vector<std::string> top_hyperedges;
  std::map<std::string, std::string> logs;
};

RunOutput end_to_end_run(const fs::path& dir) {
  auto cfg = fixture_config(dir / "store");
  {
    Engine e(cfg, Store::Mode::kReadWrite);
    e.build(fixture_path("corpus"));
  }
  Engine e(cfg, Store::Mode::kReadOnly);
  auto t = e.query(kDiagnosisQuestion, "q1");
  RunOutput out;
  out.counts = e.stats().counts;
  out.arity = e.stats().arity_histogram;
  out.trace = trace_text(t);
  out.prompt = t.prompt;
  out.answer = t.generation.answer;
  for (std::size_t i = 0; i < std::min<std::size_t>(5, t.hyperedge_hits.size()); ++i) {
    out.top_hyperedges.push_back(t.hyperedge_hits[i].id);
  }
  for (const auto& f : {"entities.jsonl", "hyperedges.jsonl", "incidence.jsonl", "chunks.jsonl"}) {
    out.logs[f] = read_file(dir / "store" / f);
  }
  return out;
}

void deterministic_end_to_end() {
  TempDir a, b;
  auto r1 = end_to_end_run(a.path());
  require(r1.counts == StoreCounts{17, 6, 23, 3}, "golden counts differ");
  require(r1.arity == std::map<std::size_t, std::size_t>{{3, 1}, {4, 5}}, "golden arity histogram differs");
  auto target = hyperedge_id_for(kDiagnosisDescription).str();
  require(std::find(r1.top_hyperedges.begin(), r1.top_hyperedges.end(), target) != r1.top_hyperedges.end(),
          "diagnosis hyperedge not in top-5");
  for (const auto& name : kDiagnosisEntities) {
    require(r1.prompt.find(name) != std::string::npos, "prompt lacks entity '" + name + "'");
  }
  auto r2 = end_to_end_run(b.path());
  require(r1.trace == r2.trace, "trace differs between runs");
  require(r1.prompt == r2.prompt, "prompt differs between runs");
  require(r1.answer == r2.answer, "answer differs between runs");
  require(r1.logs == r2.logs, "store logs differ between runs");
}

void degenerate_configs() {
  TempDir dir;
  auto cfg = fixture_config(dir / "store");
  {
    Engine e(cfg, Store::Mode::kReadWrite);
    e.build(fixture_path("corpus"));
  }
  cfg.retrieval.k_v = cfg.retrieval.k_h = cfg.retrieval.k_c = 0;
  Engine e(cfg, Store::Mode::kReadOnly);
  auto t = e.query(kDiagnosisQuestion);
  require(t.bundle.empty(), "knowledge not empty with zero k");
  require(t.prompt.find(kNoKnowledge) != std::string::npos, "prompt lacks the no-knowledge marker");
  require(!t.generation.answer.empty(), "no answer on the zero-k path");

  auto raw = parse_extraction_output(read_file(fixture_path("boundary_extraction.txt")));
  auto chunk = chunk_document("boundary", "boundary chunk", 1200, 100).at(0);
  auto strict = validate_extraction(raw, chunk, Strictness::kStrict);
  auto lenient = validate_extraction(raw, chunk, Strictness::kLenient);
  require(strict.facts.size() == 2, "strict should keep 2 of 5 fragments, kept " + std::to_string(strict.facts.size()));
  require(lenient.facts.size() == 5, "lenient should keep 5 of 5 fragments, kept " + std::to_string(lenient.facts.size()));
  for (const auto& f : lenient.facts) {
    require(f.hyperedge.score > 0 && f.hyperedge.score <= 10, "lenient score not clamped");
    for (const auto& en : f.entities) require(en.score > 0 && en.score <= 100, "lenient entity score not clamped");
  }
}

void metering() {
  std::vector<UsageRecord> recs;
  auto add = [&](Phase p, double wall, std::size_t pt, std::size_t ct, CallKind kind) {
    UsageRecord u;
    u.kind = kind;
    u.phase = p;
    u.wall_time = wall;
    u.prompt_tokens = pt;
    u.completion_tokens = ct;
    u.cost = cost_of(kind, pt, ct, PriceTable{0.15, 0.60, 0.02});
    recs.push_back(u);
  };
  // Construction: 2 chats of 1000 in / 200 out, 1 embed of 5000 tokens.
  add(Phase::kConstruction, 1.25, 1000, 200, CallKind::kChat);
  add(Phase::kConstruction, 1.75, 1000, 200, CallKind::kChat);
  add(Phase::kConstruction, 0.5, 5000, 0, CallKind::kEmbed);
  // Generation: 4 queries, one chat of 2000 in / 100 out each.
  for (int i = 0; i < 4; ++i) add(Phase::kGeneration, 0.8, 2000, 100, CallKind::kChat);
  auto m = report_metrics(recs, 2500, 4);
  // construction cost = 2 * (0.15 + 0.12) + 0.10 = 0.64 over 2.5k tokens.
  require(m.tp1kt && near(*m.tp1kt, 3.5 / 2.5, 1e-3), "TP1kT");
  require(m.cp1kt && near(*m.cp1kt, 0.256, 0.005), "CP1kT");
  require(m.tpq && near(*m.tpq, 0.8, 1e-3), "TPQ");
  // per query 0.30 + 0.06 = 0.36 dollars, so 360 per 1k queries.
  require(m.cp1kq && near(*m.cp1kq, 360.0, 0.005), "CP1kQ");
  bool threw = false;
  try {
    report_metrics(recs, 0, 0);
  } catch (const ReportError&) {
    threw = true;
  }
  require(threw, "zero denominators accepted");
}

}  // namespace

int main() {
  criterion(1, "bipartite round trip and incidence queries on 1000 random hypergraphs", 5.0, round_trip_and_queries);
  criterion(2, "projection collision witness", 0.0, projection_witness);
  criterion(3, "top_k_weighted equals full-scan oracle on 10000 vectors", 10.0, retrieval_oracle);
  criterion(4, "expansion and fusion oracle on 200 random stores", 0.0, fusion_oracle);
  criterion(5, "F1, G-E and R-S hand values", 0.0, metric_values);
  criterion(6, "deterministic mock end to end", 30.0, deterministic_end_to_end);
  criterion(7, "degenerate retrieval and strict/lenient validation", 0.0, degenerate_configs);
  criterion(8, "metering arithmetic", 0.0, metering);
  return failures == 0 ? 0 : 1;
}
