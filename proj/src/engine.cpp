#include "hgrag/engine.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "hgrag/errors.hpp"
#include "hgrag/parallel.hpp"
#include "hgrag/serialize.hpp"
#include "hgrag/text.hpp"

namespace hgrag {
namespace fs = std::filesystem;

std::vector<Document> read_corpus(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw ConfigError("corpus path does not exist: " + path.string());
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (auto it = fs::recursive_directory_iterator(path, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec)) {
      if (it->is_regular_file() && it->path().filename().string().front() != '.') files.push_back(it->path());
    }
    if (ec) throw ConfigError("cannot list corpus directory " + path.string() + ": " + ec.message());
  } else {
    files.push_back(path);
  }
  auto root = fs::is_directory(path) ? path : path.parent_path();
  std::vector<Document> docs;
  if (!fs::is_directory(path) && path.extension() == ".jsonl") {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read corpus file " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string()) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected {\"doc_id\", \"text\"}");
      }
      docs.push_back({j.value("doc_id", "line-" + std::to_string(lineno)), j["text"].get<std::string>()});
    }
    std::stable_sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
    return docs;
  }
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw ConfigError("cannot read corpus file " + f.string());
    std::stringstream buf;
    buf << in.rdbuf();
    docs.push_back({fs::relative(f, root).generic_string(), buf.str()});
  }
  std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
  return docs;
}

std::pair<std::shared_ptr<ChatBackend>, std::shared_ptr<EmbedBackend>> make_backends(const EngineConfig& cfg) {
  if (cfg.provider == "mock") {
    auto mock = cfg.mock_script.empty() ? std::make_shared<MockProvider>(cfg.mock_dim)
                                        : MockProvider::from_script(cfg.mock_script);
    return {mock, mock};
  }
  auto http = std::make_shared<OpenAIBackend>(cfg.llm);
  return {http, http};
}

Engine::Engine(EngineConfig cfg, Store::Mode mode) : Engine(cfg, mode, nullptr, nullptr) {}

Engine::Engine(EngineConfig cfg, Store::Mode mode, std::shared_ptr<ChatBackend> chat,
               std::shared_ptr<EmbedBackend> embed)
    : cfg_(std::move(cfg)) {
  cfg_.check();
  templates_ = cfg_.templates_dir.empty() ? TemplateSet::builtin() : TemplateSet::load(cfg_.templates_dir);
  if (!chat || !embed) std::tie(chat, embed) = make_backends(cfg_);
  gateway_ = std::make_unique<Gateway>(cfg_.llm, std::move(chat), std::move(embed));
  if (mode == Store::Mode::kReadOnly && !Store::exists(cfg_.store_dir)) {
    throw NotFoundError("no store at " + cfg_.store_dir.string() + "; run build first");
  }
  store_ = std::make_unique<Store>(cfg_.store_dir, mode);
}

BuildReport Engine::build(const fs::path& corpus) { return build(read_corpus(corpus)); }

BuildReport Engine::build(const std::vector<Document>& docs) {
  BuildReport report;
  const std::size_t usage_start = gateway_->meter().size();
  report.documents = docs.size();
  if (docs.empty()) report.diagnostics.push_back({Severity::kWarning, "empty_corpus", "corpus has no documents"});

  std::vector<Chunk> chunks;
  std::set<ChunkId> seen;
  for (const auto& d : docs) {
    report.corpus_tokens += text::count_tokens(d.text);
    for (auto& c : chunk_document(d.id, d.text, cfg_.extraction.chunk_tokens, cfg_.extraction.chunk_overlap)) {
      if (seen.insert(c.id).second) chunks.push_back(std::move(c));
    }
  }
  report.chunks = chunks.size();

  std::vector<ChunkRecord> fresh;
  std::vector<Chunk> pending;
  std::set<ChunkId> known;
  for (const auto& r : store_->chunks()) known.insert(r.chunk.id);
  for (const auto& c : chunks) {
    if (!known.contains(c.id)) fresh.push_back({c, false});
    if (store_->chunk_extracted(c.id)) {
      ++report.chunks_skipped;
    } else {
      pending.push_back(c);
    }
  }
  store_->record_chunks(fresh);

  // Extraction runs in parallel within a batch; results are applied in chunk
  // order so repeated builds write identical logs.
  const auto& tmpl = templates_.get(TemplateKind::kExtraction);
  const std::size_t batch = std::max<std::size_t>(1, cfg_.extraction.workers);
  for (std::size_t start = 0; start < pending.size(); start += batch) {
    std::size_t n = std::min(batch, pending.size() - start);
    std::vector<std::optional<ValidatedExtraction>> results(n);
    std::vector<Diagnostics> failures(n);
    parallel_for(n, cfg_.extraction.workers, [&](std::size_t i) {
      const auto& chunk = pending[start + i];
      try {
        ChatRequest req;
        req.messages = {{"user", build_extraction_prompt(tmpl, chunk)}};
        req.temperature = cfg_.generation.temperature;
        req.task = "extract";
        req.slot = chunk.text;
        std::optional<RawExtraction> parsed;
        for (int attempt = 1; !parsed; ++attempt) {
          auto reply = gateway_->chat(req, Phase::kConstruction);
          try {
            parsed = parse_extraction_output(reply.text);
          } catch (const ParseError&) {
            if (attempt >= cfg_.extraction.attempts) throw;
          }
        }
        auto& raw = *parsed;
        auto v = validate_extraction(raw, chunk, cfg_.extraction.strictness);
        v.diagnostics.insert(v.diagnostics.begin(), raw.diagnostics.begin(), raw.diagnostics.end());
        results[i] = std::move(v);
      } catch (const Error& e) {
        failures[i].push_back({Severity::kError, "extraction_failed", chunk.id.str() + ": " + e.what()});
      }
    });
    for (std::size_t i = 0; i < n; ++i) {
      const auto& chunk = pending[start + i];
      if (!results[i]) {
        ++report.chunks_failed;
        report.diagnostics.insert(report.diagnostics.end(), failures[i].begin(), failures[i].end());
        continue;
      }
      for (auto d : results[i]->diagnostics) {
        d.message = chunk.id.str() + ": " + d.message;
        report.diagnostics.push_back(std::move(d));
      }
      report.facts += results[i]->facts.size();
      auto merged = merge_into_delta(results[i]->facts);
      auto r = store_->apply_delta(merged.delta, &report.diagnostics);
      report.merged.entities_added += r.entities_added;
      report.merged.entities_merged += r.entities_merged;
      report.merged.hyperedges_added += r.hyperedges_added;
      report.merged.hyperedges_merged += r.hyperedges_merged;
      report.merged.incidences_added += r.incidences_added;
      store_->record_chunks({{chunk, true}});
      ++report.chunks_extracted;
    }
  }

  {
    std::lock_guard lock(index_mu_);
    index_ = std::make_shared<KnowledgeIndex>(KnowledgeIndex::build(*store_, *gateway_, Phase::kConstruction));
    indexed_graph_ = store_->graph();
    indexed_chunks_ = store_->chunks().size();
  }
  auto m = store_->manifest();
  report.counts = m.counts;
  report.embeddings = store_->embedding_count();
  auto usage = gateway_->meter().snapshot();
  std::vector<UsageRecord> mine(usage.begin() + static_cast<std::ptrdiff_t>(usage_start), usage.end());
  if (report.corpus_tokens > 0) report.metrics = report_metrics(mine, report.corpus_tokens, 0);
  return report;
}

std::shared_ptr<const KnowledgeIndex> Engine::index() {
  std::lock_guard lock(index_mu_);
  auto g = store_->graph();
  auto chunk_count = store_->chunks().size();
  if (!index_ || g != indexed_graph_ || chunk_count != indexed_chunks_) {
    index_ = std::make_shared<KnowledgeIndex>(KnowledgeIndex::build(*store_, *gateway_, Phase::kConstruction));
    indexed_graph_ = g;
    indexed_chunks_ = chunk_count;
  }
  return index_;
}

Embedder Engine::query_embedder(const std::string& query_id, Phase phase) {
  return [this, query_id, phase](const std::vector<std::string>& texts) {
    return gateway_->embed(texts, phase, query_id).vectors;
  };
}

QueryTrace Engine::query(const std::string& question, std::optional<std::string> query_id) {
  if (text::trim(question).empty()) throw ContractError("question must be non-empty");
  QueryTrace t;
  t.question = question;
  t.query_id = query_id ? *query_id : "query-" + std::to_string(++query_counter_);
  auto idx = index();
  const auto& rc = cfg_.retrieval;
  auto embed = query_embedder(t.query_id, Phase::kGeneration);

  t.entities.query = question;
  if (rc.k_v > 0 && !idx->entities().empty()) {
    t.entities = extract_query_entities(question, *gateway_, templates_.get(TemplateKind::kQueryEntities),
                                        cfg_.generation.query_entity_attempts, t.query_id);
    t.diagnostics.insert(t.diagnostics.end(), t.entities.diagnostics.begin(), t.entities.diagnostics.end());
    t.entity_hits = retrieve_entities(t.entities, *idx, rc, embed);
  }
  t.hyperedge_hits = retrieve_hyperedges(question, *idx, rc, embed);
  t.chunk_hits = retrieve_chunks(question, *idx, rc, embed);

  auto f_v = expand_from_entities(t.entity_hits, idx->graph());
  auto f_h = expand_from_hyperedges(t.hyperedge_hits, idx->graph());
  std::vector<ChunkPassage> passages;
  for (const auto& h : t.chunk_hits) {
    ChunkId id(h.id);
    passages.push_back({id, idx->chunk_text(id), h.similarity});
  }
  t.bundle = fuse(f_v, f_h, std::move(passages), cfg_.generation.knowledge_budget);
  t.prompt = build_generation_prompt(templates_.get(TemplateKind::kGeneration), t.bundle, question);

  ChatRequest req;
  req.messages = {{"user", t.prompt}};
  req.temperature = cfg_.generation.temperature;
  req.max_tokens = cfg_.generation.max_output_tokens;
  req.task = "generate";
  req.slot = question;
  Gateway::ChatResult reply;
  try {
    reply = gateway_->chat(req, Phase::kGeneration, t.query_id);
  } catch (const ProviderError& e) {
    throw GenerationError(std::string("generation call failed: ") + e.what());
  }
  t.generation = parse_generation(reply.text);
  t.generation.prompt_tokens = reply.usage.prompt_tokens;
  t.generation.completion_tokens = reply.usage.completion_tokens;
  t.diagnostics.insert(t.diagnostics.end(), t.generation.diagnostics.begin(), t.generation.diagnostics.end());
  for (const auto& u : gateway_->meter().snapshot()) {
    if (u.query_id == t.query_id) t.usage.push_back(u);
  }
  return t;
}

EvalReport Engine::evaluate(const std::vector<EvalItem>& dataset, const EvalOptions& options) {
  index();
  Answerer answer = [this](const EvalItem& item, const std::string& qid) {
    auto t = query(item.question, qid);
    AnswerRecord rec{t.generation.answer, {}};
    for (const auto& f : t.bundle.facts) rec.retrieved_knowledge.push_back(f.fact.hyperedge.description);
    for (const auto& c : t.bundle.chunks) rec.retrieved_knowledge.push_back(c.text);
    return rec;
  };
  auto embed = [this](const std::vector<std::string>& texts) {
    return gateway_->embed(texts, Phase::kEvaluation).vectors;
  };
  return run_eval(dataset, answer, embed, *gateway_, templates_.get(TemplateKind::kJudge), options);
}

StoreStats Engine::stats() const {
  StoreStats s;
  auto g = store_->graph();
  s.counts = {g->entity_count(), g->hyperedge_count(), g->incidence_count(), store_->chunks().size()};
  for (const auto& [id, h] : g->hyperedges()) {
    ++s.arity_histogram[h.members.size()];
    s.knowledge_tokens += fact_tokens(fact_of(*g, id));
  }
  s.embeddings = store_->embedding_count();
  return s;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string Engine::to_dot() const {
  auto g = store_->graph();
  std::ostringstream out;
  out << "graph hypergraph {\n  node [fontsize=10];\n";
  for (const auto& [id, e] : g->entities()) {
    out << "  \"" << id.str() << "\" [shape=ellipse, label=\"" << dot_escape(e.name) << "\"];\n";
  }
  for (const auto& [id, h] : g->hyperedges()) {
    auto label = h.description.size() > 60 ? h.description.substr(0, 57) + "..." : h.description;
    out << "  \"" << id.str() << "\" [shape=box, label=\"" << dot_escape(label) << "\"];\n";
    for (const auto& v : h.members) out << "  \"" << id.str() << "\" -- \"" << v.str() << "\";\n";
  }
  out << "}\n";
  return out.str();
}

json stats_json(const StoreStats& s) {
  json hist = json::object();
  for (const auto& [arity, n] : s.arity_histogram) hist[std::to_string(arity)] = n;
  return {{"entities", s.counts.entities},     {"hyperedges", s.counts.hyperedges},
          {"incidences", s.counts.incidences}, {"chunks", s.counts.chunks},
          {"arity_histogram", hist},           {"knowledge_tokens", s.knowledge_tokens},
          {"embeddings", s.embeddings}};
}

std::string stats_table(const StoreStats& s) {
  std::ostringstream out;
  char line[96];
  auto row = [&](const char* k, std::size_t v) {
    std::snprintf(line, sizeof line, "%-18s %10zu\n", k, v);
    out << line;
  };
  row("#Entity", s.counts.entities);
  row("#Hyperedge", s.counts.hyperedges);
  row("#Incidence", s.counts.incidences);
  row("#Chunk", s.counts.chunks);
  row("Knowledge tokens", s.knowledge_tokens);
  out << "Arity histogram\n";
  for (const auto& [arity, n] : s.arity_histogram) {
    std::snprintf(line, sizeof line, "  %-16zu %10zu\n", arity, n);
    out << line;
  }
  return out.str();
}

json build_report_json(const BuildReport& r) {
  return {{"documents", r.documents},
          {"corpus_tokens", r.corpus_tokens},
          {"chunks", r.chunks},
          {"chunks_skipped", r.chunks_skipped},
          {"chunks_extracted", r.chunks_extracted},
          {"chunks_failed", r.chunks_failed},
          {"facts", r.facts},
          {"merged", r.merged},
          {"counts",
           {{"entities", r.counts.entities},
            {"hyperedges", r.counts.hyperedges},
            {"incidences", r.counts.incidences},
            {"chunks", r.counts.chunks}}},
          {"embeddings", r.embeddings},
          {"metrics", r.metrics ? json(*r.metrics) : json(nullptr)},
          {"diagnostics", diagnostics_json(r.diagnostics)}};
}

std::string build_report_text(const BuildReport& r) {
  std::ostringstream out;
  out << "documents " << r.documents << ", corpus tokens " << r.corpus_tokens << "\n";
  out << "chunks " << r.chunks << " (extracted " << r.chunks_extracted << ", skipped " << r.chunks_skipped
      << ", failed " << r.chunks_failed << ")\n";
  out << "facts " << r.facts << "; added entities " << r.merged.entities_added << ", hyperedges "
      << r.merged.hyperedges_added << ", incidences " << r.merged.incidences_added << "\n";
  out << "store: entities " << r.counts.entities << ", hyperedges " << r.counts.hyperedges << ", incidences "
      << r.counts.incidences << ", chunks " << r.counts.chunks << ", embeddings " << r.embeddings << "\n";
  if (r.metrics) {
    out << "TP1kT " << text::format_number(r.metrics->tp1kt.value_or(0.0), 6) << " s, CP1kT $"
        << text::format_number(r.metrics->cp1kt.value_or(0.0), 6) << "\n";
  }
  for (const auto& d : r.diagnostics) {
    if (d.severity != Severity::kInfo) out << to_string(d.severity) << ": " << d.code << ": " << d.message << "\n";
  }
  return out.str();
}

json usage_summary(const std::vector<UsageRecord>& usage) {
  std::size_t pt = 0, ct = 0;
  double cost = 0.0, wall = 0.0;
  for (const auto& u : usage) {
    pt += u.prompt_tokens;
    ct += u.completion_tokens;
    cost += u.cost;
    wall += u.wall_time;
  }
  return {{"calls", usage.size()}, {"prompt_tokens", pt}, {"completion_tokens", ct}, {"cost", cost},
          {"wall_time", wall}};
}

namespace {

json hits_json(const std::vector<RankedHit>& hits) {
  json arr = json::array();
  for (const auto& h : hits) arr.push_back(h);
  return arr;
}

}  // namespace

json query_envelope(const QueryTrace& t, bool include_prompt) {
  json facts = json::array();
  for (const auto& f : t.bundle.facts) {
    json names = json::array();
    for (const auto& e : f.fact.entities) names.push_back(e.name);
    facts.push_back({{"id", f.fact.hyperedge.id},
                     {"description", f.fact.hyperedge.description},
                     {"score", f.score},
                     {"provenance", to_string(f.provenance)},
                     {"entities", names}});
  }
  json chunks = json::array();
  for (const auto& c : t.bundle.chunks) chunks.push_back({{"id", c.id}, {"similarity", c.similarity}, {"text", c.text}});
  json data = {{"query_id", t.query_id},
               {"question", t.question},
               {"answer", t.generation.answer},
               {"reasoning", t.generation.reasoning},
               {"query_entities", t.entities.entities},
               {"entity_hits", hits_json(t.entity_hits)},
               {"hyperedge_hits", hits_json(t.hyperedge_hits)},
               {"chunk_hits", hits_json(t.chunk_hits)},
               {"facts", facts},
               {"chunks", chunks},
               {"diagnostics", diagnostics_json(t.diagnostics)}};
  if (include_prompt) data["prompt"] = t.prompt;
  return {{"ok", true}, {"data", data}, {"error", nullptr}, {"usage", usage_summary(t.usage)}};
}

json error_envelope(const std::string& message) {
  return {{"ok", false}, {"data", nullptr}, {"error", message}, {"usage", nullptr}};
}

std::string trace_text(const QueryTrace& t) {
  std::ostringstream out;
  out << "== query entities" << (t.entities.fallback ? " (fallback)" : "") << "\n";
  for (const auto& e : t.entities.entities) out << "  " << e << "\n";
  auto hits = [&](const char* title, const std::vector<RankedHit>& hs, auto&& label) {
    out << "== " << title << " (" << hs.size() << ")\n";
    for (const auto& h : hs) {
      out << "  #" << h.rank << " combined " << text::format_number(h.combined, 6) << " sim "
          << text::format_number(h.similarity, 6) << "  " << label(h) << "\n";
    }
  };
  std::map<std::string, std::string> entity_names, descriptions;
  for (const auto& f : t.bundle.facts) {
    descriptions[f.fact.hyperedge.id.str()] = f.fact.hyperedge.description;
    for (const auto& e : f.fact.entities) entity_names[e.id.str()] = e.name;
  }
  auto lookup = [](const std::map<std::string, std::string>& m) {
    return [&m](const RankedHit& h) {
      auto it = m.find(h.id);
      return it == m.end() ? h.id : h.id + "  " + it->second;
    };
  };
  hits("entity hits", t.entity_hits, lookup(entity_names));
  hits("hyperedge hits", t.hyperedge_hits, lookup(descriptions));
  hits("chunk hits", t.chunk_hits, [](const RankedHit& h) { return h.id; });
  out << "== fused knowledge (" << t.bundle.facts.size() << " facts, " << t.bundle.chunks.size() << " chunks, ~"
      << t.bundle.tokens << " tokens)\n";
  for (const auto& f : t.bundle.facts) out << "  [" << to_string(f.provenance) << "] " << render_fact(f.fact) << "\n";
  out << "== prompt\n" << t.prompt << "\n";
  if (!t.generation.reasoning.empty()) out << "== reasoning\n" << t.generation.reasoning << "\n";
  auto u = usage_summary(t.usage);
  out << "== usage: " << u["calls"].get<std::size_t>() << " calls, " << u["prompt_tokens"].get<std::size_t>()
      << " prompt tokens, " << u["completion_tokens"].get<std::size_t>() << " completion tokens\n";
  for (const auto& d : t.diagnostics) out << "== " << to_string(d.severity) << ": " << d.code << ": " << d.message << "\n";
  return out.str();
}

}  // namespace hgrag
