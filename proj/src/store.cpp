#include "hgrag/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "hgrag/errors.hpp"
#include "hgrag/serialize.hpp"
#include "hgrag/text.hpp"

namespace hgrag {
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kEntities = "entities.jsonl";
constexpr const char* kHyperedges = "hyperedges.jsonl";
constexpr const char* kIncidence = "incidence.jsonl";
constexpr const char* kChunks = "chunks.jsonl";
constexpr const char* kEmbeddingDir = "embeddings";

std::string now_utc() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string shard_for(const std::string& key) {
  return std::string(kEmbeddingDir) + "/shard-" + key.substr(0, 1) + ".jsonl";
}

json hyperedge_record(const Hyperedge& h) {
  json j = h;
  j.erase("members");
  return j;
}

// Invoke fn(line, byte offset) for each non-empty line of the first
// `committed` bytes of `path`.
template <typename Fn>
void for_each_line(const fs::path& path, const std::string& name, std::uint64_t committed, Fn&& fn) {
  std::uint64_t size = fs::exists(path) ? fs::file_size(path) : 0;
  if (size < committed) {
    throw LoadError(name, size, "file truncated, expected " + std::to_string(committed) + " committed bytes");
  }
  if (committed == 0) return;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(name, 0, "cannot open file");
  std::string data(committed, '\0');
  in.read(data.data(), static_cast<std::streamsize>(committed));
  if (static_cast<std::uint64_t>(in.gcount()) != committed) throw LoadError(name, in.gcount(), "short read");
  if (data.back() != '\n') throw LoadError(name, committed, "committed region ends mid-record");
  std::size_t pos = 0;
  while (pos < data.size()) {
    auto nl = data.find('\n', pos);
    std::string_view line(data.data() + pos, nl - pos);
    if (!line.empty()) {
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw LoadError(name, pos, "malformed record");
      try {
        fn(j, pos);
      } catch (const LoadError&) {
        throw;
      } catch (const std::exception& e) {
        throw LoadError(name, pos, e.what());
      }
    }
    pos = nl + 1;
  }
}

void write_file_atomic(const fs::path& path, const std::string& data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw StorageError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

struct Store::LogWrite {
  std::string file;
  std::string data;
};

std::string embedding_key(const std::string& model_tag, const std::string& text) {
  std::string buf = model_tag;
  buf.push_back('\0');
  buf += text;
  return text::sha256_hex(buf);
}

bool Store::exists(const fs::path& dir) { return fs::is_regular_file(dir / kManifest); }

Store::Store(fs::path dir, Mode mode) : dir_(std::move(dir)), mode_(mode) {
  graph_ = std::make_shared<BipartiteGraph>();
  if (mode_ == Mode::kReadWrite) {
    std::error_code ec;
    fs::create_directories(dir_ / kEmbeddingDir, ec);
    if (ec) throw StorageError("cannot create store directory " + dir_.string() + ": " + ec.message());
    lock_fd_ = ::open((dir_ / "LOCK").c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (lock_fd_ < 0) throw StorageError("cannot open lock file in " + dir_.string());
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(lock_fd_);
      lock_fd_ = -1;
      throw StorageError("store " + dir_.string() + " is locked by another writer");
    }
  }
  try {
    load();
  } catch (...) {
    if (lock_fd_ >= 0) ::close(lock_fd_);
    lock_fd_ = -1;
    throw;
  }
}

Store::~Store() {
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

void Store::load() {
  auto manifest_path = dir_ / kManifest;
  if (!fs::exists(manifest_path)) {
    manifest_ = StoreManifest{};
    manifest_.created = manifest_.updated = now_utc();
    if (mode_ == Mode::kReadWrite) {
      truncate_uncommitted();
      write_manifest(manifest_);
    }
    return;
  }
  {
    std::ifstream in(manifest_path);
    json m = json::parse(in, nullptr, false);
    if (m.is_discarded() || !m.is_object()) throw LoadError(kManifest, 0, "manifest is not valid JSON");
    try {
      manifest_.version = m.at("version").get<int>();
      const auto& c = m.at("counts");
      manifest_.counts = {c.at("entities").get<std::size_t>(), c.at("hyperedges").get<std::size_t>(),
                          c.at("incidences").get<std::size_t>(), c.value("chunks", std::size_t{0})};
      manifest_.embedding_model_tag = m.value("embedding_model_tag", std::string{});
      manifest_.embedding_dim = m.value("embedding_dim", std::size_t{0});
      manifest_.created = m.value("created", std::string{});
      manifest_.updated = m.value("updated", std::string{});
      manifest_.committed = m.value("committed", std::map<std::string, std::uint64_t>{});
    } catch (const json::exception& e) {
      throw LoadError(kManifest, 0, e.what());
    }
    if (manifest_.version != 1) {
      throw LoadError(kManifest, 0, "unsupported format version " + std::to_string(manifest_.version));
    }
  }
  auto committed = [&](const std::string& f) {
    auto it = manifest_.committed.find(f);
    return it == manifest_.committed.end() ? std::uint64_t{0} : it->second;
  };

  BipartiteGraph::EntityMap entities;
  BipartiteGraph::HyperedgeMap hyperedges;
  for_each_line(dir_ / kEntities, kEntities, committed(kEntities), [&](const json& j, std::size_t) {
    auto e = j.get<Entity>();
    entities.insert_or_assign(e.id, std::move(e));
  });
  for_each_line(dir_ / kHyperedges, kHyperedges, committed(kHyperedges), [&](const json& j, std::size_t) {
    auto h = j.get<Hyperedge>();
    h.members.clear();
    hyperedges.insert_or_assign(h.id, std::move(h));
  });

  std::map<HyperedgeId, std::map<std::size_t, EntityId>> positions;
  BipartiteGraph::IncidenceMap incidence;
  for (const auto& [id, _] : entities) incidence.try_emplace(id);
  for_each_line(dir_ / kIncidence, kIncidence, committed(kIncidence), [&](const json& j, std::size_t off) {
    auto e = j.at("e").get<HyperedgeId>();
    auto v = j.at("v").get<EntityId>();
    auto pos = j.at("pos").get<std::size_t>();
    if (!hyperedges.contains(e)) throw LoadError(kIncidence, off, "pair names missing hyperedge " + e.str());
    if (!entities.contains(v)) throw LoadError(kIncidence, off, "pair names missing entity " + v.str());
    positions[e][pos] = v;
    incidence[v].insert(e);
  });
  for (auto& [id, h] : hyperedges) {
    for (const auto& [_, v] : positions[id]) h.members.push_back(v);
  }

  auto g = std::make_shared<BipartiteGraph>(
      BipartiteGraph::from_parts(std::move(entities), std::move(hyperedges), std::move(incidence)));
  try {
    g->validate();
  } catch (const IntegrityError& e) {
    throw LoadError(kIncidence, committed(kIncidence), e.what());
  }

  for_each_line(dir_ / kChunks, kChunks, committed(kChunks), [&](const json& j, std::size_t) {
    ChunkRecord r{j.get<Chunk>(), j.value("extracted", false)};
    auto id = r.chunk.id;
    chunks_.insert_or_assign(id, std::move(r));
  });

  StoreCounts scanned{g->entity_count(), g->hyperedge_count(), g->incidence_count(), chunks_.size()};
  if (!(scanned == manifest_.counts)) {
    throw LoadError(kManifest, 0, "manifest counts do not match the committed logs");
  }

  for (const auto& [file, bytes] : manifest_.committed) {
    if (file.rfind(kEmbeddingDir, 0) != 0) continue;
    for_each_line(dir_ / file, file, bytes, [&](const json& j, std::size_t off) {
      auto vec = j.at("vector").get<Vector>();
      if (vec.size() != j.at("dim").get<std::size_t>() ||
          (manifest_.embedding_dim != 0 && vec.size() != manifest_.embedding_dim)) {
        throw LoadError(file, off, "embedding has the wrong dimension");
      }
      embeddings_.insert_or_assign(j.at("key").get<std::string>(), std::move(vec));
    });
  }
  graph_ = std::move(g);
  if (mode_ == Mode::kReadWrite) truncate_uncommitted();
}

void Store::truncate_uncommitted() {
  std::vector<std::string> logs = {kEntities, kHyperedges, kIncidence, kChunks};
  for (const auto& entry : fs::directory_iterator(dir_ / kEmbeddingDir)) {
    if (entry.path().extension() == ".jsonl") {
      logs.push_back(std::string(kEmbeddingDir) + "/" + entry.path().filename().string());
    }
  }
  for (const auto& f : logs) {
    auto path = dir_ / f;
    if (!fs::exists(path)) continue;
    auto it = manifest_.committed.find(f);
    std::uint64_t keep = it == manifest_.committed.end() ? 0 : it->second;
    if (fs::file_size(path) > keep) fs::resize_file(path, keep);
  }
}

void Store::write_manifest(const StoreManifest& m) {
  json j = {{"version", m.version},
            {"counts",
             {{"entities", m.counts.entities},
              {"hyperedges", m.counts.hyperedges},
              {"incidences", m.counts.incidences},
              {"chunks", m.counts.chunks}}},
            {"embedding_model_tag", m.embedding_model_tag},
            {"embedding_dim", m.embedding_dim},
            {"created", m.created},
            {"updated", m.updated},
            {"committed", m.committed}};
  write_file_atomic(dir_ / kManifest, j.dump(2) + "\n");
}

void Store::inject_write_failure(std::size_t bytes) {
  std::lock_guard lock(write_mu_);
  fail_after_bytes_ = bytes;
}

// Caller holds write_mu_.
void Store::commit(const std::vector<LogWrite>& writes, const StoreCounts& counts) {
  if (mode_ != Mode::kReadWrite) throw StorageError("store opened read-only");
  std::set<std::string> touched;
  auto rollback = [&] {
    for (const auto& f : touched) {
      auto it = manifest_.committed.find(f);
      std::error_code ec;
      fs::resize_file(dir_ / f, it == manifest_.committed.end() ? 0 : it->second, ec);
    }
  };
  StoreManifest next = manifest_;
  try {
    for (const auto& w : writes) {
      if (w.data.empty()) continue;
      touched.insert(w.file);
      std::ofstream out(dir_ / w.file, std::ios::binary | std::ios::app);
      if (fail_after_bytes_) {
        auto n = std::min(*fail_after_bytes_, w.data.size());
        out.write(w.data.data(), static_cast<std::streamsize>(n));
        out.flush();
        fail_after_bytes_.reset();
        throw StorageError("injected write failure on " + w.file);
      }
      out.write(w.data.data(), static_cast<std::streamsize>(w.data.size()));
      out.flush();
      if (!out) throw StorageError("write failed on " + w.file);
      next.committed[w.file] += w.data.size();
    }
    next.counts = counts;
    next.updated = now_utc();
    write_manifest(next);
  } catch (const StorageError&) {
    rollback();
    throw;
  } catch (const std::exception& e) {
    rollback();
    throw StorageError(e.what());
  }
  manifest_ = std::move(next);
}

std::shared_ptr<const BipartiteGraph> Store::graph() const {
  std::lock_guard lock(read_mu_);
  return graph_;
}

StoreManifest Store::manifest() const {
  std::lock_guard lock(read_mu_);
  return manifest_;
}

MergeReport Store::apply_delta(const BipartiteGraph& delta, Diagnostics* diags) {
  delta.validate();
  std::lock_guard wlock(write_mu_);
  auto old = graph();
  auto next = std::make_shared<BipartiteGraph>(*old);
  MergeReport report = next->merge(delta, diags);

  LogWrite ents{kEntities, {}}, edges{kHyperedges, {}}, inc{kIncidence, {}};
  for (const auto& [id, _] : delta.entities()) {
    const auto& now = next->entity(id);
    const auto* before = old->find_entity(id);
    if (!before || !(*before == now)) ents.data += json(now).dump() + "\n";
  }
  for (const auto& [id, _] : delta.hyperedges()) {
    const auto& now = next->hyperedge(id);
    const auto* before = old->find_hyperedge(id);
    if (!before || before->score != now.score || before->description != now.description ||
        before->source_chunks != now.source_chunks) {
      edges.data += hyperedge_record(now).dump() + "\n";
    }
    for (std::size_t p = 0; p < now.members.size(); ++p) {
      const auto& v = now.members[p];
      auto it = old->incidence().find(v);
      bool known = it != old->incidence().end() && it->second.contains(id);
      if (!known) inc.data += json{{"e", id}, {"v", v}, {"pos", p}}.dump() + "\n";
    }
  }
  if (ents.data.empty() && edges.data.empty() && inc.data.empty()) return report;

  StoreCounts counts{next->entity_count(), next->hyperedge_count(), next->incidence_count(),
                     manifest_.counts.chunks};
  commit({ents, edges, inc}, counts);
  std::lock_guard rlock(read_mu_);
  graph_ = std::move(next);
  return report;
}

void Store::record_chunks(const std::vector<ChunkRecord>& records) {
  std::lock_guard wlock(write_mu_);
  LogWrite w{kChunks, {}};
  std::map<ChunkId, ChunkRecord> next = chunks_;
  for (const auto& r : records) {
    auto it = next.find(r.chunk.id);
    if (it != next.end() && it->second.extracted == r.extracted) continue;
    json j = r.chunk;
    j["extracted"] = r.extracted;
    w.data += j.dump() + "\n";
    next.insert_or_assign(r.chunk.id, r);
  }
  if (w.data.empty()) return;
  StoreCounts counts = manifest_.counts;
  counts.chunks = next.size();
  commit({w}, counts);
  std::lock_guard rlock(read_mu_);
  chunks_ = std::move(next);
}

bool Store::chunk_extracted(const ChunkId& id) const {
  std::lock_guard lock(read_mu_);
  auto it = chunks_.find(id);
  return it != chunks_.end() && it->second.extracted;
}

std::vector<ChunkRecord> Store::chunks() const {
  std::lock_guard lock(read_mu_);
  std::vector<ChunkRecord> out;
  out.reserve(chunks_.size());
  for (const auto& [_, r] : chunks_) out.push_back(r);
  return out;
}

std::optional<Vector> Store::cached_embedding(const std::string& model_tag, const std::string& t) const {
  std::lock_guard lock(read_mu_);
  auto it = embeddings_.find(embedding_key(model_tag, t));
  if (it == embeddings_.end()) return std::nullopt;
  return it->second;
}

std::size_t Store::embedding_count() const {
  std::lock_guard lock(read_mu_);
  return embeddings_.size();
}

std::vector<Vector> Store::get_or_embed(const std::vector<std::string>& texts, Gateway& gateway,
                                        Phase phase) {
  if (texts.empty()) return {};
  const std::string tag = gateway.embed_model_tag();
  std::vector<std::string> keys;
  keys.reserve(texts.size());
  for (const auto& t : texts) keys.push_back(embedding_key(tag, t));

  auto collect = [&]() -> std::optional<std::vector<Vector>> {
    std::lock_guard lock(read_mu_);
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& k : keys) {
      auto it = embeddings_.find(k);
      if (it == embeddings_.end()) return std::nullopt;
      out.push_back(it->second);
    }
    return out;
  };
  if (auto hit = collect()) return *hit;

  std::lock_guard wlock(write_mu_);
  std::vector<std::string> misses;
  std::vector<std::string> miss_keys;
  {
    std::lock_guard lock(read_mu_);
    std::set<std::string> queued;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (embeddings_.contains(keys[i]) || !queued.insert(keys[i]).second) continue;
      misses.push_back(texts[i]);
      miss_keys.push_back(keys[i]);
    }
  }
  if (!misses.empty()) {
    auto result = gateway.embed(misses, phase);
    std::size_t dim = manifest_.embedding_dim;
    for (const auto& v : result.vectors) {
      if (dim == 0) dim = v.size();
      if (v.size() != dim || v.empty()) {
        throw ContractError("embedding dimension " + std::to_string(v.size()) + " differs from store dimension " +
                            std::to_string(dim));
      }
    }
    if (mode_ == Mode::kReadWrite) {
      std::map<std::string, std::string> shards;
      for (std::size_t i = 0; i < misses.size(); ++i) {
        json j = {{"key", miss_keys[i]}, {"dim", dim}, {"vector", result.vectors[i]}};
        shards[shard_for(miss_keys[i])] += j.dump() + "\n";
      }
      std::vector<LogWrite> writes;
      for (auto& [file, data] : shards) writes.push_back({file, std::move(data)});
      auto saved_dim = manifest_.embedding_dim;
      auto saved_tag = manifest_.embedding_model_tag;
      manifest_.embedding_dim = dim;
      manifest_.embedding_model_tag = tag;
      try {
        commit(writes, manifest_.counts);
      } catch (...) {
        manifest_.embedding_dim = saved_dim;
        manifest_.embedding_model_tag = saved_tag;
        throw;
      }
    } else {
      manifest_.embedding_dim = dim;
    }
    std::lock_guard lock(read_mu_);
    for (std::size_t i = 0; i < misses.size(); ++i) embeddings_.insert_or_assign(miss_keys[i], result.vectors[i]);
  }
  auto out = collect();
  if (!out) throw StorageError("embedding cache lost entries during insertion");
  return *out;
}

void Store::compact() {
  std::lock_guard wlock(write_mu_);
  if (mode_ != Mode::kReadWrite) throw StorageError("store opened read-only");
  auto g = graph();
  std::map<std::string, std::string> files;
  auto& ents = files[kEntities];
  for (const auto& [_, e] : g->entities()) ents += json(e).dump() + "\n";
  auto& edges = files[kHyperedges];
  auto& inc = files[kIncidence];
  for (const auto& [id, h] : g->hyperedges()) {
    edges += hyperedge_record(h).dump() + "\n";
    for (std::size_t p = 0; p < h.members.size(); ++p) {
      inc += json{{"e", id}, {"v", h.members[p]}, {"pos", p}}.dump() + "\n";
    }
  }
  auto& ch = files[kChunks];
  for (const auto& [_, r] : chunks_) {
    json j = r.chunk;
    j["extracted"] = r.extracted;
    ch += j.dump() + "\n";
  }
  std::vector<std::pair<std::string, Vector>> sorted(embeddings_.begin(), embeddings_.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [key, vec] : sorted) {
    files[shard_for(key)] += json{{"key", key}, {"dim", vec.size()}, {"vector", vec}}.dump() + "\n";
  }
  StoreManifest next = manifest_;
  next.committed.clear();
  for (const auto& [file, data] : files) {
    write_file_atomic(dir_ / file, data);
    next.committed[file] = data.size();
  }
  next.updated = now_utc();
  write_manifest(next);
  manifest_ = std::move(next);
}

BipartiteGraph Store::snapshot_and_reload() {
  if (mode_ == Mode::kReadWrite) compact();
  Store reloaded(dir_, Mode::kReadOnly);
  auto fresh = reloaded.graph();
  if (!(*fresh == *graph())) throw IntegrityError("reloaded graph differs from the in-memory graph");
  auto m = reloaded.manifest();
  StoreCounts scanned{fresh->entity_count(), fresh->hyperedge_count(), fresh->incidence_count(),
                      reloaded.chunks().size()};
  if (!(m.counts == scanned)) throw IntegrityError("manifest counts differ from a live scan");
  return *fresh;
}

}  // namespace hgrag
