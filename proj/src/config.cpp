#include "hgrag/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hgrag/errors.hpp"
#include "hgrag/text.hpp"

namespace hgrag {
namespace {

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + " expects a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(n);
}

int to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  int n = 0;
  try {
    n = std::stoi(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + " expects an integer, got '" + v + "'");
  return n;
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || !std::isfinite(d)) {
    throw ConfigError(key + " expects a finite number, got '" + v + "'");
  }
  return d;
}

struct Field {
  std::function<void(EngineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const EngineConfig&)> get;
};

#define HGRAG_SIZE(path) \
  Field{[](EngineConfig& c, const std::string& k, const std::string& v) { c.path = to_size(k, v); }, \
        [](const EngineConfig& c) { return std::to_string(c.path); }}
#define HGRAG_INT(path) \
  Field{[](EngineConfig& c, const std::string& k, const std::string& v) { c.path = to_int(k, v); }, \
        [](const EngineConfig& c) { return std::to_string(c.path); }}
#define HGRAG_REAL(path) \
  Field{[](EngineConfig& c, const std::string& k, const std::string& v) { c.path = to_real(k, v); }, \
        [](const EngineConfig& c) { return text::format_number(c.path, 6); }}
#define HGRAG_TEXT(path) \
  Field{[](EngineConfig& c, const std::string&, const std::string& v) { c.path = v; }, \
        [](const EngineConfig& c) { return std::string(c.path); }}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"store", HGRAG_TEXT(store_dir)},
      {"provider",
       Field{[](EngineConfig& c, const std::string&, const std::string& v) {
               if (v != "openai" && v != "mock") throw ConfigError("provider must be 'openai' or 'mock'");
               c.provider = v;
             },
             [](const EngineConfig& c) { return c.provider; }}},
      {"mock_script", HGRAG_TEXT(mock_script)},
      {"mock_dim", HGRAG_SIZE(mock_dim)},
      {"templates_dir", HGRAG_TEXT(templates_dir)},
      {"base_url", HGRAG_TEXT(llm.base_url)},
      {"api_key", HGRAG_TEXT(llm.api_key)},
      {"chat_model", HGRAG_TEXT(llm.chat_model)},
      {"embed_model", HGRAG_TEXT(llm.embed_model)},
      {"max_retries", HGRAG_INT(llm.max_retries)},
      {"timeout_s", HGRAG_REAL(llm.timeout_s)},
      {"backoff_initial_s", HGRAG_REAL(llm.backoff_initial_s)},
      {"backoff_max_s", HGRAG_REAL(llm.backoff_max_s)},
      {"embed_batch_size", HGRAG_SIZE(llm.embed_batch_size)},
      {"concurrency", HGRAG_SIZE(llm.concurrency)},
      {"price_input_per_1k", HGRAG_REAL(llm.prices.input_per_1k)},
      {"price_output_per_1k", HGRAG_REAL(llm.prices.output_per_1k)},
      {"price_embed_per_1k", HGRAG_REAL(llm.prices.embed_per_1k)},
      {"k_v", HGRAG_SIZE(retrieval.k_v)},
      {"tau_v", HGRAG_REAL(retrieval.tau_v)},
      {"k_h", HGRAG_SIZE(retrieval.k_h)},
      {"tau_h", HGRAG_REAL(retrieval.tau_h)},
      {"k_c", HGRAG_SIZE(retrieval.k_c)},
      {"tau_c", HGRAG_REAL(retrieval.tau_c)},
      {"chunk_tokens", HGRAG_SIZE(extraction.chunk_tokens)},
      {"chunk_overlap", HGRAG_SIZE(extraction.chunk_overlap)},
      {"strictness",
       Field{[](EngineConfig& c, const std::string&, const std::string& v) {
               if (v == "lenient") c.extraction.strictness = Strictness::kLenient;
               else if (v == "strict") c.extraction.strictness = Strictness::kStrict;
               else throw ConfigError("strictness must be 'lenient' or 'strict'");
             },
             [](const EngineConfig& c) {
               return std::string(c.extraction.strictness == Strictness::kStrict ? "strict" : "lenient");
             }}},
      {"workers", HGRAG_SIZE(extraction.workers)},
      {"extraction_attempts", HGRAG_INT(extraction.attempts)},
      {"knowledge_budget", HGRAG_SIZE(generation.knowledge_budget)},
      {"max_output_tokens", HGRAG_INT(generation.max_output_tokens)},
      {"temperature", HGRAG_REAL(generation.temperature)},
      {"query_entity_attempts", HGRAG_INT(generation.query_entity_attempts)},
      {"f1_mode",
       Field{[](EngineConfig& c, const std::string&, const std::string& v) { c.f1_mode = parse_f1_mode(v); },
             [](const EngineConfig& c) { return std::string(c.f1_mode == F1Mode::kSet ? "set" : "multiset"); }}},
  };
  return table;
}

#undef HGRAG_SIZE
#undef HGRAG_INT
#undef HGRAG_REAL
#undef HGRAG_TEXT

}  // namespace

void EngineConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, text::trim(value));
}

std::string EngineConfig::get(const std::string& key) const {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.get(*this);
}

std::vector<std::string> EngineConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : fields()) out.push_back(k);
  return out;
}

void EngineConfig::check() const {
  retrieval.check();
  if (extraction.chunk_tokens <= extraction.chunk_overlap) {
    throw ConfigError("chunk_tokens must exceed chunk_overlap");
  }
  if (extraction.workers == 0 || llm.concurrency == 0) throw ConfigError("workers and concurrency must be positive");
  if (llm.embed_batch_size == 0) throw ConfigError("embed_batch_size must be positive");
  if (extraction.attempts < 1) throw ConfigError("extraction_attempts must be >= 1");
  if (generation.query_entity_attempts < 1) throw ConfigError("query_entity_attempts must be >= 1");
  if (provider == "mock" && mock_dim == 0) throw ConfigError("mock_dim must be positive");
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto t = text::trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    auto key = text::trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    out[key] = text::trim(t.substr(eq + 1));
  }
  return out;
}

EngineConfig load_config(const std::optional<std::filesystem::path>& file,
                         const std::map<std::string, std::string>& overrides, const EnvLookup& env) {
  EngineConfig cfg;
  auto apply = [&](const std::string& key, const std::string& value, const std::string& origin) {
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  };
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot read config file " + file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto& [k, v] : parse_config_text(buf.str(), file->string())) apply(k, v, file->string());
  }
  for (const auto& [alias, key] : std::vector<std::pair<std::string, std::string>>{
           {"OPENAI_API_KEY", "api_key"}, {"OPENAI_BASE_URL", "base_url"}}) {
    if (auto v = env(alias)) apply(key, *v, alias);
  }
  for (const auto& key : EngineConfig::keys()) {
    std::string name = "HGRAG_";
    for (char c : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (auto v = env(name)) apply(key, *v, name);
  }
  for (const auto& [k, v] : overrides) apply(k, v, "--" + k);
  cfg.check();
  return cfg;
}

}  // namespace hgrag
