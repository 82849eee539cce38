#pragma once

// Engine configuration. One `key = value` per line in the config file,
// `#` starts a comment. Precedence: explicit overrides (command-line flags)
// over environment (HGRAG_<KEY>, plus OPENAI_API_KEY / OPENAI_BASE_URL) over
// the file over built-in defaults.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hgrag/extraction.hpp"
#include "hgrag/eval.hpp"
#include "hgrag/fusion.hpp"
#include "hgrag/llm.hpp"
#include "hgrag/retrieval.hpp"

namespace hgrag {

struct ExtractionConfig {
  std::size_t chunk_tokens = 1200;
  std::size_t chunk_overlap = 100;
  Strictness strictness = Strictness::kLenient;
  std::size_t workers = 16;
  int attempts = 3;  // extraction calls per chunk before it counts as failed
};

struct GenerationConfig {
  std::size_t knowledge_budget = kDefaultKnowledgeBudget;
  int max_output_tokens = 0;
  double temperature = 1.0;
  int query_entity_attempts = 3;
};

struct EngineConfig {
  std::filesystem::path store_dir = "hgrag-store";
  std::string provider = "openai";  // openai | mock
  std::filesystem::path mock_script;
  std::size_t mock_dim = 64;
  std::filesystem::path templates_dir;  // empty uses the built-in prompts
  ProviderConfig llm;
  RetrievalConfig retrieval;
  ExtractionConfig extraction;
  GenerationConfig generation;
  F1Mode f1_mode = F1Mode::kSet;

  /// Assign one key from its text form. Throws ConfigError on an unknown
  /// key or a malformed value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();
  /// Throws ConfigError when fields are inconsistent.
  void check() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

/// Parse `key = value` lines. Throws ConfigError naming the line.
std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin);

EngineConfig load_config(const std::optional<std::filesystem::path>& file,
                         const std::map<std::string, std::string>& overrides,
                         const EnvLookup& env = process_env);

}  // namespace hgrag
