// hgrag: build, query, evaluate and serve a hypergraph knowledge store.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hgrag/config.hpp"
#include "hgrag/engine.hpp"
#include "hgrag/errors.hpp"
#include "hgrag/eval.hpp"
#include "hgrag/server.hpp"

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

hgrag::Server* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

struct Globals {
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
};

hgrag::EngineConfig resolve(const Globals& g) {
  std::map<std::string, std::string> overrides;
  for (const auto& kv : g.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw hgrag::ConfigError("--set expects key=value, got '" + kv + "'");
    overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : g.flags) overrides[k] = v;
  std::optional<std::filesystem::path> file;
  if (!g.config_file.empty()) file = g.config_file;
  return hgrag::load_config(file, overrides);
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  out << data;
  if (!out) throw hgrag::StorageError("cannot write " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypergraph retrieval-augmented generation"};
  app.require_subcommand(1);
  Globals g;
  std::string store, provider, mock_script;
  app.add_option("-c,--config", g.config_file, "Config file of key = value lines")->check(CLI::ExistingFile);
  app.add_option("--set", g.sets, "Override one config key (key=value), repeatable");
  app.add_option("-s,--store", store, "Store directory");
  app.add_option("--provider", provider, "openai or mock");
  app.add_option("--mock-script", mock_script, "Mock provider script (JSON)");
  bool as_json = false;
  app.add_flag("--json", as_json, "Machine-readable output");

  auto* build = app.add_subcommand("build", "Extract a corpus into the store");
  std::string corpus;
  build->add_option("corpus", corpus, "Corpus file or directory")->required();

  auto* query = app.add_subcommand("query", "Answer a question from the store");
  std::string question;
  bool trace = false;
  std::optional<std::size_t> k_v, k_h, k_c;
  query->add_option("question", question, "Question text")->required();
  query->add_flag("--trace", trace, "Print retrieval hits, fused knowledge, prompt and usage");
  query->add_option("--k-v", k_v, "Entities to retrieve");
  query->add_option("--k-h", k_h, "Hyperedges to retrieve");
  query->add_option("--k-c", k_c, "Chunks to retrieve");

  auto* eval = app.add_subcommand("eval", "Evaluate answers on a JSON-lines dataset");
  std::string dataset, report_path = "eval_report.json", f1_mode;
  std::size_t limit = 0;
  eval->add_option("dataset", dataset, "Dataset file")->required();
  eval->add_option("--limit", limit, "Evaluate only the first N items");
  eval->add_option("--report", report_path, "Where to write the JSON report");
  eval->add_option("--f1-mode", f1_mode, "set or multiset")->check(CLI::IsMember({"set", "multiset"}));

  auto* stats = app.add_subcommand("stats", "Print store statistics");
  std::string dot_path;
  stats->add_option("--dot", dot_path, "Also write a Graphviz file");

  auto* serve = app.add_subcommand("serve", "Serve queries over HTTP");
  int port = 8080;
  std::string host = "127.0.0.1";
  serve->add_option("--port", port, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  if (!store.empty()) g.flags["store"] = store;
  if (!provider.empty()) g.flags["provider"] = provider;
  if (!mock_script.empty()) g.flags["mock_script"] = mock_script;
  if (k_v) g.flags["k_v"] = std::to_string(*k_v);
  if (k_h) g.flags["k_h"] = std::to_string(*k_h);
  if (k_c) g.flags["k_c"] = std::to_string(*k_c);
  if (!f1_mode.empty()) g.flags["f1_mode"] = f1_mode;

  hgrag::EngineConfig cfg;
  try {
    cfg = resolve(g);
  } catch (const hgrag::ConfigError& e) {
    std::cerr << "hgrag: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (*build) {
      hgrag::Engine engine(cfg, hgrag::Store::Mode::kReadWrite);
      auto report = engine.build(corpus);
      if (as_json) {
        std::cout << hgrag::build_report_json(report).dump(2) << "\n";
      } else {
        std::cout << hgrag::build_report_text(report);
      }
      return 0;
    }
    if (*query) {
      hgrag::Engine engine(cfg, hgrag::Store::Mode::kReadOnly);
      auto t = engine.query(question);
      if (as_json) {
        std::cout << hgrag::query_envelope(t, trace).dump(2) << "\n";
      } else {
        if (trace) std::cout << hgrag::trace_text(t) << "== answer\n";
        std::cout << t.generation.answer << "\n";
      }
      return 0;
    }
    if (*eval) {
      auto items = hgrag::load_dataset(dataset);
      hgrag::Engine engine(cfg, hgrag::Store::Mode::kReadOnly);
      hgrag::EvalOptions opts;
      opts.f1_mode = cfg.f1_mode;
      opts.workers = cfg.llm.concurrency;
      opts.limit = limit;
      auto report = engine.evaluate(items, opts);
      write_file(report_path, hgrag::report_to_json(report) + "\n");
      if (as_json) {
        std::cout << hgrag::report_to_json(report) << "\n";
      } else {
        std::cout << hgrag::report_table(report);
      }
      return 0;
    }
    if (*stats) {
      hgrag::Engine engine(cfg, hgrag::Store::Mode::kReadOnly);
      auto s = engine.stats();
      if (!dot_path.empty()) write_file(dot_path, engine.to_dot());
      if (as_json) {
        std::cout << hgrag::stats_json(s).dump(2) << "\n";
      } else {
        std::cout << hgrag::stats_table(s);
      }
      return 0;
    }
    if (*serve) {
      hgrag::Engine engine(cfg, hgrag::Store::Mode::kReadOnly);
      hgrag::Server server(engine);
      int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cerr << "hgrag: serving on http://" << host << ":" << bound << "\n";
      server.run();
      g_server = nullptr;
      return 0;
    }
  } catch (const hgrag::Error& e) {
    std::cerr << "hgrag: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "hgrag: unexpected error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
