// Python bindings. Structured results cross the boundary as JSON text and
// are decoded by the package wrapper.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hgrag/config.hpp"
#include "hgrag/engine.hpp"
#include "hgrag/errors.hpp"
#include "hgrag/eval.hpp"
#include "hgrag/extraction.hpp"
#include "hgrag/hypergraph.hpp"
#include "hgrag/serialize.hpp"
#include "hgrag/text.hpp"
#include "hgrag/vindex.hpp"

namespace py = pybind11;
using namespace hgrag;

namespace {

std::string facts_round_trip(const std::string& facts_json) {
  auto facts = nlohmann::json::parse(facts_json).get<std::vector<NaryFact>>();
  for (const auto& f : facts) check_invariants(f);
  return nlohmann::json(from_bipartite(to_bipartite(facts))).dump();
}

std::string parse_extraction_json(const std::string& raw, const std::string& strictness) {
  auto parsed = parse_extraction_output(raw);
  Chunk c{chunk_id_for(raw), "python", raw, text::count_tokens(raw), 0, raw.size()};
  auto v = validate_extraction(parsed, c, strictness == "strict" ? Strictness::kStrict : Strictness::kLenient);
  v.diagnostics.insert(v.diagnostics.begin(), parsed.diagnostics.begin(), parsed.diagnostics.end());
  return nlohmann::json{{"facts", v.facts}, {"diagnostics", diagnostics_json(v.diagnostics)}}.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hypergraph retrieval-augmented generation engine";

  auto base = py::register_exception<Error>(m, "HgragError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NotFoundError>(m, "NotFoundError", base.ptr());
  py::register_exception<StorageError>(m, "StorageError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<ProviderError>(m, "ProviderError", base.ptr());
  py::register_exception<GenerationError>(m, "GenerationError", base.ptr());
  py::register_exception<ReportError>(m, "ReportError", base.ptr());
  py::register_exception<EvalError>(m, "EvalError", base.ptr());

  py::class_<EngineConfig>(m, "Config")
      .def(py::init<>())
      .def("set", &EngineConfig::set, py::arg("key"), py::arg("value"))
      .def("get", &EngineConfig::get, py::arg("key"))
      .def_static("keys", &EngineConfig::keys)
      .def("check", &EngineConfig::check);

  m.def(
      "load_config",
      [](std::optional<std::filesystem::path> file, const std::map<std::string, std::string>& overrides) {
        return load_config(file, overrides);
      },
      py::arg("file") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{});

  py::class_<Engine>(m, "Engine")
      .def(py::init([](const EngineConfig& cfg, bool read_only) {
             return std::make_unique<Engine>(cfg, read_only ? Store::Mode::kReadOnly : Store::Mode::kReadWrite);
           }),
           py::arg("config"), py::arg("read_only") = false)
      .def(
          "build",
          [](Engine& e, const std::filesystem::path& corpus) {
            BuildReport r;
            {
              py::gil_scoped_release release;
              r = e.build(corpus);
            }
            return build_report_json(r).dump();
          },
          py::arg("corpus"))
      .def(
          "query",
          [](Engine& e, const std::string& question, bool include_prompt) {
            QueryTrace t;
            {
              py::gil_scoped_release release;
              t = e.query(question);
            }
            return query_envelope(t, include_prompt).dump();
          },
          py::arg("question"), py::arg("include_prompt") = false)
      .def(
          "evaluate",
          [](Engine& e, const std::filesystem::path& dataset, std::size_t limit) {
            EvalOptions opts;
            opts.f1_mode = e.config().f1_mode;
            opts.workers = e.config().extraction.workers;
            opts.limit = limit;
            auto items = load_dataset(dataset);
            EvalReport r;
            {
              py::gil_scoped_release release;
              r = e.evaluate(items, opts);
            }
            return report_to_json(r);
          },
          py::arg("dataset"), py::arg("limit") = 0)
      .def("stats", [](const Engine& e) { return stats_json(e.stats()).dump(); })
      .def("to_dot", &Engine::to_dot);

  m.def(
      "f1",
      [](const std::string& pred, const std::string& gold, const std::string& mode) {
        return f1(pred, gold, parse_f1_mode(mode));
      },
      py::arg("pred"), py::arg("gold"), py::arg("mode") = "set");
  m.def(
      "g_e_score",
      [](const std::array<double, 7>& scores, double f1_value) {
        JudgeScores s;
        s.scores = scores;
        return g_e_score(s, f1_value);
      },
      py::arg("scores"), py::arg("f1"));
  m.def("cosine", [](const Vector& u, const Vector& v) { return cosine(u, v); });
  m.def("count_tokens", [](const std::string& s) { return text::count_tokens(s); });
  m.def("entity_id", [](const std::string& name) { return entity_id_for(name).str(); });
  m.def("hyperedge_id", [](const std::string& d) { return hyperedge_id_for(d).str(); });
  m.def("facts_round_trip", &facts_round_trip, py::arg("facts_json"));
  m.def("parse_extraction", &parse_extraction_json, py::arg("raw"), py::arg("strictness") = "lenient");
}
