#include "hgrag/eval.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hgrag/errors.hpp"
#include "hgrag/parallel.hpp"
#include "hgrag/serialize.hpp"
#include "hgrag/text.hpp"

namespace hgrag {

const char* to_string(SourceType t) { return t == SourceType::kBinary ? "binary" : "nary"; }

namespace {

SourceType parse_source_type(const std::string& s) {
  auto k = text::ascii_lower(text::trim(s));
  if (k == "binary") return SourceType::kBinary;
  if (k == "nary" || k == "n-ary") return SourceType::kNary;
  throw EvalError("unknown source_type '" + s + "'");
}

}  // namespace

std::vector<EvalItem> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw EvalError("cannot open dataset " + path.string());
  std::vector<EvalItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto where = path.string() + ":" + std::to_string(lineno);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw EvalError(where + ": not a JSON object");
    try {
      EvalItem item;
      item.id = j.value("id", "q" + std::to_string(items.size() + 1));
      item.question = j.at("question").get<std::string>();
      item.gold_answer = j.contains("answer") ? j["answer"].get<std::string>() : j.at("gold_answer").get<std::string>();
      if (j.contains("knowledge")) {
        item.gold_knowledge = j["knowledge"].get<std::vector<std::string>>();
      } else if (j.contains("gold_knowledge")) {
        item.gold_knowledge = j["gold_knowledge"].get<std::vector<std::string>>();
      }
      if (j.contains("source_type")) item.source_type = parse_source_type(j["source_type"].get<std::string>());
      item.hops = j.value("hops", 1);
      if (text::trim(item.question).empty() || text::trim(item.gold_answer).empty()) {
        throw EvalError("question and answer must be non-empty");
      }
      if (item.hops < 1 || item.hops > 3) throw EvalError("hops must be 1, 2 or 3");
      items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw EvalError(where + ": " + e.what());
    } catch (const EvalError& e) {
      throw EvalError(where + ": " + e.what());
    }
  }
  return items;
}

double JudgeScores::average() const {
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

std::vector<std::string> answer_tokens(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (unsigned char c : s) {
    if (c < 0x80 && std::ispunct(c)) continue;
    cleaned.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
  }
  std::vector<std::string> out;
  std::istringstream words(cleaned);
  for (std::string w; words >> w;) out.push_back(std::move(w));
  return out;
}

F1Mode parse_f1_mode(const std::string& s) {
  if (s == "set") return F1Mode::kSet;
  if (s == "multiset") return F1Mode::kMultiset;
  throw ConfigError("f1_mode must be 'set' or 'multiset', got '" + s + "'");
}

double f1(std::string_view pred, std::string_view gold, F1Mode mode) {
  auto p = answer_tokens(pred);
  auto g = answer_tokens(gold);
  double common = 0.0, np = 0.0, ng = 0.0;
  if (mode == F1Mode::kSet) {
    std::set<std::string> ps(p.begin(), p.end()), gs(g.begin(), g.end());
    for (const auto& w : ps) common += gs.count(w);
    np = static_cast<double>(ps.size());
    ng = static_cast<double>(gs.size());
  } else {
    std::map<std::string, int> counts;
    for (const auto& w : g) ++counts[w];
    for (const auto& w : p) {
      auto it = counts.find(w);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        common += 1.0;
      }
    }
    np = static_cast<double>(p.size());
    ng = static_cast<double>(g.size());
  }
  if (np == 0.0 || ng == 0.0 || common == 0.0) return 0.0;
  double precision = common / np;
  double recall = common / ng;
  return 2.0 * precision * recall / (precision + recall);
}

double retrieval_similarity(const std::vector<std::string>& retrieved, const std::vector<std::string>& gold,
                            const Embedder& embed) {
  auto r = text::join(retrieved, "\n");
  auto g = text::join(gold, "\n");
  if (text::trim(r).empty() || text::trim(g).empty()) return 0.0;
  std::vector<Vector> vecs;
  try {
    vecs = embed({r, g});
  } catch (const std::exception& e) {
    throw EvalError(std::string("retrieval similarity embedding failed: ") + e.what());
  }
  if (vecs.size() != 2) throw EvalError("retrieval similarity needs two embeddings");
  return cosine(vecs[0], vecs[1]);
}

double g_e_score(const JudgeScores& scores, double f1_value) {
  return (scores.average() * 10.0 + f1_value * 100.0) / 2.0;
}

std::optional<JudgeScores> parse_judge_scores(std::string_view raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{') continue;
    auto end = text::match_bracket(raw, i);
    if (end == std::string_view::npos) continue;
    json j = json::parse(raw.substr(i, end - i), nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    JudgeScores s;
    bool ok = true;
    for (std::size_t d = 0; d < kJudgeDimensions.size() && ok; ++d) {
      auto it = j.find(kJudgeDimensions[d]);
      if (it == j.end()) {
        ok = false;
      } else if (it->is_number()) {
        s.scores[d] = it->get<double>();
      } else if (it->is_string()) {
        char* e = nullptr;
        const auto& str = it->get_ref<const std::string&>();
        s.scores[d] = std::strtod(str.c_str(), &e);
        ok = e != str.c_str() && text::trim(e).empty();
      } else {
        ok = false;
      }
      if (ok) ok = std::isfinite(s.scores[d]) && s.scores[d] >= 0.0 && s.scores[d] <= 10.0;
    }
    if (ok) return s;
  }
  return std::nullopt;
}

JudgeOutcome judge_answer(const std::string& question, const std::string& reference, const std::string& answer,
                          Gateway& gateway, const PromptTemplate& tmpl, int attempts,
                          std::optional<std::string> query_id) {
  JudgeOutcome out;
  ChatRequest req;
  req.messages = {{"user", tmpl.render({{"question", question}, {"reference", reference}, {"answer", answer}})}};
  req.task = "judge";
  req.slot = question;
  for (int attempt = 1; attempt <= std::max(attempts, 1); ++attempt) {
    try {
      auto reply = gateway.chat(req, Phase::kEvaluation, query_id);
      if (auto s = parse_judge_scores(reply.text)) {
        out.scores = s;
        return out;
      }
      out.diagnostics.push_back({Severity::kWarning, "judge_unparsable",
                                 "attempt " + std::to_string(attempt) + " gave no usable scores", attempt - 1});
    } catch (const ProviderError& e) {
      out.diagnostics.push_back({Severity::kError, "judge_provider_error", e.what(), attempt - 1});
      return out;
    }
  }
  out.diagnostics.push_back({Severity::kWarning, "judge_unevaluated", "item excluded from G-E"});
  return out;
}

std::optional<double> g_e(const std::string& question, const std::string& reference, const std::string& answer,
                          double f1_value, Gateway& gateway, const PromptTemplate& tmpl, Diagnostics* diags) {
  auto outcome = judge_answer(question, reference, answer, gateway, tmpl);
  if (diags) diags->insert(diags->end(), outcome.diagnostics.begin(), outcome.diagnostics.end());
  if (!outcome.scores) return std::nullopt;
  return g_e_score(*outcome.scores, f1_value);
}

std::vector<AggregateRow> aggregate(const std::vector<ItemResult>& items) {
  std::vector<AggregateRow> rows = {{"Binary"}, {"N-ary"}, {"Overall"}};
  for (auto& row : rows) {
    double f1_sum = 0.0, rs_sum = 0.0, ge_sum = 0.0;
    for (const auto& it : items) {
      if (!it.ok) continue;
      if (row.label == "Binary" && it.source_type != SourceType::kBinary) continue;
      if (row.label == "N-ary" && it.source_type != SourceType::kNary) continue;
      ++row.items;
      f1_sum += it.f1;
      rs_sum += it.rs;
      if (it.ge) {
        ++row.judged;
        ge_sum += *it.ge;
      }
    }
    if (row.items) {
      row.f1 = f1_sum / static_cast<double>(row.items);
      row.rs = rs_sum / static_cast<double>(row.items);
    }
    if (row.judged) row.ge = ge_sum / static_cast<double>(row.judged);
  }
  return rows;
}

EvalReport run_eval(const std::vector<EvalItem>& dataset, const Answerer& answer, const Embedder& embed,
                    Gateway& judge_gateway, const PromptTemplate& judge_tmpl, const EvalOptions& options) {
  std::size_t n = options.limit ? std::min(options.limit, dataset.size()) : dataset.size();
  if (n == 0) throw ReportError("evaluation dataset is empty");
  EvalReport report;
  report.items.resize(n);
  parallel_for(n, options.workers, [&](std::size_t i) {
    const auto& item = dataset[i];
    auto& r = report.items[i];
    r.id = item.id;
    r.question = item.question;
    r.source_type = item.source_type;
    r.hops = item.hops;
    try {
      auto rec = answer(item, item.id);
      r.answer = rec.answer;
      r.f1 = f1(rec.answer, item.gold_answer, options.f1_mode);
      r.rs = retrieval_similarity(rec.retrieved_knowledge, item.gold_knowledge, embed);
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
      r.diagnostics.push_back({Severity::kError, "item_failed", e.what()});
      return;
    }
    auto outcome = judge_answer(item.question, item.gold_answer, r.answer, judge_gateway, judge_tmpl,
                                options.judge_attempts, item.id);
    r.diagnostics.insert(r.diagnostics.end(), outcome.diagnostics.begin(), outcome.diagnostics.end());
    if (outcome.scores) {
      r.judge = outcome.scores;
      r.ge = g_e_score(*outcome.scores, r.f1);
    }
  });
  for (const auto& r : report.items) {
    if (!r.ok) ++report.failed;
    else if (!r.ge) ++report.unevaluated;
  }
  report.aggregates = aggregate(report.items);
  return report;
}

namespace {

json judge_json(const JudgeScores& s) {
  json j = json::object();
  for (std::size_t d = 0; d < kJudgeDimensions.size(); ++d) j[kJudgeDimensions[d]] = s.scores[d];
  return j;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  json items = json::array();
  for (const auto& r : report.items) {
    json j = {{"id", r.id},       {"question", r.question}, {"source_type", to_string(r.source_type)},
              {"hops", r.hops},   {"answer", r.answer},     {"ok", r.ok},
              {"f1", r.f1},       {"rs", r.rs},             {"ge", r.ge ? json(*r.ge) : json(nullptr)},
              {"error", r.error}, {"diagnostics", diagnostics_json(r.diagnostics)}};
    j["judge"] = r.judge ? judge_json(*r.judge) : json(nullptr);
    items.push_back(std::move(j));
  }
  json aggs = json::array();
  for (const auto& a : report.aggregates) {
    aggs.push_back({{"label", a.label}, {"items", a.items}, {"f1", a.f1}, {"rs", a.rs}, {"judged", a.judged},
                    {"ge", a.ge}});
  }
  json doc = {{"items", items}, {"aggregates", aggs}, {"failed", report.failed},
              {"unevaluated", report.unevaluated}};
  return doc.dump(2);
}

EvalReport report_from_json(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ReportError("evaluation report is not a JSON object");
  EvalReport report;
  try {
    for (const auto& j : doc.at("items")) {
      ItemResult r;
      r.id = j.at("id").get<std::string>();
      r.question = j.at("question").get<std::string>();
      r.source_type = parse_source_type(j.at("source_type").get<std::string>());
      r.hops = j.at("hops").get<int>();
      r.answer = j.at("answer").get<std::string>();
      r.ok = j.at("ok").get<bool>();
      r.f1 = j.at("f1").get<double>();
      r.rs = j.at("rs").get<double>();
      if (!j.at("ge").is_null()) r.ge = j["ge"].get<double>();
      if (!j.at("judge").is_null()) {
        JudgeScores s;
        for (std::size_t d = 0; d < kJudgeDimensions.size(); ++d) s.scores[d] = j["judge"].at(kJudgeDimensions[d]);
        r.judge = s;
      }
      r.error = j.value("error", std::string{});
      r.diagnostics = j.value("diagnostics", Diagnostics{});
      report.items.push_back(std::move(r));
    }
    for (const auto& a : doc.at("aggregates")) {
      report.aggregates.push_back({a.at("label").get<std::string>(), a.at("items").get<std::size_t>(),
                                   a.at("f1").get<double>(), a.at("rs").get<double>(),
                                   a.at("judged").get<std::size_t>(), a.at("ge").get<double>()});
    }
    report.failed = doc.at("failed").get<std::size_t>();
    report.unevaluated = doc.at("unevaluated").get<std::size_t>();
  } catch (const std::exception& e) {
    throw ReportError(std::string("malformed evaluation report: ") + e.what());
  }
  return report;
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %6s %8s %8s %8s\n", "Source", "Items", "F1", "R-S", "G-E");
  out << line;
  for (const auto& a : report.aggregates) {
    std::snprintf(line, sizeof line, "%-8s %6zu %8.2f %8.2f %8.2f\n", a.label.c_str(), a.items, a.f1 * 100.0,
                  a.rs * 100.0, a.ge);
    out << line;
  }
  if (report.failed || report.unevaluated) {
    out << "failed items: " << report.failed << ", unjudged items: " << report.unevaluated << "\n";
  }
  return out.str();
}

}  // namespace hgrag
