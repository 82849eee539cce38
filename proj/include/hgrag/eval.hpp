#pragma once

// Answer-quality metrics (word F1, retrieval similarity, judged generation
// quality) and the dataset-level evaluation report.

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hgrag/diagnostics.hpp"
#include "hgrag/llm.hpp"
#include "hgrag/retrieval.hpp"
#include "hgrag/templates.hpp"

namespace hgrag {

enum class SourceType { kBinary, kNary };
const char* to_string(SourceType t);

struct EvalItem {
  std::string id;
  std::string question;
  std::string gold_answer;
  std::vector<std::string> gold_knowledge;
  SourceType source_type = SourceType::kNary;
  int hops = 1;
};

/// One item per non-blank line: {"id"?, "question", "answer", "knowledge"?,
/// "source_type"? ("binary" | "nary"), "hops"?}. Throws EvalError naming the
/// offending line.
std::vector<EvalItem> load_dataset(const std::filesystem::path& path);

inline constexpr std::array<const char*, 7> kJudgeDimensions = {
    "Correctness",      "Relevance",         "Factuality", "Comprehensiveness",
    "Knowledgeability", "Logical Coherence", "Diversity"};

struct JudgeScores {
  std::array<double, 7> scores{};  // kJudgeDimensions order, each in [0, 10]

  double average() const;
  bool operator==(const JudgeScores&) const = default;
};

/// Lowercase, delete ASCII punctuation, split on whitespace.
std::vector<std::string> answer_tokens(std::string_view s);

enum class F1Mode { kSet, kMultiset };
F1Mode parse_f1_mode(const std::string& s);

/// Word-level F1; 0 when either side has no tokens.
double f1(std::string_view pred, std::string_view gold, F1Mode mode = F1Mode::kSet);

/// Cosine between the embeddings of the newline-joined texts; 0 when
/// either list is empty. Throws EvalError when embedding fails.
double retrieval_similarity(const std::vector<std::string>& retrieved,
                            const std::vector<std::string>& gold, const Embedder& embed);

/// mean(10 * dimension average, 100 * f1), in [0, 100].
double g_e_score(const JudgeScores& scores, double f1_value);

/// First JSON object carrying all seven dimensions as numbers in [0, 10].
std::optional<JudgeScores> parse_judge_scores(std::string_view raw);

struct JudgeOutcome {
  std::optional<JudgeScores> scores;
  Diagnostics diagnostics;
};

/// One judge call per attempt until a reply parses. Provider failures are
/// reported as diagnostics, not thrown.
JudgeOutcome judge_answer(const std::string& question, const std::string& reference,
                          const std::string& answer, Gateway& gateway, const PromptTemplate& tmpl,
                          int attempts = 3, std::optional<std::string> query_id = std::nullopt);

/// G-E for one item; nullopt when the judge gave no usable scores.
std::optional<double> g_e(const std::string& question, const std::string& reference,
                          const std::string& answer, double f1_value, Gateway& gateway,
                          const PromptTemplate& tmpl, Diagnostics* diags = nullptr);

struct ItemResult {
  std::string id;
  std::string question;
  SourceType source_type = SourceType::kNary;
  int hops = 1;
  std::string answer;
  bool ok = false;  // generation succeeded; f1 and rs are meaningful
  double f1 = 0.0;  // [0, 1]
  double rs = 0.0;  // [-1, 1]
  std::optional<JudgeScores> judge;
  std::optional<double> ge;  // [0, 100]
  std::string error;
  Diagnostics diagnostics;
};

struct AggregateRow {
  std::string label;  // Binary, N-ary, Overall
  std::size_t items = 0;
  double f1 = 0.0;
  double rs = 0.0;
  std::size_t judged = 0;
  double ge = 0.0;

  bool operator==(const AggregateRow&) const = default;
};

struct EvalReport {
  std::vector<ItemResult> items;
  std::vector<AggregateRow> aggregates;
  std::size_t failed = 0;
  std::size_t unevaluated = 0;
};

/// Recompute the Binary, N-ary and Overall rows from item records.
std::vector<AggregateRow> aggregate(const std::vector<ItemResult>& items);

struct AnswerRecord {
  std::string answer;
  std::vector<std::string> retrieved_knowledge;
};
using Answerer = std::function<AnswerRecord(const EvalItem&, const std::string& query_id)>;

struct EvalOptions {
  F1Mode f1_mode = F1Mode::kSet;
  std::size_t workers = 16;
  std::size_t limit = 0;  // 0 evaluates everything
  int judge_attempts = 3;
};

/// Throws ReportError on an empty dataset. Item failures are recorded and
/// excluded from the aggregates.
EvalReport run_eval(const std::vector<EvalItem>& dataset, const Answerer& answer,
                    const Embedder& embed, Gateway& judge_gateway, const PromptTemplate& judge_tmpl,
                    const EvalOptions& options = {});

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(std::string_view text);
/// Aligned table of the aggregate rows; F1 and R-S shown as percentages.
std::string report_table(const EvalReport& report);

}  // namespace hgrag
