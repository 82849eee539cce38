#include <gtest/gtest.h>

#include <fstream>

#include "hgrag/errors.hpp"
#include "hgrag/eval.hpp"
#include "test_support.hpp"

using namespace hgrag;
using namespace hgrag::testing;

namespace {

JudgeScores uniform(double v) {
  JudgeScores s;
  s.scores.fill(v);
  return s;
}

std::string judge_json(const std::array<double, 7>& v) {
  nlohmann::json j;
  for (std::size_t i = 0; i < 7; ++i) j[kJudgeDimensions[i]] = v[i];
  return j.dump();
}

struct JudgeFixture {
  std::shared_ptr<MockProvider> mock = std::make_shared<MockProvider>(16);
  Gateway gateway;
  PromptTemplate tmpl = TemplateSet::builtin().get(TemplateKind::kJudge);
  JudgeFixture() : gateway(config(), mock, mock) {}
  static ProviderConfig config() {
    ProviderConfig c;
    c.backoff_initial_s = 0.0;
    return c;
  }
  Embedder embedder() {
    return [this](const std::vector<std::string>& ts) {
      std::vector<Vector> out;
      for (const auto& t : ts) out.push_back(mock->hash_vector(t));
      return out;
    };
  }
};

}  // namespace

TEST(F1, TokenRule) {
  EXPECT_EQ(answer_tokens("Mild, serum-creatinine   Elevation."),
            (std::vector<std::string>{"mild", "serumcreatinine", "elevation"}));
}

TEST(F1, WorkedCases) {
  // P = R = 2/3.
  EXPECT_NEAR(f1("the cat sat", "the cat ran"), 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(f1("Mild serum creatinine elevation.", "mild serum creatinine elevation"), 1.0);
  EXPECT_DOUBLE_EQ(f1("", "x"), 0.0);
  EXPECT_DOUBLE_EQ(f1("x", "..."), 0.0);
  EXPECT_DOUBLE_EQ(f1("a b", "c d"), 0.0);
  // P = 1, R = 1/4: 2 * 0.25 / 1.25.
  EXPECT_NEAR(f1("renal", "renal denervation lowers pressure"), 0.4, 1e-12);
}

TEST(F1, SetVersusMultiset) {
  EXPECT_DOUBLE_EQ(f1("a a b", "a b b", F1Mode::kSet), 1.0);
  // Overlap min(2,1) + min(1,2) = 2 over 3 tokens each side.
  EXPECT_NEAR(f1("a a b", "a b b", F1Mode::kMultiset), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(parse_f1_mode("multiset"), F1Mode::kMultiset);
  EXPECT_EQ(parse_f1_mode("set"), F1Mode::kSet);
  EXPECT_THROW(parse_f1_mode("bag"), ConfigError);
}

TEST(F1, SymmetricAndBounded) {
  std::mt19937_64 rng(37);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "E", "f,", "g."};
  for (int trial = 0; trial < 300; ++trial) {
    std::string p, g;
    for (std::size_t i = 0, n = rng() % 6; i < n; ++i) p += vocab[rng() % vocab.size()] + " ";
    for (std::size_t i = 0, n = rng() % 6; i < n; ++i) g += vocab[rng() % vocab.size()] + " ";
    for (auto mode : {F1Mode::kSet, F1Mode::kMultiset}) {
      double x = f1(p, g, mode);
      EXPECT_DOUBLE_EQ(x, f1(g, p, mode));
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
}

TEST(GE, WorkedValues) {
  EXPECT_DOUBLE_EQ(g_e_score(uniform(8), 0.5), 65.0);
  EXPECT_DOUBLE_EQ(g_e_score(uniform(10), 1.0), 100.0);
  EXPECT_DOUBLE_EQ(g_e_score(uniform(0), 0.0), 0.0);
  JudgeScores mixed;
  mixed.scores = {9, 9, 9, 8, 8, 9, 6};  // average 58/7
  EXPECT_NEAR(g_e_score(mixed, 1.0), (580.0 / 7.0 + 100.0) / 2.0, 1e-12);
}

TEST(Judge, ParsesScoresFromProse) {
  auto s = parse_judge_scores("Scores follow.\n```json\n" + judge_json({1, 2, 3, 4, 5, 6, 7}) + "\n```");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->scores, (std::array<double, 7>{1, 2, 3, 4, 5, 6, 7}));
  EXPECT_FALSE(parse_judge_scores(R"({"Correctness": 5})"));
  EXPECT_FALSE(parse_judge_scores(judge_json({11, 2, 3, 4, 5, 6, 7})));
  EXPECT_FALSE(parse_judge_scores("no scores"));
}

TEST(Judge, RetriesUnparsableReply) {
  JudgeFixture f;
  f.mock->script("judge", "q", {{200, "nope", {}, {}}, {200, judge_json({8, 8, 8, 8, 8, 8, 8}), {}, {}}});
  auto out = judge_answer("q", "ref", "ans", f.gateway, f.tmpl, 3);
  ASSERT_TRUE(out.scores);
  EXPECT_DOUBLE_EQ(out.scores->average(), 8.0);
  EXPECT_EQ(f.gateway.meter().snapshot()[0].phase, Phase::kEvaluation);
}

TEST(Judge, ProviderFailureBecomesDiagnostic) {
  JudgeFixture f;
  f.mock->script("judge", "q", {{400, "", {}, {}}});
  Diagnostics d;
  EXPECT_FALSE(g_e("q", "ref", "ans", 1.0, f.gateway, f.tmpl, &d));
  EXPECT_FALSE(d.empty());
}

TEST(RetrievalSimilarity, CosineOfJoinedTexts) {
  JudgeFixture f;
  auto embed = f.embedder();
  EXPECT_NEAR(retrieval_similarity({"a", "b"}, {"a", "b"}, embed), 1.0, 1e-12);
  auto want = cosine(f.mock->hash_vector("a\nb"), f.mock->hash_vector("c"));
  EXPECT_NEAR(retrieval_similarity({"a", "b"}, {"c"}, embed), want, 1e-12);
  EXPECT_DOUBLE_EQ(retrieval_similarity({}, {"c"}, embed), 0.0);
  EXPECT_DOUBLE_EQ(retrieval_similarity({"a"}, {}, embed), 0.0);
  Embedder broken = [](const std::vector<std::string>&) -> std::vector<Vector> { throw ProviderError("down", 503); };
  EXPECT_THROW(retrieval_similarity({"a"}, {"b"}, broken), EvalError);
}

TEST(Dataset, LoadsFixture) {
  auto items = load_dataset(fixture_path("dataset.jsonl"));
  ASSERT_EQ(items.size(), 4u);
  EXPECT_EQ(items[0].id, "b1");
  EXPECT_EQ(items[0].source_type, SourceType::kBinary);
  EXPECT_EQ(items[2].source_type, SourceType::kNary);
  EXPECT_EQ(items[3].hops, 2);
  EXPECT_EQ(items[2].gold_knowledge.size(), 1u);
}

TEST(Dataset, ErrorsNameTheLine) {
  TempDir dir;
  auto p = dir / "bad.jsonl";
  std::ofstream(p) << R"({"question": "q", "answer": "a"})" "\n\n" R"({"question": "q", "answer": "a", "hops": 4})" "\n";
  try {
    load_dataset(p);
    FAIL();
  } catch (const EvalError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  std::ofstream(p, std::ios::trunc) << "not json\n";
  EXPECT_THROW(load_dataset(p), EvalError);
  EXPECT_THROW(load_dataset(dir / "missing.jsonl"), EvalError);
}

TEST(RunEval, AggregatesMatchRecomputation) {
  JudgeFixture f;
  std::vector<EvalItem> data;
  const std::vector<std::array<double, 7>> judged = {
      {9, 9, 9, 8, 8, 9, 6}, {8, 8, 8, 8, 8, 8, 8}, {10, 10, 10, 9, 9, 10, 7}, {7, 8, 7, 6, 6, 7, 5}};
  const std::vector<std::string> answers = {"renal denervation", "every month", "mild elevation", "the zone"};
  for (int i = 0; i < 6; ++i) {
    EvalItem it;
    it.id = "i" + std::to_string(i);
    it.question = "question " + std::to_string(i);
    it.gold_answer = i < 4 ? std::vector<std::string>{"Renal denervation", "Every three months",
                                                      "Mild serum creatinine elevation", "The target zone"}[i]
                           : "gold";
    it.gold_knowledge = {"gold knowledge " + std::to_string(i)};
    it.source_type = i % 2 ? SourceType::kNary : SourceType::kBinary;
    data.push_back(it);
    if (i < 4) f.mock->script("judge", it.question, {{200, judge_json(judged[i]), {}, {}}});
  }
  f.mock->script("judge", "question 5", {{200, "unparsable", {}, {}}});
  Answerer answer = [&](const EvalItem& it, const std::string&) -> AnswerRecord {
    if (it.id == "i4") throw GenerationError("scripted failure");
    auto idx = std::stoi(it.id.substr(1));
    return {idx < 4 ? answers[idx] : "anything", {"retrieved " + it.id}};
  };
  EvalOptions opts;
  opts.workers = 3;
  auto report = run_eval(data, answer, f.embedder(), f.gateway, f.tmpl, opts);
  ASSERT_EQ(report.items.size(), 6u);
  EXPECT_EQ(report.failed, 1u);
  EXPECT_EQ(report.unevaluated, 1u);

  // Independent recomputation from the per-item definitions.
  std::map<std::string, std::array<double, 4>> sums;  // items, f1, rs, ge over judged
  std::map<std::string, std::size_t> judged_count;
  for (int i = 0; i < 6; ++i) {
    if (i == 4) continue;
    double item_f1 = f1(i < 4 ? answers[i] : "anything", data[i].gold_answer);
    double rs = cosine(f.mock->hash_vector("retrieved i" + std::to_string(i)),
                       f.mock->hash_vector(data[i].gold_knowledge[0]));
    for (const std::string label : {std::string(i % 2 ? "N-ary" : "Binary"), std::string("Overall")}) {
      auto& s = sums[label];
      s[0] += 1;
      s[1] += item_f1;
      s[2] += rs;
      if (i < 4) {
        JudgeScores js;
        js.scores = judged[i];
        s[3] += g_e_score(js, item_f1);
        ++judged_count[label];
      }
    }
  }
  ASSERT_EQ(report.aggregates.size(), 3u);
  for (const auto& row : report.aggregates) {
    const auto& s = sums.at(row.label);
    EXPECT_EQ(row.items, static_cast<std::size_t>(s[0])) << row.label;
    EXPECT_NEAR(row.f1, s[1] / s[0], 1e-12) << row.label;
    EXPECT_NEAR(row.rs, s[2] / s[0], 1e-12) << row.label;
    EXPECT_EQ(row.judged, judged_count[row.label]);
    EXPECT_NEAR(row.ge, s[3] / static_cast<double>(judged_count[row.label]), 1e-9) << row.label;
  }
  EXPECT_EQ(aggregate(report.items), report.aggregates);

  auto back = report_from_json(report_to_json(report));
  EXPECT_EQ(back.aggregates, report.aggregates);
  EXPECT_EQ(back.failed, 1u);
  EXPECT_EQ(back.items.size(), 6u);
  EXPECT_EQ(back.items[0].judge, report.items[0].judge);
  auto table = report_table(report);
  EXPECT_NE(table.find("Binary"), std::string::npos);
  EXPECT_NE(table.find("N-ary"), std::string::npos);
  EXPECT_NE(table.find("Overall"), std::string::npos);
}

TEST(RunEval, LimitAndEmptyDataset) {
  JudgeFixture f;
  Answerer answer = [](const EvalItem&, const std::string&) { return AnswerRecord{"x", {}}; };
  EXPECT_THROW(run_eval({}, answer, f.embedder(), f.gateway, f.tmpl), ReportError);
  std::vector<EvalItem> data(5, EvalItem{"", "q", "x", {}, SourceType::kBinary, 1});
  EvalOptions opts;
  opts.limit = 2;
  auto r = run_eval(data, answer, f.embedder(), f.gateway, f.tmpl, opts);
  EXPECT_EQ(r.items.size(), 2u);
  EXPECT_THROW(report_from_json("[]"), ReportError);
}
