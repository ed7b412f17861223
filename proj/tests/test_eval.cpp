#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "navqa/error.hpp"
#include "navqa/eval.hpp"
#include "navqa/gateway.hpp"
#include "navqa/prompts.hpp"
#include "navqa/retrieval.hpp"
#include "support/corpus.hpp"

using namespace navqa;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected navqa::Error");
  return ErrorCode::IoError;
}

EvalItem scored(SceneDistance d, JudgeScores s, ReasoningType t = ReasoningType::Causal) {
  EvalItem e;
  e.item.question = "q";
  e.item.answer = "a";
  e.item.evidence_events = {1, 2};
  e.item.scene_distance = d;
  e.item.reasoning_type = t;
  e.scores = s;
  return e;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("recall at k") {
  const std::vector<ClipIndex> retrieved{1, 2, 3};
  CHECK(recall_at_k(retrieved, std::vector<ClipIndex>{2, 9}, 3) == 0.5);
  CHECK(recall_at_k(retrieved, std::vector<ClipIndex>{1, 3}, 3) == 1.0);
  CHECK(recall_at_k(retrieved, std::vector<ClipIndex>{7, 8}, 3) == 0.0);
  CHECK(recall_at_k(retrieved, std::vector<ClipIndex>{3}, 2) == 0.0);
  CHECK(recall_at_k(retrieved, std::vector<ClipIndex>{2, 2, 9}, 3) == 0.5);
  CHECK(recall_at_k({}, std::vector<ClipIndex>{2}, 3) == 0.0);
  CHECK(code_of([&] { recall_at_k(retrieved, {}, 3); }) == ErrorCode::EmptyGold);
  CHECK(code_of([&] { recall_at_k(retrieved, std::vector<ClipIndex>{1}, 0); }) == ErrorCode::InvalidK);
}

TEST_CASE("judge parsing") {
  const auto s = parse_judge_response(R"({"comprehensiveness": 3, "depth": 4, "evidence": 3, "reasoning": 2})");
  CHECK(s == JudgeScores{3, 4, 3, 2});
  CHECK(code_of([] { parse_judge_response(R"({"comprehensiveness": 3, "depth": 6, "evidence": 3, "reasoning": 2})"); }) ==
        ErrorCode::MalformedResponse);
  CHECK(code_of([] { parse_judge_response(R"({"comprehensiveness": 3, "depth": 4, "evidence": 3})"); }) ==
        ErrorCode::MalformedResponse);
  CHECK(code_of([] { parse_judge_response(R"({"comprehensiveness": 3.5, "depth": 4, "evidence": 3, "reasoning": 2})"); }) ==
        ErrorCode::MalformedResponse);
}

TEST_CASE("judging through the mock") {
  MockGateway mock(5);
  CHECK(judge_answer(mock, "Why?", "Because the dog ran away.", "because the dog ran away") ==
        JudgeScores{5, 5, 5, 5});
  const auto a = judge_answer(mock, "Why?", "Because the dog ran away.", "The cat was hungry.");
  const auto b = judge_answer(mock, "Why?", "Because the dog ran away.", "The cat was hungry.");
  CHECK(a == b);
  for (auto m : kMetrics) CHECK(a.get(m) <= 2);
  CHECK(code_of([&] { judge_answer(mock, "Why?", "gold", ""); }) == ErrorCode::InvalidRequest);

  CallbackGateway six([](const GatewayRequest&) {
    return std::string(R"({"comprehensiveness": 1, "depth": 6, "evidence": 1, "reasoning": 1})");
  });
  CHECK(code_of([&] { judge_answer(six, "q", "g", "p"); }) == ErrorCode::MalformedResponse);
}

TEST_CASE("aggregation arithmetic") {
  const auto one = aggregate_report({scored(SceneDistance::Short, {3, 4, 3, 2})});
  const auto& row = one.cells.at(SceneDistance::Short);
  CHECK(row == MetricRow{60.0, 80.0, 60.0, 40.0});
  REQUIRE(one.overall.has_value());
  CHECK(*one.overall == 60.0);
  CHECK_FALSE(one.cells.contains(SceneDistance::Far));

  const auto two = aggregate_report(
      {scored(SceneDistance::Far, {0, 0, 5, 0}), scored(SceneDistance::Far, {0, 0, 0, 0})});
  CHECK(two.cells.at(SceneDistance::Far)[2] == 50.0);

  const auto none = aggregate_report({});
  CHECK(none.cells.empty());
  CHECK_FALSE(none.overall.has_value());
}

TEST_CASE("cells stay in [0, 100] and ignore item order") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> score(0, 5);
  std::uniform_int_distribution<int> bucket(0, 2);
  std::vector<EvalItem> items;
  for (int i = 0; i < 300; ++i) {
    items.push_back(scored(kSceneDistances[bucket(rng)], {score(rng), score(rng), score(rng), score(rng)},
                           kReasoningTypes[i % 7]));
    items.back().retrieved = std::vector<ClipIndex>{1, 2, 3, 4};
    items.back().gold_clips = {static_cast<ClipIndex>(i % 6), 2};
  }
  const auto base = aggregate_report(items);
  for (int round = 0; round < 10; ++round) {
    std::shuffle(items.begin(), items.end(), rng);
    const auto shuffled = aggregate_report(items);
    CHECK(shuffled.cells == base.cells);
    CHECK(shuffled.overall == base.overall);
    for (const auto& [d, cell] : base.recall) CHECK(shuffled.recall.at(d).mean == cell.mean);
    CHECK(shuffled.recall_overall == base.recall_overall);
  }
  for (const auto& [d, row] : base.cells) {
    for (double v : row) CHECK((v >= 0.0 && v <= 100.0));
  }
}

TEST_CASE("recomputed distance buckets") {
  auto e = scored(SceneDistance::Short, {5, 5, 5, 5});
  e.item.evidence_events = {2, 32};
  AggregateOptions options;
  options.recompute_distance = true;
  const auto report = aggregate_report({e}, options);
  CHECK(report.cells.contains(SceneDistance::Far));
  CHECK_FALSE(report.cells.contains(SceneDistance::Short));
}

TEST_CASE("rendered table matches the golden file") {
  auto a = scored(SceneDistance::Short, {3, 4, 3, 2}, ReasoningType::Causal);
  auto b = scored(SceneDistance::Far, {5, 5, 5, 5}, ReasoningType::Narrative);
  auto c = scored(SceneDistance::Far, {0, 1, 2, 3}, ReasoningType::Narrative);
  a.retrieved = std::vector<ClipIndex>{1, 2, 3};
  a.gold_clips = {2, 9};
  AggregateOptions options;
  options.label = "full";
  options.k = 3;
  const auto report = aggregate_report({a, b, c}, options);
  CHECK(*report.overall == 62.5);
  CHECK(render_table(report) == read_file(NAVQA_FIXTURE_DIR "/golden_table.txt"));
}

TEST_CASE("report json round trip keeps the cells") {
  const auto report = aggregate_report(
      {scored(SceneDistance::Short, {3, 4, 3, 2}), scored(SceneDistance::Medium, {1, 1, 1, 1})});
  const auto back = eval_report_from_json(nlohmann::json::parse(to_json(report).dump()));
  CHECK(back.cells == report.cells);
  CHECK(back.overall == report.overall);
  CHECK(code_of([] { eval_report_from_json(nlohmann::json::object()); }) == ErrorCode::SchemaError);
}

TEST_CASE("compare runs") {
  const auto a = aggregate_report({scored(SceneDistance::Far, {3, 4, 3, 2})});
  const auto same = compare_runs(a, a);
  for (double v : same.cells.at(SceneDistance::Far)) CHECK(v == 0.0);
  CHECK_FALSE(same.largest_drop.has_value());

  const auto b = aggregate_report({scored(SceneDistance::Far, {3, 5, 4, 2})});
  const auto delta = compare_runs(a, b);
  REQUIRE(delta.largest_drop.has_value());
  CHECK(delta.largest_drop->metric == Metric::Depth);
  CHECK(delta.largest_drop->delta == -20.0);

  const auto other = aggregate_report({scored(SceneDistance::Short, {3, 4, 3, 2})});
  CHECK(code_of([&] { compare_runs(a, other); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("removing the narrative boost lowers far-range evidence scores") {
  std::vector<EvalItem> full_items, ablated_items;
  for (std::uint64_t seed = 500; seed < 530; ++seed) {
    const auto corpus = navqa::testing::planted_narrative_corpus(seed);
    for (double lambda : {0.3, 0.0}) {
      const auto ranked = retrieve(corpus.bank, corpus.store, corpus.query, {0.5, lambda, 20});
      const double recall = recall_at_k(ranked.clip_sequence(), corpus.gold, 20);
      const int s = static_cast<int>(std::lround(5.0 * recall));
      auto e = scored(SceneDistance::Far, {s, s, s, s});
      e.retrieved = ranked.clip_sequence();
      e.gold_clips = corpus.gold;
      (lambda > 0.0 ? full_items : ablated_items).push_back(e);
    }
  }
  AggregateOptions options;
  options.label = "full";
  const auto full = aggregate_report(full_items, options);
  options.label = "w/o narrative";
  const auto ablated = aggregate_report(ablated_items, options);
  const auto delta = compare_runs(ablated, full);
  CHECK(delta.cells.at(SceneDistance::Far)[2] < 0.0);
  CHECK(*ablated.recall_overall < *full.recall_overall);
}
