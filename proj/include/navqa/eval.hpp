#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "navqa/embedding_store.hpp"
#include "navqa/qa_dataset.hpp"

namespace navqa {

class Gateway;

/// |gold ∩ retrieved[0:k]| / |gold| with gold treated as a set.
/// Throws EmptyGold, InvalidK (k = 0).
double recall_at_k(std::span<const ClipIndex> retrieved, std::span<const ClipIndex> gold,
                   std::size_t k);

enum class Metric { Comprehensiveness, Depth, Evidence, Reasoning };
inline constexpr std::array<Metric, 4> kMetrics = {Metric::Comprehensiveness, Metric::Depth,
                                                   Metric::Evidence, Metric::Reasoning};
std::string_view to_string(Metric metric);
std::string_view column_label(Metric metric);  // "Comp.", "Depth", "Evid.", "Reas."

inline constexpr int kMaxJudgeScore = 5;

struct JudgeScores {
  int comprehensiveness = 0;
  int depth = 0;
  int evidence = 0;
  int reasoning = 0;

  int get(Metric metric) const;
  friend bool operator==(const JudgeScores&, const JudgeScores&) = default;
};

/// Expects {"comprehensiveness":i, "depth":i, "evidence":i, "reasoning":i}
/// with integers in [0,5]. Throws MalformedResponse.
JudgeScores parse_judge_response(std::string_view raw_text);
nlohmann::ordered_json to_json(const JudgeScores& scores);

/// Throws InvalidRequest (empty strings), MalformedResponse, GatewayError, Timeout.
JudgeScores judge_answer(Gateway& gateway, std::string_view question, std::string_view gold_answer,
                         std::string_view predicted_answer);

/// Exact score/5*100 conversion.
inline double score_percent(double score) { return score / kMaxJudgeScore * 100.0; }

struct EvalItem {
  QAItem item;
  std::optional<JudgeScores> scores;
  std::optional<std::vector<ClipIndex>> retrieved;  // ranked clip indices
  std::vector<ClipIndex> gold_clips;                 // evidence mapped to clip space
};

struct AggregateOptions {
  // Use bucket_distance(evidence) instead of the stored label.
  bool recompute_distance = false;
  DistanceThresholds thresholds;
  std::size_t k = 20;
  std::string label = "run";
};

using MetricRow = std::array<double, 4>;

struct RecallCell {
  std::size_t count = 0;
  double mean = 0.0;
};

struct TypeSummary {
  std::size_t count = 0;
  MetricRow metrics{};
  double average = 0.0;
};

/// Judge cells are on a 0-100 scale. Buckets without scored items are absent.
struct EvalReport {
  std::string label;
  std::size_t k = 20;
  std::map<SceneDistance, MetricRow> cells;
  std::map<SceneDistance, std::size_t> scored_items;
  std::optional<double> overall;  // mean of the present bucket x metric cells
  std::map<ReasoningType, TypeSummary> by_type;
  std::map<SceneDistance, RecallCell> recall;
  std::optional<double> recall_overall;  // mean over items with retrieval
};

EvalReport aggregate_report(const std::vector<EvalItem>& items, const AggregateOptions& options = {});

nlohmann::ordered_json to_json(const EvalReport& report);
/// Reads back label, k, cells and overall from to_json output. Throws SchemaError.
EvalReport eval_report_from_json(const nlohmann::json& j);
/// Short/Medium/Far x Comp./Depth/Evid./Reas. plus Avg., two decimals.
std::string render_table(const EvalReport& report);

struct CellRef {
  SceneDistance bucket = SceneDistance::Short;
  Metric metric = Metric::Comprehensiveness;
  double delta = 0.0;
};

struct DeltaTable {
  std::string label_a;
  std::string label_b;
  std::map<SceneDistance, MetricRow> cells;  // a - b
  std::optional<double> overall;
  std::optional<CellRef> largest_drop;  // most negative cell, if any is negative
};

/// Cellwise a - b. Throws ShapeMismatch if the present buckets differ.
DeltaTable compare_runs(const EvalReport& a, const EvalReport& b);
nlohmann::ordered_json to_json(const DeltaTable& table);
std::string render_table(const DeltaTable& table);

}  // namespace navqa
