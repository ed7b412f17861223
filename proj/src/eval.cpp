#include "navqa/eval.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "navqa/error.hpp"
#include "navqa/gateway.hpp"
#include "navqa/prompts.hpp"
#include "strict_json.hpp"

namespace navqa {

double recall_at_k(std::span<const ClipIndex> retrieved, std::span<const ClipIndex> gold,
                   std::size_t k) {
  if (gold.empty()) throw Error(ErrorCode::EmptyGold, "gold evidence set is empty");
  if (k == 0) throw Error(ErrorCode::InvalidK, "k must be >= 1");
  const std::set<ClipIndex> gold_set(gold.begin(), gold.end());
  const auto prefix = retrieved.first(std::min(k, retrieved.size()));
  const std::set<ClipIndex> top(prefix.begin(), prefix.end());
  std::size_t hits = 0;
  for (ClipIndex g : gold_set) hits += top.contains(g) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold_set.size());
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Comprehensiveness: return "comprehensiveness";
    case Metric::Depth: return "depth";
    case Metric::Evidence: return "evidence";
    case Metric::Reasoning: return "reasoning";
  }
  return "unknown";
}

std::string_view column_label(Metric metric) {
  switch (metric) {
    case Metric::Comprehensiveness: return "Comp.";
    case Metric::Depth: return "Depth";
    case Metric::Evidence: return "Evid.";
    case Metric::Reasoning: return "Reas.";
  }
  return "?";
}

namespace {

std::string_view bucket_label(SceneDistance d) {
  switch (d) {
    case SceneDistance::Short: return "Short";
    case SceneDistance::Medium: return "Medium";
    case SceneDistance::Far: return "Far";
  }
  return "?";
}

std::size_t index_of(Metric m) { return static_cast<std::size_t>(m); }

double mean_of(const MetricRow& row) { return (row[0] + row[1] + row[2] + row[3]) / 4.0; }

std::optional<double> mean_of_cells(const std::map<SceneDistance, MetricRow>& cells) {
  if (cells.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [bucket, row] : cells) {
    for (double v : row) sum += v;
  }
  return sum / static_cast<double>(4 * cells.size());
}

std::string format_cell(std::optional<double> v) {
  return v ? fmt::format("{:6.2f}", *v) : fmt::format("{:>6}", "-");
}

}  // namespace

int JudgeScores::get(Metric metric) const {
  switch (metric) {
    case Metric::Comprehensiveness: return comprehensiveness;
    case Metric::Depth: return depth;
    case Metric::Evidence: return evidence;
    case Metric::Reasoning: return reasoning;
  }
  return 0;
}

JudgeScores parse_judge_response(std::string_view raw_text) {
  const auto j = detail::parse_strict_object(raw_text);
  if (!j) throw Error(ErrorCode::MalformedResponse, "judge reply is not a bare JSON object");
  std::array<int, 4> values{};
  for (auto metric : kMetrics) {
    const std::string key(to_string(metric));
    const auto it = j->find(key);
    if (it == j->end() || !it->is_number_integer()) {
      throw Error(ErrorCode::MalformedResponse, "judge reply lacks an integer \"" + key + "\"");
    }
    const bool in_range = it->is_number_unsigned()
                              ? it->get<std::uint64_t>() <= kMaxJudgeScore
                              : (it->get<std::int64_t>() >= 0 && it->get<std::int64_t>() <= kMaxJudgeScore);
    if (!in_range) {
      throw Error(ErrorCode::MalformedResponse, key + " score " + it->dump() + " not in [0,5]");
    }
    values[index_of(metric)] = it->get<int>();
  }
  return JudgeScores{values[0], values[1], values[2], values[3]};
}

nlohmann::ordered_json to_json(const JudgeScores& scores) {
  nlohmann::ordered_json j;
  for (auto metric : kMetrics) j[std::string(to_string(metric))] = scores.get(metric);
  return j;
}

JudgeScores judge_answer(Gateway& gateway, std::string_view question, std::string_view gold_answer,
                         std::string_view predicted_answer) {
  if (question.empty() || gold_answer.empty() || predicted_answer.empty()) {
    throw Error(ErrorCode::InvalidRequest, "judge inputs must be non-empty");
  }
  GatewayRequest request;
  request.task = GatewayTask::Judge;
  request.prompt = judge_prompt(question, gold_answer, predicted_answer);
  return parse_judge_response(gateway.send(request).raw_text);
}

EvalReport aggregate_report(const std::vector<EvalItem>& items, const AggregateOptions& options) {
  if (options.k == 0) throw Error(ErrorCode::InvalidK, "k must be >= 1");

  struct Sums {
    std::size_t count = 0;
    std::array<long long, 4> totals{};
  };
  std::map<SceneDistance, Sums> bucket_sums;
  std::map<ReasoningType, Sums> type_sums;
  std::map<SceneDistance, std::vector<double>> recalls;

  for (const auto& e : items) {
    const auto bucket = options.recompute_distance
                            ? bucket_distance(e.item.evidence_events, options.thresholds)
                            : e.item.scene_distance;
    if (e.scores) {
      auto& b = bucket_sums[bucket];
      auto& t = type_sums[e.item.reasoning_type];
      ++b.count;
      ++t.count;
      for (auto m : kMetrics) {
        b.totals[index_of(m)] += e.scores->get(m);
        t.totals[index_of(m)] += e.scores->get(m);
      }
    }
    if (e.retrieved) {
      const auto& gold = e.gold_clips.empty() ? e.item.evidence_events : e.gold_clips;
      recalls[bucket].push_back(recall_at_k(*e.retrieved, gold, options.k));
    }
  }

  EvalReport report;
  report.label = options.label;
  report.k = options.k;
  auto to_row = [](const Sums& s) {
    MetricRow row{};
    for (std::size_t i = 0; i < row.size(); ++i) {
      row[i] = score_percent(static_cast<double>(s.totals[i]) / static_cast<double>(s.count));
    }
    return row;
  };
  for (const auto& [bucket, sums] : bucket_sums) {
    report.cells[bucket] = to_row(sums);
    report.scored_items[bucket] = sums.count;
  }
  report.overall = mean_of_cells(report.cells);
  for (const auto& [type, sums] : type_sums) {
    TypeSummary summary;
    summary.count = sums.count;
    summary.metrics = to_row(sums);
    summary.average = mean_of(summary.metrics);
    report.by_type[type] = summary;
  }

  // Sorted summation keeps the result independent of item order.
  std::vector<double> all_recalls;
  for (auto& [bucket, values] : recalls) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    report.recall[bucket] = RecallCell{values.size(), sum / static_cast<double>(values.size())};
    all_recalls.insert(all_recalls.end(), values.begin(), values.end());
  }
  if (!all_recalls.empty()) {
    std::sort(all_recalls.begin(), all_recalls.end());
    double sum = 0.0;
    for (double v : all_recalls) sum += v;
    report.recall_overall = sum / static_cast<double>(all_recalls.size());
  }
  return report;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["label"] = report.label;
  j["k"] = report.k;
  j["avg_definition"] = "mean of present bucket x metric cells";
  auto& cells = j["cells"] = nlohmann::ordered_json::object();
  for (const auto& [bucket, row] : report.cells) {
    auto& c = cells[std::string(to_string(bucket))];
    for (auto m : kMetrics) c[std::string(to_string(m))] = row[index_of(m)];
    c["items"] = report.scored_items.at(bucket);
  }
  j["overall"] = report.overall ? nlohmann::ordered_json(*report.overall) : nlohmann::ordered_json();
  auto& types = j["by_reasoning_type"] = nlohmann::ordered_json::object();
  for (const auto& [type, summary] : report.by_type) {
    auto& t = types[std::string(to_string(type))];
    t["items"] = summary.count;
    for (auto m : kMetrics) t[std::string(to_string(m))] = summary.metrics[index_of(m)];
    t["average"] = summary.average;
  }
  auto& recall = j["recall_at_k"] = nlohmann::ordered_json::object();
  for (const auto& [bucket, cell] : report.recall) {
    recall[std::string(to_string(bucket))] = {{"items", cell.count}, {"mean", cell.mean}};
  }
  j["recall_overall"] =
      report.recall_overall ? nlohmann::ordered_json(*report.recall_overall) : nlohmann::ordered_json();
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  try {
    EvalReport report;
    report.label = j.at("label").get<std::string>();
    report.k = j.at("k").get<std::size_t>();
    for (const auto& [name, cell] : j.at("cells").items()) {
      const auto bucket = parse_scene_distance(name);
      if (!bucket) throw Error(ErrorCode::SchemaError, "unknown bucket \"" + name + "\"");
      MetricRow row{};
      for (auto m : kMetrics) row[index_of(m)] = cell.at(std::string(to_string(m))).get<double>();
      report.cells[*bucket] = row;
      report.scored_items[*bucket] = cell.value("items", std::size_t{0});
    }
    report.overall = mean_of_cells(report.cells);
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("eval report: ") + e.what());
  }
}

namespace {

std::string table_header(std::string_view title) {
  std::string out = fmt::format("{:<14}|", title);
  for (auto d : kSceneDistances) out += fmt::format("{:^29}|", bucket_label(d));
  out += "\n";
  out += fmt::format("{:<14}|", "");
  for (std::size_t b = 0; b < kSceneDistances.size(); ++b) {
    for (auto m : kMetrics) out += fmt::format(" {:>6}", column_label(m));
    out += " |";
  }
  out += fmt::format(" {:>6}\n", "Avg.");
  return out;
}

std::string table_row(std::string_view name, const std::map<SceneDistance, MetricRow>& cells,
                      std::optional<double> overall) {
  std::string out = fmt::format("{:<14}|", name.substr(0, 14));
  for (auto d : kSceneDistances) {
    const auto it = cells.find(d);
    for (auto m : kMetrics) {
      out += " " + format_cell(it == cells.end() ? std::nullopt
                                                 : std::optional<double>(it->second[index_of(m)]));
    }
    out += " |";
  }
  out += " " + format_cell(overall) + "\n";
  return out;
}

}  // namespace

std::string render_table(const EvalReport& report) {
  std::string out = fmt::format("# {} (judge scores as score/5*100; Avg. = mean of present cells)\n",
                                report.label);
  out += table_header("Model");
  out += table_row(report.label, report.cells, report.overall);
  if (!report.recall.empty()) {
    out += fmt::format("\nRecall@{}:", report.k);
    for (auto d : kSceneDistances) {
      const auto it = report.recall.find(d);
      out += fmt::format(" {}={}", to_string(d),
                         it == report.recall.end() ? std::string("-")
                                                   : fmt::format("{:.4f} (n={})", it->second.mean,
                                                                 it->second.count));
    }
    if (report.recall_overall) out += fmt::format(" overall={:.4f}", *report.recall_overall);
    out += "\n";
  }
  if (!report.by_type.empty()) {
    out += "\nBy reasoning type (mean of four metrics):\n";
    for (const auto& [type, summary] : report.by_type) {
      out += fmt::format("  {:<13} {:6.2f} (n={})\n", to_string(type), summary.average, summary.count);
    }
  }
  return out;
}

DeltaTable compare_runs(const EvalReport& a, const EvalReport& b) {
  std::set<SceneDistance> ka, kb;
  for (const auto& [d, row] : a.cells) ka.insert(d);
  for (const auto& [d, row] : b.cells) kb.insert(d);
  if (ka != kb) {
    throw Error(ErrorCode::ShapeMismatch, "runs '" + a.label + "' and '" + b.label +
                                              "' report different distance buckets");
  }
  DeltaTable table;
  table.label_a = a.label;
  table.label_b = b.label;
  for (const auto& [bucket, row_a] : a.cells) {
    const auto& row_b = b.cells.at(bucket);
    MetricRow delta{};
    for (std::size_t i = 0; i < delta.size(); ++i) {
      delta[i] = row_a[i] - row_b[i];
      if (delta[i] < 0.0 && (!table.largest_drop || delta[i] < table.largest_drop->delta)) {
        table.largest_drop = CellRef{bucket, kMetrics[i], delta[i]};
      }
    }
    table.cells[bucket] = delta;
  }
  if (a.overall && b.overall) table.overall = *a.overall - *b.overall;
  return table;
}

nlohmann::ordered_json to_json(const DeltaTable& table) {
  nlohmann::ordered_json j;
  j["a"] = table.label_a;
  j["b"] = table.label_b;
  auto& cells = j["delta"] = nlohmann::ordered_json::object();
  for (const auto& [bucket, row] : table.cells) {
    auto& c = cells[std::string(to_string(bucket))];
    for (auto m : kMetrics) c[std::string(to_string(m))] = row[index_of(m)];
  }
  j["overall"] = table.overall ? nlohmann::ordered_json(*table.overall) : nlohmann::ordered_json();
  if (table.largest_drop) {
    j["largest_drop"] = {{"bucket", to_string(table.largest_drop->bucket)},
                         {"metric", to_string(table.largest_drop->metric)},
                         {"delta", table.largest_drop->delta}};
  } else {
    j["largest_drop"] = nullptr;
  }
  return j;
}

std::string render_table(const DeltaTable& table) {
  std::string out = fmt::format("# {} - {}\n", table.label_a, table.label_b);
  out += table_header("Delta");
  out += table_row("a - b", table.cells, table.overall);
  if (table.largest_drop) {
    out += fmt::format("Largest drop: {} {} {:.2f}\n", bucket_label(table.largest_drop->bucket),
                       column_label(table.largest_drop->metric), table.largest_drop->delta);
  }
  return out;
}

}  // namespace navqa
