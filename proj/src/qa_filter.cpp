#include <algorithm>
#include <numeric>

#include "navqa/error.hpp"
#include "navqa/gateway.hpp"
#include "navqa/prompts.hpp"
#include "navqa/qa_dataset.hpp"
#include "strict_json.hpp"

namespace navqa {

int ValidatorReport::total() const { return std::accumulate(scores.begin(), scores.end(), 0); }

int ValidatorReport::score(std::string_view criterion) const {
  const auto it = std::find(kValidatorCriteria.begin(), kValidatorCriteria.end(), criterion);
  if (it == kValidatorCriteria.end()) {
    throw Error(ErrorCode::InvalidRequest, "unknown criterion " + std::string(criterion));
  }
  return scores[static_cast<std::size_t>(it - kValidatorCriteria.begin())];
}

std::vector<std::string_view> ValidatorReport::zero_criteria() const {
  std::vector<std::string_view> out;
  for (std::size_t i = 0; i < kValidatorCriteriaCount; ++i) {
    if (scores[i] == 0) out.push_back(kValidatorCriteria[i]);
  }
  return out;
}

ValidatorReport parse_validator_response(std::string_view raw_text) {
  const auto j = detail::parse_strict_object(raw_text);
  if (!j) throw Error(ErrorCode::MalformedResponse, "validator reply is not a bare JSON object");
  ValidatorReport report;
  for (std::size_t i = 0; i < kValidatorCriteriaCount; ++i) {
    const std::string key(kValidatorCriteria[i]);
    const auto it = j->find(key);
    if (it == j->end() || !it->is_object()) {
      throw Error(ErrorCode::MalformedResponse, "validator reply lacks criterion " + key);
    }
    const auto score = it->find("score");
    const auto explanation = it->find("explanation");
    if (score == it->end() || !score->is_number_integer()) {
      throw Error(ErrorCode::MalformedResponse, key + ": score is not an integer");
    }
    const auto value = score->get<std::int64_t>();
    if (value < 0 || value > 2 || (score->is_number_unsigned() && score->get<std::uint64_t>() > 2)) {
      throw Error(ErrorCode::MalformedResponse, key + ": score " + score->dump() + " not in {0,1,2}");
    }
    if (explanation == it->end() || !explanation->is_string()) {
      throw Error(ErrorCode::MalformedResponse, key + ": explanation is not a string");
    }
    report.scores[i] = static_cast<int>(value);
    report.explanations[i] = explanation->get<std::string>();
  }
  return report;
}

nlohmann::ordered_json to_json(const ValidatorReport& report) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < kValidatorCriteriaCount; ++i) {
    j[std::string(kValidatorCriteria[i])] = {{"score", report.scores[i]},
                                             {"explanation", report.explanations[i]}};
  }
  return j;
}

ValidatorReport validate_item(Gateway& gateway, const QAItem& item,
                              const std::vector<std::string>& events) {
  if (events.empty()) {
    throw Error(ErrorCode::MissingEvents, "no events supplied for movie " + item.movie_id);
  }
  GatewayRequest request;
  request.task = GatewayTask::Validate;
  request.prompt = validator_prompt(item, events);
  return parse_validator_response(gateway.send(request).raw_text);
}

QAItem parse_refined_item(std::string_view raw_text, const QAItem& original) {
  const auto j = detail::parse_strict_object(raw_text);
  if (!j) throw Error(ErrorCode::MalformedResponse, "refiner reply is not a bare JSON object");
  return qa_item_from_json(*j, original.movie_id);
}

std::optional<QAItem> refine_item(Gateway& gateway, const QAItem& item,
                                  const ValidatorReport& report, int discard_threshold,
                                  const std::vector<std::string>& events) {
  if (report.total() < discard_threshold) return std::nullopt;
  GatewayRequest request;
  request.task = GatewayTask::Refine;
  request.prompt = refiner_prompt(item, report, events);
  auto refined = parse_refined_item(gateway.send(request).raw_text, item);
  refined.movie_id = item.movie_id;
  return refined;
}

FilterResult filter_pipeline(const std::vector<QAItem>& items, const EventsByMovie& events,
                             Gateway& gateway, int discard_threshold) {
  for (const auto& item : items) {
    const auto it = events.find(item.movie_id);
    if (it == events.end() || it->second.empty()) {
      throw Error(ErrorCode::MissingEvents, "no events for movie \"" + item.movie_id + "\"");
    }
  }

  FilterResult result;
  auto& stats = result.stats;
  stats.input = items.size();
  long long total_sum = 0;
  std::size_t reports = 0;

  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const auto& movie_events = events.at(item.movie_id);
    try {
      ValidatorReport report;
      try {
        report = validate_item(gateway, item, movie_events);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedResponse) throw;
        ++stats.invalid_reports;
        continue;
      }
      total_sum += report.total();
      ++reports;

      std::optional<QAItem> refined;
      try {
        refined = refine_item(gateway, item, report, discard_threshold, movie_events);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedResponse && e.code() != ErrorCode::SchemaError) throw;
        ++stats.refine_failed;
        continue;
      }
      if (!refined) {
        ++stats.discarded;
        continue;
      }
      ++stats.kept_by_type[refined->reasoning_type];
      ++stats.kept_by_distance[refined->scene_distance];
      result.kept.push_back(std::move(*refined));
    } catch (const Error& e) {
      throw Error(e.code(), "filter pipeline stopped at item " + std::to_string(i) + " of " +
                                std::to_string(items.size()) + " (" +
                                std::to_string(result.kept.size()) + " kept so far): " + e.what());
    }
  }
  stats.kept = result.kept.size();
  stats.mean_validator_total =
      reports == 0 ? 0.0 : static_cast<double>(total_sum) / static_cast<double>(reports);
  return result;
}

nlohmann::ordered_json to_json(const PipelineStats& stats) {
  nlohmann::ordered_json j;
  j["input"] = stats.input;
  j["kept"] = stats.kept;
  j["discarded"] = stats.discarded;
  j["refine_failed"] = stats.refine_failed;
  j["invalid_reports"] = stats.invalid_reports;
  j["mean_validator_total"] = stats.mean_validator_total;
  auto& types = j["kept_by_reasoning_type"] = nlohmann::ordered_json::object();
  for (auto t : kReasoningTypes) {
    const auto it = stats.kept_by_type.find(t);
    types[std::string(to_string(t))] = it == stats.kept_by_type.end() ? 0 : it->second;
  }
  auto& distances = j["kept_by_distance"] = nlohmann::ordered_json::object();
  for (auto d : kSceneDistances) {
    const auto it = stats.kept_by_distance.find(d);
    distances[std::string(to_string(d))] = it == stats.kept_by_distance.end() ? 0 : it->second;
  }
  return j;
}

}  // namespace navqa
