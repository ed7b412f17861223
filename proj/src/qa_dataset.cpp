#include "navqa/qa_dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "navqa/error.hpp"

namespace navqa {

std::string_view to_string(ReasoningType type) {
  switch (type) {
    case ReasoningType::Causal: return "causal";
    case ReasoningType::Narrative: return "narrative";
    case ReasoningType::Character: return "character";
    case ReasoningType::Thematic: return "thematic";
    case ReasoningType::Goal: return "goal";
    case ReasoningType::Social: return "social";
    case ReasoningType::Hypothetical: return "hypothetical";
  }
  return "unknown";
}

std::string_view to_string(SceneDistance distance) {
  switch (distance) {
    case SceneDistance::Short: return "short";
    case SceneDistance::Medium: return "medium";
    case SceneDistance::Far: return "far";
  }
  return "unknown";
}

std::optional<ReasoningType> parse_reasoning_type(std::string_view name) {
  for (auto type : kReasoningTypes) {
    if (to_string(type) == name) return type;
  }
  if (name == "theme") return ReasoningType::Thematic;
  if (name == "goal-based" || name == "goal_based") return ReasoningType::Goal;
  return std::nullopt;
}

std::optional<SceneDistance> parse_scene_distance(std::string_view name) {
  for (auto d : kSceneDistances) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

QAItem qa_item_from_json(const nlohmann::json& j, const std::optional<std::string>& default_movie_id) {
  auto fail = [](const std::string& what) { return Error(ErrorCode::SchemaError, what); };
  if (!j.is_object()) throw fail("QA item is not a JSON object");

  auto string_field = [&](const char* key) -> std::string {
    const auto it = j.find(key);
    if (it == j.end()) throw fail(std::string("missing \"") + key + "\"");
    if (!it->is_string()) throw fail(std::string("\"") + key + "\" must be a string");
    return it->get<std::string>();
  };

  QAItem item;
  item.question = string_field("question");
  item.answer = string_field("answer");
  if (item.question.empty()) throw fail("\"question\" is empty");
  if (item.answer.empty()) throw fail("\"answer\" is empty");

  const auto ev = j.find("evidence_events");
  if (ev == j.end()) throw fail("missing \"evidence_events\"");
  if (!ev->is_array()) throw fail("\"evidence_events\" must be an array");
  for (const auto& e : *ev) {
    const bool in_range = e.is_number_unsigned()
                              ? e.get<std::uint64_t>() <= 0xffffffffULL
                              : (e.is_number_integer() && e.get<std::int64_t>() >= 0 &&
                                 e.get<std::int64_t>() <= 0xffffffffLL);
    if (!in_range) {
      throw fail("\"evidence_events\" entries must be non-negative integers");
    }
    item.evidence_events.push_back(e.get<std::uint32_t>());
  }
  if (item.evidence_events.size() < kMinEvidences || item.evidence_events.size() > kMaxEvidences) {
    throw fail("evidence count " + std::to_string(item.evidence_events.size()) +
               " outside [2, 20]");
  }

  const auto type_name = string_field("reasoning_type");
  const auto type = parse_reasoning_type(type_name);
  if (!type) throw fail("unknown reasoning_type \"" + type_name + "\"");
  item.reasoning_type = *type;

  const auto distance_name = string_field("scene_distance");
  const auto distance = parse_scene_distance(distance_name);
  if (!distance) throw fail("unknown scene_distance \"" + distance_name + "\"");
  item.scene_distance = *distance;

  if (j.contains("movie_id")) {
    item.movie_id = string_field("movie_id");
  } else if (default_movie_id) {
    item.movie_id = *default_movie_id;
  } else {
    throw fail("missing \"movie_id\"");
  }
  return item;
}

nlohmann::ordered_json to_json(const QAItem& item) {
  nlohmann::ordered_json j;
  j["question"] = item.question;
  j["answer"] = item.answer;
  j["evidence_events"] = item.evidence_events;
  j["reasoning_type"] = to_string(item.reasoning_type);
  j["scene_distance"] = to_string(item.scene_distance);
  j["movie_id"] = item.movie_id;
  return j;
}

QaLoadResult load_qa_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  QaLoadResult result;
  auto take = [&](const nlohmann::json& j, std::string location) {
    try {
      result.items.push_back(qa_item_from_json(j));
    } catch (const Error& e) {
      result.issues.push_back({std::move(location), e.what()});
    }
  };

  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) {
      result.issues.push_back({"file", "not a valid JSON array"});
      return result;
    }
    for (std::size_t i = 0; i < j.size(); ++i) take(j[i], "item " + std::to_string(i));
    return result;
  }

  std::istringstream lines(text);
  std::string line;
  for (std::size_t line_no = 1; std::getline(lines, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      result.issues.push_back({"line " + std::to_string(line_no), "invalid JSON"});
      continue;
    }
    take(j, "line " + std::to_string(line_no));
  }
  return result;
}

std::vector<QAItem> load_qa(const std::filesystem::path& path) {
  auto result = load_qa_report(path);
  if (!result.issues.empty()) {
    std::string message = path.string() + ": " + std::to_string(result.issues.size()) +
                          " invalid item(s)";
    for (const auto& issue : result.issues) message += "\n  " + issue.location + ": " + issue.message;
    throw Error(ErrorCode::SchemaError, message);
  }
  return std::move(result.items);
}

void write_qa_jsonl(const std::vector<QAItem>& items, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  for (const auto& item : items) out << to_json(item).dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void DistanceThresholds::validate() const {
  if (!(short_max > 0 && short_max < medium_max)) {
    throw Error(ErrorCode::InvalidThresholds, "need 0 < short_max < medium_max");
  }
}

SceneDistance bucket_distance(std::span<const std::uint32_t> evidence_events,
                              const DistanceThresholds& thresholds) {
  if (evidence_events.size() < kMinEvidences) {
    throw Error(ErrorCode::TooFewEvidences, "distance needs at least two evidence indices");
  }
  thresholds.validate();
  const auto [lo, hi] = std::minmax_element(evidence_events.begin(), evidence_events.end());
  const std::uint32_t span = *hi - *lo;
  if (span <= thresholds.short_max) return SceneDistance::Short;
  if (span <= thresholds.medium_max) return SceneDistance::Medium;
  return SceneDistance::Far;
}

std::vector<DistanceDisagreement> find_distance_disagreements(const std::vector<QAItem>& items,
                                                              const DistanceThresholds& thresholds) {
  std::vector<DistanceDisagreement> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto computed = bucket_distance(items[i].evidence_events, thresholds);
    if (computed != items[i].scene_distance) out.push_back({i, items[i].scene_distance, computed});
  }
  return out;
}

ClipIndex SceneMap::clip_for(std::uint32_t scene) const {
  if (mapping_.empty()) return scene;
  const auto it = mapping_.find(scene);
  if (it == mapping_.end()) {
    throw Error(ErrorCode::SchemaError, "scene " + std::to_string(scene) + " missing from scene map");
  }
  return it->second;
}

std::vector<ClipIndex> SceneMap::clips_for(std::span<const std::uint32_t> scenes) const {
  std::vector<ClipIndex> out;
  out.reserve(scenes.size());
  for (auto s : scenes) out.push_back(clip_for(s));
  return out;
}

SceneMap load_scene_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::map<std::uint32_t, ClipIndex> mapping;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto scene = j.at("scene_index").get<std::uint32_t>();
      const auto clip = j.at("clip_index").get<ClipIndex>();
      if (!mapping.emplace(scene, clip).second) {
        throw Error(ErrorCode::SchemaError, "scene " + std::to_string(scene) + " mapped twice");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaError,
                  path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return SceneMap(std::move(mapping));
}

EventsByMovie load_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::SchemaError, path.string() + " must be a JSON object of event lists");
  }
  try {
    return j.get<EventsByMovie>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

DatasetStats& DatasetStats::operator+=(const DatasetStats& other) {
  total_qa += other.total_qa;
  total_evidence += other.total_evidence;
  for (const auto& [k, v] : other.by_type) by_type[k] += v;
  for (const auto& [k, v] : other.by_distance) by_distance[k] += v;
  for (const auto& [k, v] : other.by_movie) by_movie[k] += v;
  return *this;
}

DatasetStats dataset_stats(const std::vector<QAItem>& items) {
  DatasetStats stats;
  for (const auto& item : items) {
    ++stats.total_qa;
    stats.total_evidence += item.evidence_events.size();
    ++stats.by_type[item.reasoning_type];
    ++stats.by_distance[item.scene_distance];
    ++stats.by_movie[item.movie_id];
  }
  return stats;
}

nlohmann::ordered_json to_json(const DatasetStats& stats) {
  nlohmann::ordered_json j;
  j["total_qa"] = stats.total_qa;
  j["total_evidence"] = stats.total_evidence;
  j["mean_evidences"] = stats.mean_evidences();
  j["movies"] = stats.by_movie.size();
  auto& types = j["by_reasoning_type"] = nlohmann::ordered_json::object();
  for (auto t : kReasoningTypes) {
    const auto it = stats.by_type.find(t);
    types[std::string(to_string(t))] = it == stats.by_type.end() ? 0 : it->second;
  }
  auto& distances = j["by_distance"] = nlohmann::ordered_json::object();
  for (auto d : kSceneDistances) {
    const auto it = stats.by_distance.find(d);
    distances[std::string(to_string(d))] = it == stats.by_distance.end() ? 0 : it->second;
  }
  auto& movies = j["by_movie"] = nlohmann::ordered_json::object();
  for (const auto& [movie, count] : stats.by_movie) movies[movie] = count;
  return j;
}

}  // namespace navqa
