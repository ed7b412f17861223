#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "navqa/embedding_store.hpp"

namespace navqa {

class Gateway;

enum class ReasoningType { Causal, Narrative, Character, Thematic, Goal, Social, Hypothetical };
inline constexpr std::array<ReasoningType, 7> kReasoningTypes = {
    ReasoningType::Causal, ReasoningType::Narrative, ReasoningType::Character,
    ReasoningType::Thematic, ReasoningType::Goal, ReasoningType::Social,
    ReasoningType::Hypothetical};

enum class SceneDistance { Short, Medium, Far };
inline constexpr std::array<SceneDistance, 3> kSceneDistances = {
    SceneDistance::Short, SceneDistance::Medium, SceneDistance::Far};

std::string_view to_string(ReasoningType type);
std::string_view to_string(SceneDistance distance);
// Also accepts "theme" and "goal-based"/"goal_based" spellings.
std::optional<ReasoningType> parse_reasoning_type(std::string_view name);
std::optional<SceneDistance> parse_scene_distance(std::string_view name);

inline constexpr std::size_t kMinEvidences = 2;
inline constexpr std::size_t kMaxEvidences = 20;

struct QAItem {
  std::string question;
  std::string answer;
  std::vector<std::uint32_t> evidence_events;  // scene indices, in answer order
  ReasoningType reasoning_type = ReasoningType::Causal;
  SceneDistance scene_distance = SceneDistance::Short;
  std::string movie_id;

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

/// Throws SchemaError describing the first violation. A missing "movie_id"
/// falls back to `default_movie_id` when given.
QAItem qa_item_from_json(const nlohmann::json& j,
                         const std::optional<std::string>& default_movie_id = std::nullopt);
nlohmann::ordered_json to_json(const QAItem& item);

struct QaLoadIssue {
  std::string location;  // "line N" for JSON Lines, "item N" for arrays
  std::string message;
};

struct QaLoadResult {
  std::vector<QAItem> items;
  std::vector<QaLoadIssue> issues;
};

/// Accepts a JSON array or JSON Lines. Invalid items are collected, not thrown.
QaLoadResult load_qa_report(const std::filesystem::path& path);
/// Same, but throws SchemaError listing every invalid item.
std::vector<QAItem> load_qa(const std::filesystem::path& path);
void write_qa_jsonl(const std::vector<QAItem>& items, const std::filesystem::path& path);

struct DistanceThresholds {
  std::uint32_t short_max = 4;
  std::uint32_t medium_max = 15;

  /// Throws InvalidThresholds unless 0 < short_max < medium_max.
  void validate() const;
};

/// span = max - min over the evidence indices. Throws TooFewEvidences.
SceneDistance bucket_distance(std::span<const std::uint32_t> evidence_events,
                              const DistanceThresholds& thresholds = {});

struct DistanceDisagreement {
  std::size_t item_index = 0;
  SceneDistance stored = SceneDistance::Short;
  SceneDistance computed = SceneDistance::Short;
};

std::vector<DistanceDisagreement> find_distance_disagreements(const std::vector<QAItem>& items,
                                                              const DistanceThresholds& thresholds);

/// Scene index -> clip index. Without a map, scene indices are clip indices.
class SceneMap {
 public:
  SceneMap() = default;
  explicit SceneMap(std::map<std::uint32_t, ClipIndex> mapping) : mapping_(std::move(mapping)) {}

  bool empty() const noexcept { return mapping_.empty(); }
  /// Throws SchemaError for scenes absent from a non-empty map.
  ClipIndex clip_for(std::uint32_t scene) const;
  std::vector<ClipIndex> clips_for(std::span<const std::uint32_t> scenes) const;

 private:
  std::map<std::uint32_t, ClipIndex> mapping_;
};

/// JSON Lines of {"scene_index": int, "clip_index": int}.
SceneMap load_scene_map(const std::filesystem::path& path);

/// Events per movie: a JSON object {"<movie_id>": ["event text", ...]}.
using EventsByMovie = std::map<std::string, std::vector<std::string>>;
EventsByMovie load_events(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Validator / refiner

inline constexpr std::size_t kValidatorCriteriaCount = 8;
inline constexpr std::array<std::string_view, kValidatorCriteriaCount> kValidatorCriteria = {
    "video_grounded_framing", "answer_faithfulness", "events_completeness",
    "minimal_events",         "clarity_challenge",   "reasoning_required",
    "character_agnostic",     "content_identifiability"};

struct ValidatorReport {
  std::array<int, kValidatorCriteriaCount> scores{};
  std::array<std::string, kValidatorCriteriaCount> explanations{};

  int total() const;
  int score(std::string_view criterion) const;
  std::vector<std::string_view> zero_criteria() const;

  friend bool operator==(const ValidatorReport&, const ValidatorReport&) = default;
};

/// Expects {"<criterion>": {"score": 0|1|2, "explanation": string}, ...} with
/// all eight criteria. Throws MalformedResponse.
ValidatorReport parse_validator_response(std::string_view raw_text);
nlohmann::ordered_json to_json(const ValidatorReport& report);

/// Throws MissingEvents, MalformedResponse, GatewayError, Timeout.
ValidatorReport validate_item(Gateway& gateway, const QAItem& item,
                              const std::vector<std::string>& events);

inline constexpr int kDefaultDiscardThreshold = 8;

/// Parses a refiner reply into a schema-valid item; movie_id is carried over
/// from `original` when the reply omits it. Throws MalformedResponse or
/// SchemaError.
QAItem parse_refined_item(std::string_view raw_text, const QAItem& original);

/// nullopt when report.total() < discard_threshold (discarded). Otherwise the
/// gateway rewrites the item, naming every criterion scored 0.
std::optional<QAItem> refine_item(Gateway& gateway, const QAItem& item,
                                  const ValidatorReport& report, int discard_threshold,
                                  const std::vector<std::string>& events);

struct PipelineStats {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t discarded = 0;       // validator total below threshold
  std::size_t refine_failed = 0;   // refiner reply malformed or schema-invalid
  std::size_t invalid_reports = 0; // validator reply malformed
  double mean_validator_total = 0.0;  // over items with a parsed report
  std::map<ReasoningType, std::size_t> kept_by_type;
  std::map<SceneDistance, std::size_t> kept_by_distance;
};

nlohmann::ordered_json to_json(const PipelineStats& stats);

struct FilterResult {
  std::vector<QAItem> kept;
  PipelineStats stats;
};

/// Validates then refines or discards every item, in input order. Gateway
/// failures (after the gateway's own retries) abort with GatewayError/Timeout
/// naming how many items were completed.
FilterResult filter_pipeline(const std::vector<QAItem>& items, const EventsByMovie& events,
                             Gateway& gateway, int discard_threshold = kDefaultDiscardThreshold);

// ---------------------------------------------------------------------------
// Dataset statistics

struct DatasetStats {
  std::size_t total_qa = 0;
  std::size_t total_evidence = 0;
  std::map<ReasoningType, std::size_t> by_type;
  std::map<SceneDistance, std::size_t> by_distance;
  std::map<std::string, std::size_t> by_movie;

  double mean_evidences() const {
    return total_qa == 0 ? 0.0 : static_cast<double>(total_evidence) / static_cast<double>(total_qa);
  }
  DatasetStats& operator+=(const DatasetStats& other);
  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

DatasetStats dataset_stats(const std::vector<QAItem>& items);
nlohmann::ordered_json to_json(const DatasetStats& stats);

}  // namespace navqa
