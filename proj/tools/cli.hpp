#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace navqa::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kGateway = 3 };

struct RunConfig {
  // paths
  std::string clips;
  std::string embeddings;
  std::string bank;
  std::string qa;
  std::vector<std::string> qa_files;  // stats: "path" or "name=path"
  std::string scene_map;
  std::string query_embedding;
  std::string events;
  std::string predictions;
  std::string baseline;
  std::string kept;
  std::string out;

  // params
  double alpha = 0.5;
  double lambda = 0.3;
  std::size_t top_k = 20;
  std::size_t n_slots = 16;
  double tau = 0.55;
  std::uint32_t short_max = 4;
  std::uint32_t medium_max = 15;
  int discard_threshold = 8;
  std::size_t sample_frames = 0;

  std::string assigner = "heuristic";
  std::string endpoint;
  std::uint64_t seed = 0;
  std::string format = "json";
  std::string label = "run";
  std::string query_id;
  std::optional<std::size_t> query_index;
  bool recompute_distance = false;
  bool schema_only = false;
  bool no_timestamp = false;
};

/// Overlays keys from a --config document. Accepts flat keys or "paths" /
/// "params" sub-objects. Throws InvalidRequest on unknown keys or bad types.
void apply_config(RunConfig& config, const nlohmann::json& j);

/// Full command-line entry point. Reports go to --out or `out`; diagnostics
/// to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace navqa::cli
