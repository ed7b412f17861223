#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "navqa/embedding_store.hpp"
#include "navqa/error.hpp"
#include "navqa/eval.hpp"
#include "navqa/gateway.hpp"
#include "navqa/narrative_memory.hpp"
#include "navqa/qa_dataset.hpp"
#include "navqa/retrieval.hpp"

namespace navqa::cli {

namespace {

template <class T>
void take(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidRequest, std::string("config key \"") + key + "\": " + e.what());
  }
}

void check_params(const RunConfig& c) {
  RetrievalParams{c.alpha, c.lambda, c.top_k}.validate();
  DistanceThresholds{c.short_max, c.medium_max}.validate();
  if (c.n_slots == 0) throw Error(ErrorCode::InvalidN, "--slots must be >= 1");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw Error(ErrorCode::InvalidRequest, "--tau must be in (0, 1]");
  if (c.discard_threshold < 0 || c.discard_threshold > 16) {
    throw Error(ErrorCode::InvalidRequest, "--discard-threshold must be in [0, 16]");
  }
  if (c.format != "json" && c.format != "text") {
    throw Error(ErrorCode::InvalidRequest, "--format must be json or text");
  }
  if (c.assigner != "heuristic" && c.assigner != "external") {
    throw Error(ErrorCode::InvalidRequest, "--assigner must be heuristic or external");
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorCode::InvalidRequest, std::string(flag) + " is required");
}

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream os;
  os << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

class Output {
 public:
  Output(const RunConfig& config, std::ostream& fallback) : config_(config), fallback_(fallback) {}

  void json(nlohmann::ordered_json j) {
    if (!config_.no_timestamp && j.is_object()) j["generated_at"] = timestamp_now();
    text(j.dump(2) + "\n");
  }

  void text(const std::string& body) {
    if (config_.out.empty()) {
      fallback_ << body;
      return;
    }
    std::ofstream file(config_.out, std::ios::trunc);
    if (!file) throw Error(ErrorCode::IoError, "cannot open " + config_.out + " for writing");
    file << body;
    if (!file) throw Error(ErrorCode::IoError, "write failed for " + config_.out);
  }

 private:
  const RunConfig& config_;
  std::ostream& fallback_;
};

std::unique_ptr<Gateway> open_gateway(const RunConfig& c) {
  if (c.endpoint == "mock") return std::make_unique<MockGateway>(c.seed);
  if (!c.endpoint.empty()) return make_gateway(c.endpoint);
  auto gateway = gateway_from_env();
  if (!gateway) {
    throw Error(ErrorCode::InvalidRequest, "no endpoint: pass --endpoint or set NAVQA_LLM_ENDPOINT");
  }
  return gateway;
}

std::vector<std::vector<double>> load_queries(const std::string& path) {
  const auto store = load_embedding_file(path);
  std::vector<std::vector<double>> queries;
  for (ClipIndex ordinal : store.clip_indices()) {
    if (ordinal != queries.size()) {
      throw Error(ErrorCode::SchemaError, "query file ordinals must run 0..n-1 without gaps");
    }
    const auto frames = store.clip_frame_set(ordinal);
    const auto v = frames[0];
    queries.push_back(l2_normalize(std::vector<double>(v.begin(), v.end())));
  }
  return queries;
}

int cmd_build_memory(const RunConfig& c, Output& out) {
  require(c.clips, "--clips");
  require(c.embeddings, "--embeddings");
  const auto clips = load_clip_manifest(c.clips);
  const auto store = load_embedding_file(c.embeddings);
  check_manifest_coverage(store, clips);

  MemoryBank bank(c.n_slots);
  if (c.assigner == "external") {
    auto gateway = open_gateway(c);
    ExternalAssigner assigner(*gateway);
    bank = build_memory(clips, store, assigner, c.n_slots);
  } else {
    HeuristicAssigner assigner(c.tau);
    bank = build_memory(clips, store, assigner, c.n_slots);
  }
  out.text(to_json(bank).dump(2) + "\n");
  return kOk;
}

nlohmann::ordered_json retrieval_json(const RetrievalResult& result, const EmbeddingStore& store,
                                      std::size_t sample_frames) {
  auto j = to_json(result);
  if (sample_frames > 0) {
    auto& frames = j["evidence_frames"] = nlohmann::ordered_json::array();
    for (const auto& f : sample_evidence_frames(result, store, sample_frames)) {
      frames.push_back({f.clip_index, f.frame});
    }
  }
  return j;
}

int cmd_retrieve(const RunConfig& c, Output& out) {
  require(c.bank, "--bank");
  require(c.embeddings, "--embeddings");
  require(c.query_embedding, "--query-embedding");
  const auto bank = load_bank(c.bank);
  const auto store = load_embedding_file(c.embeddings);
  const auto queries = load_queries(c.query_embedding);
  const RetrievalParams params{c.alpha, c.lambda, c.top_k};

  auto query_id = [&](std::size_t i) {
    if (!c.query_id.empty()) return c.query_id;
    return "q" + std::to_string(i);
  };

  if (c.query_index || queries.size() == 1) {
    const std::size_t i = c.query_index.value_or(0);
    if (i >= queries.size()) {
      throw Error(ErrorCode::InvalidRequest, "--query-index " + std::to_string(i) + " out of range");
    }
    out.json(retrieval_json(retrieve(bank, store, queries[i], params, query_id(i)), store,
                            c.sample_frames));
    return kOk;
  }
  nlohmann::ordered_json reports = nlohmann::ordered_json::object();
  auto& list = reports["reports"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    list.push_back(retrieval_json(retrieve(bank, store, queries[i], params, "q" + std::to_string(i)),
                                  store, c.sample_frames));
  }
  out.json(std::move(reports));
  return kOk;
}

void emit_report(const RunConfig& c, Output& out, const EvalReport& report,
                 const std::optional<DeltaTable>& delta = std::nullopt) {
  if (c.format == "text") {
    std::string body = render_table(report);
    if (delta) body += "\n" + render_table(*delta);
    out.text(body);
    return;
  }
  auto j = to_json(report);
  if (delta) j["comparison"] = to_json(*delta);
  out.json(std::move(j));
}

AggregateOptions aggregate_options(const RunConfig& c) {
  AggregateOptions options;
  options.recompute_distance = c.recompute_distance;
  options.thresholds = {c.short_max, c.medium_max};
  options.k = c.top_k;
  options.label = c.label;
  return options;
}

int cmd_eval_retrieval(const RunConfig& c, Output& out) {
  require(c.bank, "--bank");
  require(c.embeddings, "--embeddings");
  require(c.query_embedding, "--query-embedding");
  require(c.qa, "--qa");
  const auto bank = load_bank(c.bank);
  const auto store = load_embedding_file(c.embeddings);
  const auto queries = load_queries(c.query_embedding);
  const auto items = load_qa(c.qa);
  const SceneMap scene_map = c.scene_map.empty() ? SceneMap() : load_scene_map(c.scene_map);
  if (queries.size() != items.size()) {
    throw Error(ErrorCode::SchemaError, "query file holds " + std::to_string(queries.size()) +
                                            " vectors for " + std::to_string(items.size()) +
                                            " QA items");
  }
  const RetrievalParams params{c.alpha, c.lambda, c.top_k};
  std::vector<EvalItem> evals;
  evals.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    EvalItem e;
    e.item = items[i];
    e.gold_clips = scene_map.clips_for(items[i].evidence_events);
    e.retrieved = retrieve(bank, store, queries[i], params, "q" + std::to_string(i)).clip_sequence();
    evals.push_back(std::move(e));
  }
  emit_report(c, out, aggregate_report(evals, aggregate_options(c)));
  return kOk;
}

EvalReport report_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::SchemaError, path + " is not valid JSON");
  return eval_report_from_json(j);
}

int cmd_eval_answers(const RunConfig& c, Output& out) {
  require(c.qa, "--qa");
  require(c.predictions, "--predictions");
  const auto items = load_qa(c.qa);
  auto gateway = open_gateway(c);

  std::ifstream in(c.predictions);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + c.predictions);
  std::vector<EvalItem> evals;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::size_t index = 0;
    std::string answer;
    try {
      const auto j = nlohmann::json::parse(line);
      index = j.at("qa_index").get<std::size_t>();
      answer = j.at("answer").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaError,
                  c.predictions + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (index >= items.size()) {
      throw Error(ErrorCode::SchemaError, c.predictions + " line " + std::to_string(line_no) +
                                              ": qa_index out of range");
    }
    EvalItem e;
    e.item = items[index];
    e.scores = judge_answer(*gateway, items[index].question, items[index].answer, answer);
    evals.push_back(std::move(e));
  }
  const auto report = aggregate_report(evals, aggregate_options(c));
  std::optional<DeltaTable> delta;
  if (!c.baseline.empty()) delta = compare_runs(report, report_from_file(c.baseline));
  emit_report(c, out, report, delta);
  return kOk;
}

int cmd_validate_dataset(const RunConfig& c, Output& out, std::ostream& err) {
  require(c.qa, "--qa");
  const DistanceThresholds thresholds{c.short_max, c.medium_max};
  if (c.schema_only) {
    const auto loaded = load_qa_report(c.qa);
    nlohmann::ordered_json j;
    j["valid_items"] = loaded.items.size();
    auto& issues = j["issues"] = nlohmann::ordered_json::array();
    for (const auto& issue : loaded.issues) {
      issues.push_back({{"location", issue.location}, {"message", issue.message}});
    }
    auto& disagreements = j["distance_disagreements"] = nlohmann::ordered_json::array();
    for (const auto& d : find_distance_disagreements(loaded.items, thresholds)) {
      disagreements.push_back({{"item", d.item_index},
                               {"stored", to_string(d.stored)},
                               {"computed", to_string(d.computed)}});
    }
    out.json(std::move(j));
    if (!loaded.issues.empty()) {
      err << loaded.issues.size() << " invalid item(s) in " << c.qa << "\n";
      return kData;
    }
    return kOk;
  }

  require(c.events, "--events");
  const auto items = load_qa(c.qa);
  const auto events = load_events(c.events);
  auto gateway = open_gateway(c);
  const auto result = filter_pipeline(items, events, *gateway, c.discard_threshold);
  if (!c.kept.empty()) write_qa_jsonl(result.kept, c.kept);
  out.json(to_json(result.stats));
  return kOk;
}

int cmd_stats(const RunConfig& c, Output& out) {
  std::vector<std::string> specs = c.qa_files;
  if (!c.qa.empty()) specs.insert(specs.begin(), c.qa);
  if (specs.empty()) throw Error(ErrorCode::InvalidRequest, "--qa is required");

  nlohmann::ordered_json j;
  auto& splits = j["splits"] = nlohmann::ordered_json::object();
  DatasetStats combined;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    const std::string name = eq == std::string::npos ? spec : spec.substr(0, eq);
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const auto stats = dataset_stats(load_qa(path));
    splits[name] = to_json(stats);
    combined += stats;
  }
  j["combined"] = to_json(combined);
  out.json(std::move(j));
  return kOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::AlphaOutOfRange:
    case ErrorCode::NegativeLambda:
    case ErrorCode::InvalidTopK:
    case ErrorCode::InvalidN:
    case ErrorCode::InvalidThresholds:
    case ErrorCode::InvalidK:
    case ErrorCode::InvalidRequest:
      return kUsage;
    default:
      return is_gateway_failure(code) ? kGateway : kData;
  }
}

}  // namespace

void apply_config(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidRequest, "config must be a JSON object");
  nlohmann::json flat = nlohmann::json::object();
  for (const auto& [key, value] : j.items()) {
    if ((key == "paths" || key == "params") && value.is_object()) {
      for (const auto& [k, v] : value.items()) flat[k] = v;
    } else {
      flat[key] = value;
    }
  }
  static const std::set<std::string> known = {
      "clips",     "embeddings", "bank",         "qa",        "scene_map",         "query_embedding",
      "events",    "predictions", "baseline",    "kept",      "out",               "alpha",
      "lambda",    "top_k",      "n_slots",      "tau",       "short_max",         "medium_max",
      "discard_threshold", "sample_frames", "assigner", "endpoint", "seed",          "format",
      "label",     "recompute_distance", "no_timestamp"};
  for (const auto& [key, value] : flat.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::InvalidRequest, "unknown config key \"" + key + "\"");
  }
  take(flat, "clips", c.clips);
  take(flat, "embeddings", c.embeddings);
  take(flat, "bank", c.bank);
  take(flat, "qa", c.qa);
  take(flat, "scene_map", c.scene_map);
  take(flat, "query_embedding", c.query_embedding);
  take(flat, "events", c.events);
  take(flat, "predictions", c.predictions);
  take(flat, "baseline", c.baseline);
  take(flat, "kept", c.kept);
  take(flat, "out", c.out);
  take(flat, "alpha", c.alpha);
  take(flat, "lambda", c.lambda);
  take(flat, "top_k", c.top_k);
  take(flat, "n_slots", c.n_slots);
  take(flat, "tau", c.tau);
  take(flat, "short_max", c.short_max);
  take(flat, "medium_max", c.medium_max);
  take(flat, "discard_threshold", c.discard_threshold);
  take(flat, "sample_frames", c.sample_frames);
  take(flat, "assigner", c.assigner);
  take(flat, "endpoint", c.endpoint);
  take(flat, "seed", c.seed);
  take(flat, "format", c.format);
  take(flat, "label", c.label);
  take(flat, "recompute_distance", c.recompute_distance);
  take(flat, "no_timestamp", c.no_timestamp);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::string config_path;

  CLI::App app{"Narrative-memory evidence retrieval and evaluation for long-video QA", "navqa"};
  app.require_subcommand(1);
  app.set_config();  // disable default config handling; --config is JSON and handled below

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config; its values override flags");
    sub->add_option("--out", c.out, "Write the report here instead of stdout");
    sub->add_flag("--no-timestamp", c.no_timestamp, "Omit generated_at from reports");
  };
  auto retrieval_flags = [&](CLI::App* sub) {
    sub->add_option("--top-k", c.top_k, "Clips to retrieve")->capture_default_str();
    sub->add_option("--alpha", c.alpha, "Max-boost weight of the slot score")->capture_default_str();
    sub->add_option("--lambda", c.lambda, "Slot boost weight of the final score")->capture_default_str();
  };
  auto distance_flags = [&](CLI::App* sub) {
    sub->add_option("--short-max", c.short_max, "Largest span labelled short")->capture_default_str();
    sub->add_option("--medium-max", c.medium_max, "Largest span labelled medium")->capture_default_str();
  };
  auto gateway_flags = [&](CLI::App* sub) {
    sub->add_option("--endpoint", c.endpoint, "http:// URL, mock:<seed>, or 'mock' (uses --seed)");
    sub->add_option("--seed", c.seed, "Seed for the offline mock");
  };
  auto report_flags = [&](CLI::App* sub) {
    sub->add_option("--format", c.format, "json or text")->capture_default_str();
    sub->add_option("--label", c.label, "Run label shown in reports");
    sub->add_flag("--recompute-distance", c.recompute_distance,
                  "Bucket by evidence span instead of the stored label");
  };

  auto* build = app.add_subcommand("build-memory", "Assign clips to narrative slots");
  common(build);
  gateway_flags(build);
  build->add_option("--clips", c.clips, "Clip manifest (JSON Lines)");
  build->add_option("--embeddings", c.embeddings, "NAVQ frame embedding file");
  build->add_option("--slots", c.n_slots, "Number of narrative slots")->capture_default_str();
  build->add_option("--assigner", c.assigner, "heuristic or external")->capture_default_str();
  build->add_option("--tau", c.tau, "Heuristic join threshold")->capture_default_str();

  auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank clips for query embeddings");
  common(retrieve_cmd);
  retrieval_flags(retrieve_cmd);
  retrieve_cmd->add_option("--bank", c.bank, "Memory bank JSON");
  retrieve_cmd->add_option("--embeddings", c.embeddings, "NAVQ frame embedding file");
  retrieve_cmd->add_option("--query-embedding", c.query_embedding, "NAVQ query file");
  retrieve_cmd->add_option("--query-index", c.query_index, "Only this query ordinal");
  retrieve_cmd->add_option("--query-id", c.query_id, "Identifier written to the report");
  retrieve_cmd->add_option("--sample-frames", c.sample_frames,
                           "Also list N frames sampled uniformly over the retrieved clips");

  auto* eval_retrieval = app.add_subcommand("eval-retrieval", "Recall@k against gold evidence");
  common(eval_retrieval);
  retrieval_flags(eval_retrieval);
  distance_flags(eval_retrieval);
  report_flags(eval_retrieval);
  eval_retrieval->add_option("--bank", c.bank, "Memory bank JSON");
  eval_retrieval->add_option("--embeddings", c.embeddings, "NAVQ frame embedding file");
  eval_retrieval->add_option("--query-embedding", c.query_embedding,
                             "NAVQ query file, one vector per QA item in order");
  eval_retrieval->add_option("--qa", c.qa, "QA file (JSON array or JSON Lines)");
  eval_retrieval->add_option("--scene-map", c.scene_map, "Scene to clip map (JSON Lines)");

  auto* eval_answers = app.add_subcommand("eval-answers", "Judge predicted answers");
  common(eval_answers);
  gateway_flags(eval_answers);
  distance_flags(eval_answers);
  report_flags(eval_answers);
  eval_answers->add_option("--qa", c.qa, "QA file");
  eval_answers->add_option("--predictions", c.predictions,
                           "JSON Lines of {\"qa_index\": int, \"answer\": string}");
  eval_answers->add_option("--baseline", c.baseline, "Earlier JSON report to compare against");

  auto* validate = app.add_subcommand("validate-dataset", "Validate, refine or discard QA items");
  common(validate);
  gateway_flags(validate);
  distance_flags(validate);
  validate->add_option("--qa", c.qa, "QA file");
  validate->add_option("--events", c.events, "JSON object of event lists per movie");
  validate->add_option("--discard-threshold", c.discard_threshold,
                       "Discard items whose validator total is below this")
      ->capture_default_str();
  validate->add_option("--kept", c.kept, "Write surviving items here (JSON Lines)");
  validate->add_flag("--schema-only", c.schema_only, "Only check the schema and distance labels");

  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  common(stats);
  stats->add_option("--qa", c.qa_files, "QA file, optionally name=path; repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorCode::InvalidRequest, "cannot open config " + config_path);
      const auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::InvalidRequest, config_path + " is not valid JSON");
      apply_config(c, j);
    }
    check_params(c);

    Output output(c, out);
    if (*build) return cmd_build_memory(c, output);
    if (*retrieve_cmd) return cmd_retrieve(c, output);
    if (*eval_retrieval) return cmd_eval_retrieval(c, output);
    if (*eval_answers) return cmd_eval_answers(c, output);
    if (*validate) return cmd_validate_dataset(c, output, err);
    if (*stats) return cmd_stats(c, output);
    err << app.help();
    return kUsage;
  } catch (const Error& e) {
    err << "navqa: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "navqa: " << e.what() << "\n";
    return kData;
  }
}

}  // namespace navqa::cli
