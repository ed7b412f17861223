#include "navqa/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "navqa/error.hpp"

namespace navqa {

namespace {

constexpr double kQueryNormTolerance = 1e-6;

void check_query(std::span<const double> query, const EmbeddingStore& store) {
  if (query.size() != store.dim()) {
    throw Error(ErrorCode::DimMismatch, "query has " + std::to_string(query.size()) +
                                            " components, store dim is " +
                                            std::to_string(store.dim()));
  }
  double sq = 0.0;
  for (double x : query) sq += x * x;
  if (std::abs(std::sqrt(sq) - 1.0) > kQueryNormTolerance) {
    throw Error(ErrorCode::NotNormalized, "query vector is not unit norm");
  }
}

}  // namespace

void RetrievalParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::AlphaOutOfRange, "alpha must lie in [0, 1]");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::NegativeLambda, "lambda must be finite and >= 0");
  }
  if (top_k == 0) throw Error(ErrorCode::InvalidTopK, "top_k must be >= 1");
}

std::vector<ClipIndex> RetrievalResult::clip_sequence() const {
  std::vector<ClipIndex> out;
  out.reserve(ranked.size());
  for (const auto& s : ranked) out.push_back(s.clip_index);
  return out;
}

double clip_query_score(std::span<const double> query, const FrameSet& frames) {
  if (frames.empty()) throw Error(ErrorCode::EmptyClip, "clip has no frames");
  double sum = 0.0;
  for (std::size_t j = 0; j < frames.size(); ++j) sum += cosine(query, frames[j]);
  return sum / static_cast<double>(frames.size());
}

double slot_score(std::span<const double> member_z, double alpha) {
  if (member_z.empty()) throw Error(ErrorCode::EmptySlotScores, "slot has no member scores");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::AlphaOutOfRange, "alpha must lie in [0, 1]");
  }
  double sum = 0.0;
  double lo = member_z.front();
  double hi = member_z.front();
  for (double z : member_z) {
    sum += z;
    lo = std::min(lo, z);
    hi = std::max(hi, z);
  }
  // Rounding in the sum can push the mean an ulp outside [min, max].
  const double mean = std::clamp(sum / static_cast<double>(member_z.size()), lo, hi);
  return std::clamp((1.0 - alpha) * mean + alpha * hi, mean, hi);
}

double final_score(double z, double slot_score, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::NegativeLambda, "lambda must be >= 0");
  return z + lambda * slot_score;
}

bool ranks_before(const ScoreBreakdown& a, const ScoreBreakdown& b) {
  if (a.r != b.r) return a.r > b.r;
  return a.clip_index < b.clip_index;
}

RetrievalResult retrieve(const MemoryBank& bank, const EmbeddingStore& store,
                         std::span<const double> query, const RetrievalParams& params,
                         std::string query_id) {
  params.validate();
  check_query(query, store);

  std::vector<ScoreBreakdown> scored;
  scored.reserve(bank.clip_count());
  std::vector<double> member_z;
  for (const auto& slot : bank.slots()) {
    if (slot.empty()) continue;
    member_z.clear();
    for (ClipIndex clip : slot.clip_indices) {
      if (!store.has_clip(clip)) {
        throw Error(ErrorCode::BankStoreMismatch,
                    "bank clip " + std::to_string(clip) + " has no embeddings in the store");
      }
      member_z.push_back(clip_query_score(query, store.clip_frame_set(clip)));
    }
    const double s = slot_score(member_z, params.alpha);
    for (std::size_t i = 0; i < member_z.size(); ++i) {
      scored.push_back({slot.clip_indices[i], member_z[i], slot.slot_id, s,
                        final_score(member_z[i], s, params.lambda)});
    }
  }

  const auto k = std::min(params.top_k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    ranks_before);
  scored.resize(k);
  return RetrievalResult{std::move(query_id), params, std::move(scored)};
}

std::vector<FrameRef> sample_evidence_frames(const RetrievalResult& result,
                                             const EmbeddingStore& store, std::size_t total) {
  auto clips = result.clip_sequence();
  std::sort(clips.begin(), clips.end());

  std::vector<FrameRef> pool;
  for (ClipIndex clip : clips) {
    const auto n = store.clip_frame_set(clip).size();
    for (std::size_t f = 0; f < n; ++f) pool.push_back({clip, f});
  }
  if (pool.size() <= total) return pool;

  std::vector<FrameRef> out;
  out.reserve(total);
  const double step = static_cast<double>(pool.size()) / static_cast<double>(total);
  for (std::size_t i = 0; i < total; ++i) {
    out.push_back(pool[static_cast<std::size_t>((static_cast<double>(i) + 0.5) * step)]);
  }
  return out;
}

nlohmann::ordered_json to_json(const RetrievalResult& result) {
  nlohmann::ordered_json j;
  j["query_id"] = result.query_id;
  j["params"] = {{"alpha", result.params.alpha},
                 {"lambda", result.params.lambda},
                 {"top_k", result.params.top_k}};
  auto& ranked = j["ranked"] = nlohmann::ordered_json::array();
  for (const auto& s : result.ranked) {
    nlohmann::ordered_json e;
    e["clip_index"] = s.clip_index;
    e["z"] = s.z;
    e["slot_id"] = s.slot_id;
    e["slot_score"] = s.slot_score;
    e["r"] = s.r;
    ranked.push_back(std::move(e));
  }
  return j;
}

}  // namespace navqa
