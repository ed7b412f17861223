#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "navqa/embedding_store.hpp"
#include "navqa/narrative_memory.hpp"

namespace navqa {

struct RetrievalParams {
  double alpha = 0.5;       // max-boost weight in the slot score
  double lambda = 0.3;      // slot boost weight in the final score
  std::size_t top_k = 20;

  /// Throws AlphaOutOfRange, NegativeLambda, InvalidTopK.
  void validate() const;
};

struct ScoreBreakdown {
  ClipIndex clip_index = 0;
  double z = 0.0;           // clip-query relevance
  int slot_id = 0;
  double slot_score = 0.0;  // S of the clip's slot
  double r = 0.0;           // z + lambda * S

  friend bool operator==(const ScoreBreakdown&, const ScoreBreakdown&) = default;
};

struct RetrievalResult {
  std::string query_id;
  RetrievalParams params;
  std::vector<ScoreBreakdown> ranked;  // non-increasing r, ties by ascending clip index

  std::vector<ClipIndex> clip_sequence() const;
};

/// z = mean_j cos(query, f_j), summed in frame order. Throws EmptyClip,
/// DimMismatch.
double clip_query_score(std::span<const double> query, const FrameSet& frames);

/// S = (1 - alpha) * mean(z) + alpha * max(z). Throws EmptySlotScores,
/// AlphaOutOfRange.
double slot_score(std::span<const double> member_z, double alpha);

/// r = z + lambda * S. Throws NegativeLambda.
double final_score(double z, double slot_score, double lambda);

/// Ranking order: larger r first, then smaller clip index.
bool ranks_before(const ScoreBreakdown& a, const ScoreBreakdown& b);

/// Scores every clip in the bank and returns the top-k. The query must be
/// unit norm (NotNormalized otherwise). Throws BankStoreMismatch when a bank
/// clip has no embeddings.
RetrievalResult retrieve(const MemoryBank& bank, const EmbeddingStore& store,
                         std::span<const double> query, const RetrievalParams& params,
                         std::string query_id = {});

/// Brute-force reference ranking of every bank clip. Shares no code with
/// retrieve(): plain loops and a full stable sort.
std::vector<ScoreBreakdown> oracle_rank(const MemoryBank& bank, const EmbeddingStore& store,
                                        std::span<const double> query,
                                        const RetrievalParams& params);

struct FrameRef {
  ClipIndex clip_index = 0;
  std::size_t frame = 0;  // position within the clip
  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

/// Picks `total` frames evenly spaced over the union of the retrieved clips'
/// frames, taken in timeline (clip index) order. Returns every frame when the
/// union holds fewer than `total`.
std::vector<FrameRef> sample_evidence_frames(const RetrievalResult& result,
                                             const EmbeddingStore& store, std::size_t total = 128);

nlohmann::ordered_json to_json(const RetrievalResult& result);

}  // namespace navqa
