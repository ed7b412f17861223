// Reference ranking used to verify retrieve(). Written with plain loops over
// the raw store payload and a full stable sort; it must not call into the
// scoring helpers in retrieval.cpp.

#include <algorithm>
#include <cmath>

#include "navqa/error.hpp"
#include "navqa/retrieval.hpp"

namespace navqa {

std::vector<ScoreBreakdown> oracle_rank(const MemoryBank& bank, const EmbeddingStore& store,
                                        std::span<const double> query,
                                        const RetrievalParams& params) {
  params.validate();
  const std::size_t dim = store.dim();
  if (query.size() != dim) throw Error(ErrorCode::DimMismatch, "query/store dim mismatch");

  std::vector<ScoreBreakdown> all;
  for (const auto& slot : bank.slots()) {
    const std::size_t n = slot.clip_indices.size();
    if (n == 0) continue;

    std::vector<double> z(n, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
      const ClipIndex clip = slot.clip_indices[m];
      double sum = 0.0;
      std::size_t frames = 0;
      for (std::size_t row = 0; row < store.frame_count(); ++row) {
        if (store.key(row).clip_index != clip) continue;
        const float* f = store.payload().data() + row * dim;
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += query[i] * static_cast<double>(f[i]);
        if (dot > 1.0) dot = 1.0;
        if (dot < -1.0) dot = -1.0;
        sum += dot;
        ++frames;
      }
      if (frames == 0) {
        throw Error(ErrorCode::BankStoreMismatch, "clip " + std::to_string(clip) + " not in store");
      }
      z[m] = sum / static_cast<double>(frames);
    }

    double total = 0.0;
    double lo = z[0];
    double hi = z[0];
    for (std::size_t m = 0; m < n; ++m) {
      total += z[m];
      if (z[m] < lo) lo = z[m];
      if (z[m] > hi) hi = z[m];
    }
    double mean = total / static_cast<double>(n);
    if (mean < lo) mean = lo;
    if (mean > hi) mean = hi;
    double s = (1.0 - params.alpha) * mean + params.alpha * hi;
    if (s < mean) s = mean;
    if (s > hi) s = hi;

    for (std::size_t m = 0; m < n; ++m) {
      all.push_back({slot.clip_indices[m], z[m], slot.slot_id, s, z[m] + params.lambda * s});
    }
  }

  std::sort(all.begin(), all.end(),
            [](const ScoreBreakdown& a, const ScoreBreakdown& b) { return a.clip_index < b.clip_index; });
  std::stable_sort(all.begin(), all.end(),
                   [](const ScoreBreakdown& a, const ScoreBreakdown& b) { return a.r > b.r; });
  return all;
}

}  // namespace navqa
