#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "navqa/error.hpp"
#include "navqa/retrieval.hpp"
#include "support/corpus.hpp"

using namespace navqa;
using navqa::testing::make_frame;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected navqa::Error");
  return ErrorCode::IoError;
}

std::vector<double> at(double c) { return {c, std::sqrt(1.0 - c * c)}; }

// Clips A=0, B=1, C=2 with single frames at cosines 0.9, 0.8, 0.2 to [1,0];
// slot 0 = {A, C}, slot 1 = {B}.
struct Abc {
  EmbeddingStore store = EmbeddingStore::from_frames(
      2, {make_frame(0, 0, at(0.9)), make_frame(1, 0, at(0.8)), make_frame(2, 0, at(0.2))});
  MemoryBank bank = navqa::testing::planted_bank(2, {0, 1, 0});
  std::vector<double> query{1.0, 0.0};
};

}  // namespace

TEST_CASE("clip query score") {
  const std::vector<double> q{1.0, 0.0};
  const std::vector<float> two{1.0f, 0.0f, 0.0f, 1.0f};
  CHECK(clip_query_score(q, FrameSet(two, 2)) == 0.5);
  const std::vector<float> same{1.0f, 0.0f};
  CHECK(clip_query_score(q, FrameSet(same, 2)) == 1.0);
  const std::vector<float> swapped{0.0f, 1.0f, 1.0f, 0.0f};
  CHECK(clip_query_score(q, FrameSet(swapped, 2)) == clip_query_score(q, FrameSet(two, 2)));
  CHECK(code_of([&] { clip_query_score(q, FrameSet({}, 2)); }) == ErrorCode::EmptyClip);
  CHECK(code_of([&] { clip_query_score(std::vector<double>{1.0, 0.0, 0.0}, FrameSet(two, 2)); }) ==
        ErrorCode::DimMismatch);
}

TEST_CASE("slot score blend") {
  const std::vector<double> z{0.2, 0.4, 0.6};
  CHECK(slot_score(z, 0.0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(slot_score(z, 1.0) == 0.6);
  CHECK(slot_score(std::vector<double>{0.4, 0.6}, 0.5) == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(code_of([] { slot_score({}, 0.5); }) == ErrorCode::EmptySlotScores);
  CHECK(code_of([&] { slot_score(z, 1.5); }) == ErrorCode::AlphaOutOfRange);
  CHECK(code_of([&] { slot_score(z, -0.1); }) == ErrorCode::AlphaOutOfRange);
}

TEST_CASE("final score") {
  CHECK(final_score(0.5, 0.4, 0.0) == 0.5);
  CHECK(final_score(0.5, 0.4, 1.0) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(final_score(0.5, 0.4, 0.3) == doctest::Approx(0.62).epsilon(1e-15));
  CHECK(code_of([] { final_score(0.5, 0.4, -0.01); }) == ErrorCode::NegativeLambda);
}

TEST_CASE("hand-evaluated three-clip corpus") {
  Abc c;
  const auto result = retrieve(c.bank, c.store, c.query, {0.5, 0.5, 20}, "abc");
  REQUIRE(result.ranked.size() == 3);
  CHECK(result.clip_sequence() == std::vector<ClipIndex>{0, 1, 2});
  // Frames are stored as float, so the cosines carry ~1e-8 rounding.
  const double tol = 1e-6;
  CHECK(std::abs(result.ranked[0].slot_score - 0.725) < tol);
  CHECK(std::abs(result.ranked[1].slot_score - 0.8) < tol);
  CHECK(std::abs(result.ranked[0].r - 1.2625) < tol);
  CHECK(std::abs(result.ranked[1].r - 1.2) < tol);
  CHECK(std::abs(result.ranked[2].r - 0.5625) < tol);
  CHECK(result.ranked[2].slot_id == 0);

  const auto no_boost = retrieve(c.bank, c.store, c.query, {0.5, 0.0, 20});
  CHECK(no_boost.clip_sequence() == std::vector<ClipIndex>{0, 1, 2});
  const auto top1 = retrieve(c.bank, c.store, c.query, {0.5, 0.5, 1});
  CHECK(top1.clip_sequence() == std::vector<ClipIndex>{0});
}

TEST_CASE("boost can reorder clips") {
  // B beats A on relevance, but A's slot mate is strong.
  const auto store = EmbeddingStore::from_frames(
      2, {make_frame(0, 0, at(0.5)), make_frame(1, 0, at(0.55)), make_frame(2, 0, at(0.95))});
  const auto bank = navqa::testing::planted_bank(2, {0, 1, 0});
  const std::vector<double> q{1.0, 0.0};
  CHECK(retrieve(bank, store, q, {0.5, 0.0, 3}).clip_sequence() == std::vector<ClipIndex>{2, 1, 0});
  CHECK(retrieve(bank, store, q, {0.5, 0.3, 3}).clip_sequence() == std::vector<ClipIndex>{2, 0, 1});
}

TEST_CASE("ties break toward the lower clip index") {
  const auto store = EmbeddingStore::from_frames(
      2, {make_frame(0, 0, at(0.5)), make_frame(1, 0, at(0.5))});
  const auto bank = navqa::testing::planted_bank(1, {0, 0});
  const std::vector<double> q{1.0, 0.0};
  CHECK(retrieve(bank, store, q, {}).clip_sequence() == std::vector<ClipIndex>{0, 1});
  const auto oracle = oracle_rank(bank, store, q, {});
  CHECK(oracle[0].clip_index == 0);

  ScoreBreakdown a{3, 0, 0, 0, 0.7};
  ScoreBreakdown b{5, 0, 0, 0, 0.7};
  CHECK(ranks_before(a, b));
  CHECK_FALSE(ranks_before(b, a));
}

TEST_CASE("single clip corpus") {
  const auto store = EmbeddingStore::from_frames(2, {make_frame(7, 0, at(0.1))});
  MemoryBank bank(4);
  bank.append(2, 7, "x", {});
  const std::vector<double> q{1.0, 0.0};
  CHECK(retrieve(bank, store, q, {}).clip_sequence() == std::vector<ClipIndex>{7});
  CHECK(oracle_rank(bank, store, q, {}).front().clip_index == 7);
}

TEST_CASE("retrieve preconditions") {
  Abc c;
  CHECK(code_of([&] { retrieve(c.bank, c.store, std::vector<double>{2.0, 0.0}, {}); }) ==
        ErrorCode::NotNormalized);
  CHECK(code_of([&] { retrieve(c.bank, c.store, std::vector<double>{1.0, 0.0, 0.0}, {}); }) ==
        ErrorCode::DimMismatch);
  CHECK(code_of([&] { retrieve(c.bank, c.store, c.query, {0.5, 0.3, 0}); }) == ErrorCode::InvalidTopK);
  CHECK(code_of([&] { retrieve(c.bank, c.store, c.query, {2.0, 0.3, 5}); }) == ErrorCode::AlphaOutOfRange);
  CHECK(code_of([&] { retrieve(c.bank, c.store, c.query, {0.5, -1.0, 5}); }) == ErrorCode::NegativeLambda);

  auto bank = navqa::testing::planted_bank(2, {0, 1, 0, 1});
  CHECK(code_of([&] { retrieve(bank, c.store, c.query, {}); }) == ErrorCode::BankStoreMismatch);

  const MemoryBank empty(3);
  CHECK(retrieve(empty, c.store, c.query, {}).ranked.empty());
}

TEST_CASE("retrieve matches the oracle on random corpora") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto corpus = navqa::testing::random_corpus(seed);
    for (std::size_t k : {1u, 5u, 20u, 200u}) {
      const RetrievalParams params{0.5, 0.3, k};
      const auto fast = retrieve(corpus.bank, corpus.store, corpus.query, params);
      const auto full = oracle_rank(corpus.bank, corpus.store, corpus.query, params);
      const std::size_t n = std::min(k, full.size());
      REQUIRE(fast.ranked.size() == n);
      for (std::size_t i = 0; i < n; ++i) CHECK(fast.ranked[i] == full[i]);
    }
  }
}

TEST_CASE("evidence frame sampling") {
  std::vector<FrameEmbedding> frames;
  for (std::uint32_t c = 0; c < 3; ++c) {
    for (std::uint32_t f = 0; f < 4; ++f) frames.push_back(make_frame(c, f, at(0.1 * (c + 1))));
  }
  const auto store = EmbeddingStore::from_frames(2, frames);
  const auto bank = navqa::testing::planted_bank(1, {0, 0, 0});
  const auto result = retrieve(bank, store, std::vector<double>{1.0, 0.0}, {0.5, 0.3, 2});
  CHECK(result.clip_sequence() == std::vector<ClipIndex>{2, 1});

  // Union is clip 1 then clip 2 in timeline order, 8 frames in total.
  const auto four = sample_evidence_frames(result, store, 4);
  const std::vector<FrameRef> expected{{1, 1}, {1, 3}, {2, 1}, {2, 3}};
  CHECK(four == expected);
  CHECK(sample_evidence_frames(result, store, 128).size() == 8);
}

TEST_CASE("report json") {
  Abc c;
  const auto j = to_json(retrieve(c.bank, c.store, c.query, {0.5, 0.5, 2}, "q7"));
  CHECK(j["query_id"] == "q7");
  REQUIRE(j["ranked"].size() == 2);
  CHECK(j["ranked"][0]["clip_index"] == 0);
  CHECK(j["ranked"][0].contains("z"));
  CHECK(j["ranked"][0].contains("slot_score"));
  CHECK(j["ranked"][0].contains("r"));
}
