#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "navqa/embedding_store.hpp"
#include "navqa/error.hpp"
#include "support/corpus.hpp"
#include "support/navq_bytes.hpp"

using namespace navqa;
using navqa::testing::NavqBytes;
using navqa::testing::TempDir;

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

EmbeddingStore parse(const NavqBytes& b) { return parse_embedding_bytes(b.bytes()); }

}  // namespace

TEST_CASE("l2_normalize") {
  const auto v = l2_normalize(std::vector<double>{3.0, 4.0});
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-15));

  const auto e = l2_normalize(std::vector<double>{1.0, 0.0});
  CHECK(e == std::vector<double>{1.0, 0.0});

  CHECK(code_of([] { l2_normalize(std::vector<double>{0.0, 0.0}); }) == ErrorCode::ZeroVector);
}

TEST_CASE("l2_normalize is invariant to positive scaling") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> comp(-5.0, 5.0);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(16);
    for (auto& x : v) x = comp(rng);
    std::vector<double> cv = v;
    const double c = scale(rng);
    for (auto& x : cv) x *= c;
    const auto a = l2_normalize(v);
    const auto b = l2_normalize(cv);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);
  }
}

TEST_CASE("cosine") {
  const std::vector<double> x{1.0, 0.0};
  const std::vector<double> y{0.0, 1.0};
  const std::vector<double> d{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
  CHECK(cosine(x, x) == 1.0);
  CHECK(cosine(x, y) == 0.0);
  CHECK(cosine(d, x) == doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK(code_of([&] { cosine(x, std::vector<double>{1.0, 0.0, 0.0}); }) == ErrorCode::DimMismatch);
}

TEST_CASE("hand-built file loads") {
  TempDir dir;
  const auto path = dir / "two.navq";
  NavqBytes()
      .header(4, 2)
      .record(0, 0, {1.0f, 0.0f, 0.0f, 0.0f})
      .record(0, 1, {0.0f, 0.0f, 0.6f, 0.8f})
      .write(path);
  const auto store = load_embedding_file(path);
  CHECK(store.dim() == 4);
  CHECK(store.frame_count() == 2);
  CHECK(store.clip_count() == 1);
  const auto frames = store.clip_frame_set(0);
  REQUIRE(frames.size() == 2);
  CHECK(frames[1][2] == 0.6f);
  CHECK(frames[1][3] == 0.8f);
}

TEST_CASE("non-unit vectors are normalized at ingestion") {
  const auto store = parse(NavqBytes().header(2, 1).record(3, 0, {3.0f, 4.0f}));
  const auto v = store.vector(0);
  CHECK(v[0] == static_cast<float>(0.6));
  CHECK(v[1] == static_cast<float>(0.8));
  for (std::size_t r = 0; r < store.frame_count(); ++r) {
    double n2 = 0.0;
    for (float x : store.vector(r)) n2 += static_cast<double>(x) * x;
    CHECK(std::abs(std::sqrt(n2) - 1.0) <= 1e-6);
  }
}

TEST_CASE("corrupted and truncated files") {
  CHECK(code_of([] { parse_embedding_bytes({}); }) == ErrorCode::BadMagic);
  CHECK(code_of([] { parse(NavqBytes().raw("NAVX", 4).u32(1).u32(2).u64(0)); }) ==
        ErrorCode::BadMagic);
  CHECK(code_of([] { parse(NavqBytes().header(2, 0, 2)); }) == ErrorCode::VersionUnsupported);
  CHECK(code_of([] { parse(NavqBytes().header(0, 0)); }) == ErrorCode::DimMismatch);
  CHECK(code_of([] { parse(NavqBytes().raw("NAVQ", 4).u32(1).u32(2)); }) == ErrorCode::TruncatedFile);

  NavqBytes three_declared;
  three_declared.header(2, 3).record(0, 0, {1.0f, 0.0f}).record(0, 1, {0.0f, 1.0f});
  CHECK(code_of([&] { parse(three_declared); }) == ErrorCode::TruncatedFile);

  NavqBytes cut;
  cut.header(2, 1).u32(0).u32(0).f32(1.0f);
  CHECK(code_of([&] { parse(cut); }) == ErrorCode::TruncatedFile);

  NavqBytes trailing;
  trailing.header(2, 1).record(0, 0, {1.0f, 0.0f}).u32(0xdeadbeef);
  CHECK(code_of([&] { parse(trailing); }) == ErrorCode::TrailingData);

  NavqBytes zero;
  zero.header(2, 1).record(0, 0, {0.0f, 0.0f});
  CHECK(code_of([&] { parse(zero); }) == ErrorCode::ZeroVector);

  NavqBytes dup;
  dup.header(2, 2).record(1, 0, {1.0f, 0.0f}).record(1, 0, {0.0f, 1.0f});
  CHECK(code_of([&] { parse(dup); }) == ErrorCode::DuplicateFrame);
}

TEST_CASE("round trip of 100 seeded vectors is byte-identical") {
  std::mt19937_64 rng(20240601);
  std::vector<FrameEmbedding> frames;
  for (std::uint32_t i = 0; i < 100; ++i) {
    frames.push_back(navqa::testing::make_frame(i / 7, i % 7, navqa::testing::random_unit(24, rng)));
  }
  const auto store = EmbeddingStore::from_frames(24, frames);
  TempDir dir;
  write_embedding_file(store, dir / "a.navq");
  const auto loaded = load_embedding_file(dir / "a.navq");
  CHECK(loaded == store);
  write_embedding_file(loaded, dir / "b.navq");

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto a = slurp(dir / "a.navq");
  CHECK(a == slurp(dir / "b.navq"));
  CHECK(a.size() == 20 + 100 * (8 + 24 * 4));
  // The first payload float equals what was ingested, bit for bit.
  float first = 0.0f;
  std::memcpy(&first, a.data() + 20 + 8, 4);
  CHECK(std::bit_cast<std::uint32_t>(first) == std::bit_cast<std::uint32_t>(store.vector(0)[0]));
}

TEST_CASE("serializer agrees with the hand-assembled layout") {
  const auto store = EmbeddingStore::from_frames(
      2, {navqa::testing::make_frame(5, 1, std::vector<double>{0.0, 1.0}),
          navqa::testing::make_frame(5, 0, std::vector<double>{0.6, 0.8})});
  NavqBytes expected;
  expected.header(2, 2)
      .record(5, 0, {static_cast<float>(0.6), static_cast<float>(0.8)})
      .record(5, 1, {0.0f, 1.0f});
  CHECK(serialize_embedding_store(store) == expected.bytes());
}

TEST_CASE("write edge cases") {
  TempDir dir;
  const auto one = EmbeddingStore::from_frames(1, {navqa::testing::make_frame(0, 0, std::vector<double>{1.0})});
  write_embedding_file(one, dir / "one.navq");
  CHECK(std::filesystem::file_size(dir / "one.navq") == 20 + 8 + 4);

  CHECK(code_of([&] { write_embedding_file(one, dir / "missing" / "x.navq"); }) == ErrorCode::IoError);
  CHECK(code_of([&] { write_embedding_file(EmbeddingStore{}, dir / "e.navq"); }) == ErrorCode::EmptyStore);
  CHECK(code_of([&] { load_embedding_file(dir / "absent.navq"); }) == ErrorCode::IoError);
}

TEST_CASE("clip frame sets") {
  const auto store = EmbeddingStore::from_frames(
      2, {navqa::testing::make_frame(1, 0, std::vector<double>{1.0, 0.0}),
          navqa::testing::make_frame(1, 1, std::vector<double>{0.0, 1.0}),
          navqa::testing::make_frame(4, 0, std::vector<double>{0.6, 0.8})});
  const auto two = clip_frame_set(store, 1);
  REQUIRE(two.size() == 2);
  CHECK(two[0][0] == 1.0f);
  CHECK(two[1][1] == 1.0f);
  CHECK(clip_frame_set(store, 4).size() == 1);
  CHECK(code_of([&] { clip_frame_set(store, 999); }) == ErrorCode::UnknownClip);
  CHECK(store.clip_indices() == std::vector<ClipIndex>{1, 4});
}

TEST_CASE("from_frames rejects mismatched dimensions") {
  CHECK(code_of([] {
          EmbeddingStore::from_frames(3, {navqa::testing::make_frame(0, 0, std::vector<double>{1.0, 0.0})});
        }) == ErrorCode::DimMismatch);
}

TEST_CASE("clip manifest round trip and coverage") {
  TempDir dir;
  const std::vector<ClipRecord> clips = {{0, 0.0, 10.0, "A woman walks a dog"},
                                         {1, 10.0, 20.0, "The dog \"barks\"\nat night"}};
  write_clip_manifest(clips, dir / "m.jsonl");
  CHECK(load_clip_manifest(dir / "m.jsonl") == clips);

  const auto store = EmbeddingStore::from_frames(1, {navqa::testing::make_frame(0, 0, std::vector<double>{1.0})});
  CHECK(code_of([&] { check_manifest_coverage(store, clips); }) == ErrorCode::BankStoreMismatch);

  std::ofstream(dir / "bad.jsonl") << "{\"clip_index\": 0, \"start_s\": \"x\"}\n";
  CHECK(code_of([&] { load_clip_manifest(dir / "bad.jsonl"); }) == ErrorCode::SchemaError);
}
