#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace navqa {

using ClipIndex = std::uint32_t;

/// Returns v / ||v||_2 computed in double precision. Throws ZeroVector when
/// ||v||_2 < 1e-12.
std::vector<double> l2_normalize(std::span<const double> v);

/// Dot product of two unit vectors with double accumulation in index order,
/// clamped to [-1, 1]. Throws DimMismatch.
double cosine(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const double> a, std::span<const float> b);
double cosine(std::span<const float> a, std::span<const float> b);

struct FrameEmbedding {
  ClipIndex clip_index = 0;
  std::uint32_t frame_index = 0;
  std::vector<float> vector;
};

struct FrameKey {
  ClipIndex clip_index = 0;
  std::uint32_t frame_index = 0;
  friend bool operator==(const FrameKey&, const FrameKey&) = default;
};

// Non-owning view over the frame vectors of one clip, in frame order.
class FrameSet {
 public:
  FrameSet(std::span<const float> data, std::size_t dim);

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return size() == 0; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> operator[](std::size_t i) const { return data_.subspan(i * dim_, dim_); }

 private:
  std::span<const float> data_;
  std::size_t dim_;
};

/// Normalized mean of a clip's frame vectors (double accumulation).
std::vector<double> mean_frame_vector(const FrameSet& frames);

/// Immutable collection of unit-norm frame embeddings grouped by clip.
///
/// Frames are kept sorted by (clip_index, frame_index) so every clip owns a
/// contiguous row range. Vectors are stored as 32-bit floats exactly as they
/// will be written to disk.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  /// Validates and normalizes `frames`. A vector already within 1e-6 of unit
  /// norm is kept bit-for-bit; others are normalized in double and rounded to
  /// float. Throws DimMismatch, ZeroVector or DuplicateFrame.
  static EmbeddingStore from_frames(std::uint32_t dim, std::vector<FrameEmbedding> frames);

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t frame_count() const noexcept { return keys_.size(); }
  std::size_t clip_count() const noexcept { return ranges_.size(); }
  bool empty() const noexcept { return keys_.empty(); }

  bool has_clip(ClipIndex clip) const { return ranges_.contains(clip); }
  std::vector<ClipIndex> clip_indices() const;

  /// Throws UnknownClip.
  FrameSet clip_frame_set(ClipIndex clip) const;

  const FrameKey& key(std::size_t row) const { return keys_.at(row); }
  std::span<const float> vector(std::size_t row) const {
    return std::span<const float>(data_).subspan(row * dim_, dim_);
  }
  std::span<const float> payload() const noexcept { return data_; }

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  struct Range {
    std::size_t begin = 0;
    std::size_t count = 0;
    friend bool operator==(const Range&, const Range&) = default;
  };

  std::uint32_t dim_ = 0;
  std::vector<float> data_;
  std::vector<FrameKey> keys_;
  std::map<ClipIndex, Range> ranges_;
};

inline FrameSet clip_frame_set(const EmbeddingStore& store, ClipIndex clip) {
  return store.clip_frame_set(clip);
}

// NAVQ binary format, little-endian:
//   "NAVQ" | version u32 (=1) | dim u32 | count u64 |
//   count x (clip_index u32 | frame_index u32 | dim x f32)
inline constexpr char kEmbeddingMagic[4] = {'N', 'A', 'V', 'Q'};
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

EmbeddingStore load_embedding_file(const std::filesystem::path& path);
EmbeddingStore parse_embedding_bytes(std::span<const std::byte> bytes);
std::vector<std::byte> serialize_embedding_store(const EmbeddingStore& store);
void write_embedding_file(const EmbeddingStore& store, const std::filesystem::path& path);

/// One line of the clip manifest (JSON Lines).
struct ClipRecord {
  ClipIndex clip_index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string description;
  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

std::vector<ClipRecord> load_clip_manifest(const std::filesystem::path& path);
void write_clip_manifest(const std::vector<ClipRecord>& clips, const std::filesystem::path& path);

/// Throws BankStoreMismatch naming the first manifest clip without frames.
void check_manifest_coverage(const EmbeddingStore& store, const std::vector<ClipRecord>& clips);

}  // namespace navqa
