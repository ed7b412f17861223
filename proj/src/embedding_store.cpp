#include "navqa/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "navqa/error.hpp"

namespace navqa {

namespace {

constexpr double kMinNorm = 1e-12;
constexpr double kUnitTolerance = 1e-6;

template <class A, class B>
double dot_clamped(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimMismatch,
                "cosine of vectors with " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()) + " components");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return std::clamp(dot, -1.0, 1.0);
}

template <class T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return value;
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  template <class T>
  T read(const char* what) {
    if (remaining() < sizeof(T)) {
      throw Error(ErrorCode::TruncatedFile, std::string("file ends inside ") + what);
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(value);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

template <class T>
void append(std::vector<std::byte>& out, T value) {
  value = to_little(value);
  const auto* p = reinterpret_cast<const std::byte*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

void normalize_in_place(std::vector<float>& v, const FrameKey& key) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * static_cast<double>(x);
  const double norm = std::sqrt(sq);
  if (!(norm >= kMinNorm)) {
    throw Error(ErrorCode::ZeroVector, "frame " + std::to_string(key.frame_index) + " of clip " +
                                           std::to_string(key.clip_index) + " has zero norm");
  }
  if (std::abs(norm - 1.0) <= kUnitTolerance) return;
  for (float& x : v) x = static_cast<float>(static_cast<double>(x) / norm);
}

}  // namespace

std::vector<double> l2_normalize(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (v.empty() || !(norm >= kMinNorm)) {
    throw Error(ErrorCode::ZeroVector, "cannot normalize a vector with norm below 1e-12");
  }
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [norm](double x) { return x / norm; });
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) { return dot_clamped(a, b); }
double cosine(std::span<const double> a, std::span<const float> b) { return dot_clamped(a, b); }
double cosine(std::span<const float> a, std::span<const float> b) { return dot_clamped(a, b); }

FrameSet::FrameSet(std::span<const float> data, std::size_t dim) : data_(data), dim_(dim) {
  if (dim == 0 || data.size() % dim != 0) {
    throw Error(ErrorCode::DimMismatch, "frame buffer is not a whole number of vectors");
  }
}

std::vector<double> mean_frame_vector(const FrameSet& frames) {
  if (frames.empty()) throw Error(ErrorCode::EmptyClip, "clip has no frames");
  std::vector<double> sum(frames.dim(), 0.0);
  for (std::size_t j = 0; j < frames.size(); ++j) {
    const auto f = frames[j];
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += f[i];
  }
  for (double& x : sum) x /= static_cast<double>(frames.size());
  return l2_normalize(sum);
}

EmbeddingStore EmbeddingStore::from_frames(std::uint32_t dim, std::vector<FrameEmbedding> frames) {
  if (dim == 0) throw Error(ErrorCode::DimMismatch, "embedding dimension must be positive");

  std::stable_sort(frames.begin(), frames.end(), [](const auto& a, const auto& b) {
    return std::tie(a.clip_index, a.frame_index) < std::tie(b.clip_index, b.frame_index);
  });

  EmbeddingStore store;
  store.dim_ = dim;
  store.data_.reserve(frames.size() * dim);
  store.keys_.reserve(frames.size());
  for (auto& frame : frames) {
    const FrameKey key{frame.clip_index, frame.frame_index};
    if (frame.vector.size() != dim) {
      throw Error(ErrorCode::DimMismatch, "frame " + std::to_string(key.frame_index) + " of clip " +
                                              std::to_string(key.clip_index) + " has " +
                                              std::to_string(frame.vector.size()) +
                                              " components, store dim is " + std::to_string(dim));
    }
    if (!store.keys_.empty() && store.keys_.back() == key) {
      throw Error(ErrorCode::DuplicateFrame, "frame " + std::to_string(key.frame_index) +
                                                 " of clip " + std::to_string(key.clip_index) +
                                                 " appears twice");
    }
    normalize_in_place(frame.vector, key);

    auto [it, inserted] = store.ranges_.try_emplace(key.clip_index, Range{store.keys_.size(), 0});
    ++it->second.count;
    store.keys_.push_back(key);
    store.data_.insert(store.data_.end(), frame.vector.begin(), frame.vector.end());
  }
  return store;
}

std::vector<ClipIndex> EmbeddingStore::clip_indices() const {
  std::vector<ClipIndex> out;
  out.reserve(ranges_.size());
  for (const auto& [clip, range] : ranges_) out.push_back(clip);
  return out;
}

FrameSet EmbeddingStore::clip_frame_set(ClipIndex clip) const {
  const auto it = ranges_.find(clip);
  if (it == ranges_.end()) {
    throw Error(ErrorCode::UnknownClip, "clip " + std::to_string(clip) + " has no embeddings");
  }
  const auto [begin, count] = it->second;
  return FrameSet(std::span<const float>(data_).subspan(begin * dim_, count * dim_), dim_);
}

EmbeddingStore parse_embedding_bytes(std::span<const std::byte> bytes) {
  if (bytes.size() < sizeof(kEmbeddingMagic) ||
      std::memcmp(bytes.data(), kEmbeddingMagic, sizeof(kEmbeddingMagic)) != 0) {
    throw Error(ErrorCode::BadMagic, "missing NAVQ header");
  }
  ByteReader reader(bytes.subspan(sizeof(kEmbeddingMagic)));
  const auto version = reader.read<std::uint32_t>("header version");
  if (version != kEmbeddingFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported, "format version " + std::to_string(version));
  }
  const auto dim = reader.read<std::uint32_t>("header dim");
  const auto count = reader.read<std::uint64_t>("header count");
  if (dim == 0) throw Error(ErrorCode::DimMismatch, "header declares dim 0");

  const std::uint64_t record_size = 8 + std::uint64_t{dim} * 4;
  if (count > reader.remaining() / record_size) {
    throw Error(ErrorCode::TruncatedFile, "header declares " + std::to_string(count) +
                                              " records but only " +
                                              std::to_string(reader.remaining() / record_size) +
                                              " are present");
  }

  std::vector<FrameEmbedding> frames(count);
  for (auto& frame : frames) {
    frame.clip_index = reader.read<std::uint32_t>("record clip_index");
    frame.frame_index = reader.read<std::uint32_t>("record frame_index");
    frame.vector.resize(dim);
    for (float& x : frame.vector) x = reader.read<float>("record vector");
  }
  if (reader.remaining() != 0) {
    throw Error(ErrorCode::TrailingData,
                std::to_string(reader.remaining()) + " bytes after the last record");
  }
  return EmbeddingStore::from_frames(dim, std::move(frames));
}

EmbeddingStore load_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_embedding_bytes(std::as_bytes(std::span(raw)));
}

std::vector<std::byte> serialize_embedding_store(const EmbeddingStore& store) {
  std::vector<std::byte> out;
  out.reserve(20 + store.frame_count() * (8 + 4 * std::size_t{store.dim()}));
  const auto* magic = reinterpret_cast<const std::byte*>(kEmbeddingMagic);
  out.insert(out.end(), magic, magic + sizeof(kEmbeddingMagic));
  append<std::uint32_t>(out, kEmbeddingFormatVersion);
  append<std::uint32_t>(out, store.dim());
  append<std::uint64_t>(out, store.frame_count());
  for (std::size_t row = 0; row < store.frame_count(); ++row) {
    append<std::uint32_t>(out, store.key(row).clip_index);
    append<std::uint32_t>(out, store.key(row).frame_index);
    for (float x : store.vector(row)) append<float>(out, x);
  }
  return out;
}

void write_embedding_file(const EmbeddingStore& store, const std::filesystem::path& path) {
  if (store.empty()) throw Error(ErrorCode::EmptyStore, "refusing to write an empty store");
  const auto bytes = serialize_embedding_store(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<ClipRecord> load_clip_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<ClipRecord> clips;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ClipRecord clip;
      clip.clip_index = j.at("clip_index").get<ClipIndex>();
      clip.start_s = j.at("start_s").get<double>();
      clip.end_s = j.at("end_s").get<double>();
      clip.description = j.at("description").get<std::string>();
      clips.push_back(std::move(clip));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaError,
                  path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return clips;
}

void write_clip_manifest(const std::vector<ClipRecord>& clips, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  for (const auto& clip : clips) {
    nlohmann::ordered_json j;
    j["clip_index"] = clip.clip_index;
    j["start_s"] = clip.start_s;
    j["end_s"] = clip.end_s;
    j["description"] = clip.description;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void check_manifest_coverage(const EmbeddingStore& store, const std::vector<ClipRecord>& clips) {
  for (const auto& clip : clips) {
    if (!store.has_clip(clip.clip_index)) {
      throw Error(ErrorCode::BankStoreMismatch,
                  "manifest clip " + std::to_string(clip.clip_index) + " has no frame embeddings");
    }
  }
}

}  // namespace navqa
