#pragma once

// Hand-assembled NAVQ byte streams, written field by field without going
// through the library serializer.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace navqa::testing {

class NavqBytes {
 public:
  NavqBytes& raw(const char* text, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) bytes_.push_back(static_cast<std::byte>(text[i]));
    return *this;
  }
  NavqBytes& u32(std::uint32_t v) { return little(v, 4); }
  NavqBytes& u64(std::uint64_t v) { return little(v, 8); }
  NavqBytes& f32(float v) { return u32(std::bit_cast<std::uint32_t>(v)); }

  NavqBytes& header(std::uint32_t dim, std::uint64_t count, std::uint32_t version = 1) {
    return raw("NAVQ", 4).u32(version).u32(dim).u64(count);
  }
  NavqBytes& record(std::uint32_t clip, std::uint32_t frame, const std::vector<float>& v) {
    u32(clip).u32(frame);
    for (float x : v) f32(x);
    return *this;
  }

  const std::vector<std::byte>& bytes() const { return bytes_; }
  std::size_t size() const { return bytes_.size(); }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
  }

 private:
  NavqBytes& little(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
    return *this;
  }

  std::vector<std::byte> bytes_;
};

}  // namespace navqa::testing
