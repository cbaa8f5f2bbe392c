#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace atlt {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xCBF29CE484222325ull);
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed = 0xCBF29CE484222325ull);

// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

// Incremental FNV-1a over heterogenous values. Used for config, dataset and
// checkpoint identity, not for security.
class Digest {
 public:
  Digest& bytes(const void* data, std::size_t n);
  Digest& text(std::string_view s) { return bytes(s.data(), s.size()); }
  template <typename T>
  Digest& pod(const T& v) {
    return bytes(&v, sizeof(T));
  }
  std::uint64_t value() const { return state_; }
  std::string hex() const { return hex64(state_); }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ull;
};

}  // namespace atlt
