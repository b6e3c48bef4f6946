#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dhsketch {

/// Seeded 64-bit hash of an arbitrary byte string (MurmurHash64A body with a
/// splitmix64 finalizer). Stable across platforms: words are read little-endian.
std::uint64_t hash_bytes(std::string_view key, std::uint64_t seed) noexcept;

/// splitmix64 output function.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for row `row` of a sketch built from `master_seed`.
/// row_seed = mix64(master_seed ^ mix64(row + 1)).
constexpr std::uint64_t derive_row_seed(std::uint64_t master_seed, std::uint64_t row) noexcept {
  return mix64(master_seed ^ mix64(row + 1));
}

/// Seeds a sub-structure (first pass, inner sketch, sign family) from a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t salt) noexcept {
  return mix64(master_seed + 0xA24BAED4963EE407ULL * (salt + 1));
}

/// Maps a 64-bit digest onto [0, width) by multiply-shift.
constexpr std::uint64_t fast_range(std::uint64_t digest, std::uint64_t width) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(digest) * width) >> 64);
}

/// Maps keys to buckets in [0, width).
class HashFunction {
 public:
  HashFunction(std::uint64_t seed, std::uint64_t width);

  std::uint64_t operator()(std::string_view key) const noexcept { return fast_range(hash_bytes(key, seed_), width_); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t width() const noexcept { return width_; }

 private:
  std::uint64_t seed_;
  std::uint64_t width_;
};

/// Maps keys to -1 or +1.
class SignFunction {
 public:
  explicit SignFunction(std::uint64_t seed) : seed_(seed) {}

  int operator()(std::string_view key) const noexcept {
    return (hash_bytes(key, seed_) >> 63) != 0 ? 1 : -1;
  }

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

inline std::uint64_t hash_index(const HashFunction& h, std::string_view key) noexcept { return h(key); }
inline int hash_sign(const SignFunction& g, std::string_view key) noexcept { return g(key); }

/// Canonical byte-string key for an integer element id: 8 bytes, big-endian.
std::string integer_key(std::uint64_t id);

}  // namespace dhsketch
