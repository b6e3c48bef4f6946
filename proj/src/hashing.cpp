#include "dhsketch/hashing.hpp"

#include <cstring>
#include <stdexcept>

namespace dhsketch {

namespace {

std::uint64_t load_le64(const unsigned char* p) noexcept {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

std::uint64_t hash_bytes(std::string_view key, std::uint64_t seed) noexcept {
  constexpr std::uint64_t m = 0xC6A4A7935BD1E995ULL;
  constexpr int r = 47;

  const auto* data = reinterpret_cast<const unsigned char*>(key.data());
  const std::size_t len = key.size();
  std::uint64_t h = seed ^ (len * m);

  const std::size_t blocks = len / 8;
  for (std::size_t i = 0; i < blocks; ++i) {
    std::uint64_t k = load_le64(data + 8 * i);
    k *= m;
    k ^= k >> r;
    k *= m;
    h ^= k;
    h *= m;
  }

  const unsigned char* tail = data + 8 * blocks;
  switch (len & 7) {
    case 7: h ^= std::uint64_t{tail[6]} << 48; [[fallthrough]];
    case 6: h ^= std::uint64_t{tail[5]} << 40; [[fallthrough]];
    case 5: h ^= std::uint64_t{tail[4]} << 32; [[fallthrough]];
    case 4: h ^= std::uint64_t{tail[3]} << 24; [[fallthrough]];
    case 3: h ^= std::uint64_t{tail[2]} << 16; [[fallthrough]];
    case 2: h ^= std::uint64_t{tail[1]} << 8; [[fallthrough]];
    case 1:
      h ^= std::uint64_t{tail[0]};
      h *= m;
  }

  h ^= h >> r;
  h *= m;
  h ^= h >> r;
  // Murmur alone leaves short keys with weak high bits for a seed-only change.
  return mix64(h ^ seed);
}

HashFunction::HashFunction(std::uint64_t seed, std::uint64_t width) : seed_(seed), width_(width) {
  if (width == 0) throw std::invalid_argument("hash width must be >= 1");
}

std::string integer_key(std::uint64_t id) {
  std::string key(8, '\0');
  for (int i = 7; i >= 0; --i) {
    key[static_cast<std::size_t>(i)] = static_cast<char>(id & 0xFF);
    id >>= 8;
  }
  return key;
}

}  // namespace dhsketch
