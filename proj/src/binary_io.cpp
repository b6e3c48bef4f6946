#include "dhsketch/binary_io.hpp"

#include <bit>

namespace dhsketch::binary {

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::str(std::string_view s) {
  if (s.size() > UINT32_MAX) throw FormatError("string too long for u32 length prefix");
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s);
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string_view Reader::bytes(std::size_t n) {
  if (n > remaining()) throw FormatError("truncated checkpoint");
  auto out = in_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint64_t Reader::get(int n) {
  auto raw = bytes(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = n - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(raw[static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace dhsketch::binary
