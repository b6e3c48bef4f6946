#pragma once

// Little-endian encode/decode helpers shared by the checkpoint formats.

#include <cstdint>
#include <string>
#include <string_view>

#include "dhsketch/errors.hpp"

namespace dhsketch::binary {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f64(double v);
  void bytes(std::string_view b) { out_.append(b); }
  /// u32 length prefix followed by the raw bytes.
  void str(std::string_view s);

  const std::string& data() const& { return out_; }
  std::string take() && { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  double f64();
  std::string_view bytes(std::size_t n);
  std::string str() { return std::string(bytes(u32())); }

  std::size_t remaining() const noexcept { return in_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  void expect_end() const {
    if (remaining() != 0) throw FormatError("trailing bytes in checkpoint");
  }

 private:
  std::uint64_t get(int n);
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace dhsketch::binary
