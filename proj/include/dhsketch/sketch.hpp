#pragma once

// Count-min and count-sketch point-query summaries over byte-string keys.
//
// Both keep a depth x width table of 64-bit counters, one seeded hash per row.
// Row seeds come from derive_row_seed(master_seed, row), so a sketch is fully
// reproduced by (width, depth, master_seed) plus the ingested stream.
//
// Checkpoint layout (all integers little-endian):
//   magic[4] ("CMS1" or "CSK1") | u32 version | u64 width | u64 depth |
//   u64 master_seed | depth*width x 64-bit counters, row-major

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dhsketch/hashing.hpp"

namespace dhsketch {

struct SketchConfig {
  std::uint64_t width = 1;
  std::uint64_t depth = 1;
  std::uint64_t master_seed = 0;

  void validate() const;
  bool operator==(const SketchConfig&) const = default;
};

/// Number of counters a sketch with this configuration holds.
constexpr std::uint64_t sketch_memory_cells(const SketchConfig& config) noexcept {
  return config.width * config.depth;
}

inline constexpr std::uint32_t kSketchFormatVersion = 1;

class CountMinSketch {
 public:
  explicit CountMinSketch(const SketchConfig& config);

  /// Adds `weight` to the key's cell in every row. Throws OverflowError (and
  /// poisons the sketch) instead of wrapping; the table is left untouched.
  void update(std::string_view key, std::uint64_t weight);

  /// update() followed by estimate(), hashing the key once.
  std::uint64_t update_and_estimate(std::string_view key, std::uint64_t weight);

  /// Minimum of the key's cells over all rows. Never below the true count.
  std::uint64_t estimate(std::string_view key) const;

  const SketchConfig& config() const noexcept { return config_; }
  std::uint64_t width() const noexcept { return config_.width; }
  std::uint64_t depth() const noexcept { return config_.depth; }
  std::span<const std::uint64_t> row(std::uint64_t r) const;
  const HashFunction& row_hash(std::uint64_t r) const { return hashes_.at(r); }
  bool poisoned() const noexcept { return poisoned_; }

  std::string serialize() const;
  static CountMinSketch deserialize(std::string_view blob);

  bool operator==(const CountMinSketch& other) const {
    return config_ == other.config_ && table_ == other.table_;
  }

 private:
  SketchConfig config_;
  std::vector<HashFunction> hashes_;
  std::vector<std::uint64_t> table_;
  bool poisoned_ = false;
};

class CountSketch {
 public:
  explicit CountSketch(const SketchConfig& config);

  /// Adds sign_r(key) * weight to the key's cell in every row.
  void update(std::string_view key, std::uint64_t weight);
  std::int64_t update_and_estimate(std::string_view key, std::uint64_t weight);

  /// Median over rows of sign_r(key) * cell. For even depth the lower of the
  /// two middle values is returned.
  std::int64_t estimate(std::string_view key) const;

  const SketchConfig& config() const noexcept { return config_; }
  std::uint64_t width() const noexcept { return config_.width; }
  std::uint64_t depth() const noexcept { return config_.depth; }
  std::span<const std::int64_t> row(std::uint64_t r) const;
  const HashFunction& row_hash(std::uint64_t r) const { return hashes_.at(r); }
  const SignFunction& row_sign(std::uint64_t r) const { return signs_.at(r); }
  bool poisoned() const noexcept { return poisoned_; }

  std::string serialize() const;
  static CountSketch deserialize(std::string_view blob);

  bool operator==(const CountSketch& other) const {
    return config_ == other.config_ && table_ == other.table_;
  }

 private:
  SketchConfig config_;
  std::vector<HashFunction> hashes_;
  std::vector<SignFunction> signs_;
  std::vector<std::int64_t> table_;
  bool poisoned_ = false;
};

/// Seed of the sign hash for row `row`; distinct from the index hash seed.
constexpr std::uint64_t derive_sign_seed(std::uint64_t master_seed, std::uint64_t row) noexcept {
  return derive_row_seed(derive_seed(master_seed, 0x5167), row);
}

}  // namespace dhsketch
