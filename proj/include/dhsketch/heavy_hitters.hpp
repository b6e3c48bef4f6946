#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dhsketch/binary_io.hpp"
#include "dhsketch/types.hpp"

namespace dhsketch {

struct HeavyHitterParams {
  std::uint64_t k = 2;         // heaviness: estimate must exceed total / k
  std::uint64_t capacity = 1;  // unique buckets available

  void validate() const;
};

/// Keys whose estimate strictly exceeds total_weight / k, ordered by estimate
/// descending then key ascending, truncated to min(k - 1, capacity).
std::vector<std::string> detect_heavy_hitters(const FrequencyMap& estimates, std::uint64_t total_weight,
                                              const HeavyHitterParams& params);

/// Exact counters for isolated heavy hitters ("unique buckets"). A zero
/// capacity table is valid and admits nothing (a sketch with no isolation).
class HeavyHitterTable {
 public:
  explicit HeavyHitterTable(std::uint64_t capacity);

  /// Throws CapacityError when full and ContractError on a duplicate key.
  void admit(std::string_view key, std::uint64_t initial_count);

  /// Throws ContractError if the key was never admitted.
  void record(std::string_view key, std::uint64_t weight);

  /// Removes the key and returns its counter.
  std::uint64_t evict(std::string_view key);

  bool contains(std::string_view key) const { return find(key) != entries_.end(); }
  std::optional<std::uint64_t> count(std::string_view key) const;

  /// Pointer to the key's counter, or nullptr. Valid until the next admit/evict.
  std::uint64_t* counter(std::string_view key);

  std::uint64_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool full() const noexcept { return entries_.size() >= capacity_; }

  /// Entries sorted by key.
  std::vector<std::pair<std::string, std::uint64_t>> sorted_entries() const;

  /// u64 capacity | u64 n | n x (u32 key length | key bytes | u64 counter), keys sorted
  void serialize(binary::Writer& out) const;
  static HeavyHitterTable deserialize(binary::Reader& in);

  bool operator==(const HeavyHitterTable& other) const {
    return capacity_ == other.capacity_ && entries_ == other.entries_;
  }

 private:
  using Map = std::unordered_map<std::string, std::uint64_t, StringHash, std::equal_to<>>;
  Map::const_iterator find(std::string_view key) const { return entries_.find(key); }

  std::uint64_t capacity_;
  Map entries_;
};

}  // namespace dhsketch
