#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "dhsketch/types.hpp"

namespace dhsketch {

/// Byte accounting used to put every algorithm on the same memory axis. This is
/// an accounting rule, not the physical layout (counters are 64-bit in memory).
struct MemoryModel {
  static constexpr std::uint64_t kBytesPerSharedBucket = 4;
  static constexpr std::uint64_t kBytesPerUniqueBucket = 8;
};

constexpr std::uint64_t memory_bytes(std::uint64_t inner_cells, std::uint64_t unique_buckets) noexcept {
  return MemoryModel::kBytesPerSharedBucket * inner_cells + MemoryModel::kBytesPerUniqueBucket * unique_buckets;
}

/// Widest row length that fits `budget_bytes` at `depth` rows after reserving
/// `unique_buckets`. Zero when not even a single column fits.
constexpr std::uint64_t width_for_budget(std::uint64_t budget_bytes, std::uint64_t depth,
                                         std::uint64_t unique_buckets) noexcept {
  if (depth == 0) return 0;
  const auto reserved = MemoryModel::kBytesPerUniqueBucket * unique_buckets;
  if (reserved >= budget_bytes) return 0;
  return (budget_bytes - reserved) / (MemoryModel::kBytesPerSharedBucket * depth);
}

enum class Metric {
  kPerItem,   // mean |est - f| over distinct keys
  kWeighted,  // sum f * |est - f| / sum f
};

std::string_view metric_name(Metric m) noexcept;
Metric parse_metric(std::string_view name);

/// Running form of avg_error() for callers that produce estimates one key at a time.
class ErrorAccumulator {
 public:
  void add(std::int64_t estimate, std::uint64_t truth) noexcept;
  std::size_t count() const noexcept { return n_; }
  /// Throws std::invalid_argument when nothing was added.
  double result(Metric metric) const;

 private:
  // long double keeps the sums exact well past 2^53 total mass.
  long double abs_sum_ = 0;
  long double weighted_sum_ = 0;
  long double mass_ = 0;
  std::size_t n_ = 0;
};

/// Average absolute frequency error of `estimates` against `truth`, over the
/// keys of `truth`. Throws std::invalid_argument for an empty truth map or a
/// truth key without an estimate.
double avg_error(const EstimateMap& estimates, const FrequencyMap& truth, Metric metric);

}  // namespace dhsketch
