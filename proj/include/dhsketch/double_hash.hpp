#pragma once

// Double hashing: a count-min first pass over a stream prefix picks heavy
// hitters, which then get exact unique buckets while every other key goes to a
// smaller shared sketch. Also hosts tuning, continuous re-optimization, the
// windowed (rolling) training schedule, and the exact-frequency "ideal" baseline.

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "dhsketch/heavy_hitters.hpp"
#include "dhsketch/metrics.hpp"
#include "dhsketch/sketch.hpp"
#include "dhsketch/types.hpp"

namespace dhsketch {

enum class CoreKind : std::uint8_t { kCountMin = 0, kCountSketch = 1 };

std::string_view core_name(CoreKind core) noexcept;

struct DoubleHashConfig {
  std::uint64_t total_budget_bytes = 1'000'000;
  std::uint64_t first_pass_budget_bytes = 200'000;
  std::uint64_t first_pass_depth = 4;
  std::uint64_t unique_buckets = 0;
  std::uint64_t inner_depth = 4;
  double first_pass_fraction = 0.1;
  std::uint64_t master_seed = 0;
  CoreKind core = CoreKind::kCountMin;
  // Heaviness parameter k. 0 means "no mass threshold": the cut is made by
  // unique-bucket capacity alone (k is set to observed mass + 1).
  std::uint64_t heaviness_k = 0;
  // Keep a bounded list (4 x unique_buckets) of the highest-estimate inner keys
  // so reoptimize() has promotion candidates.
  bool track_candidates = false;

  /// Inner sketch row length under the byte model; 0 when infeasible.
  std::uint64_t inner_width() const noexcept;
  bool feasible() const noexcept { return inner_width() >= 1; }
  std::uint64_t memory_bytes() const noexcept;
  std::uint64_t candidate_capacity() const noexcept { return track_candidates ? 4 * unique_buckets : 0; }

  SketchConfig inner_sketch_config() const;
  SketchConfig first_pass_sketch_config() const;
  HeavyHitterParams heavy_hitter_params(std::uint64_t observed_mass) const;

  /// Throws std::invalid_argument on an infeasible or malformed config.
  void validate() const;

  bool operator==(const DoubleHashConfig&) const = default;
};

/// Bounded set of the highest-estimate keys seen by the inner sketch.
class CandidateTracker {
 public:
  explicit CandidateTracker(std::size_t capacity = 0) : capacity_(capacity) {}

  void observe(std::string_view key, std::int64_t estimate);
  void remove(std::string_view key);
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  /// Sorted by key.
  std::vector<std::pair<std::string, std::int64_t>> entries() const;

  bool operator==(const CandidateTracker& o) const { return capacity_ == o.capacity_ && values_ == o.values_; }

 private:
  std::size_t capacity_;
  std::unordered_map<std::string, std::int64_t> values_;
  std::set<std::pair<std::int64_t, std::string>> order_;
};

struct ReoptimizeResult {
  std::vector<std::string> promoted;
  std::vector<std::string> demoted;
  bool changed() const noexcept { return !promoted.empty() || !demoted.empty(); }
};

class DoubleHashSketch {
 public:
  using Inner = std::variant<CountMinSketch, CountSketch>;

  /// Admits the first min(|heavy_hitters|, unique_buckets) keys with zero counts.
  DoubleHashSketch(const DoubleHashConfig& config, std::span<const std::string> heavy_hitters);

  /// Routes the item to its unique bucket if it is a heavy hitter, otherwise
  /// to the inner sketch. Exactly one of the two changes.
  void update(std::string_view key, std::uint64_t weight);
  void update(const StreamItem& item) { update(item.key, item.weight); }
  void ingest(std::span<const StreamItem> items) {
    for (const auto& it : items) update(it.key, it.weight);
  }
  void ingest(const FrequencyMap& counts) {
    for (const auto& [k, w] : counts) update(k, w);
  }

  /// Exact counter for a heavy hitter, inner sketch estimate otherwise.
  std::int64_t estimate(std::string_view key) const;
  std::int64_t inner_estimate(std::string_view key) const;

  /// Recomputes the heavy-hitter set from the unique-bucket counters and the
  /// tracked candidates' current inner estimates. Demoted keys are folded back
  /// into the inner sketch as one weighted update; promoted keys start at
  /// their current inner estimate (the inner cells are not decremented).
  ReoptimizeResult reoptimize(const HeavyHitterParams& params);
  /// reoptimize() with the configured heaviness and unique-bucket capacity.
  ReoptimizeResult reoptimize();

  const DoubleHashConfig& config() const noexcept { return config_; }
  const HeavyHitterTable& heavy_hitters() const noexcept { return hh_; }
  const Inner& inner() const noexcept { return inner_; }
  const CandidateTracker& candidates() const noexcept { return candidates_; }
  std::uint64_t total_weight() const noexcept { return total_weight_; }
  std::uint64_t inner_cells() const noexcept;
  /// Byte-model footprint of the structure as built.
  std::uint64_t memory_bytes() const noexcept;

  /// magic "DHS1" | u32 version | config | u64 total weight | heavy-hitter
  /// table | u8 core | u64 length + inner sketch blob | candidates
  std::string serialize() const;
  static DoubleHashSketch deserialize(std::string_view blob);

  bool operator==(const DoubleHashSketch& o) const {
    return config_ == o.config_ && total_weight_ == o.total_weight_ && hh_ == o.hh_ && inner_ == o.inner_ &&
           candidates_ == o.candidates_;
  }

 private:
  struct Restore {};
  DoubleHashSketch(Restore, const DoubleHashConfig& config, HeavyHitterTable hh, Inner inner);

  DoubleHashConfig config_;
  HeavyHitterTable hh_;
  Inner inner_;
  CandidateTracker candidates_;
  std::uint64_t total_weight_ = 0;
};

// --- Algorithm passes --------------------------------------------------------

struct FirstPassResult {
  FrequencyMap estimates;  // first-pass count-min estimate of every distinct prefix key
  std::uint64_t mass = 0;  // total prefix weight
};

/// Ingests the prefix into a count-min sketch of first_pass_budget_bytes at
/// first_pass_depth and estimates every distinct key seen. Throws
/// std::invalid_argument on an empty prefix.
FirstPassResult first_pass_estimates(std::span<const StreamItem> prefix, const DoubleHashConfig& config);

/// Heavy hitters from first-pass estimates under the config's k and capacity.
std::vector<std::string> select_heavy_hitters(const FirstPassResult& pass, const DoubleHashConfig& config);

/// first_pass_estimates() followed by select_heavy_hitters().
std::vector<std::string> first_pass(std::span<const StreamItem> prefix, const DoubleHashConfig& config);

/// Full two-pass construction: heavy hitters from the prefix, then an empty
/// main-pass sketch ready for ingestion.
DoubleHashSketch build_double_hash(std::span<const StreamItem> prefix, const DoubleHashConfig& config);

/// Estimates for every key of `truth`.
EstimateMap estimate_all(const DoubleHashSketch& sketch, const FrequencyMap& truth);

/// avg_error(estimate_all(sketch, truth), truth, metric) without the map.
double score(const DoubleHashSketch& sketch, const FrequencyMap& truth, Metric metric);

/// Scores many (unique buckets, depth) splits of one budget against a fixed
/// set of exact counts, for a count-min core. Produces exactly the error a
/// DoubleHashSketch built with the same config would after ingesting `truth`:
/// row digests are computed once and shared by every candidate, since all
/// candidates of one master seed use the same row seeds and differ only in width.
class SplitEvaluator {
 public:
  /// `heavy_order` ranks the keys that may take unique buckets; a split with
  /// B unique buckets isolates the first B of them.
  SplitEvaluator(const FrequencyMap& truth, std::span<const std::string> heavy_order, std::uint64_t master_seed,
                 std::uint64_t max_depth);

  double error(std::uint64_t unique_buckets, std::uint64_t depth, std::uint64_t width, Metric metric) const;

 private:
  struct Key {
    std::uint64_t count;
    std::uint64_t heavy_rank;  // position in heavy_order, or UINT64_MAX
  };
  std::vector<Key> keys_;
  std::vector<std::uint64_t> digests_;  // keys_.size() x max_depth_
  std::uint64_t max_depth_;
};

// --- Tuning ------------------------------------------------------------------

struct TuneCandidate {
  std::uint64_t unique_buckets = 0;
  std::uint64_t inner_depth = 1;

  bool operator==(const TuneCandidate&) const = default;
};

/// Depths 1..5 crossed with unique buckets using 0/8 .. 6/8 of the budget;
/// infeasible and duplicate entries are dropped.
std::vector<TuneCandidate> default_tuning_grid(std::uint64_t budget_bytes);

struct TuneResult {
  DoubleHashConfig config;
  double validation_error = 0;
  std::vector<std::string> heavy_hitters;
};

/// Builds a double-hash sketch per candidate (first pass over `training`, main
/// pass over `validation`), scores it against exact validation counts and
/// returns the argmin. Ties go to fewer unique buckets, then fewer rows.
TuneResult tune(std::span<const StreamItem> training, std::span<const StreamItem> validation,
                std::uint64_t budget_bytes, std::span<const TuneCandidate> grid, const DoubleHashConfig& base,
                Metric metric = Metric::kPerItem);

// --- Windowed schedule -------------------------------------------------------

/// Half-open window index ranges for one tuned test window.
struct WindowPlan {
  std::size_t train_begin = 0;
  std::size_t train_end = 0;
  std::size_t validate_begin = 0;
  std::size_t validate_end = 0;
  std::size_t test = 0;

  bool operator==(const WindowPlan&) const = default;
};

/// Validation is the `validate_windows` windows right before `test`; training
/// the `train_windows` windows right before those.
WindowPlan rolling_plan(std::size_t test, std::size_t train_windows, std::size_t validate_windows = 1);
/// Training on [0, train_windows), validation on the next `validate_windows`.
WindowPlan anchored_plan(std::size_t test, std::size_t train_windows, std::size_t validate_windows = 1);

struct WindowResult {
  WindowPlan plan;
  TuneResult tuning;
  DoubleHashSketch sketch;  // after ingesting the test window
};

/// Tunes on the plan's training/validation windows, then ingests the test
/// window into a fresh sketch. Throws std::invalid_argument if the plan
/// references missing windows or training is empty.
WindowResult run_window_plan(std::span<const Stream> windows, const WindowPlan& plan, std::uint64_t budget_bytes,
                             std::span<const TuneCandidate> grid, const DoubleHashConfig& base,
                             Metric metric = Metric::kPerItem);

/// One rolling result per test window, starting at window train_windows + 1.
/// Throws std::invalid_argument when fewer than train_windows + 2 windows exist.
std::vector<WindowResult> rolling_schedule(std::span<const Stream> windows, std::size_t train_windows,
                                           const DoubleHashConfig& base, std::span<const TuneCandidate> grid,
                                           Metric metric = Metric::kPerItem);

/// Concatenation of windows [begin, end).
Stream concat_windows(std::span<const Stream> windows, std::size_t begin, std::size_t end);

// --- Ideal baseline ----------------------------------------------------------

struct IdealResult {
  DoubleHashConfig config;
  double error = 0;
};

/// Unique buckets go to the top keys by true test frequency; the split and
/// depth are picked by test error over `grid`.
IdealResult ideal_learned_sketch(const FrequencyMap& test_counts, std::uint64_t budget_bytes,
                                 std::span<const TuneCandidate> grid, const DoubleHashConfig& base,
                                 Metric metric = Metric::kPerItem);

/// Keys ordered by frequency descending then key ascending, first `n` kept.
std::vector<std::string> top_keys(const FrequencyMap& counts, std::size_t n);

}  // namespace dhsketch
