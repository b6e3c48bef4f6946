#pragma once

// Benchmark runner: sweeps algorithms x budgets x seeds over a synthetic or
// log source and reports the average frequency error of each cell.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dhsketch/double_hash.hpp"
#include "dhsketch/metrics.hpp"
#include "dhsketch/stream.hpp"

namespace dhsketch {

enum class Algorithm { kCountMin, kCountSketch, kDoubleHash, kDoubleHashRolling, kIdeal };

std::string_view algorithm_name(Algorithm a) noexcept;  // CM, CS, DH, DH-rolling, Ideal
Algorithm parse_algorithm(std::string_view name);       // case-insensitive

/// Windowed log source. Test windows default to every window with enough history.
struct LogSchedule {
  LogSource source;
  std::size_t train_windows = 5;
  std::size_t validate_windows = 1;
  std::vector<std::size_t> test_windows;
  // Main passes ingest everything from the first training window through the
  // test window and are scored on counts over that span, instead of the test
  // window alone.
  bool count_history = false;
};

struct ExperimentSpec {
  std::variant<ZipfSpec, LogSchedule> source = ZipfSpec{};
  std::vector<std::uint64_t> budgets{200'000};
  std::vector<Algorithm> algorithms{Algorithm::kCountMin};
  std::vector<std::uint64_t> depths{4};  // rows for CM and CS
  std::vector<std::uint64_t> seeds{1};
  Metric metric = Metric::kPerItem;
  DoubleHashConfig dh;  // first-pass settings, heaviness, core; budget and split are swept
  std::size_t threads = 0;  // 0: hardware concurrency
  std::optional<std::filesystem::path> checkpoint_dir;  // DH sketches, one per (budget, seed)

  void validate() const;
};

struct ReportRow {
  std::string algorithm;
  std::uint64_t budget_bytes = 0;
  std::uint64_t depth = 0;
  std::uint64_t unique_buckets = 0;
  std::uint64_t seed = 0;
  Metric metric = Metric::kPerItem;
  double error = 0;
  std::uint64_t memory_bytes = 0;  // byte-model footprint of the measured structure

  bool operator==(const ReportRow&) const = default;
};

struct ErrorReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> diagnostics;  // skipped cells, reader warnings
};

/// Deterministic for fixed seeds regardless of thread count. Rows come back
/// sorted by (algorithm, budget, seed, depth).
ErrorReport run_experiment(const ExperimentSpec& spec);

/// CSV header: algorithm,budget_bytes,depth,unique_buckets,seed,metric,error
std::string format_report_csv(const ErrorReport& report);
void write_report(const ErrorReport& report, const std::filesystem::path& path);

/// Mean error per (algorithm, budget) over seeds; for CM/CS the best depth's mean.
struct SummaryCell {
  std::string algorithm;
  std::uint64_t budget_bytes = 0;
  double mean_error = 0;
};
std::vector<SummaryCell> summarize(const ErrorReport& report);
std::optional<double> summary_error(const std::vector<SummaryCell>& cells, std::string_view algorithm,
                                    std::uint64_t budget_bytes);

// --- continuous optimization -------------------------------------------------

struct DriftSpec {
  ZipfSpec zipf{10'000, 1.0, 2'000'000, 1};
  std::uint64_t permutation_seed = 2;
  std::size_t windows = 20;
  std::uint64_t budget_bytes = 16'000;
  std::uint64_t unique_buckets = 200;
  std::uint64_t inner_depth = 2;
  std::uint64_t first_pass_budget_bytes = 200'000;
  std::uint64_t first_pass_depth = 4;
  std::uint64_t master_seed = 1;
  Metric metric = Metric::kPerItem;
};

struct DriftResult {
  // Mean over windows of the error of that window's counts.
  double static_error = 0;
  double reoptimized_error = 0;
  std::vector<double> static_window_errors;
  std::vector<double> reoptimized_window_errors;
  std::uint64_t promotions = 0;
  std::uint64_t demotions = 0;
};

// Each window is counted by a fresh double-hash sketch. The static variant
// keeps the heavy hitters found on the first window; the reoptimized variant
// calls reoptimize() on the finished window's sketch and carries the resulting
// heavy-hitter set into the next window.
DriftResult compare_continuous_optimization(const DriftSpec& spec);

}  // namespace dhsketch
