#pragma once

// Stream sources: seeded Zipfian generators and text query-log readers.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dhsketch/types.hpp"

namespace dhsketch {

struct ZipfSpec {
  std::uint64_t num_elements = 140'000;
  double exponent = 0.7;
  std::uint64_t stream_length = 1'000'000;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Normalized frequency of rank `rank`: rank^-s / sum_{n=1..N} n^-s.
/// Throws std::out_of_range unless 1 <= rank <= N. O(N) per call; use
/// ZipfDistribution for repeated queries.
double zipf_pmf(std::uint64_t rank, const ZipfSpec& spec);

/// Zipf(N, s) with a precomputed cumulative table for O(log N) inverse-CDF draws.
class ZipfDistribution {
 public:
  ZipfDistribution(std::uint64_t num_elements, double exponent);

  double pmf(std::uint64_t rank) const;
  /// Rank in [1, N] for a uniform variate u in [0, 1).
  std::uint64_t rank_for(double u) const noexcept;
  std::uint64_t size() const noexcept { return cdf_.size(); }

 private:
  double exponent_;
  double normalizer_;
  std::vector<double> cdf_;
};

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
constexpr double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Ranks drawn i.i.d. from Zipf(N, s) with a mt19937_64 seeded by spec.seed.
std::vector<std::uint64_t> generate_ranks(const ZipfSpec& spec);

/// Unit-weight items keyed by integer_key(rank).
Stream generate_stream(const ZipfSpec& spec);

/// Uniformly random permutation of 1..n (Fisher-Yates, own bounded draws so the
/// result does not depend on the standard library's distributions).
std::vector<std::uint64_t> random_permutation(std::uint64_t n, std::uint64_t seed);

/// Zipf stream whose rank-to-key mapping is randomly permuted halfway through:
/// the first half uses key(rank), the second key(perm[rank]).
Stream generate_two_phase_stream(const ZipfSpec& spec, std::uint64_t permutation_seed);

/// Brute-force per-key weight sums.
FrequencyMap exact_counts(std::span<const StreamItem> stream);

// --- query logs --------------------------------------------------------------

enum class LogFormat { kPlain, kTsv };

struct LogSource {
  std::filesystem::path path;
  LogFormat format = LogFormat::kPlain;
  std::size_t key_column = 0;                 // TSV only
  std::optional<std::size_t> window_column;   // TSV only; date or datetime text
  bool skip_header = false;
  double max_malformed_fraction = 0.01;
};

struct LogRecord {
  std::string window;  // empty when the source has no window column
  StreamItem item;
};

struct LogDiagnostics {
  std::uint64_t rows = 0;       // data rows read (header excluded)
  std::uint64_t emitted = 0;
  std::uint64_t malformed = 0;  // skipped: empty key or missing column
};

/// Lazy line-by-line reader. Malformed rows are skipped and counted; when the
/// input is exhausted, more than max_malformed_fraction malformed rows is a
/// hard InputError.
class LogReader {
 public:
  explicit LogReader(LogSource source);

  std::optional<LogRecord> next();
  const LogDiagnostics& diagnostics() const noexcept { return diag_; }

 private:
  std::optional<LogRecord> parse(std::string& line);

  LogSource source_;
  std::ifstream in_;
  LogDiagnostics diag_;
  bool header_done_ = false;
  bool finished_ = false;
};

/// Window tag of a date/datetime field: the text before the first space or 'T'.
std::string window_tag(std::string_view field);

struct WindowedLog {
  std::vector<std::string> tags;  // ascending
  std::vector<Stream> windows;    // windows[i] holds the items tagged tags[i], in file order
  LogDiagnostics diagnostics;
};

/// Reads the whole log and groups items by window tag (ascending tag order).
WindowedLog read_windows(const LogSource& source);

}  // namespace dhsketch
