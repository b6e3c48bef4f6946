#pragma once

// Test-only brute-force oracles. Nothing here calls into the code paths it is
// used to check beyond the public hash functions.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dhsketch/hashing.hpp"
#include "dhsketch/types.hpp"

namespace dhsketch::testing {

/// Ordered exact counter, independent of exact_counts().
inline std::map<std::string, std::uint64_t> brute_counts(const Stream& s) {
  std::map<std::string, std::uint64_t> m;
  for (const auto& it : s) m[it.key] += it.weight;
  return m;
}

/// True when every row hash of a sketch with this shape maps the keys to
/// pairwise distinct buckets.
inline bool rows_injective(const std::vector<std::string>& keys, std::uint64_t width, std::uint64_t depth,
                           std::uint64_t master_seed) {
  for (std::uint64_t r = 0; r < depth; ++r) {
    HashFunction h(derive_row_seed(master_seed, r), width);
    std::set<std::uint64_t> seen;
    for (const auto& k : keys)
      if (!seen.insert(h(k)).second) return false;
  }
  return true;
}

/// First seed >= start for which rows_injective holds.
inline std::uint64_t find_injective_seed(const std::vector<std::string>& keys, std::uint64_t width,
                                         std::uint64_t depth, std::uint64_t start = 0) {
  for (std::uint64_t s = start;; ++s)
    if (rows_injective(keys, width, depth, s)) return s;
}

/// Zipf pmf by direct partial sums in long double.
inline long double zipf_pmf_oracle(std::uint64_t rank, double s, std::uint64_t n) {
  long double h = 0;
  for (std::uint64_t i = 1; i <= n; ++i) h += std::pow(static_cast<long double>(i), -static_cast<long double>(s));
  return std::pow(static_cast<long double>(rank), -static_cast<long double>(s)) / h;
}

inline std::string random_key(std::mt19937_64& rng, std::size_t max_len = 12) {
  std::string k(1 + rng() % max_len, '\0');
  for (auto& c : k) c = static_cast<char>(rng() & 0xFF);
  return k;
}

/// Random stream over `distinct` keys with weights in [0, max_weight].
inline Stream random_stream(std::mt19937_64& rng, std::size_t length, std::size_t distinct,
                            std::uint64_t max_weight) {
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < distinct; ++i) keys.push_back("k" + std::to_string(i) + "_" + std::to_string(rng() % 1000));
  Stream s;
  for (std::size_t i = 0; i < length; ++i) {
    // Skewed pick so some keys are heavy.
    const auto u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const auto idx = static_cast<std::size_t>(std::pow(u, 3.0) * static_cast<double>(distinct));
    s.push_back({keys[std::min(idx, distinct - 1)], rng() % (max_weight + 1)});
  }
  return s;
}

/// Date string for day `d` (d < 28) of a fixed month.
inline std::string day_tag(int d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "2006-03-%02d", d + 1);
  return buf;
}

/// Writes a TSV log in the AOL layout (AnonID, Query, QueryTime) with `windows`
/// days. Queries follow Zipf(n, s) per day; each day a `drift` fraction of the
/// rank->query mapping is reshuffled, so heavy queries change slowly over time.
/// Rows are written user-sorted (not time-sorted) like the real log.
void write_drifting_log(const std::string& path, int windows, std::uint64_t per_window, std::uint64_t n, double s,
                        double drift, std::uint64_t seed);

}  // namespace dhsketch::testing
