#include "dhsketch/heavy_hitters.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "dhsketch/errors.hpp"

namespace dhsketch {

void HeavyHitterParams::validate() const {
  if (k < 2) throw std::invalid_argument("heaviness k must be >= 2");
  if (capacity < 1) throw std::invalid_argument("heavy-hitter capacity must be >= 1");
}

std::vector<std::string> detect_heavy_hitters(const FrequencyMap& estimates, std::uint64_t total_weight,
                                              const HeavyHitterParams& params) {
  params.validate();
  if (total_weight == 0) throw std::invalid_argument("total weight must be positive");

  std::vector<std::pair<std::uint64_t, const std::string*>> heavy;
  for (const auto& [key, est] : estimates) {
    // est > total / k  <=>  est * k > total, without the rounding of integer division.
    if (static_cast<unsigned __int128>(est) * params.k > total_weight) heavy.emplace_back(est, &key);
  }
  std::sort(heavy.begin(), heavy.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : *a.second < *b.second;
  });

  const auto limit = std::min<std::uint64_t>(params.k - 1, params.capacity);
  if (heavy.size() > limit) heavy.resize(limit);

  std::vector<std::string> out;
  out.reserve(heavy.size());
  for (const auto& h : heavy) out.push_back(*h.second);
  return out;
}

HeavyHitterTable::HeavyHitterTable(std::uint64_t capacity) : capacity_(capacity) {}

void HeavyHitterTable::admit(std::string_view key, std::uint64_t initial_count) {
  if (contains(key)) throw ContractError("key already admitted to heavy-hitter table");
  if (full()) throw CapacityError("heavy-hitter table is full");
  entries_.emplace(std::string(key), initial_count);
}

void HeavyHitterTable::record(std::string_view key, std::uint64_t weight) {
  auto* c = counter(key);
  if (c == nullptr) throw ContractError("record() on a key that was never admitted");
  if (*c > std::numeric_limits<std::uint64_t>::max() - weight) throw OverflowError("unique bucket overflow");
  *c += weight;
}

std::uint64_t HeavyHitterTable::evict(std::string_view key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ContractError("evict() on a key that was never admitted");
  const auto v = it->second;
  entries_.erase(it);
  return v;
}

std::optional<std::uint64_t> HeavyHitterTable::count(std::string_view key) const {
  auto it = find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t* HeavyHitterTable::counter(std::string_view key) {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::pair<std::string, std::uint64_t>> HeavyHitterTable::sorted_entries() const {
  std::vector<std::pair<std::string, std::uint64_t>> out(entries_.begin(), entries_.end());
  std::sort(out.begin(), out.end());
  return out;
}

void HeavyHitterTable::serialize(binary::Writer& out) const {
  out.u64(capacity_);
  out.u64(entries_.size());
  for (const auto& [key, count] : sorted_entries()) {
    out.str(key);
    out.u64(count);
  }
}

HeavyHitterTable HeavyHitterTable::deserialize(binary::Reader& in) {
  const auto capacity = in.u64();
  HeavyHitterTable t(capacity);
  const auto n = in.u64();
  if (n > capacity) throw FormatError("heavy-hitter table exceeds its capacity");
  for (std::uint64_t i = 0; i < n; ++i) {
    auto key = in.str();
    const auto count = in.u64();
    if (!t.entries_.emplace(std::move(key), count).second) throw FormatError("duplicate heavy-hitter key");
  }
  return t;
}

}  // namespace dhsketch
