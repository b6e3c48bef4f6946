#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dhsketch {

/// One stream arrival: element key and its frequency increment.
struct StreamItem {
  std::string key;
  std::uint64_t weight = 1;

  bool operator==(const StreamItem&) const = default;
};

using Stream = std::vector<StreamItem>;

/// Transparent string hash so maps keyed by std::string accept string_view lookups.
struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};

/// key -> exact (or estimated) frequency.
using FrequencyMap = std::unordered_map<std::string, std::uint64_t>;

/// key -> signed estimate; count-sketch estimates may be negative.
using EstimateMap = std::unordered_map<std::string, std::int64_t>;

}  // namespace dhsketch
