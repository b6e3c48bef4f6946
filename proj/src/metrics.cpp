#include "dhsketch/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dhsketch {

std::string_view metric_name(Metric m) noexcept {
  switch (m) {
    case Metric::kPerItem: return "per-item";
    case Metric::kWeighted: return "weighted";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  if (name == "per-item") return Metric::kPerItem;
  if (name == "weighted") return Metric::kWeighted;
  throw std::invalid_argument("unknown metric: " + std::string(name));
}

void ErrorAccumulator::add(std::int64_t estimate, std::uint64_t truth) noexcept {
  const long double f = static_cast<long double>(truth);
  const long double err = std::fabs(static_cast<long double>(estimate) - f);
  abs_sum_ += err;
  weighted_sum_ += f * err;
  mass_ += f;
  ++n_;
}

double ErrorAccumulator::result(Metric metric) const {
  if (n_ == 0) throw std::invalid_argument("average error over an empty key set");
  if (metric == Metric::kPerItem) return static_cast<double>(abs_sum_ / static_cast<long double>(n_));
  if (mass_ == 0) return 0.0;
  return static_cast<double>(weighted_sum_ / mass_);
}

double avg_error(const EstimateMap& estimates, const FrequencyMap& truth, Metric metric) {
  if (truth.empty()) throw std::invalid_argument("avg_error needs a nonempty truth map");
  ErrorAccumulator acc;
  for (const auto& [key, f] : truth) {
    auto it = estimates.find(key);
    if (it == estimates.end()) throw std::invalid_argument("no estimate for truth key");
    acc.add(it->second, f);
  }
  return acc.result(metric);
}

}  // namespace dhsketch
