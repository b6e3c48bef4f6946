#include "dhsketch/stream.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "dhsketch/errors.hpp"
#include "dhsketch/hashing.hpp"

namespace dhsketch {

namespace {

// Neumaier-compensated sum of n^-s for n = N..1 (small terms first).
double zipf_normalizer(std::uint64_t n, double s) {
  double sum = 0.0;
  double comp = 0.0;
  for (std::uint64_t i = n; i >= 1; --i) {
    const double term = std::pow(static_cast<double>(i), -s);
    const double t = sum + term;
    comp += std::fabs(sum) >= std::fabs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace

void ZipfSpec::validate() const {
  if (num_elements == 0) throw std::invalid_argument("zipf: num_elements must be >= 1");
  if (!(exponent >= 0.0) || !std::isfinite(exponent)) throw std::invalid_argument("zipf: exponent must be >= 0");
  if (stream_length == 0) throw std::invalid_argument("zipf: stream_length must be >= 1");
}

double zipf_pmf(std::uint64_t rank, const ZipfSpec& spec) {
  spec.validate();
  if (rank < 1 || rank > spec.num_elements) throw std::out_of_range("zipf rank out of range");
  return std::pow(static_cast<double>(rank), -spec.exponent) / zipf_normalizer(spec.num_elements, spec.exponent);
}

ZipfDistribution::ZipfDistribution(std::uint64_t num_elements, double exponent)
    : exponent_(exponent), normalizer_(zipf_normalizer(num_elements, exponent)) {
  ZipfSpec{num_elements, exponent, 1, 0}.validate();
  cdf_.resize(num_elements);
  double acc = 0.0;
  double comp = 0.0;
  for (std::uint64_t r = 1; r <= num_elements; ++r) {
    const double term = std::pow(static_cast<double>(r), -exponent) / normalizer_;
    const double y = term - comp;
    const double t = acc + y;
    comp = (t - acc) - y;
    acc = t;
    cdf_[r - 1] = acc;
  }
  cdf_.back() = 1.0;
}

double ZipfDistribution::pmf(std::uint64_t rank) const {
  if (rank < 1 || rank > cdf_.size()) throw std::out_of_range("zipf rank out of range");
  return std::pow(static_cast<double>(rank), -exponent_) / normalizer_;
}

std::uint64_t ZipfDistribution::rank_for(double u) const noexcept {
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<std::uint64_t>(it - cdf_.begin()) + 1;
}

std::vector<std::uint64_t> generate_ranks(const ZipfSpec& spec) {
  spec.validate();
  ZipfDistribution dist(spec.num_elements, spec.exponent);
  std::mt19937_64 rng(spec.seed);
  std::vector<std::uint64_t> ranks(spec.stream_length);
  for (auto& r : ranks) r = dist.rank_for(unit_interval(rng()));
  return ranks;
}

Stream generate_stream(const ZipfSpec& spec) {
  const auto ranks = generate_ranks(spec);
  Stream out;
  out.reserve(ranks.size());
  for (auto r : ranks) out.push_back({integer_key(r), 1});
  return out;
}

std::vector<std::uint64_t> random_permutation(std::uint64_t n, std::uint64_t seed) {
  std::vector<std::uint64_t> perm(n);
  for (std::uint64_t i = 0; i < n; ++i) perm[i] = i + 1;
  std::mt19937_64 rng(seed);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * i) >> 64);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

Stream generate_two_phase_stream(const ZipfSpec& spec, std::uint64_t permutation_seed) {
  const auto ranks = generate_ranks(spec);
  const auto perm = random_permutation(spec.num_elements, permutation_seed);
  const std::size_t half = ranks.size() / 2;
  Stream out;
  out.reserve(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i)
    out.push_back({integer_key(i < half ? ranks[i] : perm[ranks[i] - 1]), 1});
  return out;
}

FrequencyMap exact_counts(std::span<const StreamItem> stream) {
  FrequencyMap counts;
  for (const auto& it : stream) counts[it.key] += it.weight;
  return counts;
}

// --- query logs --------------------------------------------------------------

LogReader::LogReader(LogSource source) : source_(std::move(source)), in_(source_.path, std::ios::binary) {
  if (!in_) throw InputError("cannot open log file: " + source_.path.string());
}

std::string window_tag(std::string_view field) {
  const auto cut = field.find_first_of(" T");
  return std::string(field.substr(0, cut));
}

std::optional<LogRecord> LogReader::parse(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();

  if (source_.format == LogFormat::kPlain) {
    if (line.empty()) return std::nullopt;
    return LogRecord{{}, {std::move(line), 1}};
  }

  std::vector<std::string_view> cols;
  std::string_view rest(line);
  while (true) {
    const auto tab = rest.find('\t');
    cols.push_back(rest.substr(0, tab));
    if (tab == std::string_view::npos) break;
    rest.remove_prefix(tab + 1);
  }
  if (source_.key_column >= cols.size() || cols[source_.key_column].empty()) return std::nullopt;
  LogRecord rec;
  if (source_.window_column) {
    if (*source_.window_column >= cols.size()) return std::nullopt;
    rec.window = window_tag(cols[*source_.window_column]);
    if (rec.window.empty()) return std::nullopt;
  }
  rec.item = {std::string(cols[source_.key_column]), 1};
  return rec;
}

std::optional<LogRecord> LogReader::next() {
  if (finished_) return std::nullopt;
  std::string line;
  while (std::getline(in_, line)) {
    if (source_.skip_header && !header_done_) {
      header_done_ = true;
      continue;
    }
    ++diag_.rows;
    if (auto rec = parse(line)) {
      ++diag_.emitted;
      return rec;
    }
    ++diag_.malformed;
  }
  finished_ = true;
  if (in_.bad()) throw InputError("read error on " + source_.path.string());
  if (diag_.rows > 0 &&
      static_cast<double>(diag_.malformed) > source_.max_malformed_fraction * static_cast<double>(diag_.rows)) {
    throw InputError("too many malformed rows in " + source_.path.string() + ": " +
                     std::to_string(diag_.malformed) + " of " + std::to_string(diag_.rows));
  }
  return std::nullopt;
}

WindowedLog read_windows(const LogSource& source) {
  LogReader reader(source);
  std::map<std::string, Stream> grouped;
  while (auto rec = reader.next()) grouped[rec->window].push_back(std::move(rec->item));
  WindowedLog out;
  for (auto& [tag, items] : grouped) {
    out.tags.push_back(tag);
    out.windows.push_back(std::move(items));
  }
  out.diagnostics = reader.diagnostics();
  return out;
}

}  // namespace dhsketch
