#include "dhsketch/sketch.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "dhsketch/binary_io.hpp"
#include "dhsketch/errors.hpp"

namespace dhsketch {

namespace {

constexpr std::string_view kCountMinMagic = "CMS1";
constexpr std::string_view kCountSketchMagic = "CSK1";

// Index into a row-major table; the per-row hash is the only thing that differs.
template <typename Hashes>
void fill_indices(const Hashes& hashes, std::string_view key, std::uint64_t width,
                  std::vector<std::uint64_t>& out) {
  out.resize(hashes.size());
  for (std::size_t r = 0; r < hashes.size(); ++r) out[r] = r * width + hashes[r](key);
}

std::vector<HashFunction> make_row_hashes(const SketchConfig& c) {
  std::vector<HashFunction> rows;
  rows.reserve(c.depth);
  for (std::uint64_t r = 0; r < c.depth; ++r) rows.emplace_back(derive_row_seed(c.master_seed, r), c.width);
  return rows;
}

void write_header(binary::Writer& w, std::string_view magic, const SketchConfig& c) {
  w.bytes(magic);
  w.u32(kSketchFormatVersion);
  w.u64(c.width);
  w.u64(c.depth);
  w.u64(c.master_seed);
}

SketchConfig read_header(binary::Reader& r, std::string_view magic) {
  if (r.bytes(4) != magic) throw FormatError("bad sketch magic");
  if (r.u32() != kSketchFormatVersion) throw FormatError("unsupported sketch version");
  SketchConfig c;
  c.width = r.u64();
  c.depth = r.u64();
  c.master_seed = r.u64();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  if (r.remaining() / 8 < sketch_memory_cells(c)) throw FormatError("truncated sketch body");
  return c;
}

}  // namespace

void SketchConfig::validate() const {
  if (width == 0) throw std::invalid_argument("sketch width must be >= 1");
  if (depth == 0) throw std::invalid_argument("sketch depth must be >= 1");
  if (width > std::numeric_limits<std::uint64_t>::max() / depth)
    throw std::invalid_argument("sketch width x depth overflows");
}

// --- count-min ---------------------------------------------------------------

CountMinSketch::CountMinSketch(const SketchConfig& config) : config_(config) {
  config_.validate();
  hashes_ = make_row_hashes(config_);
  table_.assign(sketch_memory_cells(config_), 0);
}

void CountMinSketch::update(std::string_view key, std::uint64_t weight) {
  update_and_estimate(key, weight);
}

std::uint64_t CountMinSketch::update_and_estimate(std::string_view key, std::uint64_t weight) {
  if (poisoned_) throw OverflowError("count-min sketch is poisoned by an earlier overflow");
  thread_local std::vector<std::uint64_t> idx;
  fill_indices(hashes_, key, config_.width, idx);
  for (auto i : idx) {
    if (table_[i] > std::numeric_limits<std::uint64_t>::max() - weight) {
      poisoned_ = true;
      throw OverflowError("count-min counter overflow");
    }
  }
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  for (auto i : idx) {
    table_[i] += weight;
    best = std::min(best, table_[i]);
  }
  return best;
}

std::uint64_t CountMinSketch::estimate(std::string_view key) const {
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  for (std::uint64_t r = 0; r < config_.depth; ++r)
    best = std::min(best, table_[r * config_.width + hashes_[r](key)]);
  return best;
}

std::span<const std::uint64_t> CountMinSketch::row(std::uint64_t r) const {
  if (r >= config_.depth) throw std::out_of_range("row index out of range");
  return {table_.data() + r * config_.width, config_.width};
}

std::string CountMinSketch::serialize() const {
  if (poisoned_) throw OverflowError("cannot checkpoint a poisoned sketch");
  binary::Writer w;
  write_header(w, kCountMinMagic, config_);
  for (auto v : table_) w.u64(v);
  return std::move(w).take();
}

CountMinSketch CountMinSketch::deserialize(std::string_view blob) {
  binary::Reader r(blob);
  CountMinSketch sk(read_header(r, kCountMinMagic));
  for (auto& v : sk.table_) v = r.u64();
  r.expect_end();
  return sk;
}

// --- count-sketch ------------------------------------------------------------

CountSketch::CountSketch(const SketchConfig& config) : config_(config) {
  config_.validate();
  hashes_ = make_row_hashes(config_);
  signs_.reserve(config_.depth);
  for (std::uint64_t r = 0; r < config_.depth; ++r) signs_.emplace_back(derive_sign_seed(config_.master_seed, r));
  table_.assign(sketch_memory_cells(config_), 0);
}

void CountSketch::update(std::string_view key, std::uint64_t weight) { update_and_estimate(key, weight); }

std::int64_t CountSketch::update_and_estimate(std::string_view key, std::uint64_t weight) {
  if (poisoned_) throw OverflowError("count-sketch is poisoned by an earlier overflow");
  constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
  if (weight > static_cast<std::uint64_t>(kMax)) {
    poisoned_ = true;
    throw OverflowError("count-sketch weight exceeds signed counter range");
  }
  const auto w = static_cast<std::int64_t>(weight);
  thread_local std::vector<std::uint64_t> idx;
  fill_indices(hashes_, key, config_.width, idx);
  thread_local std::vector<std::int64_t> deltas;
  deltas.resize(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    deltas[r] = signs_[r](key) > 0 ? w : -w;
    std::int64_t sum = 0;
    if (__builtin_add_overflow(table_[idx[r]], deltas[r], &sum)) {
      poisoned_ = true;
      throw OverflowError("count-sketch counter overflow");
    }
  }
  for (std::size_t r = 0; r < idx.size(); ++r) table_[idx[r]] += deltas[r];
  return estimate(key);
}

std::int64_t CountSketch::estimate(std::string_view key) const {
  thread_local std::vector<std::int64_t> votes;
  votes.resize(config_.depth);
  for (std::uint64_t r = 0; r < config_.depth; ++r) {
    const std::int64_t cell = table_[r * config_.width + hashes_[r](key)];
    // -INT64_MIN is not representable; saturate that single value.
    votes[r] = signs_[r](key) > 0 ? cell : (cell == std::numeric_limits<std::int64_t>::min()
                                                 ? std::numeric_limits<std::int64_t>::max()
                                                 : -cell);
  }
  const std::size_t mid = (votes.size() - 1) / 2;
  std::nth_element(votes.begin(), votes.begin() + static_cast<std::ptrdiff_t>(mid), votes.end());
  return votes[mid];
}

std::span<const std::int64_t> CountSketch::row(std::uint64_t r) const {
  if (r >= config_.depth) throw std::out_of_range("row index out of range");
  return {table_.data() + r * config_.width, config_.width};
}

std::string CountSketch::serialize() const {
  if (poisoned_) throw OverflowError("cannot checkpoint a poisoned sketch");
  binary::Writer w;
  write_header(w, kCountSketchMagic, config_);
  for (auto v : table_) w.i64(v);
  return std::move(w).take();
}

CountSketch CountSketch::deserialize(std::string_view blob) {
  binary::Reader r(blob);
  CountSketch sk(read_header(r, kCountSketchMagic));
  for (auto& v : sk.table_) v = r.i64();
  r.expect_end();
  return sk;
}

}  // namespace dhsketch
