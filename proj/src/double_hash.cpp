#include "dhsketch/double_hash.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <unordered_set>

#include "dhsketch/binary_io.hpp"
#include "dhsketch/errors.hpp"
#include "dhsketch/stream.hpp"

namespace dhsketch {

namespace {

constexpr std::string_view kMagic = "DHS1";
constexpr std::uint32_t kVersion = 1;

// Salts for derive_seed(); the two sketches of one run must not share rows.
constexpr std::uint64_t kInnerSalt = 1;
constexpr std::uint64_t kFirstPassSalt = 2;

std::int64_t to_signed(std::uint64_t v) noexcept {
  return v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())
             ? std::numeric_limits<std::int64_t>::max()
             : static_cast<std::int64_t>(v);
}

DoubleHashSketch::Inner make_inner(const DoubleHashConfig& c) {
  if (c.core == CoreKind::kCountSketch) return CountSketch(c.inner_sketch_config());
  return CountMinSketch(c.inner_sketch_config());
}

// Lexicographic (error, unique buckets, depth): the documented tie rule.
bool better(double err, const DoubleHashConfig& c, double best_err, const DoubleHashConfig& best) {
  return std::tie(err, c.unique_buckets, c.inner_depth) < std::tie(best_err, best.unique_buckets, best.inner_depth);
}

void check_grid(std::span<const TuneCandidate> grid, std::uint64_t budget_bytes) {
  if (grid.empty()) throw std::invalid_argument("tuning grid is empty");
  for (const auto& c : grid) {
    if (c.inner_depth == 0 || width_for_budget(budget_bytes, c.inner_depth, c.unique_buckets) == 0)
      throw std::invalid_argument("tuning candidate does not fit the byte budget");
  }
}

DoubleHashConfig with_candidate(const DoubleHashConfig& base, std::uint64_t budget, const TuneCandidate& c) {
  DoubleHashConfig cfg = base;
  cfg.total_budget_bytes = budget;
  cfg.unique_buckets = c.unique_buckets;
  cfg.inner_depth = c.inner_depth;
  return cfg;
}

std::vector<std::string> truncated(const std::vector<std::string>& keys, std::uint64_t n) {
  return {keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(std::min<std::uint64_t>(n, keys.size()))};
}

std::uint64_t max_depth(std::span<const TuneCandidate> grid) {
  std::uint64_t d = 1;
  for (const auto& c : grid) d = std::max(d, c.inner_depth);
  return d;
}

}  // namespace

std::string_view core_name(CoreKind core) noexcept {
  return core == CoreKind::kCountSketch ? "count-sketch" : "count-min";
}

// --- config ------------------------------------------------------------------

std::uint64_t DoubleHashConfig::inner_width() const noexcept {
  return width_for_budget(total_budget_bytes, inner_depth, unique_buckets);
}

std::uint64_t DoubleHashConfig::memory_bytes() const noexcept {
  return dhsketch::memory_bytes(inner_width() * inner_depth, unique_buckets);
}

SketchConfig DoubleHashConfig::inner_sketch_config() const {
  return {inner_width(), inner_depth, derive_seed(master_seed, kInnerSalt)};
}

SketchConfig DoubleHashConfig::first_pass_sketch_config() const {
  return {width_for_budget(first_pass_budget_bytes, first_pass_depth, 0), first_pass_depth,
          derive_seed(master_seed, kFirstPassSalt)};
}

HeavyHitterParams DoubleHashConfig::heavy_hitter_params(std::uint64_t observed_mass) const {
  HeavyHitterParams p;
  p.capacity = std::max<std::uint64_t>(unique_buckets, 1);
  if (heaviness_k != 0) {
    p.k = heaviness_k;
  } else {
    p.k = observed_mass == std::numeric_limits<std::uint64_t>::max() ? observed_mass
                                                                        : std::max<std::uint64_t>(2, observed_mass + 1);
  }
  return p;
}

void DoubleHashConfig::validate() const {
  if (inner_depth == 0) throw std::invalid_argument("inner depth must be >= 1");
  if (!feasible()) throw std::invalid_argument("budget leaves no room for the inner sketch");
  if (first_pass_depth == 0) throw std::invalid_argument("first-pass depth must be >= 1");
  if (width_for_budget(first_pass_budget_bytes, first_pass_depth, 0) == 0)
    throw std::invalid_argument("first-pass budget leaves no room for a single column");
  if (!(first_pass_fraction > 0.0 && first_pass_fraction <= 1.0))
    throw std::invalid_argument("first-pass fraction must be in (0, 1]");
  if (heaviness_k == 1) throw std::invalid_argument("heaviness k must be 0 (auto) or >= 2");
}

// --- candidates --------------------------------------------------------------

void CandidateTracker::observe(std::string_view key, std::int64_t estimate) {
  if (capacity_ == 0) return;
  if (auto it = values_.find(std::string(key)); it != values_.end()) {
    if (it->second == estimate) return;
    order_.erase({it->second, it->first});
    it->second = estimate;
    order_.emplace(estimate, it->first);
    return;
  }
  if (values_.size() >= capacity_) {
    auto lowest = order_.begin();
    // Ties with the current minimum keep the incumbent.
    if (estimate <= lowest->first) return;
    values_.erase(lowest->second);
    order_.erase(lowest);
  }
  std::string k(key);
  values_.emplace(k, estimate);
  order_.emplace(estimate, std::move(k));
}

void CandidateTracker::remove(std::string_view key) {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return;
  order_.erase({it->second, it->first});
  values_.erase(it);
}

std::vector<std::pair<std::string, std::int64_t>> CandidateTracker::entries() const {
  std::vector<std::pair<std::string, std::int64_t>> out(values_.begin(), values_.end());
  std::sort(out.begin(), out.end());
  return out;
}

// --- sketch ------------------------------------------------------------------

DoubleHashSketch::DoubleHashSketch(const DoubleHashConfig& config, std::span<const std::string> heavy_hitters)
    : config_(config), hh_(config.unique_buckets), inner_(make_inner(config)),
      candidates_(config.candidate_capacity()) {
  config_.validate();
  for (const auto& key : heavy_hitters) {
    if (hh_.full()) break;
    if (!hh_.contains(key)) hh_.admit(key, 0);
  }
}

DoubleHashSketch::DoubleHashSketch(Restore, const DoubleHashConfig& config, HeavyHitterTable hh, Inner inner)
    : config_(config), hh_(std::move(hh)), inner_(std::move(inner)), candidates_(config.candidate_capacity()) {}

void DoubleHashSketch::update(std::string_view key, std::uint64_t weight) {
  if (total_weight_ > std::numeric_limits<std::uint64_t>::max() - weight)
    throw OverflowError("double-hash total weight overflow");
  if (auto* c = hh_.counter(key)) {
    if (*c > std::numeric_limits<std::uint64_t>::max() - weight) throw OverflowError("unique bucket overflow");
    *c += weight;
  } else if (candidates_.capacity() > 0) {
    const auto est = std::visit(
        [&](auto& sk) { return static_cast<std::int64_t>(sk.update_and_estimate(key, weight)); }, inner_);
    candidates_.observe(key, est);
  } else {
    std::visit([&](auto& sk) { sk.update(key, weight); }, inner_);
  }
  total_weight_ += weight;
}

std::int64_t DoubleHashSketch::inner_estimate(std::string_view key) const {
  return std::visit(
      [&](const auto& sk) -> std::int64_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(sk)>, CountMinSketch>) return to_signed(sk.estimate(key));
        else return sk.estimate(key);
      },
      inner_);
}

std::int64_t DoubleHashSketch::estimate(std::string_view key) const {
  if (auto c = hh_.count(key)) return to_signed(*c);
  return inner_estimate(key);
}

std::uint64_t DoubleHashSketch::inner_cells() const noexcept {
  return std::visit([](const auto& sk) { return sketch_memory_cells(sk.config()); }, inner_);
}

std::uint64_t DoubleHashSketch::memory_bytes() const noexcept {
  return dhsketch::memory_bytes(inner_cells(), hh_.capacity());
}

ReoptimizeResult DoubleHashSketch::reoptimize() {
  if (config_.unique_buckets == 0 || total_weight_ == 0) return {};
  return reoptimize(config_.heavy_hitter_params(total_weight_));
}

ReoptimizeResult DoubleHashSketch::reoptimize(const HeavyHitterParams& params) {
  params.validate();
  if (hh_.capacity() == 0 || total_weight_ == 0) return {};

  FrequencyMap current;
  for (const auto& [key, count] : hh_.sorted_entries()) current.emplace(key, count);
  for (const auto& [key, stale] : candidates_.entries()) {
    if (current.contains(key)) continue;
    current.emplace(key, static_cast<std::uint64_t>(std::max<std::int64_t>(0, inner_estimate(key))));
  }
  if (current.empty()) return {};

  HeavyHitterParams p = params;
  p.capacity = std::min(p.capacity, hh_.capacity());
  const auto next = detect_heavy_hitters(current, total_weight_, p);
  const std::unordered_set<std::string> keep(next.begin(), next.end());

  ReoptimizeResult result;
  for (const auto& [key, count] : hh_.sorted_entries())
    if (!keep.contains(key)) result.demoted.push_back(key);
  for (const auto& key : next)
    if (!hh_.contains(key)) result.promoted.push_back(key);

  for (const auto& key : result.demoted) {
    const auto count = hh_.evict(key);
    std::visit([&](auto& sk) { sk.update(key, count); }, inner_);
    candidates_.observe(key, inner_estimate(key));
  }
  for (const auto& key : result.promoted) {
    // Seed with the estimate taken before any demotion touched the inner cells.
    hh_.admit(key, current.at(key));
    candidates_.remove(key);
  }
  return result;
}

std::string DoubleHashSketch::serialize() const {
  binary::Writer w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u64(config_.total_budget_bytes);
  w.u64(config_.first_pass_budget_bytes);
  w.u64(config_.first_pass_depth);
  w.u64(config_.unique_buckets);
  w.u64(config_.inner_depth);
  w.f64(config_.first_pass_fraction);
  w.u64(config_.master_seed);
  w.u8(static_cast<std::uint8_t>(config_.core));
  w.u64(config_.heaviness_k);
  w.u8(config_.track_candidates ? 1 : 0);
  w.u64(total_weight_);
  hh_.serialize(w);
  w.u8(static_cast<std::uint8_t>(config_.core));
  const auto blob = std::visit([](const auto& sk) { return sk.serialize(); }, inner_);
  w.u64(blob.size());
  w.bytes(blob);
  const auto cands = candidates_.entries();
  w.u64(cands.size());
  for (const auto& [key, est] : cands) {
    w.str(key);
    w.i64(est);
  }
  return std::move(w).take();
}

DoubleHashSketch DoubleHashSketch::deserialize(std::string_view blob) {
  binary::Reader r(blob);
  if (r.bytes(4) != kMagic) throw FormatError("bad double-hash checkpoint magic");
  if (r.u32() != kVersion) throw FormatError("unsupported double-hash checkpoint version");
  DoubleHashConfig c;
  c.total_budget_bytes = r.u64();
  c.first_pass_budget_bytes = r.u64();
  c.first_pass_depth = r.u64();
  c.unique_buckets = r.u64();
  c.inner_depth = r.u64();
  c.first_pass_fraction = r.f64();
  c.master_seed = r.u64();
  const auto core = r.u8();
  if (core > 1) throw FormatError("unknown sketch core");
  c.core = static_cast<CoreKind>(core);
  c.heaviness_k = r.u64();
  c.track_candidates = r.u8() != 0;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid checkpoint config: ") + e.what());
  }
  const auto total = r.u64();
  auto hh = HeavyHitterTable::deserialize(r);
  if (hh.capacity() != c.unique_buckets) throw FormatError("heavy-hitter capacity disagrees with config");
  if (r.u8() != core) throw FormatError("inner sketch kind disagrees with config");
  const auto len = r.u64();
  if (len > r.remaining()) throw FormatError("truncated inner sketch");
  const auto inner_blob = r.bytes(static_cast<std::size_t>(len));
  Inner inner = c.core == CoreKind::kCountSketch ? Inner(CountSketch::deserialize(inner_blob))
                                                  : Inner(CountMinSketch::deserialize(inner_blob));
  const bool shape_ok = std::visit([&](const auto& sk) { return sk.config() == c.inner_sketch_config(); }, inner);
  if (!shape_ok) throw FormatError("inner sketch shape disagrees with config");

  DoubleHashSketch sk(Restore{}, c, std::move(hh), std::move(inner));
  sk.total_weight_ = total;
  const auto n = r.u64();
  if (n > sk.candidates_.capacity()) throw FormatError("candidate list exceeds its capacity");
  for (std::uint64_t i = 0; i < n; ++i) {
    auto key = r.str();
    sk.candidates_.observe(key, r.i64());
  }
  r.expect_end();
  return sk;
}

// --- passes ------------------------------------------------------------------

FirstPassResult first_pass_estimates(std::span<const StreamItem> prefix, const DoubleHashConfig& config) {
  if (prefix.empty()) throw std::invalid_argument("first pass needs a nonempty stream prefix");
  CountMinSketch cm(config.first_pass_sketch_config());
  FirstPassResult out;
  for (const auto& it : prefix) {
    cm.update(it.key, it.weight);
    out.mass += it.weight;
    out.estimates.try_emplace(it.key, 0);
  }
  for (auto& [key, est] : out.estimates) est = cm.estimate(key);
  return out;
}

std::vector<std::string> select_heavy_hitters(const FirstPassResult& pass, const DoubleHashConfig& config) {
  if (config.unique_buckets == 0 || pass.mass == 0) return {};
  return detect_heavy_hitters(pass.estimates, pass.mass, config.heavy_hitter_params(pass.mass));
}

std::vector<std::string> first_pass(std::span<const StreamItem> prefix, const DoubleHashConfig& config) {
  return select_heavy_hitters(first_pass_estimates(prefix, config), config);
}

DoubleHashSketch build_double_hash(std::span<const StreamItem> prefix, const DoubleHashConfig& config) {
  config.validate();
  const auto hh = first_pass(prefix, config);
  return DoubleHashSketch(config, hh);
}

EstimateMap estimate_all(const DoubleHashSketch& sketch, const FrequencyMap& truth) {
  EstimateMap out;
  out.reserve(truth.size());
  for (const auto& [key, f] : truth) out.emplace(key, sketch.estimate(key));
  return out;
}

double score(const DoubleHashSketch& sketch, const FrequencyMap& truth, Metric metric) {
  ErrorAccumulator acc;
  for (const auto& [key, f] : truth) acc.add(sketch.estimate(key), f);
  return acc.result(metric);
}

namespace {

// Builds the candidate for real; used where SplitEvaluator does not apply.
double untracked_error(DoubleHashConfig cfg, std::span<const std::string> hh, const FrequencyMap& truth,
                       Metric metric) {
  cfg.track_candidates = false;
  DoubleHashSketch sk(cfg, hh);
  sk.ingest(truth);  // order-free for an untracked sketch
  return score(sk, truth, metric);
}

}  // namespace

SplitEvaluator::SplitEvaluator(const FrequencyMap& truth, std::span<const std::string> heavy_order,
                               std::uint64_t master_seed, std::uint64_t max_depth)
    : max_depth_(max_depth) {
  std::unordered_map<std::string_view, std::uint64_t> rank;
  rank.reserve(heavy_order.size());
  for (std::size_t i = 0; i < heavy_order.size(); ++i) rank.try_emplace(heavy_order[i], i);

  const auto inner_seed = derive_seed(master_seed, kInnerSalt);
  std::vector<std::uint64_t> row_seeds(max_depth);
  for (std::uint64_t r = 0; r < max_depth; ++r) row_seeds[r] = derive_row_seed(inner_seed, r);

  keys_.reserve(truth.size());
  digests_.reserve(truth.size() * max_depth);
  for (const auto& [key, f] : truth) {
    auto it = rank.find(key);
    keys_.push_back({f, it == rank.end() ? std::numeric_limits<std::uint64_t>::max() : it->second});
    for (auto seed : row_seeds) digests_.push_back(hash_bytes(key, seed));
  }
}

double SplitEvaluator::error(std::uint64_t unique_buckets, std::uint64_t depth, std::uint64_t width,
                             Metric metric) const {
  if (depth == 0 || depth > max_depth_ || width == 0) throw std::invalid_argument("split outside evaluator range");
  std::vector<std::uint64_t> table(depth * width, 0);
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (keys_[i].heavy_rank < unique_buckets) continue;
    const auto* dig = &digests_[i * max_depth_];
    for (std::uint64_t r = 0; r < depth; ++r) table[r * width + fast_range(dig[r], width)] += keys_[i].count;
  }
  ErrorAccumulator acc;
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (keys_[i].heavy_rank < unique_buckets) {
      acc.add(to_signed(keys_[i].count), keys_[i].count);
      continue;
    }
    const auto* dig = &digests_[i * max_depth_];
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    for (std::uint64_t r = 0; r < depth; ++r) best = std::min(best, table[r * width + fast_range(dig[r], width)]);
    acc.add(to_signed(best), keys_[i].count);
  }
  return acc.result(metric);
}

// --- tuning ------------------------------------------------------------------

std::vector<TuneCandidate> default_tuning_grid(std::uint64_t budget_bytes) {
  std::vector<TuneCandidate> grid;
  for (std::uint64_t eighths = 0; eighths <= 6; ++eighths) {
    const std::uint64_t unique = budget_bytes * eighths / 8 / MemoryModel::kBytesPerUniqueBucket;
    for (std::uint64_t d = 1; d <= 5; ++d) {
      const TuneCandidate c{unique, d};
      if (width_for_budget(budget_bytes, d, unique) == 0) continue;
      if (std::find(grid.begin(), grid.end(), c) == grid.end()) grid.push_back(c);
    }
  }
  return grid;
}

TuneResult tune(std::span<const StreamItem> training, std::span<const StreamItem> validation,
                std::uint64_t budget_bytes, std::span<const TuneCandidate> grid, const DoubleHashConfig& base,
                Metric metric) {
  check_grid(grid, budget_bytes);
  if (validation.empty()) throw std::invalid_argument("tuning needs a nonempty validation stream");

  std::uint64_t max_unique = 0;
  for (const auto& c : grid) max_unique = std::max(max_unique, c.unique_buckets);
  DoubleHashConfig widest = base;
  widest.unique_buckets = max_unique;

  // The first-pass sketch does not depend on the candidate, and the ranked
  // heavy-hitter list for a smaller capacity is a prefix of the longest one.
  const auto pass = first_pass_estimates(training, base);
  const auto ranked = select_heavy_hitters(pass, widest);
  const auto truth = exact_counts(validation);

  std::optional<SplitEvaluator> fast;
  if (base.core == CoreKind::kCountMin) fast.emplace(truth, ranked, base.master_seed, max_depth(grid));

  TuneResult best;
  bool have = false;
  for (const auto& cand : grid) {
    auto cfg = with_candidate(base, budget_bytes, cand);
    auto hh = truncated(ranked, cand.unique_buckets);
    const double err = fast ? fast->error(cand.unique_buckets, cand.inner_depth, cfg.inner_width(), metric)
                            : untracked_error(cfg, hh, truth, metric);
    if (!have || better(err, cfg, best.validation_error, best.config)) {
      best = {cfg, err, std::move(hh)};
      have = true;
    }
  }
  return best;
}

// --- windows -----------------------------------------------------------------

WindowPlan rolling_plan(std::size_t test, std::size_t train_windows, std::size_t validate_windows) {
  if (train_windows == 0 || validate_windows == 0)
    throw std::invalid_argument("need at least one training and one validation window");
  if (test < train_windows + validate_windows) throw std::invalid_argument("insufficient history before the test window");
  const auto vb = test - validate_windows;
  return {vb - train_windows, vb, vb, test, test};
}

WindowPlan anchored_plan(std::size_t test, std::size_t train_windows, std::size_t validate_windows) {
  if (train_windows == 0 || validate_windows == 0)
    throw std::invalid_argument("need at least one training and one validation window");
  if (test < train_windows + validate_windows) throw std::invalid_argument("insufficient history before the test window");
  return {0, train_windows, train_windows, train_windows + validate_windows, test};
}

Stream concat_windows(std::span<const Stream> windows, std::size_t begin, std::size_t end) {
  Stream out;
  for (std::size_t w = begin; w < end; ++w) out.insert(out.end(), windows[w].begin(), windows[w].end());
  return out;
}

WindowResult run_window_plan(std::span<const Stream> windows, const WindowPlan& plan, std::uint64_t budget_bytes,
                             std::span<const TuneCandidate> grid, const DoubleHashConfig& base, Metric metric) {
  if (plan.train_begin >= plan.train_end || plan.validate_begin >= plan.validate_end)
    throw std::invalid_argument("empty training or validation range");
  if (plan.train_end > windows.size() || plan.validate_end > windows.size() || plan.test >= windows.size())
    throw std::invalid_argument("window plan references missing windows");

  const auto training = concat_windows(windows, plan.train_begin, plan.train_end);
  if (training.empty()) throw std::invalid_argument("training windows hold no items");
  const auto validation = concat_windows(windows, plan.validate_begin, plan.validate_end);

  auto tuning = tune(training, validation, budget_bytes, grid, base, metric);
  DoubleHashSketch sk(tuning.config, tuning.heavy_hitters);
  sk.ingest(windows[plan.test]);
  return {plan, std::move(tuning), std::move(sk)};
}

std::vector<WindowResult> rolling_schedule(std::span<const Stream> windows, std::size_t train_windows,
                                           const DoubleHashConfig& base, std::span<const TuneCandidate> grid,
                                           Metric metric) {
  if (windows.size() < train_windows + 2)
    throw std::invalid_argument("insufficient history: need train_windows + 1 windows before a test window");
  std::vector<WindowResult> out;
  for (std::size_t t = train_windows + 1; t < windows.size(); ++t)
    out.push_back(run_window_plan(windows, rolling_plan(t, train_windows), base.total_budget_bytes, grid, base, metric));
  return out;
}

// --- ideal -------------------------------------------------------------------

std::vector<std::string> top_keys(const FrequencyMap& counts, std::size_t n) {
  std::vector<std::pair<std::uint64_t, const std::string*>> ranked;
  ranked.reserve(counts.size());
  for (const auto& [key, f] : counts) ranked.emplace_back(f, &key);
  const auto keep = std::min(n, ranked.size());
  auto cmp = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : *a.second < *b.second; };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), cmp);
  std::vector<std::string> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(*ranked[i].second);
  return out;
}

IdealResult ideal_learned_sketch(const FrequencyMap& test_counts, std::uint64_t budget_bytes,
                                 std::span<const TuneCandidate> grid, const DoubleHashConfig& base, Metric metric) {
  check_grid(grid, budget_bytes);
  std::uint64_t max_unique = 0;
  for (const auto& c : grid) max_unique = std::max(max_unique, c.unique_buckets);
  const auto ranked = top_keys(test_counts, static_cast<std::size_t>(max_unique));

  std::optional<SplitEvaluator> fast;
  if (base.core == CoreKind::kCountMin) fast.emplace(test_counts, ranked, base.master_seed, max_depth(grid));

  IdealResult best;
  bool have = false;
  for (const auto& cand : grid) {
    auto cfg = with_candidate(base, budget_bytes, cand);
    const double err = fast ? fast->error(cand.unique_buckets, cand.inner_depth, cfg.inner_width(), metric)
                            : untracked_error(cfg, truncated(ranked, cand.unique_buckets), test_counts, metric);
    if (!have || better(err, cfg, best.error, best.config)) {
      best = {cfg, err};
      have = true;
    }
  }
  return best;
}

}  // namespace dhsketch
