#include "dhsketch/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "dhsketch/errors.hpp"
#include "dhsketch/sketch.hpp"

namespace dhsketch {

namespace {

constexpr std::uint64_t kValidationSalt = 0x7A11DA7E;

// One independent unit of work; produces rows and diagnostics of its own.
struct CellOutput {
  std::vector<ReportRow> rows;
  std::vector<std::string> diagnostics;
};

using Task = std::function<CellOutput()>;

std::vector<CellOutput> run_tasks(std::vector<Task>& tasks, std::size_t threads) {
  std::vector<CellOutput> out(tasks.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        out[i] = tasks[i]();
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

template <typename Sketch>
double sketch_error(const SketchConfig& cfg, const FrequencyMap& truth, Metric metric) {
  Sketch sk(cfg);
  for (const auto& [key, f] : truth) sk.update(key, f);
  ErrorAccumulator acc;
  for (const auto& [key, f] : truth) acc.add(static_cast<std::int64_t>(sk.estimate(key)), f);
  return acc.result(metric);
}

std::string checkpoint_name(std::uint64_t budget, std::uint64_t seed) {
  return "dh_b" + std::to_string(budget) + "_s" + std::to_string(seed) + ".bin";
}

void write_checkpoint(const ExperimentSpec& spec, const DoubleHashSketch& sk, std::uint64_t budget,
                      std::uint64_t seed) {
  if (!spec.checkpoint_dir) return;
  const auto path = *spec.checkpoint_dir / checkpoint_name(budget, seed);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const auto blob = sk.serialize();
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
}

bool has(const ExperimentSpec& spec, Algorithm a) {
  return std::find(spec.algorithms.begin(), spec.algorithms.end(), a) != spec.algorithms.end();
}

// Accumulates per-window errors into one averaged row.
struct Averaged {
  ReportRow row;
  double sum = 0;
  std::size_t n = 0;
  void add(double e) {
    sum += e;
    ++n;
  }
  ReportRow finish() {
    row.error = n == 0 ? 0.0 : sum / static_cast<double>(n);
    return row;
  }
};

// Baseline sketches (CM/CS) at every configured depth.
void baseline_rows(const ExperimentSpec& spec, std::uint64_t budget, std::uint64_t seed, const FrequencyMap& truth,
                   std::map<std::tuple<int, std::uint64_t>, Averaged>& acc, std::vector<std::string>& diag) {
  for (auto alg : {Algorithm::kCountMin, Algorithm::kCountSketch}) {
    if (!has(spec, alg)) continue;
    for (auto depth : spec.depths) {
      const auto width = width_for_budget(budget, depth, 0);
      if (width == 0) {
        diag.push_back(std::string(algorithm_name(alg)) + ": budget " + std::to_string(budget) +
                       " cannot hold depth " + std::to_string(depth) + "; skipped");
        continue;
      }
      const SketchConfig cfg{width, depth, seed};
      const double err = alg == Algorithm::kCountMin ? sketch_error<CountMinSketch>(cfg, truth, spec.metric)
                                                     : sketch_error<CountSketch>(cfg, truth, spec.metric);
      auto& a = acc[{static_cast<int>(alg), depth}];
      a.row = {std::string(algorithm_name(alg)), budget, depth, 0, seed, spec.metric, 0,
               memory_bytes(sketch_memory_cells(cfg), 0)};
      a.add(err);
    }
  }
}

void ideal_row(const ExperimentSpec& spec, std::uint64_t budget, std::uint64_t seed, const FrequencyMap& truth,
               std::span<const TuneCandidate> grid, std::map<std::tuple<int, std::uint64_t>, Averaged>& acc) {
  if (!has(spec, Algorithm::kIdeal)) return;
  auto base = spec.dh;
  base.master_seed = seed;
  const auto ideal = ideal_learned_sketch(truth, budget, grid, base, spec.metric);
  auto& a = acc[{static_cast<int>(Algorithm::kIdeal), 0}];
  a.row = {std::string(algorithm_name(Algorithm::kIdeal)), budget, ideal.config.inner_depth,
           ideal.config.unique_buckets, seed, spec.metric, 0, ideal.config.memory_bytes()};
  a.add(ideal.error);
}

ReportRow dh_row(Algorithm alg, const ExperimentSpec& spec, std::uint64_t budget, std::uint64_t seed,
                 const DoubleHashConfig& cfg) {
  return {std::string(algorithm_name(alg)), budget, cfg.inner_depth, cfg.unique_buckets, seed, spec.metric, 0,
          cfg.memory_bytes()};
}

CellOutput finish(std::map<std::tuple<int, std::uint64_t>, Averaged>& acc, std::vector<std::string> diag) {
  CellOutput out;
  for (auto& [k, a] : acc) out.rows.push_back(a.finish());
  out.diagnostics = std::move(diag);
  return out;
}

// --- synthetic source ---------------------------------------------------------

struct SyntheticData {
  Stream stream;
  FrequencyMap truth;
  Stream held_out;  // independent draw from the same generator
  std::span<const StreamItem> training;
  std::span<const StreamItem> validation;
};

// Training is the first-pass prefix S_t of the stream. Validation is an
// independent stream of the same length: candidate rankings depend on how
// many distinct keys share a cell, so they only carry over from a sample at
// the deployed length.
SyntheticData make_synthetic(const ZipfSpec& zipf, double fraction) {
  SyntheticData d;
  d.stream = generate_stream(zipf);
  d.truth = exact_counts(d.stream);
  auto other = zipf;
  other.seed = derive_seed(zipf.seed, kValidationSalt);
  d.held_out = generate_stream(other);
  const auto n = d.stream.size();
  const auto t = std::clamp<std::size_t>(static_cast<std::size_t>(fraction * static_cast<double>(n)), 1, n);
  d.training = std::span<const StreamItem>(d.stream).first(t);
  d.validation = d.held_out;
  return d;
}

CellOutput synthetic_cell(const ExperimentSpec& spec, const SyntheticData& data, std::uint64_t budget,
                          std::uint64_t seed) {
  std::map<std::tuple<int, std::uint64_t>, Averaged> acc;
  std::vector<std::string> diag;
  baseline_rows(spec, budget, seed, data.truth, acc, diag);

  const auto grid = default_tuning_grid(budget);
  if (grid.empty()) {
    if (has(spec, Algorithm::kDoubleHash) || has(spec, Algorithm::kIdeal))
      diag.push_back("budget " + std::to_string(budget) + " admits no double-hash configuration; skipped");
    return finish(acc, std::move(diag));
  }
  if (has(spec, Algorithm::kDoubleHash)) {
    auto base = spec.dh;
    base.master_seed = seed;
    const auto tuned = tune(data.training, data.validation, budget, grid, base, spec.metric);
    DoubleHashSketch sk(tuned.config, tuned.heavy_hitters);
    // Identical to ingesting the raw stream: routing is fixed during the main pass.
    sk.ingest(data.truth);
    auto& a = acc[{static_cast<int>(Algorithm::kDoubleHash), 0}];
    a.row = dh_row(Algorithm::kDoubleHash, spec, budget, seed, tuned.config);
    a.add(score(sk, data.truth, spec.metric));
    write_checkpoint(spec, sk, budget, seed);
  }
  if (has(spec, Algorithm::kDoubleHashRolling))
    diag.push_back("DH-rolling needs a windowed log source; skipped for synthetic input");
  ideal_row(spec, budget, seed, data.truth, grid, acc);
  return finish(acc, std::move(diag));
}

// --- log source ----------------------------------------------------------------

std::vector<std::size_t> resolve_test_windows(const LogSchedule& sched, std::size_t n_windows) {
  const auto history = sched.train_windows + sched.validate_windows;
  std::vector<std::size_t> tests = sched.test_windows;
  if (tests.empty()) {
    for (std::size_t t = history; t < n_windows; ++t) tests.push_back(t);
  }
  if (tests.empty())
    throw std::invalid_argument("insufficient history: " + std::to_string(n_windows) + " windows, need at least " +
                                std::to_string(history + 1));
  for (auto t : tests) {
    if (t >= n_windows) throw std::invalid_argument("test window " + std::to_string(t) + " does not exist");
    if (t < history) throw std::invalid_argument("insufficient history before test window " + std::to_string(t));
  }
  return tests;
}

CellOutput log_cell(const ExperimentSpec& spec, const LogSchedule& sched, const std::vector<Stream>& windows,
                    const std::vector<std::size_t>& tests, std::uint64_t budget, std::uint64_t seed) {
  std::map<std::tuple<int, std::uint64_t>, Averaged> acc;
  std::vector<std::string> diag;
  const auto grid = default_tuning_grid(budget);
  auto base = spec.dh;
  base.master_seed = seed;

  for (auto t : tests) {
    const auto anchored = anchored_plan(t, sched.train_windows, sched.validate_windows);
    const auto rolling = rolling_plan(t, sched.train_windows, sched.validate_windows);
    // With count_history the main pass covers windows 0..t, the anchored plan's full history.
    const std::size_t span_begin = sched.count_history ? 0 : t;
    const auto test_stream = concat_windows(windows, span_begin, t + 1);
    const auto truth = exact_counts(test_stream);
    if (truth.empty()) {
      diag.push_back("test window " + std::to_string(t) + " is empty; skipped");
      continue;
    }
    baseline_rows(spec, budget, seed, truth, acc, diag);
    if (grid.empty()) continue;

    for (auto [alg, plan] : {std::pair{Algorithm::kDoubleHash, anchored}, std::pair{Algorithm::kDoubleHashRolling, rolling}}) {
      if (!has(spec, alg)) continue;
      const auto training = concat_windows(windows, plan.train_begin, plan.train_end);
      const auto validation = concat_windows(windows, plan.validate_begin, plan.validate_end);
      if (training.empty() || validation.empty()) {
        diag.push_back(std::string(algorithm_name(alg)) + ": empty training/validation for test window " +
                       std::to_string(t) + "; skipped");
        continue;
      }
      const auto tuned = tune(training, validation, budget, grid, base, spec.metric);
      DoubleHashSketch sk(tuned.config, tuned.heavy_hitters);
      sk.ingest(test_stream);
      auto& a = acc[{static_cast<int>(alg), 0}];
      a.row = dh_row(alg, spec, budget, seed, tuned.config);
      a.add(score(sk, truth, spec.metric));
      if (alg == Algorithm::kDoubleHash && t == tests.back()) write_checkpoint(spec, sk, budget, seed);
    }
    ideal_row(spec, budget, seed, truth, grid, acc);
  }
  if (grid.empty() && (has(spec, Algorithm::kDoubleHash) || has(spec, Algorithm::kDoubleHashRolling) ||
                       has(spec, Algorithm::kIdeal)))
    diag.push_back("budget " + std::to_string(budget) + " admits no double-hash configuration; skipped");
  return finish(acc, std::move(diag));
}

std::string format_error(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string_view algorithm_name(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::kCountMin: return "CM";
    case Algorithm::kCountSketch: return "CS";
    case Algorithm::kDoubleHash: return "DH";
    case Algorithm::kDoubleHashRolling: return "DH-rolling";
    case Algorithm::kIdeal: return "Ideal";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "cm") return Algorithm::kCountMin;
  if (lower == "cs") return Algorithm::kCountSketch;
  if (lower == "dh") return Algorithm::kDoubleHash;
  if (lower == "dh-rolling") return Algorithm::kDoubleHashRolling;
  if (lower == "ideal") return Algorithm::kIdeal;
  throw std::invalid_argument("unknown algorithm: " + std::string(name));
}

void ExperimentSpec::validate() const {
  if (budgets.empty()) throw std::invalid_argument("budget grid is empty");
  if (algorithms.empty()) throw std::invalid_argument("no algorithms selected");
  if (depths.empty()) throw std::invalid_argument("depth grid is empty");
  if (seeds.empty()) throw std::invalid_argument("seed list is empty");
  for (auto d : depths)
    if (d == 0) throw std::invalid_argument("depth must be >= 1");
  for (auto b : budgets)
    if (b == 0) throw std::invalid_argument("budget must be positive");
  if (std::holds_alternative<ZipfSpec>(source)) std::get<ZipfSpec>(source).validate();
  // Budget and split are swept; only the first-pass settings must be valid here.
  auto probe = dh;
  probe.total_budget_bytes = 1'000'000;
  probe.unique_buckets = 0;
  probe.inner_depth = 1;
  probe.validate();
}

ErrorReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ErrorReport report;
  std::vector<Task> tasks;

  // Data shared read-only by all tasks; kept alive until run_tasks returns.
  std::optional<SyntheticData> synthetic;
  WindowedLog log;
  std::vector<std::size_t> tests;

  if (const auto* zipf = std::get_if<ZipfSpec>(&spec.source)) {
    synthetic = make_synthetic(*zipf, spec.dh.first_pass_fraction);
    for (auto budget : spec.budgets)
      for (auto seed : spec.seeds)
        tasks.push_back([&spec, &synthetic, budget, seed] { return synthetic_cell(spec, *synthetic, budget, seed); });
  } else {
    const auto& sched = std::get<LogSchedule>(spec.source);
    log = read_windows(sched.source);
    if (log.diagnostics.malformed > 0)
      report.diagnostics.push_back("skipped " + std::to_string(log.diagnostics.malformed) + " malformed rows of " +
                                   std::to_string(log.diagnostics.rows));
    tests = resolve_test_windows(sched, log.windows.size());
    for (auto budget : spec.budgets)
      for (auto seed : spec.seeds)
        tasks.push_back([&spec, &sched, &log, &tests, budget, seed] {
          return log_cell(spec, sched, log.windows, tests, budget, seed);
        });
  }

  for (auto& cell : run_tasks(tasks, spec.threads)) {
    report.rows.insert(report.rows.end(), cell.rows.begin(), cell.rows.end());
    report.diagnostics.insert(report.diagnostics.end(), cell.diagnostics.begin(), cell.diagnostics.end());
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.algorithm, a.budget_bytes, a.seed, a.depth) < std::tie(b.algorithm, b.budget_bytes, b.seed, b.depth);
  });
  report.diagnostics.erase(std::unique(report.diagnostics.begin(), report.diagnostics.end()), report.diagnostics.end());
  return report;
}

std::string format_report_csv(const ErrorReport& report) {
  auto rows = report.rows;
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.algorithm, a.budget_bytes, a.seed) < std::tie(b.algorithm, b.budget_bytes, b.seed);
  });
  std::ostringstream out;
  out << "algorithm,budget_bytes,depth,unique_buckets,seed,metric,error\n";
  for (const auto& r : rows) {
    out << r.algorithm << ',' << r.budget_bytes << ',' << r.depth << ',' << r.unique_buckets << ',' << r.seed << ','
        << metric_name(r.metric) << ',' << format_error(r.error) << '\n';
  }
  return out.str();
}

void write_report(const ErrorReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open report file " + path.string());
  out << format_report_csv(report);
  if (!out) throw std::runtime_error("failed writing report file " + path.string());
}

std::vector<SummaryCell> summarize(const ErrorReport& report) {
  // (algorithm, budget, depth) -> (sum, n)
  std::map<std::tuple<std::string, std::uint64_t, std::uint64_t>, std::pair<double, std::size_t>> by_depth;
  for (const auto& r : report.rows) {
    const bool baseline = r.algorithm == "CM" || r.algorithm == "CS";
    auto& s = by_depth[{r.algorithm, r.budget_bytes, baseline ? r.depth : 0}];
    s.first += r.error;
    ++s.second;
  }
  std::map<std::pair<std::string, std::uint64_t>, double> best;
  for (const auto& [k, s] : by_depth) {
    const double mean = s.first / static_cast<double>(s.second);
    const std::pair key{std::get<0>(k), std::get<1>(k)};
    auto it = best.find(key);
    if (it == best.end() || mean < it->second) best[key] = mean;
  }
  std::vector<SummaryCell> out;
  for (const auto& [k, v] : best) out.push_back({k.first, k.second, v});
  return out;
}

std::optional<double> summary_error(const std::vector<SummaryCell>& cells, std::string_view algorithm,
                                    std::uint64_t budget_bytes) {
  for (const auto& c : cells)
    if (c.algorithm == algorithm && c.budget_bytes == budget_bytes) return c.mean_error;
  return std::nullopt;
}

// --- continuous optimization -------------------------------------------------

DriftResult compare_continuous_optimization(const DriftSpec& spec) {
  if (spec.windows < 2) throw std::invalid_argument("drift comparison needs at least two windows");
  const auto stream = generate_two_phase_stream(spec.zipf, spec.permutation_seed);
  std::span<const StreamItem> all(stream);
  const std::size_t per_window = stream.size() / spec.windows;
  if (per_window == 0) throw std::invalid_argument("more windows than stream items");

  DoubleHashConfig cfg;
  cfg.total_budget_bytes = spec.budget_bytes;
  cfg.unique_buckets = spec.unique_buckets;
  cfg.inner_depth = spec.inner_depth;
  cfg.first_pass_budget_bytes = spec.first_pass_budget_bytes;
  cfg.first_pass_depth = spec.first_pass_depth;
  cfg.master_seed = spec.master_seed;
  cfg.validate();

  const auto hh = first_pass(all.first(per_window), cfg);
  auto tracked_cfg = cfg;
  tracked_cfg.track_candidates = true;
  std::vector<std::string> carried = hh;

  DriftResult result;
  for (std::size_t w = 0; w < spec.windows; ++w) {
    const auto begin = w * per_window;
    const auto end = w + 1 == spec.windows ? stream.size() : begin + per_window;
    const auto window = all.subspan(begin, end - begin);
    const auto truth = exact_counts(window);

    DoubleHashSketch fixed(cfg, hh);
    fixed.ingest(window);
    result.static_window_errors.push_back(score(fixed, truth, spec.metric));

    DoubleHashSketch reopt(tracked_cfg, carried);
    reopt.ingest(window);
    result.reoptimized_window_errors.push_back(score(reopt, truth, spec.metric));

    const auto change = reopt.reoptimize();
    if (w + 1 < spec.windows) {
      result.promotions += change.promoted.size();
      result.demotions += change.demoted.size();
    }
    carried.clear();
    for (const auto& [key, count] : reopt.heavy_hitters().sorted_entries()) carried.push_back(key);
  }
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  result.static_error = mean(result.static_window_errors);
  result.reoptimized_error = mean(result.reoptimized_window_errors);
  return result;
}

}  // namespace dhsketch
