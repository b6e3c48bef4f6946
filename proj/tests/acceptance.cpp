// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Pass a criterion number (or several) to run only those.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "dhsketch/double_hash.hpp"
#include "dhsketch/experiment.hpp"
#include "dhsketch/heavy_hitters.hpp"
#include "dhsketch/sketch.hpp"
#include "dhsketch/stream.hpp"
#include "support/oracles.hpp"

using namespace dhsketch;
namespace oracle = dhsketch::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch_dir(const std::string& stem) {
  std::random_device rd;
  auto p = fs::temp_directory_path() / (stem + std::to_string(rd()) + std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "dhsketch");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "%s", e.str().c_str());
  return code;
}

// 1 -----------------------------------------------------------------------------
Outcome overestimation() {
  std::mt19937_64 rng(101);
  std::uint64_t cases = 0, checks = 0, violations = 0;
  for (; cases < 1200; ++cases) {
    const auto s = oracle::random_stream(rng, 50 + rng() % 400, 1 + rng() % 150, 1 + rng() % 40);
    const auto truth = oracle::brute_counts(s);
    const auto seed = rng();
    const auto depth = 1 + rng() % 5;

    CountMinSketch cm({1 + rng() % 64, depth, seed});
    for (const auto& it : s) cm.update(it.key, it.weight);

    DoubleHashConfig cfg;
    cfg.unique_buckets = rng() % 10;
    cfg.inner_depth = depth;
    cfg.total_budget_bytes = 8 * cfg.unique_buckets + 4 * depth * (1 + rng() % 40);
    cfg.first_pass_budget_bytes = 400 + rng() % 4000;
    cfg.first_pass_depth = 1 + rng() % 4;
    cfg.master_seed = seed;
    cfg.track_candidates = rng() % 2 == 0;
    const auto prefix_len = 1 + rng() % s.size();
    auto dh = build_double_hash(std::span(s).first(prefix_len), cfg);
    // Some cases reoptimize mid-stream; the bound must survive it.
    const bool reopt = cfg.track_candidates && rng() % 2 == 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      dh.update(s[i]);
      if (reopt && i == s.size() / 2) dh.reoptimize();
    }
    for (const auto& [k, f] : truth) {
      checks += 2;
      if (cm.estimate(k) < f) ++violations;
      if (dh.estimate(k) < static_cast<std::int64_t>(f)) ++violations;
    }
  }
  return {violations == 0, fmt("%llu cases, %llu key checks, %llu violations", (unsigned long long)cases,
                               (unsigned long long)checks, (unsigned long long)violations)};
}

// 2 -----------------------------------------------------------------------------
Outcome collision_free_exactness() {
  std::mt19937_64 rng(202);
  std::uint64_t keys_checked = 0, wrong = 0;
  int cases = 0;
  for (; cases < 200; ++cases) {
    const auto distinct = 1 + rng() % 64;
    const auto s = oracle::random_stream(rng, 4 * distinct, distinct, 50);
    const auto truth = oracle::brute_counts(s);
    std::vector<std::string> keys;
    for (const auto& [k, f] : truth) keys.push_back(k);
    const std::uint64_t width = 2 * keys.size() * keys.size() + 8;
    const std::uint64_t depth = 1 + rng() % 5;
    const auto seed = oracle::find_injective_seed(keys, width, depth, rng() % 100'000);

    CountMinSketch cm({width, depth, seed});
    CountSketch cs({width, depth, seed});
    for (const auto& it : s) {
      cm.update(it.key, it.weight);
      cs.update(it.key, it.weight);
    }

    // DH: a third of the keys isolated, the rest in an inner sketch whose
    // rows are verified injective on the non-isolated keys.
    DoubleHashConfig cfg;
    cfg.inner_depth = depth;
    std::vector<std::string> hh, rest;
    for (std::size_t i = 0; i < keys.size(); ++i) (i % 3 == 0 ? hh : rest).push_back(keys[i]);
    cfg.unique_buckets = hh.size();
    cfg.total_budget_bytes = 8 * hh.size() + 4 * depth * width;
    cfg.first_pass_budget_bytes = 4000;
    for (cfg.master_seed = rng() % 100'000;
         !oracle::rows_injective(rest, width, depth, derive_seed(cfg.master_seed, 1)); ++cfg.master_seed) {
    }
    DoubleHashSketch dh(cfg, hh);
    dh.ingest(s);

    for (const auto& [k, f] : truth) {
      keys_checked += 3;
      wrong += cm.estimate(k) != f;
      wrong += cs.estimate(k) != static_cast<std::int64_t>(f);
      wrong += dh.estimate(k) != static_cast<std::int64_t>(f);
    }
  }
  return {wrong == 0, fmt("%d streams, %llu estimates, %llu inexact", cases, (unsigned long long)keys_checked,
                          (unsigned long long)wrong)};
}

// 3 -----------------------------------------------------------------------------
Outcome heavy_hitter_cardinality() {
  std::mt19937_64 rng(303);
  std::uint64_t cases = 0, bad = 0;
  for (std::uint64_t k = 2; k <= 64; ++k) {
    for (int trial = 0; trial < 300; ++trial, ++cases) {
      FrequencyMap est;
      const auto n = rng() % 200;
      std::uint64_t sum = 0;
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto e = rng() % 3 == 0 ? rng() % 100'000 : rng() % 50;
        est["key" + std::to_string(rng() % 1000)] = e;
      }
      for (const auto& [key, e] : est) sum += e;
      // Totals below the estimate sum (first-pass overestimates) stress the bound hardest.
      const std::uint64_t total = 1 + (trial % 2 ? sum : sum / (1 + rng() % 16));
      const auto cap = 1 + rng() % 128;
      const auto got = detect_heavy_hitters(est, total, {k, cap});
      if (got.size() >= k) ++bad;
    }
  }
  return {bad == 0, fmt("%llu cases over k=2..64, %llu with >= k keys", (unsigned long long)cases,
                        (unsigned long long)bad)};
}

// 4 -----------------------------------------------------------------------------
Outcome zipf_pmf_fidelity() {
  const double p1 = zipf_pmf(1, {100, 1.0, 1, 0});
  const double p2 = zipf_pmf(1, {100, 2.0, 1, 0});
  double worst = 0;
  for (double s : {0.0, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0}) {
    for (std::uint64_t n : {1u, 100u, 140'000u, 1'000'000u}) {
      ZipfDistribution z(n, s);
      long double sum = 0;
      for (std::uint64_t r = 1; r <= n; ++r) sum += z.pmf(r);
      worst = std::max(worst, static_cast<double>(std::fabs(sum - 1.0L)));
    }
  }
  const bool pass = std::fabs(p1 - 0.19278) <= 1e-4 && std::fabs(p2 - 0.6117) <= 1e-3 && worst <= 1e-12;
  return {pass, fmt("pmf(1;s=1,N=100)=%.5f pmf(1;s=2,N=100)=%.4f max|sum-1|=%.2e", p1, p2, worst)};
}

// 5 -----------------------------------------------------------------------------
Outcome synthetic_ordering() {
  const std::vector<std::uint64_t> budgets{200'000, 400'000, 600'000, 800'000, 1'000'000};
  bool pass = true;
  std::string detail;
  for (double s : {0.7, 1.0}) {
    ExperimentSpec spec;
    spec.source = ZipfSpec{140'000, s, 1'000'000, 1};
    spec.budgets = budgets;
    spec.algorithms = {Algorithm::kCountMin, Algorithm::kDoubleHash, Algorithm::kIdeal};
    spec.depths = {1, 2, 3, 4, 5};
    spec.seeds = {1, 2, 3, 4, 5};
    spec.dh.first_pass_budget_bytes = 200'000;
    spec.dh.first_pass_depth = 4;
    const auto summary = summarize(run_experiment(spec));
    for (auto b : budgets) {
      const double cm = *summary_error(summary, "CM", b);
      const double dh = *summary_error(summary, "DH", b);
      const double ideal = *summary_error(summary, "Ideal", b);
      bool ok = ideal <= dh && dh <= 1.05 * cm;
      if (s == 1.0) ok = ok && dh < cm;
      pass = pass && ok;
      std::printf("    s=%.1f budget=%7llu  CM=%-10.5g DH=%-10.5g Ideal=%-10.5g %s\n", s, (unsigned long long)b, cm,
                  dh, ideal, ok ? "ok" : "VIOLATED");
    }
  }
  return {pass, "Ideal <= DH <= 1.05 CM at every budget (s=0.7, 1.0); DH < CM at s=1.0; 5 seeds"};
}

// 6 -----------------------------------------------------------------------------
Outcome rolling_schedule_on_log() {
  const auto dir = scratch_dir("dhsketch_accept6_");
  const auto path = (dir / "drift.tsv").string();
  oracle::write_drifting_log(path, 10, 150'000, 200'000, 0.9, 0.02, 6);

  ExperimentSpec spec;
  LogSchedule sched;
  sched.source = {path, LogFormat::kTsv, 1, 2, true};
  sched.train_windows = 5;
  sched.validate_windows = 1;
  spec.source = sched;
  const std::vector<std::uint64_t> budgets{200'000, 600'000, 800'000, 1'000'000};
  spec.budgets = budgets;
  spec.algorithms = {Algorithm::kCountMin, Algorithm::kDoubleHashRolling};
  spec.depths = {1, 2, 3, 4, 5};
  spec.seeds = {1, 2, 3};
  const auto report = run_experiment(spec);
  fs::remove_all(dir);

  const auto summary = summarize(report);
  bool pass = true;
  for (auto b : budgets) {
    const double cm = *summary_error(summary, "CM", b);
    const double dh = *summary_error(summary, "DH-rolling", b);
    const bool ok = dh <= cm;
    pass = pass && ok;
    std::printf("    budget=%7llu  CM=%-10.5g DH-rolling=%-10.5g %s\n", (unsigned long long)b, cm, dh,
                ok ? "ok" : "VIOLATED");
  }
  return {pass, "10-window drifting log, train w..w+4 / validate w+5, test windows 6..9, 3 seeds"};
}

// 7 -----------------------------------------------------------------------------
Outcome continuous_optimization() {
  double static_sum = 0, reopt_sum = 0;
  std::uint64_t promotions = 0;
  const int seeds = 5;
  for (int seed = 1; seed <= seeds; ++seed) {
    DriftSpec spec;
    spec.zipf = {10'000, 1.0, 2'000'000, static_cast<std::uint64_t>(seed)};
    spec.permutation_seed = 1000 + seed;
    spec.master_seed = seed;
    const auto r = compare_continuous_optimization(spec);
    std::printf("    seed=%d static=%-10.5g reoptimized=%-10.5g promotions=%llu\n", seed, r.static_error,
                r.reoptimized_error, (unsigned long long)r.promotions);
    static_sum += r.static_error;
    reopt_sum += r.reoptimized_error;
    promotions += r.promotions;
  }
  const double s = static_sum / seeds, o = reopt_sum / seeds;
  return {o <= s, fmt("mean per-window error: reoptimized %.5g vs static %.5g over %d seeds, %llu promotions", o, s,
                      seeds, (unsigned long long)promotions)};
}

// 8 -----------------------------------------------------------------------------
Outcome count_sketch_unbiased() {
  // A narrow table over a long tail, so individual estimates are noisy.
  const auto stream = generate_stream({5000, 1.0, 1000, 8});
  const auto truth = exact_counts(stream);
  const auto top = top_keys(truth, 10);
  std::map<std::string, long double> sum, abs_dev;
  constexpr int kSeeds = 1000;
  for (int seed = 0; seed < kSeeds; ++seed) {
    CountSketch cs({128, 5, static_cast<std::uint64_t>(seed)});
    for (const auto& it : stream) cs.update(it.key, it.weight);
    for (const auto& k : top) {
      const auto e = cs.estimate(k);
      sum[k] += e;
      abs_dev[k] += std::abs(e - static_cast<std::int64_t>(truth.at(k)));
    }
  }
  double worst = 0, noise = 0;
  for (const auto& k : top) {
    const double f = static_cast<double>(truth.at(k));
    worst = std::max(worst, std::fabs(static_cast<double>(sum[k] / kSeeds) - f) / f);
    noise = std::max(noise, static_cast<double>(abs_dev[k] / kSeeds) / f);
  }
  return {worst <= 0.02, fmt("1000-item stream, 1000 seeds, top 10 keys: worst |mean-f|/f %.3f%%, "
                             "per-seed mean |est-f|/f up to %.1f%%",
                             worst * 100, noise * 100)};
}

// 9 -----------------------------------------------------------------------------
Outcome byte_model() {
  std::mt19937_64 rng(909);
  int configs = 0, mismatches = 0;
  while (configs < 100) {
    DoubleHashConfig c;
    c.total_budget_bytes = 16 + rng() % 1'000'000;
    c.inner_depth = 1 + rng() % 5;
    c.unique_buckets = rng() % (c.total_budget_bytes / 16 + 1);
    c.core = rng() % 2 ? CoreKind::kCountSketch : CoreKind::kCountMin;
    c.master_seed = rng();
    if (!c.feasible()) continue;
    ++configs;
    DoubleHashSketch sk(c, {});
    // Count the cells the inner sketch actually holds.
    const auto cells = std::visit(
        [](const auto& s) {
          std::uint64_t n = 0;
          for (std::uint64_t r = 0; r < s.depth(); ++r) n += s.row(r).size();
          return n;
        },
        sk.inner());
    const auto expect = 4 * cells + 8 * sk.heavy_hitters().capacity();
    if (sk.memory_bytes() != expect || c.memory_bytes() != expect || expect > c.total_budget_bytes) ++mismatches;
    CountMinSketch cm({c.inner_width(), c.inner_depth, c.master_seed});
    if (memory_bytes(sketch_memory_cells(cm.config()), 0) != 4 * c.inner_width() * c.inner_depth) ++mismatches;
  }
  return {mismatches == 0, fmt("%d random configurations, %d mismatches", configs, mismatches)};
}

// 10 ----------------------------------------------------------------------------
Outcome determinism() {
  const auto dir = scratch_dir("dhsketch_accept10_");
  auto p = [&](const std::string& n) { return (dir / n).string(); };
  oracle::write_drifting_log(p("log.tsv"), 8, 5'000, 2'000, 1.0, 0.1, 3);
  std::ofstream(p("keys.txt")) << "1\n2\n3\n77\n5000\n";
  std::vector<std::string> differing;
  for (const auto* tag : {"a", "b"}) {
    const std::string t = tag;
    const std::string threads = t == "a" ? "1" : "3";
    bool ok = cli({"generate", "--n", "5000", "--len", "50000", "--seed", "3", "--out", p("gen_" + t + ".txt")}) == 0;
    ok = ok && cli({"run", "--n", "5000", "--s", "1.0", "--len", "50000", "--algorithms", "cm,cs,dh,ideal",
                    "--budgets", "8000,16000", "--first-pass-budget", "16000", "--seeds", "1,2", "--depths", "1,3",
                    "--threads", threads, "--checkpoint-dir", p("ck_" + t), "--out", p("zipf_" + t + ".csv")}) == 0;
    ok = ok && cli({"run", "--source", "log", "--log", p("log.tsv"), "--format", "tsv", "--key-column", "1",
                    "--date-column", "2", "--skip-header", "--algorithms", "cm,dh,dh-rolling,ideal", "--budgets",
                    "8000", "--first-pass-budget", "16000", "--threads", threads, "--checkpoint-dir",
                    p("logck_" + t), "--out", p("log_" + t + ".csv")}) == 0;
    std::string q;
    ok = ok && cli({"query", "--checkpoint", p("ck_" + t + "/dh_b8000_s1.bin"), "--keys", p("keys.txt"), "--ranks"},
                   &q) == 0;
    std::ofstream(p("query_" + t + ".txt")) << q;
    if (!ok) return {false, "a CLI command failed"};
  }
  int compared = 0;
  auto same = [&](const fs::path& a, const fs::path& b) {
    ++compared;
    if (slurp(a) != slurp(b) || !fs::exists(a)) differing.push_back(a.filename().string());
  };
  for (const auto* f : {"gen_", "zipf_", "log_", "query_"}) {
    const std::string ext = std::string(f) == "gen_" || std::string(f) == "query_" ? ".txt" : ".csv";
    same(p(std::string(f) + "a" + ext), p(std::string(f) + "b" + ext));
  }
  for (const auto* d : {"ck_", "logck_"})
    for (const auto& e : fs::directory_iterator(p(std::string(d) + "a")))
      same(e.path(), fs::path(p(std::string(d) + "b")) / e.path().filename());
  fs::remove_all(dir);
  std::string detail = fmt("%d output files compared across repeated runs (1 vs 3 threads)", compared);
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty() && compared >= 8, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"overestimation invariant", overestimation},
      {"collision-free exactness", collision_free_exactness},
      {"heavy-hitter cardinality bound", heavy_hitter_cardinality},
      {"Zipf pmf fidelity", zipf_pmf_fidelity},
      {"synthetic ordering Ideal <= DH <= CM", synthetic_ordering},
      {"rolling schedule DH <= CM on a windowed log", rolling_schedule_on_log},
      {"continuous optimization benefit", continuous_optimization},
      {"count-sketch unbiasedness", count_sketch_unbiased},
      {"byte-model exactness", byte_model},
      {"CLI determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d: %s (%.1fs) - %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
