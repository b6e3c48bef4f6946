#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dhsketch/double_hash.hpp"
#include "dhsketch/errors.hpp"
#include "dhsketch/experiment.hpp"
#include "dhsketch/hashing.hpp"
#include "dhsketch/stream.hpp"

namespace dhsketch::cli {

namespace {

// Usage problems detected after CLI11 accepted the flags.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// "200000", "200kB", "0.2MB", "1MB" -> bytes (decimal units).
std::uint64_t parse_bytes(const std::string& text) {
  std::size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw UsageError("bad byte count: " + text);
  }
  std::string unit = text.substr(pos);
  for (auto& c : unit) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  double scale = 1;
  if (unit == "" || unit == "b") scale = 1;
  else if (unit == "kb") scale = 1e3;
  else if (unit == "mb") scale = 1e6;
  else if (unit == "gb") scale = 1e9;
  else throw UsageError("bad byte unit in: " + text);
  const double bytes = std::round(value * scale);
  if (!(bytes >= 1) || bytes > 1e18) throw UsageError("byte count out of range: " + text);
  return static_cast<std::uint64_t>(bytes);
}

struct GenerateArgs {
  std::uint64_t n = 140'000;
  double s = 0.7;
  std::uint64_t len = 1'000'000;
  std::uint64_t seed = 1;
  std::string out;
};

struct RunArgs {
  std::string source = "zipf";
  std::uint64_t n = 140'000;
  double s = 0.7;
  std::uint64_t len = 1'000'000;
  std::uint64_t stream_seed = 1;
  std::string log;
  std::string format = "plain";
  std::size_t key_column = 0;
  int date_column = -1;
  bool skip_header = false;
  std::size_t train_windows = 5;
  std::size_t validate_windows = 1;
  std::vector<std::size_t> test_windows;
  bool count_history = false;
  std::vector<std::string> algorithms{"cm", "dh", "ideal"};
  std::vector<std::string> budgets{"200000"};
  std::vector<std::uint64_t> depths{4};
  std::string first_pass_budget = "200000";
  std::uint64_t first_pass_depth = 4;
  double first_pass_fraction = 0.1;
  std::uint64_t heaviness_k = 0;
  std::string core = "cm";
  std::vector<std::uint64_t> seeds{1};
  std::string metric = "per-item";
  std::string out;
  std::string json;
  std::string checkpoint_dir;
  std::size_t threads = 0;
};

struct QueryArgs {
  std::string checkpoint;
  std::string keys = "-";
  bool ranks = false;  // keys are decimal Zipf ranks of a synthetic run
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

/// Flat key=value file (keys are long flag names without dashes; '#' starts a
/// comment line) turned into `--key=value` arguments for every key that the
/// command line does not set itself.
std::vector<std::string> config_file_args(const std::string& path, const std::vector<std::string>& cli_args) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::set<std::string> given;
  for (const auto& a : cli_args) {
    if (a.rfind("--", 0) != 0) continue;
    given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  }
  std::vector<std::string> out;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(std::string_view(text).substr(0, eq));
    auto value = trim(std::string_view(text).substr(eq + 1));
    // Accepts the "# key=value" echo format too: quoted strings, bracketed lists.
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
      std::string joined;
      std::istringstream items(value.substr(1, value.size() - 2));
      for (std::string item; std::getline(items, item, ',');) {
        item = trim(item);
        if (item.size() >= 2 && item.front() == '"' && item.back() == '"') item = item.substr(1, item.size() - 2);
        joined += (joined.empty() ? "" : ",") + item;
      }
      value = joined;
    }
    if (value.empty()) continue;
    if (key.empty() || key == "config") throw UsageError(path + ":" + std::to_string(lineno) + ": bad key");
    if (!given.contains(key)) out.push_back("--" + key + "=" + value);
  }
  return out;
}

void echo_config(const CLI::App& sub, std::ostream& err) {
  std::istringstream lines(sub.config_to_str(true, false));
  for (std::string line; std::getline(lines, line);)
    if (!line.empty()) err << "# " << line << '\n';
}

nlohmann::json config_json(const CLI::App& sub) {
  nlohmann::json j;
  for (const auto* opt : sub.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "--config") continue;
    auto name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    auto results = opt->results();
    if (results.empty()) {
      j[name] = opt->get_default_str();
    } else if (results.size() == 1) {
      j[name] = results.front();
    } else {
      j[name] = results;
    }
  }
  return j;
}

int cmd_generate(const GenerateArgs& a, std::ostream& err) {
  ZipfSpec spec{a.n, a.s, a.len, a.seed};
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto ranks = generate_ranks(spec);
  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file " + a.out);
  std::string buf;
  buf.reserve(1 << 16);
  for (auto r : ranks) {
    buf += std::to_string(r);
    buf += '\n';
    if (buf.size() > (1 << 15)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
  if (!out) throw std::runtime_error("failed writing " + a.out);
  err << "wrote " << ranks.size() << " items to " << a.out << '\n';
  return kOk;
}

ExperimentSpec build_spec(const RunArgs& a) {
  ExperimentSpec spec;
  if (a.source == "zipf") {
    spec.source = ZipfSpec{a.n, a.s, a.len, a.stream_seed};
  } else {
    if (a.log.empty()) throw UsageError("--source log requires --log PATH");
    if (!std::filesystem::exists(a.log)) throw InputError("log file not found: " + a.log);
    LogSchedule sched;
    sched.source.path = a.log;
    sched.source.format = a.format == "tsv" ? LogFormat::kTsv : LogFormat::kPlain;
    sched.source.key_column = a.key_column;
    if (a.date_column >= 0) sched.source.window_column = static_cast<std::size_t>(a.date_column);
    sched.source.skip_header = a.skip_header;
    sched.train_windows = a.train_windows;
    sched.validate_windows = a.validate_windows;
    sched.test_windows = a.test_windows;
    sched.count_history = a.count_history;
    if (sched.source.format == LogFormat::kPlain && sched.source.window_column)
      throw UsageError("--date-column needs --format tsv");
    spec.source = std::move(sched);
  }
  try {
    spec.algorithms.clear();
    for (const auto& name : a.algorithms) spec.algorithms.push_back(parse_algorithm(name));
    spec.metric = parse_metric(a.metric);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  spec.budgets.clear();
  for (const auto& b : a.budgets) spec.budgets.push_back(parse_bytes(b));
  spec.depths = a.depths;
  spec.seeds = a.seeds;
  spec.dh.first_pass_budget_bytes = parse_bytes(a.first_pass_budget);
  spec.dh.first_pass_depth = a.first_pass_depth;
  spec.dh.first_pass_fraction = a.first_pass_fraction;
  spec.dh.heaviness_k = a.heaviness_k;
  spec.dh.core = a.core == "cs" ? CoreKind::kCountSketch : CoreKind::kCountMin;
  spec.threads = a.threads;
  if (!a.checkpoint_dir.empty()) spec.checkpoint_dir = a.checkpoint_dir;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return spec;
}

int cmd_run(const RunArgs& a, const CLI::App& sub, std::ostream& err) {
  auto spec = build_spec(a);
  if (spec.checkpoint_dir) std::filesystem::create_directories(*spec.checkpoint_dir);
  const auto report = run_experiment(spec);
  for (const auto& d : report.diagnostics) err << "warning: " << d << '\n';
  write_report(report, a.out);
  if (!a.json.empty()) {
    nlohmann::json j;
    j["command"] = "run";
    j["config"] = config_json(sub);
    j["rows"] = report.rows.size();
    j["diagnostics"] = report.diagnostics;
    std::ofstream js(a.json, std::ios::binary | std::ios::trunc);
    js << j.dump(2) << '\n';
    if (!js) throw std::runtime_error("failed writing " + a.json);
  }
  err << "wrote " << report.rows.size() << " rows to " << a.out << '\n';
  return kOk;
}

int cmd_query(const QueryArgs& a, std::ostream& out) {
  std::ifstream in(a.checkpoint, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + a.checkpoint);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto sketch = DoubleHashSketch::deserialize(blob);

  std::ifstream file;
  std::istream* keys = &std::cin;
  if (a.keys != "-") {
    file.open(a.keys, std::ios::binary);
    if (!file) throw InputError("cannot open keys file " + a.keys);
    keys = &file;
  }
  for (std::string key; std::getline(*keys, key);) {
    if (!key.empty() && key.back() == '\r') key.pop_back();
    if (key.empty()) continue;
    if (a.ranks) {
      std::uint64_t rank = 0;
      const auto [end, ec] = std::from_chars(key.data(), key.data() + key.size(), rank);
      if (ec != std::errc() || end != key.data() + key.size()) throw InputError("not a decimal rank: " + key);
      out << key << '\t' << sketch.estimate(integer_key(rank)) << '\n';
      continue;
    }
    out << key << '\t' << sketch.estimate(key) << '\n';
  }
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Double-hashing frequency estimation: stream generation, benchmarks, and sketch queries"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a Zipf stream, one element id per line");
  g->add_option("--n", gen.n, "Number of distinct elements N")->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--s", gen.s, "Zipf exponent s")->check(CLI::NonNegativeNumber)->capture_default_str();
  g->add_option("--len", gen.len, "Stream length")->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output file")->required();
  std::string config_path;
  g->add_option("--config", config_path, "key=value config file; flags override it");

  RunArgs run;
  auto* r = app.add_subcommand("run", "Benchmark sketches and write an error table (CSV)");
  r->add_option("--config", config_path, "key=value config file; flags override it");
  r->add_option("--source", run.source, "zipf or log")->check(CLI::IsMember({"zipf", "log"}))->capture_default_str();
  r->add_option("--n", run.n, "Zipf: distinct elements")->check(CLI::PositiveNumber)->capture_default_str();
  r->add_option("--s", run.s, "Zipf: exponent")->check(CLI::NonNegativeNumber)->capture_default_str();
  r->add_option("--len", run.len, "Zipf: stream length")->check(CLI::PositiveNumber)->capture_default_str();
  r->add_option("--stream-seed", run.stream_seed, "Zipf: stream RNG seed")->capture_default_str();
  r->add_option("--log", run.log, "Log: input file");
  r->add_option("--format", run.format, "Log: plain or tsv")->check(CLI::IsMember({"plain", "tsv"}))->capture_default_str();
  r->add_option("--key-column", run.key_column, "Log (tsv): key column index")->capture_default_str();
  r->add_option("--date-column", run.date_column, "Log (tsv): date column index, -1 for none")->capture_default_str();
  r->add_flag("--skip-header", run.skip_header, "Log: first line is a header");
  r->add_option("--train-windows", run.train_windows, "Log: training windows")->check(CLI::PositiveNumber)->capture_default_str();
  r->add_option("--validate-windows", run.validate_windows, "Log: validation windows")->check(CLI::PositiveNumber)->capture_default_str();
  r->add_option("--test-windows", run.test_windows, "Log: test window indices (default: all with history)")->delimiter(',');
  r->add_flag("--count-history", run.count_history, "Log: main pass covers windows 0..test instead of the test window");
  r->add_option("--algorithms", run.algorithms, "cm, cs, dh, dh-rolling, ideal")->delimiter(',')->capture_default_str();
  r->add_option("--budgets", run.budgets, "Byte budgets (200000, 0.2MB, ...)")->delimiter(',')->capture_default_str();
  r->add_option("--depths", run.depths, "CM/CS depth grid")->delimiter(',')->capture_default_str();
  r->add_option("--first-pass-budget", run.first_pass_budget, "First-pass count-min budget")->capture_default_str();
  r->add_option("--first-pass-depth", run.first_pass_depth, "First-pass hash functions")->check(CLI::PositiveNumber)->capture_default_str();
  r->add_option("--first-pass-fraction", run.first_pass_fraction, "Zipf: stream prefix used by the first pass")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  r->add_option("--heaviness-k", run.heaviness_k, "Heavy-hitter k (0: cut by unique-bucket capacity)")->capture_default_str();
  r->add_option("--core", run.core, "Double-hash inner sketch: cm or cs")->check(CLI::IsMember({"cm", "cs"}))->capture_default_str();
  r->add_option("--seeds", run.seeds, "Hash seeds")->delimiter(',')->capture_default_str();
  r->add_option("--metric", run.metric, "per-item or weighted")->check(CLI::IsMember({"per-item", "weighted"}))->capture_default_str();
  r->add_option("--out", run.out, "Output CSV")->required();
  r->add_option("--json", run.json, "Optional JSON sidecar with the resolved config");
  r->add_option("--checkpoint-dir", run.checkpoint_dir, "Write DH checkpoints (dh_b<budget>_s<seed>.bin) here");
  r->add_option("--threads", run.threads, "Worker threads (0: all cores)")->capture_default_str();

  QueryArgs q;
  auto* qs = app.add_subcommand("query", "Print key<TAB>estimate for each key using a DH checkpoint");
  qs->add_option("--checkpoint", q.checkpoint, "Checkpoint file")->required();
  qs->add_option("--keys", q.keys, "Keys file, one per line ('-' for stdin)")->capture_default_str();
  qs->add_flag("--ranks", q.ranks, "Keys are decimal ranks (checkpoints of --source zipf runs)");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string file;
      if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) file = args[i].substr(9);
      if (file.empty()) continue;
      const auto extra = config_file_args(file, args);
      args.insert(args.end(), extra.begin(), extra.end());
      break;
    }
    // CLI11 takes the arguments last-first.
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (g->parsed()) {
      echo_config(*g, err);
      return cmd_generate(gen, err);
    }
    if (r->parsed()) {
      echo_config(*r, err);
      return cmd_run(run, *r, err);
    }
    echo_config(*qs, err);
    return cmd_query(q, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace dhsketch::cli
