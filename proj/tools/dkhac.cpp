// dkhac command-line front end.
//
//   dkhac estimate     --input data.csv [--estimator dk-hac] [--b1 B --b2 B]
//   dkhac simulate     --model M1 --T 200 --R 5000 --seed 1
//   dkhac simulate     --sls process.kv --T 500 --seed 3
//   dkhac tables       [--R 5000] [--only-T 200] [--tables S1-S2 ...]
//   dkhac fixedb-cache [--force]
//
// Any subcommand accepts --config FILE with "key = value" lines; each key is a
// long option name of that subcommand. Flags on the command line win.
//
// Exit codes: 0 ok, 2 usage or malformed input, 3 estimation, 4 cache.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dkhac/files.hpp"
#include "dkhac/io.hpp"
#include "dkhac/sls.hpp"
#include "dkhac/tables.hpp"

#ifndef DKHAC_DATA_DIR
#define DKHAC_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace dkhac;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitCache = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StageError : std::runtime_error {
  StageError(const std::string& stage, const Error& e)
      : std::runtime_error(stage + ": " + e.what()), code(e.code()) {}
  ErrorCode code;
};

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseError: return kExitUsage;
    case ErrorCode::CacheFailure: return kExitCache;
    default: return kExitEstimation;
  }
}

std::string default_cache() { return std::string(DKHAC_DATA_DIR) + "/fixedb_bartlett_b1.json"; }
std::string default_reference() { return std::string(DKHAC_DATA_DIR) + "/reference_tables.json"; }

FixedBCriticalValues fixed_b_cache(const std::string& path, unsigned workers) {
  try {
    return load_or_generate_fixed_b(path, kFixedBGrid, kFixedBReplications, kFixedBSeed, workers);
  } catch (const Error& e) {
    throw Error(ErrorCode::CacheFailure, std::string("fixed-b cache: ") + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CacheFailure, std::string("fixed-b cache: ") + e.what());
  }
}

std::vector<Estimator> parse_estimators(const std::vector<std::string>& names) {
  std::vector<Estimator> out;
  for (const auto& n : names) {
    if (n.empty()) continue;
    auto e = parse_estimator(n);
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  }
  if (out.empty()) throw UsageError("empty estimator selection");
  return out;
}

/// Reads "key = value" lines into option tokens placed ahead of the real
/// arguments, so explicit flags override the file.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::string> out;
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(path + ":" + std::to_string(n) + ": empty key");
    if (value == "true") {
      out.push_back("--" + key);
    } else if (value == "false") {
      continue;
    } else {
      out.push_back("--" + key);
      std::string cleaned = value;
      for (char& c : cleaned)
        if (c == ',') c = ' ';
      std::istringstream vs(cleaned);
      std::string item;
      bool any = false;
      while (vs >> item) {
        out.push_back(item);
        any = true;
      }
      if (!any) out.push_back("");
    }
  }
  return out;
}

void write_output(const fs::path& path, const std::string& content) {
  write_file_atomic(path, content, ErrorCode::InvalidArgument);
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateOptions {
  std::string input;
  std::string output = "lrv.json";
  std::string format = "json";
  std::string estimator = "dk-hac";
  std::string lag_kernel = "qs";
  std::string time_kernel = "epanechnikov";
  std::optional<double> b1, b2;
  std::optional<long> block_length;
  long p_model = 0;
  std::vector<double> weights;
  bool to_stdout = false;
};

LrvEstimate run_estimator(const EstimateOptions& o, const SeriesMatrix& V) {
  const bool override_bw = o.b1.has_value() || o.b2.has_value();
  if (o.estimator == "dk-hac") {
    LagKernel K1 = parse_lag_kernel(o.lag_kernel);
    TimeKernel K2 = parse_time_kernel(o.time_kernel);
    if (override_bw) {
      if (!o.b1 || !o.b2) throw UsageError("--b1 and --b2 must be given together");
      for (double b : {*o.b1, *o.b2})
        if (!(b > 0.0 && b <= 1.0)) throw UsageError("bandwidth overrides must lie in (0, 1]");
      const long n_T = o.block_length.value_or(default_block_length(V.rows()));
      BandwidthPlan plan;
      try {
        plan = BandwidthPlan::fixed(*o.b1, *o.b2, V.rows(), n_T);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      try {
        return dk_hac(V, K1, K2, plan, o.p_model > 0, o.p_model);
      } catch (const Error& e) {
        throw StageError("estimation", e);
      }
    }
    if (o.block_length) throw UsageError("--block-length needs --b1 and --b2");
    PlugInResult pi;
    try {
      pi = plug_in_bandwidths(V, K1, K2, o.weights);
    } catch (const Error& e) {
      throw StageError("bandwidth selection", e);
    }
    try {
      auto est = dk_hac(V, K1, K2, pi.plan, o.p_model > 0, o.p_model);
      est.method = "dk-hac-auto";
      for (const auto& f : pi.diagnostics.flags) est.flags.push_back(f);
      est.diagnostics = std::move(pi.diagnostics);
      return est;
    } catch (const Error& e) {
      throw StageError("estimation", e);
    }
  }
  if (override_bw || o.block_length) throw UsageError("bandwidth overrides apply to dk-hac only");
  const Estimator e = parse_estimator(o.estimator);
  try {
    return make_lrv(e, o.p_model, o.weights)(V);
  } catch (const Error& ex) {
    throw StageError(o.estimator, ex);
  }
}

std::string estimate_csv(const LrvEstimate& est, const std::vector<std::string>& names) {
  std::ostringstream os;
  os.precision(17);
  os << "quantity,row,column,value\n";
  for (long i = 0; i < est.J.rows(); ++i)
    for (long j = 0; j < est.J.cols(); ++j) os << "J," << names[i] << ',' << names[j] << ',' << est.J(i, j) << '\n';
  os << "b1,,," << est.plan.b1 << '\n';
  os << "b2_bar,,," << est.plan.b2_bar << '\n';
  os << "block_length,,," << est.plan.block_length << '\n';
  os << "min_eigenvalue,,," << est.min_eigenvalue << '\n';
  os << "psd_warning,,," << (est.psd_warning ? 1 : 0) << '\n';
  return os.str();
}

int cmd_estimate(const EstimateOptions& o) {
  CsvTable table;
  try {
    std::ifstream in(o.input, std::ios::binary);
    if (!in) throw UsageError("cannot open input " + o.input);
    table = read_csv(in);
  } catch (const Error& e) {
    throw UsageError(o.input + ": " + e.what());
  }
  if (table.data.rows() < 32)
    throw UsageError(o.input + ": need at least 32 rows, got " + std::to_string(table.data.rows()));
  if (!o.weights.empty() && static_cast<long>(o.weights.size()) != table.data.cols())
    throw UsageError("--weights needs one value per column");

  const auto est = run_estimator(o, table.data);
  std::string body;
  if (o.format == "json") {
    auto j = to_json(est);
    j["input"] = {{"path", o.input}, {"rows", table.data.rows()}, {"columns", table.names}};
    body = j.dump(2) + "\n";
  } else {
    body = estimate_csv(est, table.names);
  }
  if (o.to_stdout) {
    std::cout << body;
  } else {
    write_output(o.output, body);
    std::cerr << "wrote " << o.output << " (" << est.method << ", J is " << est.J.rows() << "x" << est.J.cols()
              << (est.psd_warning ? ", PSD warning" : "") << ")\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string model;
  std::string sls;
  long T = 200;
  std::string design;
  std::vector<double> deltas{0.0};
  std::vector<std::string> estimators;
  long R = 5000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir = "results";
  std::string format = "both";
  std::string cache = default_cache();
  std::string output;
  bool to_stdout = false;
};

int cmd_simulate_sls(const SimulateOptions& o) {
  SlsSpec spec;
  try {
    spec = sls_from_kv(read_file(o.sls));
  } catch (const Error& e) {
    throw UsageError(o.sls + ": " + e.what());
  }
  if (o.T < 2) throw UsageError("--T must be at least 2");
  const auto V = simulate(spec, o.T, o.seed);
  const std::string body = write_csv({"v"}, V);
  if (o.to_stdout) {
    std::cout << body;
    return kExitOk;
  }
  const fs::path path = o.output.empty() ? fs::path(o.out_dir) / ("sls_T" + std::to_string(o.T) + "_seed" +
                                                                  std::to_string(o.seed) + ".csv")
                                         : fs::path(o.output);
  write_output(path, body);
  std::cerr << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_simulate(const SimulateOptions& o) {
  if (!o.sls.empty()) return cmd_simulate_sls(o);
  if (o.model.empty()) throw UsageError("--model or --sls is required");
  ExperimentConfig cfg;
  try {
    cfg.model = parse_model(o.model);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (o.T < 32) throw UsageError("--T must be at least 32");
  if (o.R < 100) throw UsageError("--R must be at least 100");
  if (o.workers < 1) throw UsageError("--workers must be at least 1");
  cfg.T = o.T;
  cfg.deltas = o.deltas;
  if (cfg.deltas.empty()) throw UsageError("empty delta grid");
  bool any_nonzero = false;
  for (double d : cfg.deltas) any_nonzero |= d != 0.0;
  cfg.design = o.design.empty() ? (any_nonzero ? Design::Alternative : Design::Null) : parse_design(o.design);
  cfg.estimators = o.estimators.empty() ? all_estimators() : parse_estimators(o.estimators);
  cfg.replications = o.R;
  cfg.base_seed = o.seed;
  cfg.workers = o.workers;

  std::optional<FixedBCriticalValues> cv;
  if (std::find(cfg.estimators.begin(), cfg.estimators.end(), Estimator::Kvb) != cfg.estimators.end())
    cv = fixed_b_cache(o.cache, o.workers);

  std::cerr << "simulate " << to_string(cfg.model) << " T=" << cfg.T << " R=" << cfg.replications
            << " seed=" << cfg.base_seed << " workers=" << cfg.workers << "\n";
  const auto rep = run_experiment(cfg, cv);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";

  const std::string csv = to_csv(rep);
  if (o.to_stdout) {
    std::cout << csv;
  } else {
    const std::string stem = to_string(cfg.model) + "_T" + std::to_string(cfg.T) + "_" + to_string(cfg.design) +
                             "_R" + std::to_string(cfg.replications) + "_seed" + std::to_string(cfg.base_seed);
    const fs::path dir(o.out_dir);
    if (o.format == "csv" || o.format == "both") write_output(dir / (stem + ".csv"), csv);
    if (o.format == "json" || o.format == "both") write_output(dir / (stem + ".json"), to_json(rep).dump(2) + "\n");
    // Wall-clock time lives in a sidecar so the reports stay reproducible.
    write_output(dir / (stem + ".timing.json"),
                 nlohmann::json{{"wall_clock_seconds", rep.wall_clock_seconds}, {"workers", cfg.workers}}.dump(2) +
                     "\n");
    std::cerr << "wrote " << (dir / stem).string() << ".* in " << format_number(rep.wall_clock_seconds, 2) << " s\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tables

struct TablesOptions {
  long R = 5000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir = "tables";
  std::vector<std::string> tables;
  std::optional<long> only_T;
  std::vector<std::string> estimators;
  std::string cache = default_cache();
  std::string reference = default_reference();
  double threshold = 3.0;
  bool force = false;
};

nlohmann::json table_record(const TableResult& t) {
  auto j = table_fingerprint(t.spec, t.config);
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : t.cells)
    cells.push_back({{"column", c.column},
                     {"estimator", to_string(c.estimator)},
                     {"delta", c.result.delta},
                     {"valid", c.result.valid},
                     {"failures", c.result.failures},
                     {"rejections", c.result.rejections}});
  j["cells"] = cells;
  j["warnings"] = t.warnings;
  return j;
}

std::optional<TableResult> load_table(const fs::path& path, const TableSpec& filtered, const TableRunConfig& cfg) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    auto expect = table_fingerprint(filtered, cfg);
    for (auto it = expect.begin(); it != expect.end(); ++it)
      if (!j.contains(it.key()) || j.at(it.key()) != it.value()) return std::nullopt;
    TableResult t;
    t.spec = filtered;
    t.config = cfg;
    for (const auto& c : j.at("cells")) {
      CellResult r{c.at("delta").get<double>(), parse_estimator(c.at("estimator").get<std::string>()),
                   c.at("rejections").get<long>(), c.at("valid").get<long>(), c.at("failures").get<long>()};
      t.cells.push_back({c.at("column").get<std::string>(), r.estimator, r});
    }
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    return t;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable record: recompute
  }
}

int cmd_tables(const TablesOptions& o) {
  if (o.R < 100) throw UsageError("--R must be at least 100");
  if (o.workers < 1) throw UsageError("--workers must be at least 1");
  TableRunConfig cfg;
  cfg.replications = o.R;
  cfg.base_seed = o.seed;
  cfg.workers = o.workers;
  cfg.estimators = o.estimators.empty() ? all_estimators() : parse_estimators(o.estimators);
  cfg.only_T = o.only_T;

  const auto specs = table_specs();
  std::vector<std::size_t> chosen;
  if (o.tables.empty()) {
    for (std::size_t i = 0; i < specs.size(); ++i) chosen.push_back(i);
  } else {
    for (const auto& label : o.tables) {
      const auto& s = find_table(specs, label);
      chosen.push_back(static_cast<std::size_t>(&s - specs.data()));
    }
  }
  const auto refs = load_reference_tables(o.reference);

  std::optional<FixedBCriticalValues> cv;
  if (std::find(cfg.estimators.begin(), cfg.estimators.end(), Estimator::Kvb) != cfg.estimators.end())
    cv = fixed_b_cache(o.cache, o.workers);

  const fs::path dir(o.out_dir);
  std::vector<TableResult> results;
  for (std::size_t idx : chosen) {
    const auto& spec = specs[idx];
    TableSpec filtered = spec;
    filtered.columns.clear();
    for (const auto& c : spec.columns)
      if (!cfg.only_T || c.T == *cfg.only_T) filtered.columns.push_back(c);
    if (filtered.columns.empty()) {
      std::cerr << "skip " << spec.label << ": no column with T=" << *cfg.only_T << "\n";
      continue;
    }
    const fs::path record = dir / (spec.stem() + ".json");
    if (!o.force) {
      if (auto done = load_table(record, filtered, cfg); done && fs::exists(dir / (spec.stem() + ".csv"))) {
        std::cerr << "reuse " << spec.label << "\n";
        results.push_back(std::move(*done));
        continue;
      }
    }
    const auto start = std::chrono::steady_clock::now();
    std::cerr << "run " << spec.label << " (" << filtered.columns.size() << " columns)\n";
    auto t = run_table(spec, idx, cfg, cv);
    for (const auto& w : t.warnings) std::cerr << "warning: " << w << "\n";
    // The CSV goes first; the JSON record marks the table as complete.
    write_output(dir / (spec.stem() + ".csv"), table_csv(t));
    write_output(record, table_record(t).dump(2) + "\n");
    std::cerr << "  done in "
              << format_number(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1)
              << " s\n";
    results.push_back(std::move(t));
  }
  auto summary = compare_to_reference(results, refs, o.threshold);
  summary["replications"] = cfg.replications;
  summary["seed"] = cfg.base_seed;
  summary["only_T"] = cfg.only_T ? nlohmann::json(*cfg.only_T) : nlohmann::json(nullptr);
  write_output(dir / "summary.json", summary.dump(2) + "\n");
  std::cerr << "summary: " << summary["flagged"].get<long>() << " of " << summary["compared"].get<long>()
            << " cells differ from the reference by more than " << o.threshold << " MC-SE\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fixedb-cache

struct CacheOptions {
  std::string path = default_cache();
  long grid = kFixedBGrid;
  long reps = kFixedBReplications;
  std::uint64_t seed = kFixedBSeed;
  unsigned workers = 1;
  bool force = false;
  bool to_stdout = false;
};

int cmd_cache(const CacheOptions& o) {
  if (o.grid < 10 || o.reps < 1000) throw UsageError("--grid must be >= 10 and --reps >= 1000");
  FixedBCriticalValues cv;
  try {
    cv = load_or_generate_fixed_b(o.path, o.grid, o.reps, o.seed, o.workers, o.force);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CacheFailure, std::string("fixed-b cache: ") + e.what());
  }
  std::cerr << o.path << ":";
  for (std::size_t i = 0; i < cv.levels.size(); ++i) std::cerr << " q" << cv.levels[i] << "=" << cv.quantiles[i];
  std::cerr << "\n";
  if (o.to_stdout) std::cout << to_json(cv).dump(2) << "\n";
  return kExitOk;
}

/// Moves "--config FILE" out of argv and splices the file's tokens in right
/// after the subcommand name.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string config;
  std::vector<std::string> rest;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file name");
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  std::vector<std::string> out{args[0]};
  if (config.empty() || rest.empty()) {
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  }
  out.push_back(rest[0]);
  const auto extra = config_tokens(config);
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double-kernel HAC estimation and HAR test simulations"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  EstimateOptions eo;
  auto* est = app.add_subcommand("estimate", "Estimate the LRV of the columns of a CSV file");
  est->add_option("--input,-i", eo.input, "CSV with a header row, one column per component")->required();
  est->add_option("--output,-o", eo.output, "Output file")->capture_default_str();
  est->add_option("--format", eo.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  est->add_option("--estimator", eo.estimator,
                  "dk-hac, newey-west, newey-west-prewhite, andrews, andrews-prewhite or kvb")
      ->capture_default_str();
  est->add_option("--lag-kernel", eo.lag_kernel, "qs, bartlett, parzen, tukey-hanning, truncated")
      ->capture_default_str();
  est->add_option("--time-kernel", eo.time_kernel, "epanechnikov or uniform")->capture_default_str();
  est->add_option("--b1", eo.b1, "Lag bandwidth override in (0,1]");
  est->add_option("--b2", eo.b2, "Time bandwidth override in (0,1]");
  est->add_option("--block-length", eo.block_length, "Block length n_T with overrides");
  est->add_option("--p-model", eo.p_model, "Number of estimated parameters for the T/(T-p) factor")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  est->add_option("--weights", eo.weights, "Column weights of the automatic bandwidth rules")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  est->add_flag("--stdout", eo.to_stdout, "Write the report to stdout instead of a file");

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo size/power experiment, or an SLS sample path");
  sim->add_option("--model", so.model, "M1 ... M8");
  sim->add_option("--sls", so.sls, "Key-value SLS process file; writes a simulated series instead");
  sim->add_option("--T", so.T, "Sample size")->capture_default_str();
  sim->add_option("--design", so.design, "null or alternative (default: from the deltas)");
  sim->add_option("--deltas", so.deltas, "Alternative magnitudes")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  sim->add_option("--estimators", so.estimators, "Estimator names (default: all)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->expected(0, CLI::detail::expected_max_vector_size);
  sim->add_option("--R", so.R, "Replications")->capture_default_str();
  sim->add_option("--seed", so.seed, "Base seed")->capture_default_str();
  sim->add_option("--workers", so.workers, "Worker threads")->capture_default_str();
  sim->add_option("--out-dir", so.out_dir, "Output directory")->capture_default_str();
  sim->add_option("--output", so.output, "Output file for --sls");
  sim->add_option("--format", so.format, "csv, json or both")
      ->check(CLI::IsMember({"csv", "json", "both"}))
      ->capture_default_str();
  sim->add_option("--cache", so.cache, "Fixed-b critical value cache")->capture_default_str();
  sim->add_flag("--stdout", so.to_stdout, "Write the CSV to stdout instead of files");

  TablesOptions to;
  auto* tab = app.add_subcommand("tables", "Regenerate the size and power tables");
  tab->add_option("--R", to.R, "Replications per cell")->capture_default_str();
  tab->add_option("--seed", to.seed, "Base seed")->capture_default_str();
  tab->add_option("--workers", to.workers, "Worker threads")->capture_default_str();
  tab->add_option("--out-dir", to.out_dir, "Output directory")->capture_default_str();
  tab->add_option("--tables", to.tables, "Table labels (default: all)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  tab->add_option("--only-T", to.only_T, "Keep only columns with this full sample size");
  tab->add_option("--estimators", to.estimators, "Estimator names (default: all)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->expected(0, CLI::detail::expected_max_vector_size);
  tab->add_option("--cache", to.cache, "Fixed-b critical value cache")->capture_default_str();
  tab->add_option("--reference", to.reference, "Reference rejection rates")->capture_default_str();
  tab->add_option("--threshold", to.threshold, "Flag cells further than this many MC-SE")->capture_default_str();
  tab->add_flag("--force", to.force, "Recompute tables that are already on disk");

  CacheOptions co;
  auto* cac = app.add_subcommand("fixedb-cache", "Create or check the fixed-b critical value cache");
  cac->add_option("--path", co.path, "Cache file")->capture_default_str();
  cac->add_option("--grid", co.grid, "Brownian motion grid size")->capture_default_str();
  cac->add_option("--reps", co.reps, "Replications")->capture_default_str();
  cac->add_option("--seed", co.seed, "Seed")->capture_default_str();
  cac->add_option("--workers", co.workers, "Worker threads")->capture_default_str();
  cac->add_flag("--force", co.force, "Regenerate even when a matching cache exists");
  cac->add_flag("--stdout", co.to_stdout, "Also print the cache to stdout");

  try {
    auto args = expand_config(argc, argv);
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*est) return cmd_estimate(eo);
    if (*sim) return cmd_simulate(so);
    if (*tab) return cmd_tables(to);
    if (*cac) return cmd_cache(co);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code == ErrorCode::CacheFailure ? kExitCache : kExitEstimation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimation;
  }
  return kExitUsage;
}
