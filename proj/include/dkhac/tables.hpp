#pragma once

// Size and power table layouts, their runs, and comparison against a set of
// reference rejection rates loaded from a JSON file.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dkhac/montecarlo.hpp"
#include "json.hpp"

namespace dkhac {

struct TableColumn {
  std::string header;
  Model model = Model::M1;
  long T = 200;
  Design design = Design::Null;
  double delta = 0.0;
};

struct TableSpec {
  std::string label;
  std::string caption;
  std::vector<TableColumn> columns;

  /// File stem: "table_" plus the label with spaces replaced.
  std::string stem() const {
    std::string s = "table_" + label;
    for (auto& c : s)
      if (c == ' ') c = '_';
    return s;
  }
};

namespace detail {

inline std::vector<TableColumn> size_columns(Model a, Model b) {
  std::vector<TableColumn> out;
  for (Model m : {a, b})
    for (long T : {200L, 400L}) out.push_back({to_string(m) + " T=" + std::to_string(T), m, T, Design::Null, 0.0});
  return out;
}

inline std::string delta_header(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "delta=%g", d);
  return buf;
}

inline std::vector<TableColumn> power_columns(Model m, long T, std::vector<double> deltas) {
  std::vector<TableColumn> out;
  for (double d : deltas) out.push_back({delta_header(d), m, T, Design::Alternative, d});
  return out;
}

}  // namespace detail

/// The twelve layouts. Forecast columns are labelled by the out-of-sample
/// size T_n; with a half split the full sample is 2 T_n.
inline std::vector<TableSpec> table_specs() {
  using detail::power_columns;
  using detail::size_columns;
  return {
      {"S1-S2", "Empirical small-sample size for model M1-M2", size_columns(Model::M1, Model::M2)},
      {"S3-S4", "Empirical small-sample size for model M3-M4", size_columns(Model::M3, Model::M4)},
      {"S5-S6", "Empirical small-sample size for model M5-M6", size_columns(Model::M5, Model::M6)},
      {"Size Forecasting DM-GR",
       "Empirical small-sample size for model M7-M8",
       {{"DM T_n=200", Model::M7, 400, Design::Null, 0.0},
        {"DM T_n=400", Model::M7, 800, Design::Null, 0.0},
        {"GR T_n=240", Model::M8, 480, Design::Null, 0.0},
        {"GR T_n=380", Model::M8, 760, Design::Null, 0.0}}},
      {"M1 Power", "Empirical small-sample power for model M1", power_columns(Model::M1, 200, {0.2, 0.4, 0.8, 1.6})},
      {"Power M2", "Empirical small-sample power for model M2",
       power_columns(Model::M2, 200, {0.1, 0.2, 0.4, 0.6, 0.8})},
      {"Power M3", "Empirical small-sample power for model M3",
       power_columns(Model::M3, 200, {0.1, 0.2, 0.4, 0.8, 1.6, 2.5})},
      {"Power M4", "Empirical small-sample power for model M4",
       power_columns(Model::M4, 200, {0.1, 0.2, 0.4, 0.8, 1.6, 3.0})},
      {"Power M5", "Empirical small-sample power for model M5",
       power_columns(Model::M5, 200, {0.2, 0.4, 0.8, 1.6, 2.5})},
      {"Power M6", "Empirical small-sample power for model M6",
       power_columns(Model::M6, 200, {0.1, 0.2, 0.4, 0.8, 1.6})},
      {"Power DM Test", "Empirical small-sample power of DM test",
       power_columns(Model::M7, 400, {0.2, 0.5, 2.0, 5.0, 10.0})},
      {"Power GR Test", "Empirical small-sample power of GR test",
       power_columns(Model::M8, 800, {0.2, 0.4, 0.8, 1.6, 2.5})},
  };
}

inline const TableSpec& find_table(const std::vector<TableSpec>& specs, const std::string& label) {
  for (const auto& s : specs)
    if (s.label == label) return s;
  std::string known;
  for (const auto& s : specs) known += (known.empty() ? "" : ", ") + s.label;
  throw Error(ErrorCode::InvalidArgument, "unknown table '" + label + "' (known: " + known + ")");
}

struct TableRunConfig {
  long replications = 5000;
  std::uint64_t base_seed = 1;
  unsigned workers = 1;
  std::vector<Estimator> estimators = all_estimators();
  std::optional<long> only_T;  // keep only columns whose full sample size is this
};

struct TableCell {
  std::string column;
  Estimator estimator = Estimator::DkHac;
  CellResult result;
};

struct TableResult {
  TableSpec spec;  // columns already filtered
  TableRunConfig config;
  std::vector<TableCell> cells;  // column-major, estimator-minor
  std::vector<std::string> warnings;
};

/// Seed of one (model, T, design) panel of a table. Panels in different
/// tables never share a stream, even when they simulate the same model.
inline std::uint64_t panel_seed(std::uint64_t base, std::size_t table_index, std::size_t panel_index) {
  return stream_seed(base, 0x7AB1E000ULL + 64 * table_index + panel_index);
}

inline TableResult run_table(const TableSpec& spec, std::size_t table_index, const TableRunConfig& cfg,
                             const std::optional<FixedBCriticalValues>& fixed_b) {
  TableResult out;
  out.spec = spec;
  out.config = cfg;
  out.spec.columns.clear();
  for (const auto& c : spec.columns)
    if (!cfg.only_T || c.T == *cfg.only_T) out.spec.columns.push_back(c);

  // Columns sharing (model, T, design) run together so every delta sees the
  // same random numbers. Panel indices follow the unfiltered layout.
  std::vector<std::size_t> panel_of(spec.columns.size());
  std::vector<std::size_t> firsts;
  for (std::size_t i = 0; i < spec.columns.size(); ++i) {
    std::size_t p = firsts.size();
    for (std::size_t k = 0; k < firsts.size(); ++k) {
      const auto& f = spec.columns[firsts[k]];
      if (f.model == spec.columns[i].model && f.T == spec.columns[i].T && f.design == spec.columns[i].design) p = k;
    }
    if (p == firsts.size()) firsts.push_back(i);
    panel_of[i] = p;
  }

  std::map<std::size_t, SimulationReport> reports;
  for (std::size_t i = 0; i < spec.columns.size(); ++i) {
    const auto& col = spec.columns[i];
    if (cfg.only_T && col.T != *cfg.only_T) continue;
    const std::size_t p = panel_of[i];
    if (reports.count(p)) continue;
    ExperimentConfig ec;
    ec.model = col.model;
    ec.T = col.T;
    ec.design = col.design;
    ec.deltas.clear();
    for (std::size_t j = 0; j < spec.columns.size(); ++j)
      if (panel_of[j] == p) ec.deltas.push_back(spec.columns[j].delta);
    ec.estimators = cfg.estimators;
    ec.replications = cfg.replications;
    ec.base_seed = panel_seed(cfg.base_seed, table_index, p);
    ec.workers = cfg.workers;
    auto rep = run_experiment(ec, fixed_b);
    for (auto& w : rep.warnings) out.warnings.push_back(to_string(col.model) + ": " + w);
    reports.emplace(p, std::move(rep));
  }
  for (std::size_t i = 0; i < spec.columns.size(); ++i) {
    const auto& col = spec.columns[i];
    if (cfg.only_T && col.T != *cfg.only_T) continue;
    const auto& rep = reports.at(panel_of[i]);
    for (auto e : cfg.estimators) out.cells.push_back({col.header, e, rep.cell(col.delta, e)});
  }
  return out;
}

inline std::string table_csv(const TableResult& t) {
  std::ostringstream os;
  os << "table,column,estimator,label,model,T,design,delta,replications,valid,failures,rejections,rate,mc_se\n";
  for (const auto& c : t.cells) {
    const TableColumn* col = nullptr;
    for (const auto& k : t.spec.columns)
      if (k.header == c.column) col = &k;
    os << '"' << t.spec.label << "\"," << c.column << ',' << to_string(c.estimator) << ",\"" << table_label(c.estimator)
       << "\"," << to_string(col->model) << ',' << col->T << ',' << to_string(col->design) << ','
       << format_number(col->delta, 4) << ',' << t.config.replications << ',' << c.result.valid << ','
       << c.result.failures << ',' << c.result.rejections << ',' << format_number(c.result.rate()) << ','
       << format_number(c.result.mc_se()) << '\n';
  }
  return os.str();
}

/// Everything that determines a table's contents. A stored table is reused
/// on resume only when this matches exactly.
inline nlohmann::json table_fingerprint(const TableSpec& spec, const TableRunConfig& cfg) {
  std::vector<std::string> est;
  for (auto e : cfg.estimators) est.push_back(to_string(e));
  std::vector<std::string> cols;
  for (const auto& c : spec.columns) cols.push_back(c.header);
  return {{"format", "dkhac-table"},
          {"version", 1},
          {"label", spec.label},
          {"columns", cols},
          {"replications", cfg.replications},
          {"seed", cfg.base_seed},
          {"estimators", est},
          {"only_T", cfg.only_T ? nlohmann::json(*cfg.only_T) : nlohmann::json(nullptr)}};
}

// ---------------------------------------------------------------------------
// Reference comparison

struct ReferenceTable {
  std::string label;
  std::vector<std::string> columns;
  std::map<std::string, std::vector<double>> rows;  // estimator name -> values
};

inline std::vector<ReferenceTable> parse_reference_tables(const nlohmann::json& j) {
  try {
    require(j.at("format") == "dkhac-reference-tables", ErrorCode::ParseError, "not a reference-table file");
    std::vector<ReferenceTable> out;
    for (const auto& t : j.at("tables")) {
      ReferenceTable r;
      r.label = t.at("label").get<std::string>();
      r.columns = t.at("columns").get<std::vector<std::string>>();
      for (const auto& [k, v] : t.at("rows").items()) {
        r.rows[k] = v.get<std::vector<double>>();
        require(r.rows[k].size() == r.columns.size(), ErrorCode::ParseError,
                "reference table " + r.label + ": row " + k + " has the wrong length");
      }
      out.push_back(std::move(r));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed reference tables: ") + e.what());
  }
}

inline std::vector<ReferenceTable> load_reference_tables(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open reference tables " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("reference tables: ") + e.what());
  }
  return parse_reference_tables(j);
}

/// One entry per simulated cell. A cell is flagged when its distance to the
/// reference value exceeds `k` Monte Carlo standard errors; a zero standard
/// error is floored at the value implied by one rejection in R.
inline nlohmann::json compare_to_reference(const std::vector<TableResult>& results,
                                           const std::vector<ReferenceTable>& refs, double k = 3.0) {
  nlohmann::json cells = nlohmann::json::array();
  long flagged = 0, compared = 0;
  for (const auto& t : results) {
    const ReferenceTable* ref = nullptr;
    for (const auto& r : refs)
      if (r.label == t.spec.label) ref = &r;
    for (const auto& c : t.cells) {
      nlohmann::json e{{"table", t.spec.label},
                       {"column", c.column},
                       {"estimator", to_string(c.estimator)},
                       {"rate", c.result.rate()},
                       {"mc_se", c.result.mc_se()}};
      std::optional<double> ref_rate;
      if (ref) {
        auto row = ref->rows.find(to_string(c.estimator));
        for (std::size_t i = 0; row != ref->rows.end() && i < ref->columns.size(); ++i)
          if (ref->columns[i] == c.column) ref_rate = row->second[i];
      }
      if (ref_rate) {
        const double n = std::max<double>(1.0, static_cast<double>(c.result.valid));
        const double se = std::max(c.result.mc_se(), std::sqrt((1.0 / n) * (1.0 - 1.0 / n) / n));
        const double diff = std::abs(c.result.rate() - *ref_rate);
        const bool flag = diff > k * se;
        e["reference"] = *ref_rate;
        e["abs_diff"] = diff;
        e["flagged"] = flag;
        ++compared;
        flagged += flag;
      } else {
        e["reference"] = nullptr;
        e["abs_diff"] = nullptr;
        e["flagged"] = false;
      }
      cells.push_back(std::move(e));
    }
  }
  return {{"format", "dkhac-table-summary"},
          {"version", 1},
          {"threshold_mc_se", k},
          {"compared", compared},
          {"flagged", flagged},
          {"cells", cells}};
}

}  // namespace dkhac
