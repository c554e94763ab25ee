#pragma once

// CSV input and JSON serialization of LRV estimates.

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "dkhac/error.hpp"
#include "dkhac/estimator.hpp"
#include "dkhac/kernels.hpp"
#include "json.hpp"

namespace dkhac {

struct CsvTable {
  std::vector<std::string> names;
  SeriesMatrix data;
};

namespace detail {

/// Splits one RFC-4180 record. Quoted fields may contain commas and doubled
/// quotes; embedded newlines are not supported.
inline std::vector<std::string> split_csv_line(const std::string& line, long line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      require(field.empty() && !was_quoted, ErrorCode::ParseError,
              "line " + std::to_string(line_no) + ": stray quote inside a field");
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
  require(!quoted, ErrorCode::ParseError, "line " + std::to_string(line_no) + ": unterminated quote");
  out.push_back(std::move(field));
  return out;
}

inline double parse_double(std::string s, long line_no, std::size_t col) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && (s[start] == ' ' || s[start] == '\t')) ++start;
  if (start < s.size() && s[start] == '+') ++start;
  double v = 0.0;
  const char* b = s.data() + start;
  const char* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  require(ec == std::errc() && ptr == e && b != e, ErrorCode::ParseError,
          "line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) + ": '" + s +
              "' is not a number");
  require(std::isfinite(v), ErrorCode::ParseError,
          "line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) + ": value is not finite");
  return v;
}

}  // namespace detail

/// Reads a numeric CSV with a header row, one column per component.
inline CsvTable read_csv(std::istream& in) {
  std::string line;
  long line_no = 0;
  CsvTable t;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line, line_no);
    if (!have_header) {
      t.names = std::move(fields);
      have_header = true;
      require(!(t.names.size() == 1 && t.names[0].empty()), ErrorCode::ParseError, "header row has no columns");
      continue;
    }
    require(fields.size() == t.names.size(), ErrorCode::ParseError,
            "line " + std::to_string(line_no) + ": expected " + std::to_string(t.names.size()) + " fields, got " +
                std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) row[c] = detail::parse_double(fields[c], line_no, c);
    rows.push_back(std::move(row));
  }
  require(have_header, ErrorCode::ParseError, "empty input: no header row");
  require(!rows.empty(), ErrorCode::ParseError, "no data rows");
  t.data.resize(static_cast<long>(rows.size()), static_cast<long>(t.names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) t.data(static_cast<long>(r), static_cast<long>(c)) = rows[r][c];
  return t;
}

inline CsvTable read_csv_string(const std::string& text) {
  std::istringstream is(text);
  return read_csv(is);
}

inline std::string write_csv(const std::vector<std::string>& names, const Eigen::MatrixXd& data) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t c = 0; c < names.size(); ++c) os << (c ? "," : "") << names[c];
  os << '\n';
  for (long r = 0; r < data.rows(); ++r) {
    for (long c = 0; c < data.cols(); ++c) os << (c ? "," : "") << data(r, c);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
  auto rows = nlohmann::json::array();
  for (long r = 0; r < M.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (long c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const long rows = static_cast<long>(j.size());
  const long cols = rows ? static_cast<long>(j.at(0).size()) : 0;
  Eigen::MatrixXd M(rows, cols);
  for (long r = 0; r < rows; ++r) {
    require(static_cast<long>(j.at(r).size()) == cols, ErrorCode::ParseError, "ragged matrix");
    for (long c = 0; c < cols; ++c) M(r, c) = j.at(r).at(c).get<double>();
  }
  return M;
}

inline nlohmann::json to_json(const BandwidthPlan& p) {
  return {{"b1", p.b1},
          {"b2", p.b2},
          {"b2_bar", p.b2_bar},
          {"block_length", p.block_length},
          {"source", to_string(p.source)}};
}

inline BandwidthPlan plan_from_json(const nlohmann::json& j) {
  BandwidthPlan p;
  p.b1 = j.at("b1").get<double>();
  p.b2 = j.at("b2").get<std::vector<double>>();
  p.b2_bar = j.at("b2_bar").get<double>();
  p.block_length = j.at("block_length").get<long>();
  const auto src = j.at("source").get<std::string>();
  require(src == "plug-in" || src == "predetermined", ErrorCode::ParseError, "unknown plan source " + src);
  p.source = src == "plug-in" ? PlanSource::PlugIn : PlanSource::Predetermined;
  return p;
}

inline nlohmann::json to_json(const PlugInDiagnostics& d) {
  return {{"phi2_hat", d.phi2_hat}, {"phi2_raw", d.phi2_raw},       {"d1", d.d1},
          {"d2", d.d2},             {"b2_pilot", d.b2_pilot},       {"b2_schedule", d.b2_schedule},
          {"b2_bar", d.b2_bar},     {"b1", d.b1},                   {"block_length", d.block_length},
          {"flags", d.flags}};
}

inline PlugInDiagnostics diagnostics_from_json(const nlohmann::json& j) {
  PlugInDiagnostics d;
  d.phi2_hat = j.at("phi2_hat").get<double>();
  d.phi2_raw = j.at("phi2_raw").get<double>();
  d.d1 = j.at("d1").get<std::vector<double>>();
  d.d2 = j.at("d2").get<std::vector<double>>();
  d.b2_pilot = j.at("b2_pilot").get<std::vector<double>>();
  d.b2_schedule = j.at("b2_schedule").get<std::vector<double>>();
  d.b2_bar = j.at("b2_bar").get<double>();
  d.b1 = j.at("b1").get<double>();
  d.block_length = j.at("block_length").get<long>();
  d.flags = j.at("flags").get<std::vector<std::string>>();
  return d;
}

inline nlohmann::json to_json(const LrvEstimate& e, bool include_diagnostics = true) {
  nlohmann::json j{{"format", "dkhac-lrv-estimate"},
                   {"version", 1},
                   {"method", e.method},
                   {"J", matrix_to_json(e.J)},
                   {"plan", to_json(e.plan)},
                   {"lag_kernel", std::string(name(e.lag_kernel.family))},
                   {"time_kernel", e.time_kernel ? nlohmann::json(std::string(name(e.time_kernel->family))) : nullptr},
                   {"dof_adjusted", e.dof_adjusted},
                   {"min_eigenvalue", e.min_eigenvalue},
                   {"psd_warning", e.psd_warning},
                   {"flags", e.flags}};
  j["diagnostics"] = include_diagnostics && e.diagnostics ? to_json(*e.diagnostics) : nlohmann::json(nullptr);
  return j;
}

inline LrvEstimate lrv_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "dkhac-lrv-estimate", ErrorCode::ParseError, "not an LRV estimate document");
    LrvEstimate e;
    e.method = j.at("method").get<std::string>();
    e.J = matrix_from_json(j.at("J"));
    e.plan = plan_from_json(j.at("plan"));
    e.lag_kernel = parse_lag_kernel(j.at("lag_kernel").get<std::string>());
    if (!j.at("time_kernel").is_null()) e.time_kernel = parse_time_kernel(j.at("time_kernel").get<std::string>());
    e.dof_adjusted = j.at("dof_adjusted").get<bool>();
    e.min_eigenvalue = j.at("min_eigenvalue").get<double>();
    e.psd_warning = j.at("psd_warning").get<bool>();
    e.flags = j.at("flags").get<std::vector<std::string>>();
    if (!j.at("diagnostics").is_null()) e.diagnostics = diagnostics_from_json(j.at("diagnostics"));
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("malformed LRV estimate: ") + ex.what());
  }
}

/// Field-by-field equality, exact on every double.
inline bool same_estimate(const LrvEstimate& a, const LrvEstimate& b) {
  return a.J.rows() == b.J.rows() && a.J.cols() == b.J.cols() && a.J == b.J && a.plan == b.plan &&
         a.method == b.method && a.lag_kernel.family == b.lag_kernel.family &&
         a.time_kernel.has_value() == b.time_kernel.has_value() &&
         (!a.time_kernel || a.time_kernel->family == b.time_kernel->family) && a.dof_adjusted == b.dof_adjusted &&
         a.min_eigenvalue == b.min_eigenvalue && a.psd_warning == b.psd_warning && a.diagnostics == b.diagnostics &&
         a.flags == b.flags;
}

}  // namespace dkhac
