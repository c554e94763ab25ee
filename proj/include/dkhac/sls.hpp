#pragma once

// Segmented locally stationary processes realised as time-varying AR(1)
// recursions with regime breaks, plus the frozen-coefficient local
// autocovariance and spectrum used as oracles.

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <complex>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dkhac/error.hpp"
#include "dkhac/parallel.hpp"

namespace dkhac {

using SeriesMatrix = Eigen::MatrixXd;  // T x p, row = time

/// Coefficient path over rescaled time. The parametric kinds round-trip
/// through the key-value config format; Custom does not.
struct Path {
  enum class Kind { Constant, Linear, Cosine, Custom };

  Kind kind = Kind::Constant;
  double level = 0.0;
  double slope = 0.0;      // Linear
  double amplitude = 0.0;  // Cosine: level + amplitude * cos(2 pi frequency u + phase)
  double frequency = 0.0;
  double phase = 0.0;
  std::function<double(double)> custom;

  static Path constant(double v) { return {Kind::Constant, v, 0.0, 0.0, 0.0, 0.0, {}}; }
  static Path linear(double intercept, double slope) { return {Kind::Linear, intercept, slope, 0.0, 0.0, 0.0, {}}; }
  static Path cosine(double level, double amplitude, double frequency, double phase = 0.0) {
    return {Kind::Cosine, level, 0.0, amplitude, frequency, phase, {}};
  }
  static Path from(std::function<double(double)> f) {
    Path p;
    p.kind = Kind::Custom;
    p.custom = std::move(f);
    return p;
  }

  double operator()(double u) const {
    switch (kind) {
      case Kind::Constant: return level;
      case Kind::Linear: return level + slope * u;
      case Kind::Cosine: return level + amplitude * std::cos(2.0 * std::numbers::pi * frequency * u + phase);
      case Kind::Custom: return custom(u);
    }
    return level;
  }

  bool operator==(const Path& o) const {
    return kind != Kind::Custom && kind == o.kind && level == o.level && slope == o.slope &&
           amplitude == o.amplitude && frequency == o.frequency && phase == o.phase;
  }
};

struct Regime {
  Path a1 = Path::constant(0.0);
  Path sigma = Path::constant(1.0);
  Path mu = Path::constant(0.0);
};

struct SlsSpec {
  std::vector<double> break_fractions;  // strictly increasing, inside (0,1)
  std::vector<Regime> regimes;          // break_fractions.size() + 1 entries
  /// Innovation sampler; Gaussian when empty.
  std::function<double(NormalStream&)> innovation;

  static SlsSpec stationary_ar1(double a1, double sigma, double mu = 0.0) {
    SlsSpec s;
    s.regimes.push_back({Path::constant(a1), Path::constant(sigma), Path::constant(mu)});
    return s;
  }

  /// Regime active at rescaled time u. A break fraction itself belongs to the
  /// regime on its left.
  std::size_t regime_index(double u) const {
    std::size_t j = 0;
    while (j < break_fractions.size() && break_fractions[j] < u) ++j;
    return j;
  }

  double a1(double u) const { return regimes[regime_index(u)].a1(u); }
  double sigma(double u) const { return regimes[regime_index(u)].sigma(u); }
  double mu(double u) const { return regimes[regime_index(u)].mu(u); }

  bool operator==(const SlsSpec& o) const {
    if (break_fractions != o.break_fractions || regimes.size() != o.regimes.size()) return false;
    if (static_cast<bool>(innovation) || static_cast<bool>(o.innovation)) return false;
    for (std::size_t j = 0; j < regimes.size(); ++j) {
      if (!(regimes[j].a1 == o.regimes[j].a1 && regimes[j].sigma == o.regimes[j].sigma &&
            regimes[j].mu == o.regimes[j].mu))
        return false;
    }
    return true;
  }
};

namespace detail {

inline void check_lipschitz(const Path& p, double lo, double hi, const char* what) {
  constexpr int n = 1000;
  constexpr double max_slope = 1e6;
  double prev = p(lo);
  for (int i = 1; i <= n; ++i) {
    const double u = lo + (hi - lo) * i / n;
    const double cur = p(u);
    require(std::isfinite(cur), ErrorCode::InvalidArgument, std::string(what) + " is not finite");
    require(std::abs(cur - prev) <= max_slope * (hi - lo) / n, ErrorCode::InvalidArgument,
            std::string(what) + " is not piecewise Lipschitz within its regime");
    prev = cur;
  }
}

}  // namespace detail

/// Checks ordering of break fractions, |a1| < 1, sigma > 0 and sampled
/// Lipschitz continuity inside each regime. Extra points (for example the
/// actual observation times t/T) are checked as well.
inline void validate(const SlsSpec& spec, const std::vector<double>& extra_points = {}) {
  const auto& br = spec.break_fractions;
  require(spec.regimes.size() == br.size() + 1, ErrorCode::InvalidArgument,
          "need exactly one regime more than break fractions");
  for (std::size_t j = 0; j < br.size(); ++j) {
    require(br[j] > 0.0 && br[j] < 1.0, ErrorCode::InvalidArgument, "break fractions must lie in (0,1)");
    if (j > 0) require(br[j] > br[j - 1], ErrorCode::InvalidArgument, "break fractions must increase");
  }
  constexpr int grid = 1000;
  for (std::size_t j = 0; j < spec.regimes.size(); ++j) {
    const double lo = j == 0 ? 0.0 : br[j - 1];
    const double hi = j == br.size() ? 1.0 : br[j];
    // Regime j owns (lo, hi]; regime 0 also owns u = 0.
    const double start = j == 0 ? lo : lo + (hi - lo) * 1e-9;
    const auto& r = spec.regimes[j];
    for (int i = 0; i <= grid; ++i) {
      const double u = start + (hi - start) * i / grid;
      require(std::abs(r.a1(u)) < 1.0, ErrorCode::Nonstationary,
              "|a1(u)| >= 1 at u = " + std::to_string(u) + "; unit-root regimes are excluded");
      require(r.sigma(u) > 0.0, ErrorCode::InvalidArgument, "sigma(u) must be positive");
    }
    detail::check_lipschitz(r.a1, start, hi, "a1");
    detail::check_lipschitz(r.sigma, start, hi, "sigma");
    detail::check_lipschitz(r.mu, start, hi, "mu");
  }
  for (double u : extra_points) {
    require(std::abs(spec.a1(u)) < 1.0, ErrorCode::Nonstationary,
            "|a1(u)| >= 1 at u = " + std::to_string(u));
  }
}

/// Simulates V_t = mu(t/T) + a1(t/T) (V_{t-1} - mu((t-1)/T)) + sigma(t/T) u_t
/// for t = 1..T after a burn-in of 200 draws at the u = 0 parameters.
inline SeriesMatrix simulate(const SlsSpec& spec, long T, std::uint64_t seed) {
  require(T >= 2, ErrorCode::InvalidArgument, "simulate needs T >= 2");
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(T));
  for (long t = 1; t <= T; ++t) times.push_back(static_cast<double>(t) / T);
  validate(spec, times);

  NormalStream stream(seed);
  auto draw = [&] { return spec.innovation ? spec.innovation(stream) : stream(); };

  constexpr int burn_in = 200;
  const double a0 = spec.a1(0.0), s0 = spec.sigma(0.0), m0 = spec.mu(0.0);
  double dev = 0.0;  // V - mu at u = 0
  for (int i = 0; i < burn_in; ++i) dev = a0 * dev + s0 * draw();

  SeriesMatrix v(T, 1);
  double prev = m0 + dev;
  double prev_mu = m0;
  for (long t = 1; t <= T; ++t) {
    const double u = static_cast<double>(t) / T;
    const double mu = spec.mu(u);
    const double cur = mu + spec.a1(u) * (prev - prev_mu) + spec.sigma(u) * draw();
    v(t - 1, 0) = cur;
    prev = cur;
    prev_mu = mu;
  }
  return v;
}

/// Frozen-coefficient local autocovariance sigma^2 a^|k| / (1 - a^2).
inline double local_autocov(const SlsSpec& spec, double u, long k) {
  const double a = spec.a1(u);
  const double s = spec.sigma(u);
  return s * s * std::pow(a, static_cast<double>(std::abs(k))) / (1.0 - a * a);
}

/// Frozen-coefficient local spectral density (power per radian).
inline double local_spectrum(const SlsSpec& spec, double u, double omega) {
  const double a = spec.a1(u);
  const double s = spec.sigma(u);
  const std::complex<double> transfer = 1.0 - a * std::polar(1.0, -omega);
  return s * s / (2.0 * std::numbers::pi) / std::norm(transfer);
}

// ---------------------------------------------------------------------------
// Key-value serialisation ("key = value" lines, '#' comments).

namespace detail {

inline std::string fmt_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline std::string path_to_string(const Path& p) {
  switch (p.kind) {
    case Path::Kind::Constant: return "const " + fmt_double(p.level);
    case Path::Kind::Linear: return "linear " + fmt_double(p.level) + " " + fmt_double(p.slope);
    case Path::Kind::Cosine:
      return "cos " + fmt_double(p.level) + " " + fmt_double(p.amplitude) + " " + fmt_double(p.frequency) + " " +
             fmt_double(p.phase);
    case Path::Kind::Custom: break;
  }
  throw Error(ErrorCode::InvalidArgument, "custom coefficient paths cannot be serialised");
}

inline std::vector<double> parse_numbers(std::istream& is, const std::string& context) {
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    require(ec == std::errc() && ptr == tok.data() + tok.size(), ErrorCode::ParseError,
            "bad number '" + tok + "' in " + context);
    out.push_back(v);
  }
  return out;
}

inline Path path_from_string(const std::string& text) {
  std::istringstream is(text);
  std::string kind;
  is >> kind;
  const auto nums = parse_numbers(is, text);
  if (kind == "const" && nums.size() == 1) return Path::constant(nums[0]);
  if (kind == "linear" && nums.size() == 2) return Path::linear(nums[0], nums[1]);
  if (kind == "cos" && nums.size() == 4) return Path::cosine(nums[0], nums[1], nums[2], nums[3]);
  throw Error(ErrorCode::ParseError, "bad coefficient path '" + text + "'");
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::string to_kv(const SlsSpec& spec) {
  require(!spec.innovation, ErrorCode::InvalidArgument, "user-supplied innovation laws cannot be serialised");
  std::ostringstream os;
  os << "breaks =";
  for (std::size_t j = 0; j < spec.break_fractions.size(); ++j)
    os << (j ? ", " : " ") << detail::fmt_double(spec.break_fractions[j]);
  os << "\ninnovation = gaussian\n";
  for (std::size_t j = 0; j < spec.regimes.size(); ++j) {
    os << "regime." << j << ".a1 = " << detail::path_to_string(spec.regimes[j].a1) << "\n";
    os << "regime." << j << ".sigma = " << detail::path_to_string(spec.regimes[j].sigma) << "\n";
    os << "regime." << j << ".mu = " << detail::path_to_string(spec.regimes[j].mu) << "\n";
  }
  return os.str();
}

/// Parses the format written by to_kv. Unknown keys are rejected; omitted
/// regime entries keep the defaults a1 = 0, sigma = 1, mu = 0.
inline SlsSpec sls_from_kv(const std::string& text) {
  SlsSpec spec;
  std::map<std::size_t, std::map<std::string, Path>> entries;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::ParseError, "expected 'key = value': " + line);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "breaks") {
      std::string cleaned = value;
      for (char& c : cleaned)
        if (c == ',') c = ' ';
      std::istringstream vs(cleaned);
      spec.break_fractions = detail::parse_numbers(vs, "breaks");
    } else if (key == "innovation") {
      require(value == "gaussian", ErrorCode::ParseError, "only 'gaussian' innovations can be configured");
    } else if (key.rfind("regime.", 0) == 0) {
      const auto dot = key.find('.', 7);
      require(dot != std::string::npos, ErrorCode::ParseError, "bad regime key '" + key + "'");
      std::size_t idx = 0;
      const std::string idx_text = key.substr(7, dot - 7);
      auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
      require(ec == std::errc() && ptr == idx_text.data() + idx_text.size(), ErrorCode::ParseError,
              "bad regime index in '" + key + "'");
      const std::string field = key.substr(dot + 1);
      require(field == "a1" || field == "sigma" || field == "mu", ErrorCode::ParseError,
              "unknown regime field '" + field + "'");
      entries[idx][field] = detail::path_from_string(value);
    } else {
      throw Error(ErrorCode::ParseError, "unknown key '" + key + "'");
    }
  }
  spec.regimes.assign(spec.break_fractions.size() + 1, Regime{});
  for (const auto& [idx, fields] : entries) {
    require(idx < spec.regimes.size(), ErrorCode::ParseError, "regime index out of range");
    for (const auto& [field, path] : fields) {
      if (field == "a1") spec.regimes[idx].a1 = path;
      if (field == "sigma") spec.regimes[idx].sigma = path;
      if (field == "mu") spec.regimes[idx].mu = path;
    }
  }
  validate(spec);
  return spec;
}

}  // namespace dkhac
