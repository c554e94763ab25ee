#pragma once

// Data-generating processes M1-M8 and the size/power experiment runner.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dkhac/baselines.hpp"
#include "dkhac/error.hpp"
#include "dkhac/hartests.hpp"
#include "dkhac/parallel.hpp"
#include "json.hpp"

namespace dkhac {

enum class Model { M1, M2, M3, M4, M5, M6, M7, M8 };

/// M1-M6 use one design for size and power. M7 (DM) and M8 (GR) draw the
/// alternative from a different design than the null.
enum class Design { Null, Alternative };

enum class TestKind { T1, T2, DM, GR };

inline std::string to_string(Model m) { return "M" + std::to_string(static_cast<int>(m) + 1); }
inline std::string to_string(Design d) { return d == Design::Null ? "null" : "alternative"; }
inline std::string to_string(TestKind k) {
  switch (k) {
    case TestKind::T1: return "t1";
    case TestKind::T2: return "t2";
    case TestKind::DM: return "dm";
    case TestKind::GR: return "gr";
  }
  return "?";
}

inline Model parse_model(const std::string& s) {
  for (int i = 0; i < 8; ++i)
    if (s == "M" + std::to_string(i + 1)) return static_cast<Model>(i);
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + s + "' (expected one of M1 M2 M3 M4 M5 M6 M7 M8)");
}

inline Design parse_design(const std::string& s) {
  if (s == "null") return Design::Null;
  if (s == "alternative") return Design::Alternative;
  throw Error(ErrorCode::InvalidArgument, "unknown design '" + s + "' (expected null or alternative)");
}

struct DgpSpec {
  Model model = Model::M1;
  long T = 200;
  double delta = 0.0;
  Design design = Design::Null;

  TestKind test() const {
    switch (model) {
      case Model::M1:
      case Model::M5: return TestKind::T1;
      case Model::M7: return TestKind::DM;
      case Model::M8: return TestKind::GR;
      default: return TestKind::T2;
    }
  }

  /// Coefficient tested and its null value (regression models).
  long coefficient() const { return test() == TestKind::T1 ? 0 : 1; }
  double beta0() const { return 0.0; }

  /// Forecast models: in-sample size T_m = T/2, out-of-sample T_n = T - T_m.
  long in_sample() const { return T / 2; }
  long out_sample() const { return T - in_sample(); }

  void validate() const {
    require(T >= 32, ErrorCode::InvalidArgument, "DGPs need T >= 32");
    require(std::isfinite(delta), ErrorCode::InvalidArgument, "delta must be finite");
  }
};

namespace dgp {

inline double t_over(long t, long T) { return static_cast<double>(t) / static_cast<double>(T); }

/// M3/M4 error coefficient: max{0, -cos(1.5 - cos(5t/T))} before 4T/5, then 0.9.
inline double rho_m3(long t, long T) {
  if (static_cast<double>(t) < 0.8 * T) return std::max(0.0, -std::cos(1.5 - std::cos(5.0 * t_over(t, T))));
  return 0.9;
}

inline bool m5_middle(long t, long T) { return 2.0 * t >= T && 4.0 * t <= 3.0 * T; }

/// M5: 0.8 cos(1.5 - cos(t/(2T))) outside [T/2, 3T/4]; 0.2 (innovation sd 2) inside.
inline double rho_m5(long t, long T) {
  if (m5_middle(t, T)) return 0.2;
  return 0.8 * std::cos(1.5 - std::cos(t_over(t, T) / 2.0));
}
inline double sigma_m5(long t, long T) { return m5_middle(t, T) ? 2.0 : 1.0; }

inline bool m6_burst1(long t, long T) { return 2 * t >= T && 2 * t <= T + 6; }
inline bool m6_burst2(long t, long T) { return t >= T - 15; }

/// M6: max{0, 0.3 cos(1.5 - cos(t/(5T)))}, with bursts 0.99 on [T/2, T/2+3]
/// and 0.9 on the last 16 points (innovation sd 2 in both).
inline double rho_m6(long t, long T) {
  if (m6_burst1(t, T)) return 0.99;
  if (m6_burst2(t, T)) return 0.9;
  return std::max(0.0, 0.3 * std::cos(1.5 - std::cos(t_over(t, T) / 5.0)));
}
inline double sigma_m6(long t, long T) { return m6_burst1(t, T) || m6_burst2(t, T) ? 2.0 : 1.0; }

/// e_t = rho_t e_{t-1} + sigma_t u_t for t = 1..T, e_0 from the stationary law
/// of (rho_1, sigma_1). Returns e_1..e_T.
template <typename Rho, typename Sigma>
Eigen::VectorXd ar_errors(long T, Rho rho, Sigma sigma, NormalStream& z) {
  const double r1 = rho(1), s1 = sigma(1);
  double e = z() * s1 / std::sqrt(1.0 - r1 * r1);
  Eigen::VectorXd out(T);
  for (long t = 1; t <= T; ++t) {
    e = rho(t) * e + sigma(t) * z();
    out(t - 1) = e;
  }
  return out;
}

inline Eigen::VectorXd iid(long n, double mean, double sd, NormalStream& z) {
  Eigen::VectorXd v(n);
  for (long i = 0; i < n; ++i) v(i) = z.normal(mean, sd);
  return v;
}

/// x_t = c + a x_{t-1} + u_t, x_0 stationary.
inline Eigen::VectorXd ar_regressor(long T, double c, double a, NormalStream& z) {
  const double mean = c / (1.0 - a);
  double x = mean + z() / std::sqrt(1.0 - a * a);
  Eigen::VectorXd out(T);
  for (long t = 0; t < T; ++t) {
    x = c + a * x + z();
    out(t) = x;
  }
  return out;
}

}  // namespace dgp

struct RegressionData {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;  // [1, x_t]
};

struct ForecastLosses {
  std::vector<double> loss1;  // DM: model 1 out-of-sample; GR: in-sample losses
  std::vector<double> loss2;  // DM: model 2 out-of-sample; GR: out-of-sample losses
};

struct Dataset {
  std::optional<RegressionData> regression;
  std::optional<ForecastLosses> forecast;
};

namespace detail {

inline Eigen::MatrixXd with_intercept(const Eigen::VectorXd& x) {
  Eigen::MatrixXd X(x.size(), 2);
  X.col(0).setOnes();
  X.col(1) = x;
  return X;
}

/// Fixed-scheme one-step forecasts: y_t on (1, z_{t-1}) fitted over
/// t = 1..T_m, squared errors returned for in-sample and out-of-sample t.
/// `pred` holds z_0..z_{T-1}, `y` holds y_1..y_T.
inline std::pair<std::vector<double>, std::vector<double>> fixed_scheme_losses(const Eigen::VectorXd& y,
                                                                               const Eigen::VectorXd& pred, long T_m) {
  const long T = y.size();
  const auto fit = ols_fit(y.head(T_m), with_intercept(pred.head(T_m)));
  std::vector<double> in(static_cast<std::size_t>(T_m)), out(static_cast<std::size_t>(T - T_m));
  for (long t = 0; t < T_m; ++t) in[t] = fit.residuals(t) * fit.residuals(t);
  for (long t = T_m; t < T; ++t) {
    const double e = y(t) - fit.beta_hat(0) - fit.beta_hat(1) * pred(t);
    out[t - T_m] = e * e;
  }
  return {std::move(in), std::move(out)};
}

}  // namespace detail

/// One draw of the model. Random numbers are consumed in an order that does
/// not depend on delta, so a grid of deltas shares common random numbers.
inline Dataset generate(const DgpSpec& spec, std::uint64_t seed) {
  spec.validate();
  NormalStream z(seed);
  const long T = spec.T;
  const double d = spec.delta;
  Dataset out;
  auto one = [](long) { return 1.0; };

  switch (spec.model) {
    case Model::M1: {
      const double s = std::sqrt(0.5);
      const auto e = dgp::ar_errors(T, [](long) { return 0.5; }, [s](long) { return s; }, z);
      const auto x = dgp::iid(T, 1.0, 1.0, z);
      out.regression = RegressionData{(0.0 + d + 1.0 * x.array() + e.array()).matrix(), detail::with_intercept(x)};
      break;
    }
    case Model::M2: {
      const auto e = dgp::ar_errors(T, [](long) { return 0.8; }, one, z);
      const auto x = dgp::iid(T, 1.0, 1.0, z);
      out.regression = RegressionData{(d * x.array() + e.array()).matrix(), detail::with_intercept(x)};
      break;
    }
    case Model::M3: {
      const auto e = dgp::ar_errors(T, [T](long t) { return dgp::rho_m3(t, T); }, one, z);
      const auto x = dgp::ar_regressor(T, 0.0, 0.4, z);
      out.regression = RegressionData{(d * x.array() + e.array()).matrix(), detail::with_intercept(x)};
      break;
    }
    case Model::M4: {
      const auto e = dgp::ar_errors(T, [T](long t) { return dgp::rho_m3(t, T); }, one, z);
      const auto x = dgp::iid(T, 1.0, 1.0, z);
      const auto w = dgp::iid(T, 2.0, 1.0, z);
      Eigen::VectorXd y = d * x + e;
      for (long t = 1; t <= T; ++t)
        if (static_cast<double>(t) >= 0.8 * T) y(t - 1) += w(t - 1);
      out.regression = RegressionData{std::move(y), detail::with_intercept(x)};
      break;
    }
    case Model::M5: {
      const auto e = dgp::ar_errors(
          T, [T](long t) { return dgp::rho_m5(t, T); }, [T](long t) { return dgp::sigma_m5(t, T); }, z);
      const auto x = dgp::ar_regressor(T, 2.0, 0.5, z);
      Eigen::VectorXd y(T);
      for (long t = 1; t <= T; ++t) {
        const double start = 4.5 * T / 5.0;
        const double drift = static_cast<double>(t) >= start ? 1.5 * d * (t - start) / T : 0.0;
        y(t - 1) = d + drift * x(t - 1) + e(t - 1);
      }
      out.regression = RegressionData{std::move(y), detail::with_intercept(x)};
      break;
    }
    case Model::M6: {
      const auto e = dgp::ar_errors(
          T, [T](long t) { return dgp::rho_m6(t, T); }, [T](long t) { return dgp::sigma_m6(t, T); }, z);
      const auto x = dgp::iid(T, 1.0, 1.0, z);
      out.regression = RegressionData{(d * x.array() + e.array()).matrix(), detail::with_intercept(x)};
      break;
    }
    case Model::M7: {
      // y_t = 1 + x0_{t-1} + e_t; vectors below hold lagged predictors z_0..z_{T-1}.
      const auto e = dgp::ar_errors(T, [](long) { return 0.3; }, one, z);
      const auto x0 = dgp::iid(T, 1.0, 1.0, z);
      const auto a = dgp::iid(T, 1.0, 1.0, z);
      const auto b = dgp::iid(T, 1.0, 1.0, z);
      const Eigen::VectorXd y = (1.0 + x0.array() + e.array()).matrix();
      Eigen::VectorXd p1, p2;
      if (spec.design == Design::Null) {
        p1 = a;  // x1
        p2 = b;  // x2
      } else {
        // Model 1 is the true predictor; model 2 adds noise b - 1 ~ N(0,1)
        // and a shift of delta once t > 3T/4.
        p1 = x0;
        p2.resize(T);
        for (long t = 1; t <= T; ++t)
          p2(t - 1) = x0(t - 1) + (b(t - 1) - 1.0) + (4.0 * t > 3.0 * T ? d : 0.0);
      }
      const long T_m = spec.in_sample();
      out.forecast = ForecastLosses{detail::fixed_scheme_losses(y, p1, T_m).second,
                                    detail::fixed_scheme_losses(y, p2, T_m).second};
      break;
    }
    case Model::M8: {
      const auto e = dgp::ar_errors(T, [](long) { return 0.3; }, one, z);
      // Null: x ~ N(1, 1.5); alternative: x ~ N(1.5, 1).
      const bool alt = spec.design == Design::Alternative;
      const auto x = dgp::iid(T, alt ? 1.5 : 1.0, alt ? 1.0 : std::sqrt(1.5), z);
      Eigen::VectorXd y(T);
      for (long t = 1; t <= T; ++t) {
        const double brk = static_cast<double>(t) > 0.8 * T ? d : 0.0;
        y(t - 1) = 1.0 + (1.0 + brk) * x(t - 1) + e(t - 1);
      }
      auto [in, outl] = detail::fixed_scheme_losses(y, x, spec.in_sample());
      out.forecast = ForecastLosses{std::move(in), std::move(outl)};
      break;
    }
  }
  return out;
}

/// Range of the smooth error coefficient over t = 1..T, compared with the
/// range quoted alongside the model. Returns a warning on mismatch.
inline std::optional<std::string> rho_range_warning(Model m, long T) {
  double lo = 1e300, hi = -1e300, quoted_lo = 0.0, quoted_hi = 0.0;
  auto scan = [&](auto f, auto in_smooth) {
    for (long t = 1; t <= T; ++t) {
      if (!in_smooth(t)) continue;
      lo = std::min(lo, f(t));
      hi = std::max(hi, f(t));
    }
  };
  switch (m) {
    case Model::M3:
    case Model::M4:
      scan([T](long t) { return dgp::rho_m3(t, T); }, [T](long t) { return static_cast<double>(t) < 0.8 * T; });
      quoted_hi = 0.8071;
      break;
    case Model::M5:
      scan([T](long t) { return dgp::rho_m5(t, T); }, [T](long t) { return !dgp::m5_middle(t, T); });
      quoted_hi = 0.7021;
      break;
    case Model::M6:
      scan([T](long t) { return dgp::rho_m6(t, T); },
           [T](long t) { return !dgp::m6_burst1(t, T) && !dgp::m6_burst2(t, T); });
      quoted_hi = 0.2633;
      break;
    default: return std::nullopt;
  }
  if (std::abs(lo - quoted_lo) <= 5e-3 && std::abs(hi - quoted_hi) <= 5e-4) return std::nullopt;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: rho_t ranges over [%.4f, %.4f] but the quoted range is [%.4f, %.4f]",
                to_string(m).c_str(), lo, hi, quoted_lo, quoted_hi);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Experiment runner

struct CellResult {
  double delta = 0.0;
  Estimator estimator = Estimator::DkHac;
  long rejections = 0;
  long valid = 0;
  long failures = 0;

  double rate() const { return valid > 0 ? static_cast<double>(rejections) / static_cast<double>(valid) : 0.0; }
  double mc_se() const {
    if (valid == 0) return 0.0;
    const double p = rate();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(valid));
  }
};

struct ExperimentConfig {
  Model model = Model::M1;
  long T = 200;
  Design design = Design::Null;
  std::vector<double> deltas{0.0};
  std::vector<Estimator> estimators = all_estimators();
  long replications = 5000;
  std::uint64_t base_seed = 1;
  unsigned workers = 1;
  double alpha = 0.05;
};

struct SimulationReport {
  ExperimentConfig config;
  TestKind test = TestKind::T1;
  std::vector<CellResult> cells;  // delta-major, estimator-minor
  std::vector<std::string> warnings;
  double wall_clock_seconds = 0.0;  // not part of the serialized outputs

  const CellResult& cell(double delta, Estimator e) const {
    for (const auto& c : cells)
      if (c.delta == delta && c.estimator == e) return c;
    throw Error(ErrorCode::InvalidArgument, "no such cell");
  }
};

namespace detail {

/// Column weights of the automatic bandwidth rules: one everywhere except the
/// intercept column (column 0), which gets zero.
inline std::vector<double> bandwidth_weights(long p) {
  std::vector<double> w(static_cast<std::size_t>(p), 1.0);
  if (p > 1) w[0] = 0.0;
  return w;
}

inline LrvFunction regression_lrv(Estimator e, long p) { return make_lrv(e, p, bandwidth_weights(p)); }

/// Outcome of one test: 1 reject, 0 accept, -1 failed.
inline std::int8_t run_one(const DgpSpec& spec, const Dataset& data, Estimator e,
                           const std::optional<FixedBCriticalValues>& fixed_b, double alpha) {
  try {
    CriticalValueSource cv;
    if (e == Estimator::Kvb) {
      require(fixed_b.has_value(), ErrorCode::InvalidArgument, "KVB needs fixed-b critical values");
      cv = CriticalValueSource::fixed(fixed_b->as_family(data.regression ? "t" : "location"));
    }
    TestResult r;
    if (data.regression) {
      const auto fit = ols_fit(data.regression->y, data.regression->X);
      const long p = fit.beta_hat.size();
      const auto est = regression_lrv(e, p)(fit.scores);
      r = t_test(fit, spec.coefficient(), spec.beta0(), est, cv, alpha);
    } else {
      const auto lrv = make_lrv(e, 0);
      const auto& f = *data.forecast;
      r = spec.test() == TestKind::DM ? dm_test(f.loss1, f.loss2, lrv, cv, alpha)
                                      : gr_test(f.loss1, f.loss2, lrv, cv, alpha);
    }
    return r.reject ? 1 : 0;
  } catch (const Error&) {
    return -1;
  }
}

}  // namespace detail

/// Runs R replications for every (delta, estimator) cell. Replication i uses
/// the stream stream_seed(base_seed, i) for every delta. Results do not depend
/// on the number of workers.
inline SimulationReport run_experiment(const ExperimentConfig& cfg,
                                       const std::optional<FixedBCriticalValues>& fixed_b = std::nullopt) {
  require(cfg.replications >= 100, ErrorCode::InvalidArgument, "need R >= 100");
  require(!cfg.estimators.empty(), ErrorCode::InvalidArgument, "empty estimator selection");
  require(!cfg.deltas.empty(), ErrorCode::InvalidArgument, "empty delta grid");
  for (auto e : cfg.estimators)
    require(e != Estimator::Kvb || fixed_b.has_value(), ErrorCode::InvalidArgument,
            "KVB needs fixed-b critical values");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t nd = cfg.deltas.size(), ne = cfg.estimators.size();
  const std::size_t R = static_cast<std::size_t>(cfg.replications);
  std::vector<std::int8_t> outcome(R * nd * ne, 0);

  parallel_for(R, cfg.workers, [&](std::size_t i) {
    const auto seed = stream_seed(cfg.base_seed, i);
    for (std::size_t a = 0; a < nd; ++a) {
      const DgpSpec spec{cfg.model, cfg.T, cfg.deltas[a], cfg.design};
      std::optional<Dataset> data;
      try {
        data = generate(spec, seed);
      } catch (const Error&) {
      }
      for (std::size_t b = 0; b < ne; ++b)
        outcome[(i * nd + a) * ne + b] =
            data ? detail::run_one(spec, *data, cfg.estimators[b], fixed_b, cfg.alpha) : std::int8_t{-1};
    }
  });

  SimulationReport rep;
  rep.config = cfg;
  rep.test = DgpSpec{cfg.model, cfg.T, 0.0, cfg.design}.test();
  for (std::size_t a = 0; a < nd; ++a)
    for (std::size_t b = 0; b < ne; ++b) {
      CellResult c{cfg.deltas[a], cfg.estimators[b], 0, 0, 0};
      for (std::size_t i = 0; i < R; ++i) {
        const auto o = outcome[(i * nd + a) * ne + b];
        if (o < 0) {
          ++c.failures;
        } else {
          ++c.valid;
          c.rejections += o;
        }
      }
      rep.cells.push_back(c);
    }
  if (auto w = rho_range_warning(cfg.model, cfg.T)) rep.warnings.push_back(*w);
  rep.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_number(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

inline std::string csv_header() {
  return "model,T,design,test,delta,estimator,replications,valid,failures,rejections,rate,mc_se\n";
}

inline std::string csv_rows(const SimulationReport& rep) {
  std::ostringstream os;
  for (const auto& c : rep.cells) {
    os << to_string(rep.config.model) << ',' << rep.config.T << ',' << to_string(rep.config.design) << ','
       << to_string(rep.test) << ',' << format_number(c.delta, 4) << ',' << to_string(c.estimator) << ','
       << rep.config.replications << ',' << c.valid << ',' << c.failures << ',' << c.rejections << ','
       << format_number(c.rate()) << ',' << format_number(c.mc_se()) << '\n';
  }
  return os.str();
}

inline std::string to_csv(const SimulationReport& rep) { return csv_header() + csv_rows(rep); }

inline nlohmann::json to_json(const SimulationReport& rep) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : rep.cells)
    cells.push_back({{"delta", c.delta},
                     {"estimator", to_string(c.estimator)},
                     {"valid", c.valid},
                     {"failures", c.failures},
                     {"rejections", c.rejections},
                     {"rate", c.rate()},
                     {"mc_se", c.mc_se()}});
  std::vector<std::string> est;
  for (auto e : rep.config.estimators) est.push_back(to_string(e));
  return {{"format", "dkhac-simulation-report"},
          {"version", 1},
          {"model", to_string(rep.config.model)},
          {"T", rep.config.T},
          {"design", to_string(rep.config.design)},
          {"test", to_string(rep.test)},
          {"alpha", rep.config.alpha},
          {"deltas", rep.config.deltas},
          {"estimators", est},
          {"replications", rep.config.replications},
          {"seed", rep.config.base_seed},
          {"warnings", rep.warnings},
          {"cells", cells}};
}

}  // namespace dkhac
