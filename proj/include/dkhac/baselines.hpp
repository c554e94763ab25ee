#pragma once

// Classical comparison estimators: kernel HAC with Newey-West or
// Andrews automatic bandwidths, VAR(1) prewhitening with recolouring
// (Andrews-Monahan style), and the Kiefer-Vogelsang-Bunzel fixed-b Bartlett
// estimator with simulated critical values.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "dkhac/error.hpp"
#include "dkhac/files.hpp"
#include "dkhac/estimator.hpp"
#include "dkhac/kernels.hpp"
#include "dkhac/parallel.hpp"
#include "json.hpp"

namespace dkhac {

/// Sample autocovariance T^-1 sum_{s=k+1}^T V_s V_{s-k}' (k >= 0), uncentred.
inline Eigen::MatrixXd sample_autocov(const SeriesMatrix& V, long k) {
  const long T = V.rows();
  require(k >= 0 && k < T, ErrorCode::InvalidArgument, "lag out of range");
  return V.bottomRows(T - k).transpose() * V.topRows(T - k) / static_cast<double>(T);
}

/// Classical kernel HAC sum_k K1(b1 k) Gamma_hat(k), optionally scaled by T/(T-p).
inline LrvEstimate kernel_hac(const SeriesMatrix& V, const LagKernel& K1, double b1, bool dof_adjust, long p_model) {
  const long T = V.rows();
  const long p = V.cols();
  require(T >= 2, ErrorCode::InvalidArgument, "need T >= 2");
  require(b1 >= 0.0, ErrorCode::InvalidArgument, "b1 must be nonnegative");
  require(T > p_model && p_model >= 0, ErrorCode::InvalidArgument, "need T > p_model >= 0");
  const double support = K1.numerical_support();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd acc(p, p);
  const double inv_t = 1.0 / static_cast<double>(T);
  for (long k = 0; k < T; ++k) {
    const double x = b1 * static_cast<double>(k);
    if (x > support) break;
    const double kw = K1(x);
    if (kw == 0.0) continue;
    acc.noalias() = V.bottomRows(T - k).transpose() * V.topRows(T - k);
    if (k == 0) {
      J.noalias() += (kw * inv_t) * acc;
    } else {
      J.noalias() += (kw * inv_t) * (acc + acc.transpose());
    }
  }
  LrvEstimate est;
  const double dof = dof_adjust ? static_cast<double>(T) / static_cast<double>(T - p_model) : 1.0;
  est.J = dof * J;
  est.method = "kernel-hac";
  est.lag_kernel = K1;
  est.plan.b1 = b1;
  est.dof_adjusted = dof_adjust;
  detail::finalize(est);
  return est;
}

namespace detail {

inline std::vector<double> resolve_weights(const SeriesMatrix& V, std::span<const double> weights) {
  if (weights.empty()) return std::vector<double>(static_cast<std::size_t>(V.cols()), 1.0);
  require(static_cast<long>(weights.size()) == V.cols(), ErrorCode::InvalidArgument, "need one weight per column");
  return {weights.begin(), weights.end()};
}

struct Prewhitened {
  SeriesMatrix residuals;
  Eigen::MatrixXd A;
  bool clamped = false;
};

/// VAR(1) without intercept fitted by least squares. Singular values of the
/// coefficient matrix above 0.97 are set to 0.97.
inline Prewhitened var1_prewhiten(const SeriesMatrix& V) {
  const long T = V.rows();
  const long p = V.cols();
  const auto lagged = V.topRows(T - 1);
  const auto current = V.bottomRows(T - 1);
  const Eigen::MatrixXd sxx = lagged.transpose() * lagged;
  const Eigen::MatrixXd syx = current.transpose() * lagged;
  Prewhitened out;
  out.A = Eigen::MatrixXd::Zero(p, p);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sxx);
  if (ldlt.info() == Eigen::Success && sxx.norm() > 0.0 && ldlt.isPositive() &&
      ldlt.vectorD().minCoeff() > 1e-14 * sxx.diagonal().maxCoeff()) {
    out.A = ldlt.solve(syx.transpose()).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::VectorXd sv = svd.singularValues();
  if (sv.size() > 0 && sv.maxCoeff() > 0.97) {
    for (long i = 0; i < sv.size(); ++i) sv(i) = std::min(sv(i), 0.97);
    out.A = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
    out.clamped = true;
  }
  out.residuals = current - lagged * out.A.transpose();
  return out;
}

inline void recolour(LrvEstimate& est, const Eigen::MatrixXd& A) {
  const long p = A.rows();
  const Eigen::MatrixXd inv = (Eigen::MatrixXd::Identity(p, p) - A).inverse();
  est.J = inv * est.J * inv.transpose();
  finalize(est);
}

}  // namespace detail

/// Newey-West automatic lag for the Bartlett kernel: pilot truncation
/// floor(4 (T/100)^(2/9)), gamma = 1.1447 ((s1/s0)^2)^(1/3), m = gamma T^(1/3).
inline long newey_west_lag(const SeriesMatrix& V, std::span<const double> weights) {
  const long T = V.rows();
  const auto w = detail::resolve_weights(V, weights);
  const Eigen::VectorXd z = V * Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<long>(w.size()));
  const long pilot = std::min<long>(T - 1, static_cast<long>(std::floor(4.0 * std::pow(T / 100.0, 2.0 / 9.0))));
  auto sigma = [&](long j) { return z.tail(T - j).dot(z.head(T - j)) / static_cast<double>(T); };
  double s0 = sigma(0), s1 = 0.0;
  for (long j = 1; j <= pilot; ++j) {
    const double sj = sigma(j);
    s0 += 2.0 * sj;
    s1 += 2.0 * static_cast<double>(j) * sj;
  }
  if (!(s0 > 0.0)) return 0;
  const double gamma = 1.1447 * std::pow((s1 / s0) * (s1 / s0), 1.0 / 3.0);
  const double m = gamma * std::pow(static_cast<double>(T), 1.0 / 3.0);
  return std::min<long>(T - 1, static_cast<long>(std::floor(m)));
}

/// Bartlett HAC with L lags, weights 1 - j/(L+1). No degrees-of-freedom factor.
inline LrvEstimate bartlett_hac_lags(const SeriesMatrix& V, long lags) {
  auto est = kernel_hac(V, LagKernel{LagKernelFamily::Bartlett}, 1.0 / static_cast<double>(lags + 1), false, 0);
  est.method = "newey-west";
  return est;
}

/// Newey-West estimator. With `automatic` the lag comes from
/// newey_west_lag, otherwise `forced_lags` is used.
inline LrvEstimate nw_hac(const SeriesMatrix& V, bool automatic, bool prewhiten, std::span<const double> weights = {},
                          long forced_lags = 0) {
  require(V.rows() >= 16, ErrorCode::InvalidArgument, "Newey-West needs T >= 16");
  if (!prewhiten) {
    const long L = automatic ? newey_west_lag(V, weights) : forced_lags;
    return bartlett_hac_lags(V, L);
  }
  const auto pw = detail::var1_prewhiten(V);
  const long L = automatic ? newey_west_lag(pw.residuals, weights) : forced_lags;
  auto est = bartlett_hac_lags(pw.residuals, L);
  detail::recolour(est, pw.A);
  est.method = "newey-west-prewhite";
  if (pw.clamped) est.flags.push_back("PrewhiteClamped");
  return est;
}

/// Andrews AR(1) plug-in bandwidth for the QS kernel:
/// S_T = 1.3221 (alpha(2) T)^(1/5).
inline double andrews_bandwidth(const SeriesMatrix& V, std::span<const double> weights) {
  const long T = V.rows();
  const auto w = detail::resolve_weights(V, weights);
  double num = 0.0, den = 0.0;
  for (long c = 0; c < V.cols(); ++c) {
    if (w[c] == 0.0) continue;
    const auto col = V.col(c);
    const double sxx = col.head(T - 1).squaredNorm();
    if (sxx == 0.0) continue;
    double rho = col.tail(T - 1).dot(col.head(T - 1)) / sxx;
    rho = std::clamp(rho, -0.97, 0.97);
    const double s2 = (col.tail(T - 1) - rho * col.head(T - 1)).squaredNorm() / static_cast<double>(T - 1);
    const double s4 = s2 * s2;
    num += w[c] * 4.0 * rho * rho * s4 / std::pow(1.0 - rho, 8);
    den += w[c] * s4 / std::pow(1.0 - rho, 4);
  }
  if (!(den > 0.0)) return 0.0;
  return 1.3221 * std::pow(num / den * static_cast<double>(T), 0.2);
}

/// Andrews QS HAC with automatic bandwidth and the T/(T-p) factor;
/// optionally VAR(1)-prewhitened and recoloured.
inline LrvEstimate andrews_hac(const SeriesMatrix& V, bool prewhiten, std::span<const double> weights = {},
                               long p_model = 0) {
  require(V.rows() >= 16, ErrorCode::InvalidArgument, "Andrews HAC needs T >= 16");
  const LagKernel qs{LagKernelFamily::QuadraticSpectral};
  auto run = [&](const SeriesMatrix& X) {
    const double S = andrews_bandwidth(X, weights);
    // S -> 0 leaves only lag 0; any b1 beyond the QS support does that.
    const double b1 = S > 0.0 ? 1.0 / S : 2.0 * qs.numerical_support();
    const long p = std::min<long>(p_model, X.rows() - 1);
    return kernel_hac(X, qs, b1, p_model > 0, p);
  };
  if (!prewhiten) {
    auto est = run(V);
    est.method = "andrews";
    return est;
  }
  const auto pw = detail::var1_prewhiten(V);
  auto est = run(pw.residuals);
  detail::recolour(est, pw.A);
  est.method = "andrews-prewhite";
  if (pw.clamped) est.flags.push_back("PrewhiteClamped");
  return est;
}

// ---------------------------------------------------------------------------
// Fixed-b (b = 1, Bartlett) inference.

struct FixedBCriticalValues {
  std::string family = "t";  // "t" (regression) or "location" (DM/GR)
  double b = 1.0;
  std::vector<double> levels{0.90, 0.95, 0.99};
  std::vector<double> quantiles;  // two-sided: quantiles of |t|
  long grid = 0;
  long replications = 0;
  std::uint64_t seed = 0;

  double critical_value(double level) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (std::abs(levels[i] - level) < 1e-12) return quantiles.at(i);
    throw Error(ErrorCode::InvalidArgument, "no fixed-b critical value stored for level " + std::to_string(level));
  }

  /// Same functional, relabelled. With b = 1 Bartlett the limiting t
  /// statistic of a regression coefficient and of a location parameter share
  /// one distribution.
  FixedBCriticalValues as_family(std::string f) const {
    auto c = *this;
    c.family = std::move(f);
    return c;
  }
};

inline constexpr int kFixedBCacheVersion = 1;
inline constexpr long kFixedBGrid = 2000;
inline constexpr long kFixedBReplications = 200000;
inline constexpr std::uint64_t kFixedBSeed = 42;

/// Simulates |W(1)| / sqrt(2 int_0^1 B(r)^2 dr) with B the Brownian bridge,
/// on a grid of `grid` points, and returns its 0.90/0.95/0.99 quantiles.
inline FixedBCriticalValues simulate_fixed_b_critical_values(long grid, long replications, std::uint64_t seed,
                                                             unsigned workers = 1) {
  require(grid >= 10 && replications >= 100, ErrorCode::InvalidArgument, "fixed-b simulation too small");
  std::vector<double> stats(static_cast<std::size_t>(replications));
  parallel_for(static_cast<std::size_t>(replications), workers, [&](std::size_t rep) {
    NormalStream z(stream_seed(seed, rep));
    std::vector<double> partial(static_cast<std::size_t>(grid));
    double s = 0.0;
    for (long i = 0; i < grid; ++i) {
      s += z();
      partial[i] = s;
    }
    const double n = static_cast<double>(grid);
    double q = 0.0;
    for (long i = 0; i < grid; ++i) {
      const double b = partial[i] - (static_cast<double>(i + 1) / n) * s;
      q += b * b;
    }
    // W(1) = S_n / sqrt(n); int B^2 = n^-2 sum_i (S_i - (i/n) S_n)^2.
    const double w1 = s / std::sqrt(n);
    const double integral = q / (n * n);
    stats[rep] = std::abs(w1) / std::sqrt(2.0 * integral);
  });
  std::sort(stats.begin(), stats.end());
  FixedBCriticalValues cv;
  cv.grid = grid;
  cv.replications = replications;
  cv.seed = seed;
  for (double level : cv.levels) {
    // Type-7 sample quantile.
    const double h = (static_cast<double>(replications) - 1.0) * level;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min<std::size_t>(lo + 1, stats.size() - 1);
    cv.quantiles.push_back(stats[lo] + (h - static_cast<double>(lo)) * (stats[hi] - stats[lo]));
  }
  return cv;
}

inline nlohmann::json to_json(const FixedBCriticalValues& cv) {
  return {{"format", "dkhac-fixedb-critical-values"},
          {"version", kFixedBCacheVersion},
          {"kernel", "bartlett"},
          {"b", cv.b},
          {"functional", "|W(1)| / sqrt(2 int B^2)"},
          {"families", {"t", "location"}},
          {"grid", cv.grid},
          {"replications", cv.replications},
          {"seed", cv.seed},
          {"levels", cv.levels},
          {"quantiles", cv.quantiles}};
}

inline FixedBCriticalValues fixed_b_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "dkhac-fixedb-critical-values", ErrorCode::CacheFailure, "not a fixed-b cache file");
    require(j.at("version") == kFixedBCacheVersion, ErrorCode::CacheFailure, "fixed-b cache version mismatch");
    FixedBCriticalValues cv;
    cv.b = j.at("b").get<double>();
    cv.grid = j.at("grid").get<long>();
    cv.replications = j.at("replications").get<long>();
    cv.seed = j.at("seed").get<std::uint64_t>();
    cv.levels = j.at("levels").get<std::vector<double>>();
    cv.quantiles = j.at("quantiles").get<std::vector<double>>();
    require(cv.levels.size() == cv.quantiles.size(), ErrorCode::CacheFailure, "levels/quantiles size mismatch");
    for (std::size_t i = 1; i < cv.quantiles.size(); ++i)
      require(cv.quantiles[i] > cv.quantiles[i - 1], ErrorCode::CacheFailure, "quantiles must increase with level");
    return cv;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CacheFailure, std::string("malformed fixed-b cache: ") + e.what());
  }
}

/// Loads the cache at `path` when its metadata matches the request, otherwise
/// simulates and (re)writes it.
inline FixedBCriticalValues load_or_generate_fixed_b(const std::filesystem::path& path, long grid, long replications,
                                                     std::uint64_t seed, unsigned workers = 1,
                                                     bool force_regenerate = false) {
  if (!force_regenerate && std::filesystem::exists(path)) {
    std::ifstream in(path);
    nlohmann::json j;
    try {
      in >> j;
      auto cv = fixed_b_from_json(j);
      if (cv.grid == grid && cv.replications == replications && cv.seed == seed) return cv;
    } catch (const std::exception&) {
      // stale or corrupt cache; regenerate below
    }
  }
  auto cv = simulate_fixed_b_critical_values(grid, replications, seed, workers);
  write_file_atomic(path, to_json(cv).dump(2) + "\n", ErrorCode::CacheFailure);
  return cv;
}

struct FixedBResult {
  LrvEstimate normalizer;
  FixedBCriticalValues critical_values;
};

/// Bartlett LRV with bandwidth M = T (weights 1 - |k|/T).
inline LrvEstimate kvb_lrv(const SeriesMatrix& V) {
  require(V.rows() >= 16, ErrorCode::InvalidArgument, "fixed-b estimator needs T >= 16");
  auto est = kernel_hac(V, LagKernel{LagKernelFamily::Bartlett}, 1.0 / static_cast<double>(V.rows()), false, 0);
  est.method = "kvb-fixed-b";
  return est;
}

inline FixedBResult kvb_fixed_b(const SeriesMatrix& V, const FixedBCriticalValues& cv) {
  return {kvb_lrv(V), cv};
}

}  // namespace dkhac
