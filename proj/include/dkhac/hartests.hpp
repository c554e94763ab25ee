#pragma once

// HAR test statistics built on an LRV estimate: regression t-tests,
// Diebold-Mariano, Giacomini-Rossi forecast breakdown, and GMM / IV sandwiches.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkhac/bandwidths.hpp"
#include "dkhac/baselines.hpp"
#include "dkhac/error.hpp"
#include "dkhac/estimator.hpp"

namespace dkhac {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Inverse standard normal cdf by bisection on erfc; accurate to ~1e-15.
inline double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::InvalidArgument, "probability must lie in (0,1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Two-sided normal critical value at significance `alpha`.
inline double normal_critical_value(double alpha) { return normal_quantile(1.0 - alpha / 2.0); }

// ---------------------------------------------------------------------------
// LRV method selection

enum class Estimator { DkHac, NeweyWest, NeweyWestPrewhite, Andrews, AndrewsPrewhite, Kvb };

inline const std::vector<Estimator>& all_estimators() {
  static const std::vector<Estimator> v{Estimator::DkHac,   Estimator::AndrewsPrewhite, Estimator::Andrews,
                                        Estimator::NeweyWest, Estimator::NeweyWestPrewhite, Estimator::Kvb};
  return v;
}

inline std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::DkHac: return "dk-hac";
    case Estimator::NeweyWest: return "newey-west";
    case Estimator::NeweyWestPrewhite: return "newey-west-prewhite";
    case Estimator::Andrews: return "andrews";
    case Estimator::AndrewsPrewhite: return "andrews-prewhite";
    case Estimator::Kvb: return "kvb";
  }
  return "?";
}

/// Row label used in the generated tables.
inline std::string table_label(Estimator e) {
  switch (e) {
    case Estimator::DkHac: return "J_T";
    case Estimator::NeweyWest: return "Newey-West";
    case Estimator::NeweyWestPrewhite: return "Newey-West, prewhite";
    case Estimator::Andrews: return "Andrews";
    case Estimator::AndrewsPrewhite: return "Andrews, prewhite";
    case Estimator::Kvb: return "Newey-West, fixed-b";
  }
  return "?";
}

inline Estimator parse_estimator(const std::string& s) {
  for (auto e : all_estimators())
    if (to_string(e) == s) return e;
  throw Error(ErrorCode::InvalidArgument,
              "unknown estimator '" + s +
                  "' (expected dk-hac, newey-west, newey-west-prewhite, andrews, andrews-prewhite, kvb)");
}

/// An LRV estimator bound to its options; called on a score or loss series.
using LrvFunction = std::function<LrvEstimate(const SeriesMatrix&)>;

/// Binds an estimator. `weights` are the column weights of the automatic
/// bandwidth rules (empty means all ones); `p_model` drives the T/(T-p) factor
/// of the estimators that use one.
inline LrvFunction make_lrv(Estimator e, long p_model = 0, std::vector<double> weights = {}) {
  switch (e) {
    case Estimator::DkHac:
      return [=](const SeriesMatrix& V) {
        return dk_hac_auto(V, LagKernel{LagKernelFamily::QuadraticSpectral}, TimeKernel{TimeKernelFamily::EpanechnikovOpt},
                           p_model, weights);
      };
    case Estimator::NeweyWest:
      return [=](const SeriesMatrix& V) { return nw_hac(V, true, false, weights); };
    case Estimator::NeweyWestPrewhite:
      return [=](const SeriesMatrix& V) { return nw_hac(V, true, true, weights); };
    case Estimator::Andrews:
      return [=](const SeriesMatrix& V) { return andrews_hac(V, false, weights, p_model); };
    case Estimator::AndrewsPrewhite:
      return [=](const SeriesMatrix& V) { return andrews_hac(V, true, weights, p_model); };
    case Estimator::Kvb:
      return [](const SeriesMatrix& V) { return kvb_lrv(V); };
  }
  throw Error(ErrorCode::InvalidArgument, "unknown estimator");
}

/// Normal quantiles for consistent estimators, fixed-b quantiles for KVB.
struct CriticalValueSource {
  std::optional<FixedBCriticalValues> fixed_b;

  static CriticalValueSource normal() { return {}; }
  static CriticalValueSource fixed(FixedBCriticalValues cv) { return {std::move(cv)}; }

  double value(double alpha) const {
    if (!fixed_b) return normal_critical_value(alpha);
    return fixed_b->critical_value(1.0 - alpha);
  }
  std::string describe() const { return fixed_b ? "fixed-b(" + fixed_b->family + ")" : "normal"; }
};

struct TestResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  double nominal_level = 0.05;
  bool reject = false;
  std::string lrv_provenance;  // estimator and critical-value source
  std::vector<std::string> flags;
};

namespace detail {

/// num / sqrt(var), refusing to produce NaN or infinity.
inline double studentize(double num, double var) {
  if (var == 0.0 && num == 0.0) throw Error(ErrorCode::UndefinedStatistic, "0/0: zero numerator and zero variance");
  if (!(var > 0.0) || !std::isfinite(var))
    throw Error(ErrorCode::NonPositiveVariance, "variance estimate is not positive: " + std::to_string(var));
  const double s = num / std::sqrt(var);
  if (!std::isfinite(s)) throw Error(ErrorCode::UndefinedStatistic, "statistic is not finite");
  return s;
}

inline TestResult decide(double stat, const CriticalValueSource& cv, double alpha, const LrvEstimate* lrv) {
  TestResult r;
  r.statistic = stat;
  r.nominal_level = alpha;
  r.critical_value = cv.value(alpha);
  r.reject = std::abs(stat) > r.critical_value;
  r.lrv_provenance = (lrv ? lrv->method : std::string("none")) + "; cv=" + cv.describe();
  if (lrv) r.flags = lrv->flags;
  return r;
}

inline double condition_number(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Regression

struct RegressionFit {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd beta_hat;
  Eigen::VectorXd residuals;
  SeriesMatrix scores;  // row t is x_t' e_t
  Eigen::MatrixXd Qxx;  // X'X / T
};

inline RegressionFit ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  require(X.rows() == y.size(), ErrorCode::InvalidArgument, "y and X must have the same number of rows");
  require(X.cols() >= 1 && X.rows() > X.cols(), ErrorCode::InvalidArgument, "need T > p >= 1");
  const Eigen::MatrixXd xtx = X.transpose() * X;
  require(detail::condition_number(xtx) < 1e12, ErrorCode::SingularDesign, "X'X is singular or ill-conditioned");
  RegressionFit f;
  f.X = X;
  f.y = y;
  f.beta_hat = xtx.ldlt().solve(X.transpose() * y);
  f.residuals = y - X * f.beta_hat;
  f.scores = X.array().colwise() * f.residuals.array();
  f.Qxx = xtx / static_cast<double>(X.rows());
  return f;
}

/// Q^-1 J Q^-1 for the OLS coefficients.
inline Eigen::MatrixXd ols_sandwich(const RegressionFit& fit, const Eigen::MatrixXd& J) {
  const Eigen::MatrixXd qinv = fit.Qxx.inverse();
  return qinv * J * qinv.transpose();
}

/// t_r = sqrt(T)(beta_hat_r - beta0_r) / sqrt(Sigma_rr), Sigma the OLS sandwich.
inline TestResult t_test(const RegressionFit& fit, long r, double beta0_r, const LrvEstimate& lrv_of_scores,
                         const CriticalValueSource& cv = {}, double alpha = 0.05) {
  const long p = fit.beta_hat.size();
  require(r >= 0 && r < p, ErrorCode::InvalidArgument, "coefficient index out of range");
  require(lrv_of_scores.J.rows() == p && lrv_of_scores.J.cols() == p, ErrorCode::InvalidArgument,
          "LRV dimension does not match the regression");
  const Eigen::MatrixXd sigma = ols_sandwich(fit, lrv_of_scores.J);
  const double T = static_cast<double>(fit.X.rows());
  const double num = std::sqrt(T) * (fit.beta_hat(r) - beta0_r);
  return detail::decide(detail::studentize(num, sigma(r, r)), cv, alpha, &lrv_of_scores);
}

/// sqrt(T) mean(x) / sqrt(J), J the LRV of the demeaned series.
inline TestResult location_test(std::span<const double> x, const LrvFunction& lrv, const CriticalValueSource& cv = {},
                                double alpha = 0.05) {
  const long n = static_cast<long>(x.size());
  require(n >= 16, ErrorCode::InvalidArgument, "location test needs at least 16 observations");
  Eigen::Map<const Eigen::VectorXd> v(x.data(), n);
  const double mean = v.mean();
  SeriesMatrix centred = (v.array() - mean).matrix();
  const auto est = lrv(centred);
  const double stat = detail::studentize(std::sqrt(static_cast<double>(n)) * mean, est.J(0, 0));
  return detail::decide(stat, cv, alpha, &est);
}

namespace detail {

// A series that is exactly zero carries no evidence against the null; the
// statistic is defined as 0 rather than 0/0.
inline std::optional<TestResult> zero_series(std::span<const double> x, const CriticalValueSource& cv, double alpha) {
  for (double v : x)
    if (v != 0.0) return std::nullopt;
  auto r = decide(0.0, cv, alpha, nullptr);
  r.flags.push_back("ZeroSeries");
  return r;
}

}  // namespace detail

/// Diebold-Mariano: d_t = L2_t - L1_t.
inline TestResult dm_test(std::span<const double> loss1, std::span<const double> loss2, const LrvFunction& lrv,
                          const CriticalValueSource& cv = {}, double alpha = 0.05) {
  require(loss1.size() == loss2.size(), ErrorCode::InvalidArgument, "loss series must have equal length");
  require(loss1.size() >= 16, ErrorCode::InvalidArgument, "DM test needs T_n >= 16");
  std::vector<double> d(loss1.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = loss2[i] - loss1[i];
  if (auto z = detail::zero_series(d, cv, alpha)) return *z;
  return location_test(d, lrv, cv, alpha);
}

/// Giacomini-Rossi forecast breakdown under a fixed scheme: SL_t = L_t -
/// mean(in-sample losses). The in-sample mean is itself noisy, so the variance
/// of sqrt(T_n) mean(SL) is J_out + (T_n / T_m) J_in, each term the chosen LRV
/// of the demeaned loss series. With fewer than 16 in-sample losses, or a
/// constant in-sample series, the second term is dropped and flagged.
inline TestResult gr_test(std::span<const double> in_sample_losses, std::span<const double> out_sample_losses,
                          const LrvFunction& lrv, const CriticalValueSource& cv = {}, double alpha = 0.05) {
  require(!in_sample_losses.empty(), ErrorCode::InvalidArgument, "need in-sample losses");
  require(out_sample_losses.size() >= 16, ErrorCode::InvalidArgument, "GR test needs T_n >= 16");
  const long m = static_cast<long>(in_sample_losses.size());
  const long n = static_cast<long>(out_sample_losses.size());
  Eigen::Map<const Eigen::VectorXd> in(in_sample_losses.data(), m);
  const double mean_in = in.mean();
  std::vector<double> sl(out_sample_losses.size());
  for (std::size_t i = 0; i < sl.size(); ++i) sl[i] = out_sample_losses[i] - mean_in;
  if (auto z = detail::zero_series(sl, cv, alpha)) return *z;

  Eigen::Map<const Eigen::VectorXd> v(sl.data(), n);
  const double mean_sl = v.mean();
  const auto est = lrv(SeriesMatrix((v.array() - mean_sl).matrix()));
  double var = est.J(0, 0);
  std::vector<std::string> extra;
  const SeriesMatrix in_c = (in.array() - mean_in).matrix();
  if (m >= 16 && in_c.cwiseAbs().maxCoeff() > 0.0) {
    var += static_cast<double>(n) / static_cast<double>(m) * lrv(in_c).J(0, 0);
  } else {
    extra.push_back("InSampleTermOmitted");
  }
  auto r = detail::decide(detail::studentize(std::sqrt(static_cast<double>(n)) * mean_sl, var), cv, alpha, &est);
  r.flags.insert(r.flags.end(), extra.begin(), extra.end());
  return r;
}

// ---------------------------------------------------------------------------
// Sandwiches

/// (L'WL)^-1 L'W J W L (L'WL)^-1 with J the LRV of the moment series.
/// `moments` is T x m, `L` is the m x k Jacobian average, `W` is m x m.
inline Eigen::MatrixXd gmm_sandwich(const SeriesMatrix& moments, const Eigen::MatrixXd& L, const Eigen::MatrixXd& W,
                                    const LrvFunction& lrv) {
  const long m = moments.cols();
  require(L.rows() == m && W.rows() == m && W.cols() == m, ErrorCode::InvalidArgument,
          "moment, Jacobian and weighting dimensions do not conform");
  require(L.cols() <= m, ErrorCode::InvalidArgument, "more parameters than moments");
  const Eigen::MatrixXd bread = L.transpose() * W * L;
  require(detail::condition_number(bread) < 1e12, ErrorCode::SingularBread, "L'WL is singular");
  const Eigen::MatrixXd binv = bread.inverse();
  const Eigen::MatrixXd J = lrv(moments).J;
  const Eigen::MatrixXd S = binv * L.transpose() * W * J * W * L * binv;
  return 0.5 * (S + S.transpose());
}

/// Just-identified IV: beta = (Z'X)^-1 Z'y, variance Q_zx^-1 J(z_t e_t) Q_zx^-T.
inline Eigen::MatrixXd iv_sandwich(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                                   const LrvFunction& lrv) {
  require(X.rows() == y.size() && Z.rows() == y.size(), ErrorCode::InvalidArgument, "row counts differ");
  require(Z.cols() == X.cols(), ErrorCode::InvalidArgument, "IV sandwich needs as many instruments as regressors");
  const double T = static_cast<double>(y.size());
  const Eigen::MatrixXd qzx = Z.transpose() * X / T;
  require(detail::condition_number(qzx) < 1e12, ErrorCode::SingularZX, "Z'X is singular");
  const Eigen::VectorXd beta = qzx.partialPivLu().solve(Z.transpose() * y / T);
  const Eigen::VectorXd e = y - X * beta;
  const SeriesMatrix scores = Z.array().colwise() * e.array();
  const Eigen::MatrixXd qinv = qzx.inverse();
  return qinv * lrv(scores).J * qinv.transpose();
}

}  // namespace dkhac
