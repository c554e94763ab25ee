#pragma once

// Double-kernel HAC estimator: blockwise time-smoothed local autocovariances,
// their block average, and the lag-kernel sum.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dkhac/error.hpp"
#include "dkhac/kernels.hpp"
#include "dkhac/sls.hpp"

namespace dkhac {

enum class PlanSource { Predetermined, PlugIn };

inline const char* to_string(PlanSource s) { return s == PlanSource::PlugIn ? "plug-in" : "predetermined"; }

/// Blocks r = 0..R with R = floor((T - n_T) / n_T), block r anchored at
/// observation (r + 1) n_T, averaged with weight n_T / (T - n_T). The final
/// partial block is not included. n_T == T is the single full-sample block
/// (anchor T, weight 1).
struct BlockLayout {
  long T = 0;
  long block_length = 0;
  std::vector<long> anchors;
  double weight = 0.0;

  static BlockLayout make(long T, long n_T) {
    require(T >= 2, ErrorCode::InvalidArgument, "need T >= 2");
    require(n_T >= 1 && n_T <= T, ErrorCode::InvalidArgument, "block length must lie in [1, T]");
    BlockLayout b{T, n_T, {}, 0.0};
    if (n_T == T) {
      b.anchors = {T};
      b.weight = 1.0;
      return b;
    }
    const long last = (T - n_T) / n_T;
    for (long r = 0; r <= last; ++r) b.anchors.push_back((r + 1) * n_T);
    b.weight = static_cast<double>(n_T) / static_cast<double>(T - n_T);
    return b;
  }

  std::size_t count() const { return anchors.size(); }
};

/// floor(T^0.66).
inline long default_block_length(long T) { return static_cast<long>(std::floor(std::pow(static_cast<double>(T), 0.66))); }

struct BandwidthPlan {
  double b1 = 0.0;
  std::vector<double> b2;  // one entry per block r = 0..R
  double b2_bar = 0.0;
  long block_length = 0;
  PlanSource source = PlanSource::Predetermined;

  /// Same b2 for every block; b2_bar is b2.
  static BandwidthPlan fixed(double b1, double b2, long T, long n_T) {
    const auto layout = BlockLayout::make(T, n_T);
    return {b1, std::vector<double>(layout.count(), b2), b2, n_T, PlanSource::Predetermined};
  }

  void validate(long T) const {
    require(b1 > 0.0 && std::isfinite(b1), ErrorCode::InvalidArgument, "b1 must be positive");
    const auto layout = BlockLayout::make(T, block_length);
    require(b2.size() == layout.count(), ErrorCode::InvalidArgument,
            "b2 schedule has " + std::to_string(b2.size()) + " entries, expected " + std::to_string(layout.count()));
    for (double b : b2) require(b > 0.0 && b <= 1.0, ErrorCode::InvalidArgument, "every b2 must lie in (0,1]");
  }

  bool operator==(const BandwidthPlan&) const = default;
};

struct PlugInDiagnostics {
  double phi2_hat = 0.0;
  double phi2_raw = 0.0;
  std::vector<double> d1;
  std::vector<double> d2;
  std::vector<double> b2_pilot;
  std::vector<double> b2_schedule;
  double b2_bar = 0.0;
  double b1 = 0.0;
  long block_length = 0;
  std::vector<std::string> flags;

  bool operator==(const PlugInDiagnostics&) const = default;
};

struct LrvEstimate {
  Eigen::MatrixXd J;
  BandwidthPlan plan;
  std::string method = "dk-hac";
  LagKernel lag_kernel;
  std::optional<TimeKernel> time_kernel;
  bool dof_adjusted = false;
  double min_eigenvalue = 0.0;
  bool psd_warning = false;
  std::optional<PlugInDiagnostics> diagnostics;
  std::vector<std::string> flags;
};

namespace detail {

inline double min_eigenvalue(const Eigen::MatrixXd& J) {
  if (J.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Symmetrises J, records the minimum eigenvalue and raises the non-PSD flag
/// when it falls below -1e-10 trace.
inline void finalize(LrvEstimate& est) {
  est.J = 0.5 * (est.J + est.J.transpose()).eval();
  est.min_eigenvalue = min_eigenvalue(est.J);
  const double tr = est.J.trace();
  est.psd_warning = est.min_eigenvalue < -1e-10 * std::abs(tr);
  if (est.psd_warning) est.flags.push_back("NonPsd");
}

/// Square-root taper of one block: weights sqrt(K2((anchor - s) / (T b2)))
/// for 1-based s, restricted to the index range where they can be nonzero.
struct Taper {
  long first = 0;  // 0-based row of the first observation in the window
  Eigen::VectorXd root_weight;
  bool degenerate = true;
};

inline Taper block_taper(const TimeKernel& K2, long anchor, long T, double b2) {
  const double scale = static_cast<double>(T) * b2;
  const long lo = std::max<long>(1, static_cast<long>(std::floor(anchor - scale)));
  const long hi = std::min<long>(T, anchor);
  Taper tp;
  tp.first = lo - 1;
  tp.root_weight = Eigen::VectorXd::Zero(std::max<long>(0, hi - lo + 1));
  for (long s = lo; s <= hi; ++s) {
    const double w = K2(static_cast<double>(anchor - s) / scale);
    tp.root_weight(s - lo) = std::sqrt(w);
    if (w > 0.0) tp.degenerate = false;
  }
  return tp;
}

inline void check_pre(const SeriesMatrix& V, long k, double b2) {
  require(V.rows() >= 2, ErrorCode::InvalidArgument, "need at least two observations");
  require(std::abs(k) <= V.rows() - 1, ErrorCode::InvalidArgument, "|k| must not exceed T - 1");
  require(b2 > 0.0 && b2 <= 1.0, ErrorCode::InvalidArgument, "b2 must lie in (0,1]");
}

}  // namespace detail

/// Time-smoothed local autocovariance of block r at lag k, returned as a
/// p x p matrix. Negative lags give the transpose of the positive lag.
inline Eigen::MatrixXd local_autocov_hat(const SeriesMatrix& V, long r, long k, double b2, const TimeKernel& K2,
                                         long n_T) {
  detail::check_pre(V, k, b2);
  const long T = V.rows();
  const long anchor = (r + 1) * n_T;
  require(r >= 0 && anchor <= T, ErrorCode::InvalidArgument, "block anchor (r+1) n_T must not exceed T");
  const auto tp = detail::block_taper(K2, anchor, T, b2);
  require(!tp.degenerate, ErrorCode::DegenerateWindow, "all time-kernel weights are zero; b2 too small");
  const long lag = std::abs(k);
  const long n = tp.root_weight.size();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(V.cols(), V.cols());
  for (long i = lag; i < n; ++i) {
    const double w = tp.root_weight(i) * tp.root_weight(i - lag);
    if (w == 0.0) continue;
    c.noalias() += w * V.row(tp.first + i).transpose() * V.row(tp.first + i - lag);
  }
  c /= static_cast<double>(T) * b2;
  if (k < 0) c.transposeInPlace();
  return c;
}

/// Block average of local autocovariances at lag k.
inline Eigen::MatrixXd gamma_hat(const SeriesMatrix& V, long k, const BandwidthPlan& plan, const TimeKernel& K2) {
  const long T = V.rows();
  plan.validate(T);
  const auto layout = BlockLayout::make(T, plan.block_length);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(V.cols(), V.cols());
  for (std::size_t r = 0; r < layout.count(); ++r)
    g += local_autocov_hat(V, static_cast<long>(r), k, plan.b2[r], K2, plan.block_length);
  return layout.weight * g;
}

/// DK-HAC estimate [T/(T-p)]^dof sum_k K1(b1 k) Gamma_hat(k) for a given plan.
inline LrvEstimate dk_hac(const SeriesMatrix& V, const LagKernel& K1, const TimeKernel& K2, const BandwidthPlan& plan,
                          bool dof_adjust, long p_model) {
  const long T = V.rows();
  const long p = V.cols();
  require(T > p_model && p_model >= 0, ErrorCode::InvalidArgument, "need T > p_model >= 0");
  plan.validate(T);
  const auto layout = BlockLayout::make(T, plan.block_length);
  const double support = K1.numerical_support();

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd acc(p, p);
  for (std::size_t r = 0; r < layout.count(); ++r) {
    const double b2 = plan.b2[r];
    const auto tp = detail::block_taper(K2, layout.anchors[r], T, b2);
    require(!tp.degenerate, ErrorCode::DegenerateWindow,
            "block " + std::to_string(r) + ": all time-kernel weights are zero; b2 too small");
    const long n = tp.root_weight.size();
    const Eigen::MatrixXd W = tp.root_weight.asDiagonal() * V.middleRows(tp.first, n);
    const double scale = layout.weight / (static_cast<double>(T) * b2);
    for (long k = 0; k < n; ++k) {
      const double x = plan.b1 * static_cast<double>(k);
      if (x > support) break;
      const double kw = K1(x);
      if (kw == 0.0) continue;
      acc.noalias() = W.bottomRows(n - k).transpose() * W.topRows(n - k);
      if (k == 0) {
        J.noalias() += (kw * scale) * acc;
      } else {
        J.noalias() += (kw * scale) * (acc + acc.transpose());
      }
    }
  }
  LrvEstimate est;
  const double dof = dof_adjust ? static_cast<double>(T) / static_cast<double>(T - p_model) : 1.0;
  est.J = dof * J;
  est.plan = plan;
  est.lag_kernel = K1;
  est.time_kernel = K2;
  est.dof_adjusted = dof_adjust;
  detail::finalize(est);
  if (est.psd_warning && K1.psd_generating()) est.flags.push_back("NonPsdDespitePsdKernel");
  return est;
}

}  // namespace dkhac
