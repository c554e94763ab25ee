#pragma once

// Data-dependent plug-in bandwidths for the DK-HAC estimator: rolling local
// AR(1) fits feed phi(2) and hence b1; a reference time-varying AR(1) path
// gives D1(u); time-smoothed local autocovariances give D2(u); both feed the
// per-block b2 schedule.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dkhac/error.hpp"
#include "dkhac/estimator.hpp"
#include "dkhac/kernels.hpp"

namespace dkhac {

struct LocalAr1Fit {
  double a1_hat = 0.0;
  double sigma_hat = 0.0;
  long window_first = 0;  // 0-based, inclusive
  long window_last = 0;
  bool zero_denominator = false;
};

/// Least-squares AR(1) fit on the n2 observations ending at 0-based index t,
/// each regressed on its predecessor. sigma_hat is the root of the residual
/// sum of squares (not a mean). Requires t >= n2 so every lag exists.
inline LocalAr1Fit local_ar1_fit(std::span<const double> v, long t, long n2) {
  require(n2 >= 8, ErrorCode::InvalidArgument, "local AR(1) window needs n2 >= 8");
  require(t >= n2 && t < static_cast<long>(v.size()), ErrorCode::InvalidArgument,
          "local AR(1) window must satisfy n2 <= t < T");
  double num = 0.0, den = 0.0;
  for (long j = t - n2 + 1; j <= t; ++j) {
    num += v[j] * v[j - 1];
    den += v[j - 1] * v[j - 1];
  }
  LocalAr1Fit fit{0.0, 0.0, t - n2 + 1, t, false};
  if (den == 0.0) {
    fit.zero_denominator = true;
    return fit;
  }
  fit.a1_hat = num / den;
  double ss = 0.0;
  for (long j = t - n2 + 1; j <= t; ++j) {
    const double e = v[j] - fit.a1_hat * v[j - 1];
    ss += e * e;
  }
  fit.sigma_hat = std::sqrt(ss);
  return fit;
}

struct Phi2Result {
  double value = 0.0;  // after flooring
  double raw = 0.0;
  bool floored = false;
  bool clamped = false;  // some |a1_hat| exceeded 0.97
  bool zero_denominator = false;
};

inline constexpr double kAr1Clamp = 0.97;
inline constexpr double kPhiFloor = 1e-6;
inline constexpr double kD2Floor = 1e-8;

/// Plug-in estimate of phi(2) from blockwise local AR(1) fits. Blocks start at
/// 1-based times j n3 + 1, j = 0..floor(T/n3)-1; windows that would reach
/// before the sample use the earliest admissible window. weights[r] in {0,1}
/// (0 for an intercept score).
inline Phi2Result phi2_hat(const SeriesMatrix& V, std::span<const double> weights, long n3, long n2) {
  const long T = V.rows();
  const long p = V.cols();
  require(static_cast<long>(weights.size()) == p, ErrorCode::InvalidArgument, "need one weight per column");
  require(std::any_of(weights.begin(), weights.end(), [](double w) { return w != 0.0; }),
          ErrorCode::InvalidArgument, "at least one column must have weight 1");
  require(n3 >= 1 && T >= 2 * n3, ErrorCode::InvalidArgument, "phi2_hat needs T >= 2 n3");
  require(n2 < T, ErrorCode::InvalidArgument, "phi2_hat needs n2 < T");

  Phi2Result out;
  const long blocks = T / n3;
  const double avg = static_cast<double>(n3) / static_cast<double>(T);
  double numer = 0.0, denom = 0.0;
  std::vector<double> col(static_cast<std::size_t>(T));
  for (long c = 0; c < p; ++c) {
    if (weights[c] == 0.0) continue;
    for (long t = 0; t < T; ++t) col[t] = V(t, c);
    double n_sum = 0.0, d_sum = 0.0;
    for (long j = 0; j < blocks; ++j) {
      const long t = std::max(j * n3, n2);
      const auto fit = local_ar1_fit(col, t, n2);
      out.zero_denominator = out.zero_denominator || fit.zero_denominator;
      double a = fit.a1_hat;
      if (std::abs(a) > kAr1Clamp) {
        a = std::copysign(kAr1Clamp, a);
        out.clamped = true;
      }
      const double s2 = fit.sigma_hat * fit.sigma_hat;
      const double one_minus = 1.0 - a;
      n_sum += s2 * a / std::pow(one_minus, 4);
      d_sum += s2 / (one_minus * one_minus);
    }
    n_sum *= avg;
    d_sum *= avg;
    numer += weights[c] * 18.0 * n_sum * n_sum;
    denom += weights[c] * d_sum * d_sum;
  }
  if (denom <= 0.0) {
    out.raw = 0.0;
    out.value = kPhiFloor;
    out.floored = true;
    return out;
  }
  out.raw = numer / denom;
  out.value = out.raw;
  if (out.value < kPhiFloor) {
    out.value = kPhiFloor;
    out.floored = true;
  }
  return out;
}

/// Default frequency grid {-pi, -3, -2, -1, 0, 1, 2, 3, pi}.
inline std::vector<double> default_frequency_grid() {
  constexpr double pi = std::numbers::pi;
  return {-pi, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, pi};
}

/// Reference time-varying AR(1) coefficient 0.8 (cos 1.5 + cos 4 pi u).
inline double reference_a1(double u) { return 0.8 * (std::cos(1.5) + std::cos(4.0 * std::numbers::pi * u)); }

/// Squared second-derivative proxy D1(u) for the reference path, averaged
/// over the frequency grid and taken as a squared modulus. Data-free.
inline double d1_hat(double u, std::span<const double> grid) {
  require(!grid.empty(), ErrorCode::InvalidArgument, "empty frequency grid");
  constexpr double pi = std::numbers::pi;
  using cplx = std::complex<double>;
  const double a = reference_a1(u);
  const double first_deriv = 0.8 * (-4.0 * pi * std::sin(4.0 * pi * u));
  const double second_deriv = 0.8 * (-16.0 * pi * pi * std::cos(4.0 * pi * u));
  cplx sum{0.0, 0.0};
  for (double w : grid) {
    const cplx e = std::polar(1.0, -w);
    const cplx base = 1.0 + a * e;
    sum += (3.0 / pi) * std::pow(base, -4) * first_deriv * e -
           (1.0 / pi) * std::pow(std::abs(base), -3.0) * second_deriv * e;
  }
  sum /= static_cast<double>(grid.size());
  return std::norm(sum);
}

inline double d1_hat(double u) {
  const auto g = default_frequency_grid();
  return d1_hat(u, g);
}

struct D2Result {
  double value = 0.0;
  bool floored = false;
};

/// Lag-window count floor(T^(4/25)).
inline long d2_lag_window(long T) { return static_cast<long>(std::floor(std::pow(static_cast<double>(T), 4.0 / 25.0))); }

/// Variability term D2 for block r at lag 0:
/// p^-1 sum_c sum_{|l|<=L} 2 c_hat^{(c,c)}(u_r, l)^2, floored at 1e-8.
inline D2Result d2_hat(const SeriesMatrix& V, long r, long n_T, const TimeKernel& K2, double b2_pilot) {
  const long T = V.rows();
  const long p = V.cols();
  const long L = std::min(d2_lag_window(T), T - 1);
  double sum = 0.0;
  for (long l = 0; l <= L; ++l) {
    const Eigen::MatrixXd c = local_autocov_hat(V, r, l, b2_pilot, K2, n_T);
    const double mult = l == 0 ? 1.0 : 2.0;  // lags l and -l share the diagonal
    for (long i = 0; i < p; ++i) sum += mult * 2.0 * c(i, i) * c(i, i);
  }
  D2Result out{sum / static_cast<double>(p), false};
  if (!(out.value >= kD2Floor)) {
    out.value = kD2Floor;
    out.floored = true;
  }
  return out;
}

struct ClipResult {
  double value;
  bool clipped;
};

/// [H D1]^(-1/5) (F D2)^(1/5) T^(-1/5), clipped to [8/T, 1].
inline ClipResult b2_hat(double d1, double d2, long T, const TimeKernel& K2) {
  require(d1 > 0.0 && d2 > 0.0, ErrorCode::InvalidArgument, "D1 and D2 must be positive");
  const double raw = time_bandwidth_constant(K2) * std::pow(d1, -0.2) * std::pow(d2, 0.2) *
                     std::pow(static_cast<double>(T), -0.2);
  const double lo = std::min(1.0, 8.0 / static_cast<double>(T));
  if (raw < lo) return {lo, true};
  if (raw > 1.0) return {1.0, true};
  return {raw, false};
}

/// (n_T / T) sum_{r=1}^{floor(T/n_T)-1} b2(u_r); schedule[0] (block r = 0) is
/// not part of the average.
inline double b2_bar(std::span<const double> schedule, long T, long n_T) {
  const long last = T / n_T - 1;
  require(static_cast<long>(schedule.size()) >= last + 1, ErrorCode::InvalidArgument, "b2 schedule too short");
  double s = 0.0;
  for (long r = 1; r <= last; ++r) s += schedule[r];
  return static_cast<double>(n_T) / static_cast<double>(T) * s;
}

/// (2 q K1q^2 phi T b2_bar / (int K1^2 F))^(-1/(2q+1)), clipped to [1/T, 1].
inline ClipResult b1_hat(double phi, double b2bar, long T, const LagKernel& K1, const TimeKernel& K2) {
  require(phi > 0.0, ErrorCode::InvalidArgument, "phi must be positive");
  require(b2bar > 0.0 && b2bar <= 1.0, ErrorCode::InvalidArgument, "b2_bar must lie in (0,1]");
  const auto c = kernel_constants(K1, K2);
  const double raw = std::pow(2.0 * c.q * c.k1q * c.k1q * phi * static_cast<double>(T) * b2bar / (c.int_k1_sq * c.f),
                              -1.0 / (2.0 * c.q + 1.0));
  const double lo = 1.0 / static_cast<double>(T);
  if (raw < lo) return {lo, true};
  if (raw > 1.0) return {1.0, true};
  return {raw, false};
}

struct PlugInResult {
  BandwidthPlan plan;
  PlugInDiagnostics diagnostics;
};

/// Full plug-in pipeline. `weights` selects the columns entering phi(2); an
/// empty span means all ones.
inline PlugInResult plug_in_bandwidths(const SeriesMatrix& V, const LagKernel& K1, const TimeKernel& K2,
                                       std::span<const double> weights = {}) {
  const long T = V.rows();
  require(T >= 32, ErrorCode::InvalidArgument, "automatic bandwidths need T >= 32");
  require(K2.conforming(), ErrorCode::UnsupportedKernel, "uniform time kernel is excluded from plug-in bandwidths");
  const auto q = K1.q();
  require(q.has_value(), ErrorCode::UnsupportedKernel, "truncated lag kernel has no plug-in bandwidth");
  require(*q == 2.0, ErrorCode::UnsupportedKernel,
          std::string("plug-in b1 is available for q = 2 kernels only; got ") + std::string(name(K1.family)));

  std::vector<double> ones;
  if (weights.empty()) {
    ones.assign(static_cast<std::size_t>(V.cols()), 1.0);
    weights = ones;
  }

  const long n_T = default_block_length(T);
  const auto layout = BlockLayout::make(T, n_T);
  PlugInDiagnostics diag;
  diag.block_length = n_T;
  const double pilot_d2 = 2.0;  // unit-variance white noise

  for (std::size_t r = 0; r < layout.count(); ++r) {
    const double u = static_cast<double>(r) * n_T / static_cast<double>(T);
    const double d1 = d1_hat(u);
    require(d1 > 0.0, ErrorCode::InvalidArgument, "D1 vanished on the reference path");
    const auto pilot = b2_hat(d1, pilot_d2, T, K2);
    auto d2 = d2_hat(V, static_cast<long>(r), n_T, K2, pilot.value);
    auto b2 = b2_hat(d1, d2.value, T, K2);
    // One fixed-point refinement with the data-based D2.
    d2 = d2_hat(V, static_cast<long>(r), n_T, K2, b2.value);
    b2 = b2_hat(d1, d2.value, T, K2);
    if (d2.floored) diag.flags.push_back("D2Floored@" + std::to_string(r));
    if (b2.clipped) diag.flags.push_back("B2Clipped@" + std::to_string(r));
    diag.d1.push_back(d1);
    diag.d2.push_back(d2.value);
    diag.b2_pilot.push_back(pilot.value);
    diag.b2_schedule.push_back(b2.value);
  }
  diag.b2_bar = b2_bar(diag.b2_schedule, T, n_T);

  const auto phi = phi2_hat(V, weights, n_T, n_T);
  diag.phi2_hat = phi.value;
  diag.phi2_raw = phi.raw;
  if (phi.floored) diag.flags.push_back("PhiFloored");
  if (phi.clamped) diag.flags.push_back("Ar1Clamped");
  if (phi.zero_denominator) diag.flags.push_back("ZeroDenominator");

  const auto b1 = b1_hat(phi.value, diag.b2_bar, T, K1, K2);
  diag.b1 = b1.value;
  if (b1.clipped) diag.flags.push_back("B1Clipped");

  // The estimator runs with b2_bar in every block; the per-block schedule only
  // feeds the average and is kept in the diagnostics.
  const double applied = std::clamp(diag.b2_bar, std::min(1.0, 8.0 / static_cast<double>(T)), 1.0);
  BandwidthPlan plan{b1.value, std::vector<double>(layout.count(), applied), diag.b2_bar, n_T, PlanSource::PlugIn};
  return {std::move(plan), std::move(diag)};
}

/// DK-HAC with plug-in bandwidths and n_T = floor(T^0.66). The degrees of
/// freedom factor is applied when p_model > 0.
inline LrvEstimate dk_hac_auto(const SeriesMatrix& V, const LagKernel& K1, const TimeKernel& K2, long p_model,
                               std::span<const double> weights = {}) {
  auto pi = plug_in_bandwidths(V, K1, K2, weights);
  auto est = dk_hac(V, K1, K2, pi.plan, p_model > 0, p_model);
  est.method = "dk-hac-auto";
  for (const auto& f : pi.diagnostics.flags) est.flags.push_back(f);
  est.diagnostics = std::move(pi.diagnostics);
  return est;
}

}  // namespace dkhac
