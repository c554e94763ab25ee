#pragma once

// Lag kernels (smoothing over autocovariance lags) and time kernels
// (smoothing over rescaled time), together with the analytic constants the
// bandwidth formulas need.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "dkhac/error.hpp"

namespace dkhac {

enum class LagKernelFamily { QuadraticSpectral, Bartlett, Parzen, TukeyHanning, Truncated };
enum class TimeKernelFamily { EpanechnikovOpt, Uniform };

struct LagKernel {
  LagKernelFamily family = LagKernelFamily::QuadraticSpectral;

  /// Characteristic exponent q; empty for the truncated kernel.
  std::optional<double> q() const {
    switch (family) {
      case LagKernelFamily::Bartlett: return 1.0;
      case LagKernelFamily::QuadraticSpectral:
      case LagKernelFamily::Parzen:
      case LagKernelFamily::TukeyHanning: return 2.0;
      case LagKernelFamily::Truncated: return std::nullopt;
    }
    return std::nullopt;
  }

  /// lim_{x->0} (1 - K(x)) / |x|^q.
  std::optional<double> k1q() const {
    constexpr double pi = std::numbers::pi;
    switch (family) {
      case LagKernelFamily::QuadraticSpectral: return 18.0 * pi * pi / 125.0;
      case LagKernelFamily::Bartlett: return 1.0;
      case LagKernelFamily::Parzen: return 6.0;
      case LagKernelFamily::TukeyHanning: return pi * pi / 4.0;
      case LagKernelFamily::Truncated: return std::nullopt;
    }
    return std::nullopt;
  }

  /// Integral of K^2 over the real line.
  double integral_sq() const {
    switch (family) {
      case LagKernelFamily::QuadraticSpectral: return 1.0;
      case LagKernelFamily::Bartlett: return 2.0 / 3.0;
      case LagKernelFamily::Parzen: return 151.0 / 280.0;
      case LagKernelFamily::TukeyHanning: return 0.75;
      case LagKernelFamily::Truncated: return 2.0;
    }
    return 0.0;
  }

  /// Nonnegative spectral window, so the kernel yields PSD estimates.
  bool psd_generating() const {
    return family == LagKernelFamily::QuadraticSpectral || family == LagKernelFamily::Bartlett ||
           family == LagKernelFamily::Parzen;
  }

  /// |x| beyond which the weight is exactly zero (compact kernels) or below
  /// 1e-8 in magnitude (QS).
  double numerical_support() const {
    // QS envelope: |K(x)| <= 3 (1 + 1/z) / z^2 with z = 6 pi x / 5, which
    // drops under 1e-8 at z ~ 17321.
    if (family == LagKernelFamily::QuadraticSpectral) return 17321.0 * 5.0 / (6.0 * std::numbers::pi);
    return 1.0;
  }

  double operator()(double x) const;
};

struct TimeKernel {
  TimeKernelFamily family = TimeKernelFamily::EpanechnikovOpt;

  /// F = integral of K2^2 over [0,1].
  double f_constant() const { return family == TimeKernelFamily::EpanechnikovOpt ? 6.0 / 5.0 : 1.0; }

  /// H = (integral of x^2 K2(x) over [0,1])^2.
  double h_constant() const { return family == TimeKernelFamily::EpanechnikovOpt ? 9.0 / 100.0 : 1.0 / 9.0; }

  /// The uniform kernel is discontinuous at the support edges and only exists
  /// as a test configuration; it is rejected by the plug-in path.
  bool conforming() const { return family == TimeKernelFamily::EpanechnikovOpt; }

  double operator()(double x) const {
    if (x < 0.0 || x > 1.0) return 0.0;
    if (family == TimeKernelFamily::EpanechnikovOpt) return 6.0 * x * (1.0 - x);
    return 1.0;
  }
};

inline double quadratic_spectral(double x) {
  constexpr double pi = std::numbers::pi;
  const double z = 6.0 * pi * x / 5.0;
  if (std::abs(x) < 1e-4) {
    // Taylor expansion of the closed form around the removable singularity.
    const double z2 = z * z;
    return 1.0 - z2 / 10.0 + z2 * z2 / 280.0 - z2 * z2 * z2 / 15120.0;
  }
  return 25.0 / (12.0 * pi * pi * x * x) * (std::sin(z) / z - std::cos(z));
}

inline double LagKernel::operator()(double x) const {
  const double ax = std::abs(x);
  switch (family) {
    case LagKernelFamily::QuadraticSpectral:
      return quadratic_spectral(ax);
    case LagKernelFamily::Bartlett:
      return ax <= 1.0 ? 1.0 - ax : 0.0;
    case LagKernelFamily::Parzen:
      if (ax <= 0.5) return 1.0 - 6.0 * ax * ax + 6.0 * ax * ax * ax;
      if (ax <= 1.0) return 2.0 * (1.0 - ax) * (1.0 - ax) * (1.0 - ax);
      return 0.0;
    case LagKernelFamily::TukeyHanning:
      return ax <= 1.0 ? 0.5 * (1.0 + std::cos(std::numbers::pi * ax)) : 0.0;
    case LagKernelFamily::Truncated:
      return ax <= 1.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

inline double eval_k1(const LagKernel& kernel, double x) { return kernel(x); }
inline double eval_k2(const TimeKernel& kernel, double x) { return kernel(x); }

/// Per-observation-pair weight of the time-smoothed local autocovariance.
/// Factorised as the geometric mean of the two single-observation weights so
/// that every observation carries the same taper across lags.
inline double k2_star_weight(const TimeKernel& kernel, long anchor, long s, long k, long T, double b2) {
  const double scale = static_cast<double>(T) * b2;
  const long partner = k >= 0 ? s - k : s + k;
  const double w1 = kernel(static_cast<double>(anchor - s) / scale);
  const double w2 = kernel(static_cast<double>(anchor - partner) / scale);
  if (k == 0) return w1;
  return std::sqrt(w1 * w2);
}

struct KernelConstants {
  double q;
  double k1q;
  double int_k1_sq;
  double f;
  double h;
};

/// Constants entering the MSE-optimal bandwidth formulas. Throws
/// UnsupportedKernel for kernels without a finite characteristic exponent.
inline KernelConstants kernel_constants(const LagKernel& lag, const TimeKernel& time) {
  const auto q = lag.q();
  const auto k1q = lag.k1q();
  require(q.has_value() && k1q.has_value(), ErrorCode::UnsupportedKernel,
          "truncated kernel has no finite K_{1,q}; automatic bandwidths are undefined");
  return {*q, *k1q, lag.integral_sq(), time.f_constant(), time.h_constant()};
}

/// Leading constant of the optimal lag bandwidth, (2 q K1q^2 / int K1^2)^(-1/(2q+1)).
inline double lag_bandwidth_constant(const LagKernel& lag) {
  const auto c = kernel_constants(lag, TimeKernel{});
  return std::pow(2.0 * c.q * c.k1q * c.k1q / c.int_k1_sq, -1.0 / (2.0 * c.q + 1.0));
}

/// (F / H)^(1/5): the leading constant of the optimal time bandwidth.
inline double time_bandwidth_constant(const TimeKernel& time) {
  return std::pow(time.f_constant() / time.h_constant(), 0.2);
}

inline std::string_view name(LagKernelFamily f) {
  switch (f) {
    case LagKernelFamily::QuadraticSpectral: return "qs";
    case LagKernelFamily::Bartlett: return "bartlett";
    case LagKernelFamily::Parzen: return "parzen";
    case LagKernelFamily::TukeyHanning: return "tukey-hanning";
    case LagKernelFamily::Truncated: return "truncated";
  }
  return "?";
}

inline std::string_view name(TimeKernelFamily f) {
  return f == TimeKernelFamily::EpanechnikovOpt ? "epanechnikov" : "uniform";
}

inline LagKernel parse_lag_kernel(std::string_view s) {
  for (auto f : {LagKernelFamily::QuadraticSpectral, LagKernelFamily::Bartlett, LagKernelFamily::Parzen,
                 LagKernelFamily::TukeyHanning, LagKernelFamily::Truncated}) {
    if (name(f) == s) return LagKernel{f};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown lag kernel '" + std::string(s) + "'");
}

inline TimeKernel parse_time_kernel(std::string_view s) {
  for (auto f : {TimeKernelFamily::EpanechnikovOpt, TimeKernelFamily::Uniform}) {
    if (name(f) == s) return TimeKernel{f};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown time kernel '" + std::string(s) + "'");
}

}  // namespace dkhac
