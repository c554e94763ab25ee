#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "support.hpp"

using namespace dkhac;
using testing_support::ar1;
using testing_support::gaussian;

namespace {

constexpr double pi = std::numbers::pi;
const LagKernel kQs{LagKernelFamily::QuadraticSpectral};
const TimeKernel kEpa{TimeKernelFamily::EpanechnikovOpt};

std::vector<double> alternating(long n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) v[i] = i % 2 ? 2.0 : 1.0;
  return v;
}

// D1 written out in real arithmetic.
double d1_oracle(double u, const std::vector<double>& grid) {
  const double a = 0.8 * (std::cos(1.5) + std::cos(4.0 * pi * u));
  const double da = -3.2 * pi * std::sin(4.0 * pi * u);
  const double dda = -12.8 * pi * pi * std::cos(4.0 * pi * u);
  double re = 0.0, im = 0.0;
  for (double w : grid) {
    const double br = 1.0 + a * std::cos(w), bi = -a * std::sin(w);
    const double r = std::hypot(br, bi), th = std::atan2(bi, br);
    // (3/pi) r^-4 e^{-4 i th} a' e^{-i w}
    const double m1 = 3.0 / pi * std::pow(r, -4.0) * da;
    re += m1 * std::cos(-4.0 * th - w);
    im += m1 * std::sin(-4.0 * th - w);
    // -(1/pi) r^-3 a'' e^{-i w}
    const double m2 = -1.0 / pi * std::pow(r, -3.0) * dda;
    re += m2 * std::cos(-w);
    im += m2 * std::sin(-w);
  }
  re /= static_cast<double>(grid.size());
  im /= static_cast<double>(grid.size());
  return re * re + im * im;
}

}  // namespace

TEST(LocalAr1, ConstantSeries) {
  const std::vector<double> v(50, 3.0);
  const auto fit = local_ar1_fit(v, 20, 10);
  EXPECT_DOUBLE_EQ(fit.a1_hat, 1.0);
  EXPECT_DOUBLE_EQ(fit.sigma_hat, 0.0);
  EXPECT_EQ(fit.window_first, 11);
  EXPECT_EQ(fit.window_last, 20);
}

TEST(LocalAr1, AlternatingSeries) {
  const auto v = alternating(40);
  const auto fit = local_ar1_fit(v, 8, 8);
  EXPECT_DOUBLE_EQ(fit.a1_hat, 16.0 / 20.0);
  EXPECT_NEAR(fit.sigma_hat, std::sqrt(7.2), 1e-14);
}

TEST(LocalAr1, ZeroSeriesFlagged) {
  const std::vector<double> v(30, 0.0);
  const auto fit = local_ar1_fit(v, 12, 8);
  EXPECT_TRUE(fit.zero_denominator);
  EXPECT_EQ(fit.a1_hat, 0.0);
}

TEST(LocalAr1, WindowChecks) {
  const std::vector<double> v(30, 1.0);
  EXPECT_THROW(local_ar1_fit(v, 7, 8), Error);
  EXPECT_THROW(local_ar1_fit(v, 30, 8), Error);
  EXPECT_THROW(local_ar1_fit(v, 10, 4), Error);
}

TEST(LocalAr1, MedianNearTruth) {
  const auto V = ar1(4000, 0.5, 1.0, 17);
  std::vector<double> col(V.data(), V.data() + V.rows());
  std::vector<double> a;
  for (long t = 200; t < 4000; t += 200) a.push_back(local_ar1_fit(col, t, 200).a1_hat);
  std::nth_element(a.begin(), a.begin() + a.size() / 2, a.end());
  EXPECT_NEAR(a[a.size() / 2], 0.5, 0.08);
}

TEST(Phi2, ZeroCoefficientGivesZero) {
  SeriesMatrix V(64, 1);
  for (long t = 0; t < 64; ++t) V(t, 0) = t % 2 ? 0.0 : 1.0;
  const std::vector<double> w{1.0};
  const auto r = phi2_hat(V, w, 16, 8);
  EXPECT_EQ(r.raw, 0.0);
  EXPECT_TRUE(r.floored);
  EXPECT_EQ(r.value, kPhiFloor);
}

TEST(Phi2, ConstantCoefficientOracle) {
  // Every window of the alternating series has a = 0.8, so phi(2) reduces to
  // 18 a^2 / (1 - a)^4.
  const auto v = alternating(96);
  const SeriesMatrix V = Eigen::Map<const Eigen::VectorXd>(v.data(), 96);
  const std::vector<double> w{1.0};
  const auto r = phi2_hat(V, w, 16, 8);
  EXPECT_NEAR(r.raw, 18.0 * 0.64 / std::pow(0.2, 4), 1e-8);
  EXPECT_NEAR(r.raw, 7200.0, 1e-8);
  EXPECT_FALSE(r.clamped);
}

TEST(Phi2, ZeroWeightColumnIsIgnored) {
  const auto V1 = ar1(400, 0.6, 1.0, 3);
  SeriesMatrix V2(400, 2);
  V2.col(0) = gaussian(400, 1, 99).col(0) * 50.0;
  V2.col(1) = V1.col(0);
  const std::vector<double> w1{1.0}, w2{0.0, 1.0};
  EXPECT_DOUBLE_EQ(phi2_hat(V1, w1, 52, 52).raw, phi2_hat(V2, w2, 52, 52).raw);
  const std::vector<double> none{0.0};
  EXPECT_THROW(phi2_hat(V1, none, 52, 52), Error);
}

TEST(Phi2, ScaleInvariant) {
  const auto V = ar1(500, 0.4, 1.0, 8);
  const std::vector<double> w{1.0};
  const double a = phi2_hat(V, w, 60, 60).raw;
  const double b = phi2_hat(7.5 * V, w, 60, 60).raw;
  EXPECT_NEAR(a, b, 1e-10 * a);
}

TEST(Phi2, ClampFlag) {
  const SeriesMatrix V = Eigen::VectorXd::LinSpaced(200, 1.0, 200.0);
  const std::vector<double> w{1.0};
  EXPECT_TRUE(phi2_hat(V, w, 25, 25).clamped);
}

TEST(D1, MatchesRealArithmetic) {
  const auto grid = default_frequency_grid();
  for (double u : {0.0, 0.1, 0.37, 0.8}) EXPECT_NEAR(d1_hat(u), d1_oracle(u, grid), 1e-10 * d1_oracle(u, grid) + 1e-14);
  EXPECT_NEAR(d1_hat(0.1), d1_oracle(0.1, grid), 1e-10);
}

TEST(D1, PeriodicAndPositive) {
  for (double u : {0.05, 0.2, 0.33, 0.45}) {
    EXPECT_NEAR(d1_hat(u), d1_hat(u + 0.5), 1e-9 * d1_hat(u));
    EXPECT_GT(d1_hat(u), 0.0);
  }
  const std::vector<double> empty;
  EXPECT_THROW(d1_hat(0.1, empty), Error);
}

TEST(D2, WhiteNoiseNearTwo) {
  const long T = 4000, n_T = default_block_length(T);
  double s = 0.0;
  for (int r = 0; r < 20; ++r) s += d2_hat(gaussian(T, 1, 300 + r), 2, n_T, kEpa, 0.1).value;
  EXPECT_NEAR(s / 20.0, 2.0, 0.3);
}

TEST(D2, ZeroSeriesFloored) {
  const SeriesMatrix V = SeriesMatrix::Zero(500, 2);
  const auto r = d2_hat(V, 1, default_block_length(500), kEpa, 0.3);
  EXPECT_TRUE(r.floored);
  EXPECT_EQ(r.value, kD2Floor);
}

TEST(B2, FormulaAndClipping) {
  EXPECT_NEAR(b2_hat(1.0, 1.0, 100000, kEpa).value, 0.16786, 5e-5);
  const double expect = std::pow(0.09 * 3.0, -0.2) * std::pow(1.2 * 0.5, 0.2) * std::pow(800.0, -0.2);
  EXPECT_NEAR(b2_hat(3.0, 0.5, 800, kEpa).value, expect, 1e-14);
  const auto lo = b2_hat(1e6, 1e-8, 400, kEpa);
  EXPECT_TRUE(lo.clipped);
  EXPECT_DOUBLE_EQ(lo.value, 8.0 / 400.0);
  const auto hi = b2_hat(1e-8, 1e6, 400, kEpa);
  EXPECT_TRUE(hi.clipped);
  EXPECT_EQ(hi.value, 1.0);
  EXPECT_THROW(b2_hat(0.0, 1.0, 100, kEpa), Error);
}

TEST(B2, BarAveragesBlocksAfterTheFirst) {
  const std::vector<double> sched{9.0, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2};
  EXPECT_NEAR(b2_bar(sched, 100, 10), 0.1 * 9 * 0.2, 1e-15);
  const std::vector<double> shorter{0.2, 0.2};
  EXPECT_THROW(b2_bar(shorter, 100, 10), Error);
}

TEST(B1, FormulaAndClipping) {
  EXPECT_NEAR(b1_hat(1.0, 1.0, 100000, kQs, kEpa).value, 0.06828, 5e-5);
  EXPECT_NEAR(b1_hat(1.0, 0.5, 200000, kQs, kEpa).value, b1_hat(1.0, 1.0, 100000, kQs, kEpa).value, 1e-15);
  const auto lo = b1_hat(1e30, 1.0, 100, kQs, kEpa);
  EXPECT_TRUE(lo.clipped);
  EXPECT_DOUBLE_EQ(lo.value, 0.01);
  const auto hi = b1_hat(1e-12, 0.01, 100, kQs, kEpa);
  EXPECT_TRUE(hi.clipped);
  EXPECT_EQ(hi.value, 1.0);
}

TEST(PlugIn, ProducesConsistentPlan) {
  const auto V = ar1(1000, 0.5, 1.0, 44);
  const auto r = plug_in_bandwidths(V, kQs, kEpa);
  const long n_T = default_block_length(1000);
  EXPECT_EQ(r.plan.block_length, n_T);
  EXPECT_EQ(r.plan.source, PlanSource::PlugIn);
  EXPECT_EQ(r.plan.b2.size(), BlockLayout::make(1000, n_T).count());
  EXPECT_EQ(r.diagnostics.b2_schedule.size(), r.plan.b2.size());
  EXPECT_DOUBLE_EQ(r.plan.b2_bar, b2_bar(r.diagnostics.b2_schedule, 1000, n_T));
  for (double b : r.plan.b2) EXPECT_DOUBLE_EQ(b, std::clamp(r.plan.b2_bar, 8.0 / 1000.0, 1.0));
  EXPECT_DOUBLE_EQ(r.plan.b1, b1_hat(r.diagnostics.phi2_hat, r.diagnostics.b2_bar, 1000, kQs, kEpa).value);
  EXPECT_GT(r.plan.b1, 0.0);
  EXPECT_LE(r.plan.b1, 1.0);
}

TEST(PlugIn, UnsupportedKernels) {
  const auto V = gaussian(200, 1, 1);
  const auto code = [&](const LagKernel& k1, const TimeKernel& k2) {
    try {
      plug_in_bandwidths(V, k1, k2);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code(LagKernel{LagKernelFamily::Bartlett}, kEpa), ErrorCode::UnsupportedKernel);
  EXPECT_EQ(code(LagKernel{LagKernelFamily::Truncated}, kEpa), ErrorCode::UnsupportedKernel);
  EXPECT_EQ(code(kQs, TimeKernel{TimeKernelFamily::Uniform}), ErrorCode::UnsupportedKernel);
  EXPECT_NO_THROW(plug_in_bandwidths(V, LagKernel{LagKernelFamily::Parzen}, kEpa));
  EXPECT_THROW(plug_in_bandwidths(gaussian(20, 1, 1), kQs, kEpa), Error);
}

TEST(PlugIn, ZeroSeriesIsFlaggedNotThrown) {
  const SeriesMatrix V = SeriesMatrix::Zero(300, 1);
  const auto est = dk_hac_auto(V, kQs, kEpa, 0);
  EXPECT_EQ(est.J(0, 0), 0.0);
  const auto& f = est.diagnostics->flags;
  EXPECT_NE(std::find(f.begin(), f.end(), "PhiFloored"), f.end());
  EXPECT_NE(std::find(f.begin(), f.end(), "ZeroDenominator"), f.end());
}
