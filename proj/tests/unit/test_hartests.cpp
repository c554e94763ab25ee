#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace dkhac;
using testing_support::gaussian;

namespace {

// Uncentred second moment: a simple, exactly predictable LRV.
LrvFunction second_moment() {
  return [](const SeriesMatrix& V) {
    LrvEstimate e;
    e.J = V.transpose() * V / static_cast<double>(V.rows());
    e.method = "second-moment";
    return e;
  };
}

Eigen::MatrixXd design(const Eigen::VectorXd& x) {
  Eigen::MatrixXd X(x.size(), 2);
  X.col(0).setOnes();
  X.col(1) = x;
  return X;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(NormalQuantiles, KnownValues) {
  EXPECT_NEAR(normal_critical_value(0.05), 1.959963984540054, 1e-9);
  EXPECT_NEAR(normal_critical_value(0.10), 1.644853626951472, 1e-9);
  EXPECT_NEAR(normal_cdf(normal_quantile(0.3)), 0.3, 1e-12);
}

TEST(Ols, ExactFit) {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(20, 0.0, 1.0);
  x = x.array().square();
  const Eigen::VectorXd y = 1.5 - 2.0 * x.array();
  const auto fit = ols_fit(y, design(x));
  EXPECT_NEAR(fit.beta_hat(0), 1.5, 1e-12);
  EXPECT_NEAR(fit.beta_hat(1), -2.0, 1e-12);
  EXPECT_LT(fit.residuals.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ols, InterceptOnlyIsMean) {
  const Eigen::VectorXd y = gaussian(30, 1, 4).col(0);
  const auto fit = ols_fit(y, Eigen::MatrixXd::Ones(30, 1));
  EXPECT_NEAR(fit.beta_hat(0), y.mean(), 1e-14);
}

TEST(Ols, SmallHandComputedFit) {
  Eigen::VectorXd x(5), y(5);
  x << 1, 2, 3, 4, 5;
  y << 2, 4, 5, 4, 5;
  const auto fit = ols_fit(y, design(x));
  EXPECT_NEAR(fit.beta_hat(0), 2.2, 1e-13);
  EXPECT_NEAR(fit.beta_hat(1), 0.6, 1e-13);
  EXPECT_LT((fit.X.transpose() * fit.residuals).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((fit.scores.colwise().sum()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ols, SingularDesign) {
  Eigen::MatrixXd X(10, 2);
  X.col(0).setOnes();
  X.col(1).setConstant(3.0);
  EXPECT_EQ(code_of([&] { ols_fit(Eigen::VectorXd::Ones(10), X); }), ErrorCode::SingularDesign);
}

TEST(TTest, StatisticAndDecision) {
  const auto V = gaussian(100, 2, 9);
  const Eigen::VectorXd y = 1.0 + 0.5 * V.col(0).array() + V.col(1).array();
  const auto fit = ols_fit(y, design(V.col(0)));
  const auto lrv = second_moment()(fit.scores);
  const auto at_truth = t_test(fit, 1, fit.beta_hat(1), lrv);
  EXPECT_EQ(at_truth.statistic, 0.0);
  EXPECT_FALSE(at_truth.reject);
  // Oracle: sqrt(T) (b - b0) / sqrt([Q^-1 J Q^-1]_{11}).
  const Eigen::MatrixXd Q = fit.X.transpose() * fit.X / 100.0;
  const Eigen::MatrixXd S = Q.inverse() * lrv.J * Q.inverse();
  const auto r = t_test(fit, 1, 0.0, lrv);
  EXPECT_NEAR(r.statistic, std::sqrt(100.0) * fit.beta_hat(1) / std::sqrt(S(1, 1)), 1e-10);
  EXPECT_TRUE(detail::decide(2.5, CriticalValueSource::normal(), 0.05, nullptr).reject);
  EXPECT_FALSE(detail::decide(-1.9, CriticalValueSource::normal(), 0.05, nullptr).reject);
  EXPECT_THROW(t_test(fit, 2, 0.0, lrv), Error);
}

TEST(TTest, ScaleInvariant) {
  const auto V = gaussian(200, 2, 19);
  const Eigen::VectorXd y = 0.2 * V.col(0).array() + V.col(1).array();
  const auto f1 = ols_fit(y, design(V.col(0)));
  const auto f2 = ols_fit(4.0 * y, design(V.col(0)));
  const auto w = detail::bandwidth_weights(2);
  for (auto e : {Estimator::NeweyWest, Estimator::NeweyWestPrewhite, Estimator::Andrews, Estimator::Kvb}) {
    const double t1 = t_test(f1, 1, 0.1, make_lrv(e, 2, w)(f1.scores)).statistic;
    const double t2 = t_test(f2, 1, 0.4, make_lrv(e, 2, w)(f2.scores)).statistic;
    EXPECT_NEAR(t1, t2, 1e-9 * std::abs(t1)) << to_string(e);
  }
  const auto plan = BandwidthPlan::fixed(0.1, 0.5, 200, default_block_length(200));
  const LagKernel qs;
  const TimeKernel epa;
  const double t1 = t_test(f1, 1, 0.1, dk_hac(f1.scores, qs, epa, plan, true, 2)).statistic;
  const double t2 = t_test(f2, 1, 0.4, dk_hac(f2.scores, qs, epa, plan, true, 2)).statistic;
  EXPECT_NEAR(t1, t2, 1e-9 * std::abs(t1));
}

TEST(TTest, ZeroVarianceIsReported) {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(40, 1.0, 2.0);
  const Eigen::VectorXd y = 3.0 + x.array();
  const auto fit = ols_fit(y, design(x));
  LrvEstimate zero;
  zero.J = Eigen::MatrixXd::Zero(2, 2);
  const auto c = code_of([&] { t_test(fit, 1, 1.0, zero); });
  EXPECT_TRUE(c == ErrorCode::UndefinedStatistic || c == ErrorCode::NonPositiveVariance);
}

TEST(Dm, AntisymmetricAndZero) {
  const auto A = gaussian(120, 2, 5);
  std::vector<double> l1(120), l2(120);
  for (long t = 0; t < 120; ++t) {
    l1[t] = A(t, 0) * A(t, 0);
    l2[t] = A(t, 1) * A(t, 1) + 0.2;
  }
  const auto lrv = make_lrv(Estimator::NeweyWest);
  EXPECT_NEAR(dm_test(l1, l2, lrv).statistic, -dm_test(l2, l1, lrv).statistic, 1e-12);
  const auto same = dm_test(l1, l1, lrv);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_FALSE(same.reject);
  EXPECT_EQ(same.flags, std::vector<std::string>{"ZeroSeries"});
  const std::vector<double> shorter(10, 1.0);
  EXPECT_THROW(dm_test(shorter, shorter, lrv), Error);
}

TEST(Dm, MatchesLocationTestOnDifferences) {
  const auto A = gaussian(80, 2, 6);
  std::vector<double> l1(80), l2(80), d(80);
  for (long t = 0; t < 80; ++t) {
    l1[t] = A(t, 0);
    l2[t] = A(t, 1) + 0.3;
    d[t] = l2[t] - l1[t];
  }
  const auto lrv = second_moment();
  Eigen::Map<Eigen::VectorXd> v(d.data(), 80);
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  EXPECT_NEAR(dm_test(l1, l2, lrv).statistic, std::sqrt(80.0) * mean / std::sqrt(var), 1e-12);
}

TEST(Gr, ConstantLossesGiveZero) {
  const std::vector<double> in(50, 2.0), out(50, 2.0);
  const auto r = gr_test(in, out, make_lrv(Estimator::NeweyWest));
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_FALSE(r.reject);
}

TEST(Gr, VarianceIncludesInSampleTerm) {
  const auto A = gaussian(150, 1, 8);
  std::vector<double> in(A.data(), A.data() + 60), out(A.data() + 60, A.data() + 150);
  for (auto& v : out) v += 0.5;
  const auto lrv = second_moment();
  const double mi = Eigen::Map<Eigen::VectorXd>(in.data(), 60).mean();
  Eigen::VectorXd sl(90);
  for (int i = 0; i < 90; ++i) sl(i) = out[i] - mi;
  const double ms = sl.mean();
  const double j_out = (sl.array() - ms).square().mean();
  const double j_in = (Eigen::Map<Eigen::VectorXd>(in.data(), 60).array() - mi).square().mean();
  const double expect = std::sqrt(90.0) * ms / std::sqrt(j_out + 90.0 / 60.0 * j_in);
  EXPECT_NEAR(gr_test(in, out, lrv).statistic, expect, 1e-12);

  const std::vector<double> few(in.begin(), in.begin() + 10);
  const auto r = gr_test(few, out, lrv);
  EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "InSampleTermOmitted"), r.flags.end());
}

TEST(Gmm, EfficientWeighting) {
  const SeriesMatrix M = gaussian(300, 3, 4) + 0.3 * gaussian(300, 3, 5);
  Eigen::MatrixXd L(3, 2);
  L << 1.0, 0.2, -0.5, 1.0, 0.3, 0.7;
  const auto lrv = second_moment();
  const Eigen::MatrixXd J = lrv(M).J;
  const Eigen::MatrixXd S = gmm_sandwich(M, L, J.inverse(), lrv);
  const Eigen::MatrixXd expect = (L.transpose() * J.inverse() * L).inverse();
  EXPECT_LT((S - expect).cwiseAbs().maxCoeff(), 1e-10 * expect.cwiseAbs().maxCoeff());
}

TEST(Gmm, JustIdentified) {
  const auto M = gaussian(200, 2, 14);
  Eigen::MatrixXd L(2, 2);
  L << 2.0, 0.5, -1.0, 1.0;
  const auto lrv = second_moment();
  const Eigen::MatrixXd J = lrv(M).J;
  Eigen::MatrixXd W(2, 2);
  W << 3.0, 0.4, 0.4, 1.0;
  const Eigen::MatrixXd S = gmm_sandwich(M, L, W, lrv);
  const Eigen::MatrixXd expect = L.inverse() * J * L.inverse().transpose();
  EXPECT_LT((S - expect).cwiseAbs().maxCoeff(), 1e-10 * expect.cwiseAbs().maxCoeff());
}

TEST(Gmm, ScalarOracle) {
  // One moment, one parameter: S = J / L^2.
  SeriesMatrix M(6, 1);
  M << 1, -2, 0.5, 1.5, -1, 0;
  Eigen::MatrixXd L(1, 1), W(1, 1);
  L << 2.0;
  W << 5.0;
  const double J = (1 + 4 + 0.25 + 2.25 + 1) / 6.0;
  EXPECT_NEAR(gmm_sandwich(M, L, W, second_moment())(0, 0), J / 4.0, 1e-15);
}

TEST(Gmm, Errors) {
  const auto M = gaussian(50, 2, 1);
  const Eigen::MatrixXd L = Eigen::MatrixXd::Zero(2, 1);
  EXPECT_EQ(code_of([&] { gmm_sandwich(M, L, Eigen::MatrixXd::Identity(2, 2), second_moment()); }),
            ErrorCode::SingularBread);
  EXPECT_EQ(code_of([&] {
              gmm_sandwich(M, Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Identity(2, 2), second_moment());
            }),
            ErrorCode::InvalidArgument);
}

TEST(Iv, InstrumentsEqualRegressorsIsOls) {
  const auto V = gaussian(150, 2, 23);
  const Eigen::VectorXd y = 1.0 + 0.4 * V.col(0).array() + V.col(1).array();
  const auto X = design(V.col(0));
  const auto lrv = second_moment();
  const auto fit = ols_fit(y, X);
  const Eigen::MatrixXd ols = ols_sandwich(fit, lrv(fit.scores).J);
  EXPECT_LT((iv_sandwich(y, X, X, lrv) - ols).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Iv, ExactFitAndOracle) {
  SeriesMatrix X(6, 1), Z(6, 1);
  X << 1, 2, 3, 4, 5, 6;
  Z << 1, 1, 2, 2, 3, 3;
  const Eigen::VectorXd y = 2.0 * X.col(0);
  EXPECT_LT(iv_sandwich(y, X, Z, second_moment()).cwiseAbs().maxCoeff(), 1e-20);

  Eigen::VectorXd y2(6);
  y2 << 1, 3, 2, 5, 4, 6;
  // beta = z'y / z'x = 42 / 42 = 1; e = y - x; scores z e.
  const double beta = Z.col(0).dot(y2) / Z.col(0).dot(X.col(0));
  const Eigen::VectorXd e = y2 - beta * X.col(0);
  const double J = (Z.col(0).array() * e.array()).square().mean();
  const double qzx = Z.col(0).dot(X.col(0)) / 6.0;
  EXPECT_NEAR(iv_sandwich(y2, X, Z, second_moment())(0, 0), J / (qzx * qzx), 1e-13);
}

TEST(Iv, SingularInstruments) {
  const auto X = gaussian(30, 2, 3);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Ones(30, 2);
  EXPECT_EQ(code_of([&] { iv_sandwich(X.col(0), X, Z, second_moment()); }), ErrorCode::SingularZX);
}

TEST(Estimators, NamesRoundTrip) {
  for (auto e : all_estimators()) EXPECT_EQ(parse_estimator(to_string(e)), e);
  EXPECT_THROW(parse_estimator("white"), Error);
  EXPECT_EQ(table_label(Estimator::NeweyWestPrewhite), "Newey-West, prewhite");
}
