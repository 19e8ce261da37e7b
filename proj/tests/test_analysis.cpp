#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "wentropy/analysis.hpp"

using namespace wentropy;

namespace {

std::vector<double> grid(double dt, double t_max) {
  std::vector<double> t;
  for (std::size_t k = 0; static_cast<double>(k) * dt <= t_max + 1e-12; ++k) t.push_back(static_cast<double>(k) * dt);
  return t;
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1 - p) * std::log(1 - p);
}

}  // namespace

TEST(Analysis, LinearFitRecoversExactLine) {
  std::vector<double> x, y;
  for (int i = 0; i < 50; ++i) {
    x.push_back(0.1 * i + std::sin(i));
    y.push_back(0.7 * x.back() + 1.3);
  }
  const auto f = fit_linear(x, y);
  EXPECT_NEAR(f.k, 0.7, 1e-12);
  EXPECT_NEAR(f.b, 1.3, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_EQ(f.n_samples, 50u);
}

TEST(Analysis, LinearFitIsAffineEquivariant) {
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(std::cos(0.3 * i));
    y.push_back(2.0 * x.back() + 0.4 * std::sin(1.7 * i));
  }
  const auto f = fit_linear(x, y);
  std::vector<double> scaled(y);
  for (auto& v : scaled) v *= 3.5;
  const auto g = fit_linear(x, scaled);
  EXPECT_NEAR(g.k, 3.5 * f.k, 1e-12);
  EXPECT_NEAR(g.b, 3.5 * f.b, 1e-12);
  EXPECT_NEAR(g.r2, f.r2, 1e-12);
  EXPECT_LT(f.r2, 1.0);
}

TEST(Analysis, RSquaredIsOneMinusSseOverSst) {
  const std::vector<double> y{1, 2, 4, 3}, fit{1.5, 2, 3, 3.5};
  // SST = 5, SSE = 0.25 + 0 + 1 + 0.25
  EXPECT_DOUBLE_EQ(r_squared(y, fit), 1.0 - 1.5 / 5.0);
}

TEST(Analysis, DegenerateRegressor) {
  const std::vector<double> x(10, 2.0), y{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_THROW(fit_linear(x, y), Error);
  const std::vector<double> two{1, 2};
  EXPECT_THROW(fit_linear(two, two), Error);
}

TEST(Analysis, IncrementSlopeOfLinearPair) {
  std::vector<double> x, y;
  for (int i = 0; i < 30; ++i) {
    x.push_back(std::sin(0.2 * i));
    y.push_back(0.45 * x.back() + 6.0);
  }
  EXPECT_NEAR(increment_slope(x, y), 0.45, 1e-12);
}

TEST(Analysis, SaturationRecoversSyntheticParameters) {
  const auto t = grid(0.1, 40.0);
  std::vector<double> s;
  for (double v : t) s.push_back(2.0 * (1.0 - std::exp(-0.5 * v)));
  SaturationOptions opt;
  opt.plateau_window = false;
  const auto f = fit_saturation(t, s, opt);
  EXPECT_NEAR(f.A, 2.0, 1e-6);
  EXPECT_NEAR(f.omega, 0.5, 1e-6);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_GT(f.A_init, 0.0);
  EXPECT_GT(f.omega_init, 0.0);
}

TEST(Analysis, SaturationStationarityAndGradients) {
  const auto t = grid(0.1, 30.0);
  std::vector<double> s;
  for (double v : t) s.push_back(1.5 * (1.0 - std::exp(-0.8 * v)) + 0.05 * std::sin(3.1 * v));
  SaturationOptions opt;
  opt.plateau_window = false;
  const auto f = fit_saturation(t, s, opt);
  EXPECT_LT(f.stationarity, 1e-8);
  const double h = 1e-6;
  for (double v : {0.5, 3.0, 12.0}) {
    const auto g = SaturationModel::gradient(v, f.A, f.omega);
    const double dA = (SaturationModel::value(v, f.A + h, f.omega) - SaturationModel::value(v, f.A - h, f.omega)) / (2 * h);
    const double dW = (SaturationModel::value(v, f.A, f.omega + h) - SaturationModel::value(v, f.A, f.omega - h)) / (2 * h);
    EXPECT_NEAR(g[0], dA, 1e-5 * std::abs(dA));
    EXPECT_NEAR(g[1], dW, 1e-5 * std::abs(dW));
  }
}

TEST(Analysis, SaturationFailureCarriesInitialValues) {
  const auto t = grid(0.1, 5.0);
  std::vector<double> s(t.size(), -1.0);
  try {
    fit_saturation(t, s);
    FAIL();
  } catch (const FitFailure& e) {
    EXPECT_EQ(e.A_init, -1.0);
    EXPECT_NE(std::string(e.what()).find("initial A"), std::string::npos);
  }
}

TEST(Analysis, PlateauWindowStopsAtFirstPlateau) {
  const auto t = grid(0.1, 100.0);
  std::vector<double> s;
  for (double v : t) s.push_back(1.0 - std::exp(-v));
  const auto end = plateau_window_end(s);
  EXPECT_LT(end, s.size());
  EXPECT_GT(end, 20u);
  const std::vector<double> rising{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  EXPECT_EQ(plateau_window_end(rising), rising.size());
}

TEST(Analysis, ConstantTraceNeverArms) {
  const auto t = grid(0.1, 10.0);
  const std::vector<double> s(t.size(), 3.0);
  const auto p = detect_period(t, s);
  EXPECT_EQ(p.status, PeriodStatus::not_applicable);
  EXPECT_FALSE(p.found());
}

TEST(Analysis, TwoLevelOracle) {
  // S_f = h(cos^2 t); first return below 0.2 solves h(cos^2 t) = 0.2 past t = pi/4
  const double dt = 0.1;
  const auto t = grid(dt, 10.0);
  std::vector<double> s;
  for (double v : t) s.push_back(binary_entropy(std::pow(std::cos(v), 2)));
  double lo = std::numbers::pi / 4, hi = std::numbers::pi / 2;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (binary_entropy(std::pow(std::cos(mid), 2)) > 0.2 ? lo : hi) = mid;
  }
  const auto p = detect_period(t, s, 0.2);
  ASSERT_TRUE(p.found());
  EXPECT_LE(std::abs(p.T - hi), dt);
  EXPECT_LT(std::abs(p.epsilon_at_T), 0.2);
  EXPECT_GT(p.T, p.armed_at);
}

TEST(Analysis, HalfStepShiftMovesPeriodByAtMostDt) {
  const double dt = 0.1;
  auto trace = [](double v) { return 1.0 - std::cos(0.9 * v) + 0.3 * std::sin(2.3 * v) * std::sin(0.2 * v); };
  std::vector<double> t0, s0, t1, s1;
  for (int k = 0; k < 400; ++k) {
    t0.push_back(k * dt);
    s0.push_back(trace(k * dt));
    t1.push_back(k * dt + dt / 2);
    s1.push_back(trace(k * dt + dt / 2));
  }
  const auto a = detect_period(t0, s0), b = detect_period(t1, s1);
  ASSERT_TRUE(a.found());
  ASSERT_TRUE(b.found());
  EXPECT_LE(std::abs(a.T - b.T), dt + 1e-12);
}

TEST(Analysis, NotFoundReportsHorizon) {
  const auto t = grid(0.5, 50.0);
  std::vector<double> s;
  for (double v : t) s.push_back(std::min(v, 1.0));
  const auto p = detect_period(t, s);
  EXPECT_EQ(p.status, PeriodStatus::not_found);
  EXPECT_DOUBLE_EQ(p.horizon, 50.0);
  EXPECT_DOUBLE_EQ(p.armed_at, 0.5);
}

TEST(Analysis, SignedEpsilonIsReported) {
  const std::vector<double> t{0, 1, 2, 3}, s{1.0, 1.5, 0.9, 1.0};
  const auto p = detect_period(t, s, 0.2);
  ASSERT_TRUE(p.found());
  EXPECT_DOUBLE_EQ(p.T, 2.0);
  EXPECT_NEAR(p.epsilon_at_T, -0.1, 1e-15);
}

TEST(Analysis, PeriodOrdering) {
  PeriodResult found_short, found_long, missing, never;
  found_short.status = found_long.status = PeriodStatus::found;
  found_short.T = 2.0;
  found_long.T = 50.0;
  missing.status = PeriodStatus::not_found;
  missing.horizon = 100.0;
  EXPECT_TRUE(period_less(found_short, found_long));
  EXPECT_FALSE(period_less(found_long, found_short));
  EXPECT_TRUE(period_less(found_long, missing));
  EXPECT_FALSE(period_less(missing, found_short));
  EXPECT_FALSE(period_less(never, found_short));
}
