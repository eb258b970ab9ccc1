#include <gtest/gtest.h>

#include <cmath>

#include "mcf/special.hpp"

using namespace mcf;

TEST(Eigenfunction, CoefficientsForKFour) {
  const EigenfunctionK ef(4);
  const auto& c = ef.coeffs();
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c[0], Rational(1));
  EXPECT_EQ(c[1], Rational(4, 3));
  EXPECT_EQ(c[2], Rational(6, 15));
  EXPECT_EQ(c[3], Rational(4, 105));
  EXPECT_EQ(c[4], Rational(1, 945));
  Rational sum = 0;
  for (const auto& v : c) sum += v;
  EXPECT_EQ(sum, Rational(2620, 945));
}

TEST(Eigenfunction, ValueAtOne) {
  const EigenfunctionK ef(4);
  EXPECT_NEAR(ef(1.0), 2620.0 / 945.0, 1e-14);
  EXPECT_THROW(ef(0.0), Error);
  EXPECT_THROW(ef(-1.0), Error);
}

TEST(Eigenfunction, Limits) {
  for (int k = 4; k <= 8; ++k) {
    const EigenfunctionK ef(k);
    EXPECT_NEAR(1e-4 * 1e-4 * ef(1e-4), 1.0, 1e-6);
    const double y = 1e5;
    const double df = static_cast<double>(double_factorial(2 * k + 1));
    EXPECT_NEAR(ef(y) / std::pow(y, 2 * k - 2) * df, 1.0, 1e-6);
  }
}

TEST(Eigenfunction, ExactResidualVanishes) {
  for (int k = 1; k <= 15; ++k) EXPECT_TRUE(EigenfunctionK(k).eigen_residual().is_zero()) << k;
}

TEST(Eigenfunction, NumericEigenRelation) {
  for (int k : {4, 5, 6}) {
    const EigenfunctionK ef(k);
    for (double y = 0.1; y <= 10.0; y *= 1.07) {
      const Jet j = ef.eval(y);
      EXPECT_NEAR(apply_L(j, y) / ((k - 1.5) * j.v), 1.0, 1e-10) << k << " " << y;
    }
  }
}

TEST(Eigenfunction, DerivativesMatchFiniteDifferences) {
  const EigenfunctionK ef(5);
  for (double y : {0.3, 1.0, 4.0}) {
    const double h = 1e-5 * y;
    const Jet j = ef.eval(y);
    EXPECT_NEAR((ef(y + h) - ef(y - h)) / (2 * h) / j.d1, 1.0, 1e-7);
    EXPECT_NEAR((ef.eval(y + h).d1 - ef.eval(y - h).d1) / (2 * h) / j.d2, 1.0, 1e-7);
  }
}

TEST(ChiSeries, Examples) {
  for (double k : {1.0, 4.0, 7.5}) EXPECT_EQ(chi_k_series(k, 0.0, 30), 1.0);
  EXPECT_NEAR(chi_k_series(4.0, 1.0, 30), 2620.0 / 945.0, 1e-14);
  EXPECT_NEAR(chi_k_series(1.0, 2.0, 30), 7.0 / 3.0, 1e-15);
  const EigenfunctionK ef(6);
  for (double y : {0.2, 1.3, 3.0}) EXPECT_NEAR(chi_k_series(6.0, y, 40) / (y * y * ef(y)), 1.0, 1e-13);
}

TEST(ApplyL, ZeroAndPowers) {
  EXPECT_EQ(apply_L({0.0, 0.0, 0.0}, 0.7), 0.0);
  EXPECT_THROW(apply_L({1.0, 0.0, 0.0}, 0.0), Error);
  // L[y^r] = 1/2 (r+2)(r+3) y^{r-2} + 1/2 (r-1) y^r
  for (double r : {-3.0, -2.5, 0.0, 2.0, 9.0})
    for (double y : {0.5, 2.0}) {
      const Jet j{std::pow(y, r), r * std::pow(y, r - 1), r * (r - 1) * std::pow(y, r - 2)};
      const double want = 0.5 * (r + 2) * (r + 3) * std::pow(y, r - 2) + 0.5 * (r - 1) * std::pow(y, r);
      EXPECT_NEAR(apply_L(j, y), want, 1e-12 * (1 + std::abs(want)));
    }
}

TEST(PowerAction, CharacteristicExponents) {
  for (int k = 4; k <= 8; ++k) {
    const auto c = derive_constants({k, 1.0, 2.5, 2.25});
    EXPECT_EQ(L_power_action(4.0 * k - 5.0, c).b, 0.0);
    EXPECT_EQ(L_power_action(-3.0, c).a, 0.0);
  }
}

TEST(PowerAction, AgreesWithApplyL) {
  const auto c = derive_constants({});
  const double g6 = 6.0 * c.gamma;
  for (double r : {-5.0, -2.4, 1.0, 9.0}) {
    const auto pa = L_power_action(r, c);
    const double y = 1.7;
    const Jet j{std::pow(y, r), r * std::pow(y, r - 1), r * (r - 1) * std::pow(y, r - 2)};
    const double lhs = g6 * j.v - apply_L(j, y);
    EXPECT_NEAR(lhs, pa.a * std::pow(y, r - 2) + pa.b * std::pow(y, r), 1e-12 * (1 + std::abs(lhs)));
  }
}

TEST(PowerAction, NegativePowerIsSupersolution) {
  // L[y^{-p}] < 0 for p in (2,3)
  for (double p : {2.1, 2.5, 2.9}) {
    const double r = -p;
    const double a = 0.5 * (r + 2) * (r + 3), b = 0.5 * (r - 1);
    EXPECT_LT(a, 0.0);
    EXPECT_LT(b, 0.0);
    for (double y : {1e-3, 0.5, 1.0, 30.0}) {
      const Jet j{std::pow(y, r), r * std::pow(y, r - 1), r * (r - 1) * std::pow(y, r - 2)};
      EXPECT_LT(apply_L(j, y), 0.0);
    }
  }
}

TEST(CFunction, ReconstructsEigenfunction) {
  for (int k : {4, 6}) {
    const EigenfunctionK ef(k);
    const double df = static_cast<double>(double_factorial(2 * k + 1));
    for (double y : {1.0, 2.5, 10.0}) {
      const double rebuilt = std::pow(y, 2 * k - 2) / df + c_of_y(k, y) * std::pow(y, 2 * k - 4);
      EXPECT_NEAR(rebuilt / ef(y), 1.0, 1e-13);
    }
  }
}

TEST(GParticular, SolvesForcingExactly) {
  for (int k : {4, 5}) {
    const auto P = g_particular(k);
    const Rational g6(2 * k - 3);
    LaurentPoly lhs = P.scaled(g6) - apply_L_exact(P);
    LaurentPoly want;
    want.add(4 * k - 7, 1);
    EXPECT_TRUE((lhs - want).is_zero()) << k;
  }
}

TEST(GSolve, Asymptotics) {
  const auto g = solve_g(4, 1e-3, 100.0, 4000);
  EXPECT_LT(g.residual_norm, 1e-6);
  EXPECT_NEAR(std::pow(1e-2, 5) * g(1e-2), -1.0 / 3.0, 0.02 / 3.0);
  EXPECT_NEAR(g(50.0) / std::pow(50.0, 9), 1.0, 0.02);
}

TEST(GSolve, StableUnderHalvingYmin) {
  const auto a = solve_g(4, 1e-3, 100.0, 4000);
  const auto b = solve_g(4, 5e-4, 100.0, 4300);
  EXPECT_NEAR(a(1e-2) / b(1e-2), 1.0, 0.02);
  EXPECT_NEAR(a(1.0) / b(1.0), 1.0, 0.02);
}

TEST(GSolve, OperatorResidualSmall) {
  const auto g = solve_g_extrapolated(4, 1e-3, 100.0, 4000);
  // near y = 1 the two operator terms are 1e5 times the forcing, so the residual is measured
  // against the size of the terms
  for (double y : {1e-2, 0.3, 1.0, 3.0, 20.0}) {
    const Jet j = g.eval(y);
    const double scale = std::abs(5.0 * j.v) + std::abs(apply_L(j, y)) + std::pow(y, -7) + std::pow(y, 9);
    EXPECT_LT(std::abs(g.operator_residual(y)) / scale, 1e-5) << y;
  }
}

TEST(GSolve, RejectsBadArguments) {
  EXPECT_THROW(solve_g(4, 2.0, 100.0, 4000), Error);
  EXPECT_THROW(solve_g(4, 1e-3, 100.0, 10), Error);
}
