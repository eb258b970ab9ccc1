#include <gtest/gtest.h>

#include <cmath>

#include "mcf/alencar.hpp"

using namespace mcf;

namespace {

const AlencarProfile& profile() {
  static const AlencarProfile pr = shoot_alencar(50.0, 1e-12);
  return pr;
}

double msurface_residual(const Jet& w, double z) {
  return w.d2 / (1.0 + w.d1 * w.d1) + 3.0 * w.d1 / z - 3.0 / w.v;
}

}  // namespace

TEST(AlencarSeries, Coefficients) {
  // W = 1 + a z^2 + b z^4: constant terms give 8a = 3, z^2 terms give 24b = 8a^3 - 3a
  const double a = 0.375;
  EXPECT_EQ(8.0 * a, 3.0);
  const double b = (8.0 * a * a * a - 3.0 * a) / 24.0;
  EXPECT_DOUBLE_EQ(b, -15.0 / 512.0);
  const double z = 1e-2;
  const Jet s = AlencarProfile::series(z);
  EXPECT_DOUBLE_EQ(s.v, 1.0 + a * z * z + b * z * z * z * z);
  // the truncated series solves the ODE up to O(z^4)
  EXPECT_LT(std::abs(msurface_residual(s, z)), 1e-6);
}

TEST(AlencarProfile, StartAndShape) {
  const auto& pr = profile();
  const Jet w0 = pr.eval(0.0);
  EXPECT_EQ(w0.v, 1.0);
  EXPECT_EQ(w0.d1, 0.0);
  EXPECT_GE(pr.z_max, 50.0);
  for (std::size_t i = 0; i < pr.z.size(); ++i) {
    EXPECT_GT(pr.W2[i], 0.0) << pr.z[i];
    const double ph = Phi(pr, pr.z[i]);
    EXPECT_GT(ph, 0.0);
    EXPECT_LE(ph, 1.0);
  }
  EXPECT_THROW(pr.eval(-1.0), Error);
}

TEST(AlencarProfile, OdeResidualSmall) {
  const auto& pr = profile();
  for (double z : {0.01, 0.5, 1.0, 3.0, 10.0, 40.0}) EXPECT_LT(std::abs(pr.ode_residual(z)), 1e-8) << z;
}

TEST(AlencarProfile, ApproachesCone) {
  const auto& pr = profile();
  EXPECT_GT(pr.Gamma2, 0.0);
  const double e40 = pr.excess(40.0).v * 1600.0, e50 = pr.excess(50.0).v * 2500.0;
  EXPECT_NEAR(e40 / e50, 1.0, 0.05);
  EXPECT_NEAR(e50 / pr.Gamma2, 1.0, 0.05);
}

TEST(AlencarProfile, LogLogSlope) {
  const auto& pr = profile();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (double z = 25.0; z <= 50.0; z += 0.5, ++n) {
    const double lx = std::log(z), ly = std::log(std::abs(pr.excess(z).v));
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, -2.0, 0.05);
}

TEST(Rescale, IdentityAndErrors) {
  const auto& pr = profile();
  for (double z : {0.0, 0.7, 12.0, 80.0}) {
    const Jet a = rescale_W(pr, 1.0, z), b = pr.eval(z);
    EXPECT_EQ(a.v, b.v);
    EXPECT_EQ(a.d1, b.d1);
    EXPECT_EQ(a.d2, b.d2);
  }
  EXPECT_THROW(rescale_W(pr, 0.0, 1.0), Error);
  EXPECT_THROW(rescale_W(pr, -2.0, 1.0), Error);
}

TEST(Rescale, MonotoneInScale) {
  const auto& pr = profile();
  for (double z : {0.0, 0.5, 2.0, 10.0, 30.0})
    EXPECT_LT(rescale_W(pr, 0.8, z).v, rescale_W(pr, 1.25, z).v) << z;
}

TEST(Rescale, ScaledProfileSolvesSameEquation) {
  const auto& pr = profile();
  for (double K : {0.5, 2.0})
    for (double z : {0.3, 1.0, 5.0, 20.0}) {
      const double r = msurface_residual(rescale_W(pr, K, z), z);
      EXPECT_NEAR(r, pr.ode_residual(z / K) / K, 1e-10);
      EXPECT_LT(std::abs(r), 1e-8);
    }
}

TEST(Fit, NormalizedCoefficient) {
  const auto& pr = profile();
  EXPECT_NEAR(pr.Kstar, std::pow(pr.Gamma2, -1.0 / 3.0), 1e-12);
  // z^2 (W_{K*} - z) = Gamma2 K*^3 + Gamma3 K*^4 / z + ...; the z^{-1} correction is removed
  const double K = pr.Kstar, z = pr.z_max;
  const double e = normalized_excess(pr, 1.0, z).v * z * z;
  EXPECT_NEAR(e - pr.Gamma3 * std::pow(K, 4) / z - pr.Gamma5 * std::pow(K, 6) / (z * z * z), 1.0, 1e-3);
  EXPECT_NEAR(pr.Gamma2 * K * K * K, 1.0, 1e-12);
}

TEST(Fit, StableUnderLongerShot) {
  const auto& a = profile();
  const auto b = shoot_alencar(100.0, 1e-12);
  EXPECT_NEAR(b.Gamma2 / a.Gamma2, 1.0, 1e-3);
}

TEST(Phase, FixedPointEigenvalues) {
  const auto cone = eigenvalues2(phase_system({1.0, 1.0}).jac);
  EXPECT_NEAR(cone[0].real(), -4.0, 1e-12);
  EXPECT_NEAR(cone[1].real(), -3.0, 1e-12);
  const auto start = eigenvalues2(phase_system({0.0, 0.0}).jac);
  EXPECT_NEAR(start[0].real(), -3.0, 1e-12);
  EXPECT_NEAR(start[1].real(), 1.0, 1e-12);
  for (const auto& e : {cone[0], cone[1], start[0], start[1]}) EXPECT_EQ(e.imag(), 0.0);
  const auto v = phase_system({1.0, 1.0});
  EXPECT_EQ(v.dP, 0.0);
  EXPECT_EQ(v.dQ, 0.0);
}

TEST(Phase, JacobianMatchesFiniteDifferences) {
  const PhasePoint p{0.4, 0.7};
  const auto v = phase_system(p);
  const double h = 1e-6;
  const auto vp = phase_system({p.P + h, p.Q}), vm = phase_system({p.P - h, p.Q});
  const auto wp = phase_system({p.P, p.Q + h}), wm = phase_system({p.P, p.Q - h});
  EXPECT_NEAR((vp.dP - vm.dP) / (2 * h), v.jac[0][0], 1e-7);
  EXPECT_NEAR((vp.dQ - vm.dQ) / (2 * h), v.jac[1][0], 1e-7);
  EXPECT_NEAR((wp.dP - wm.dP) / (2 * h), v.jac[0][1], 1e-7);
  EXPECT_NEAR((wp.dQ - wm.dQ) / (2 * h), v.jac[1][1], 1e-7);
}

TEST(Phase, OrbitApproachesCone) {
  const auto& pr = profile();
  const Jet w = pr.eval(pr.z_max);
  const double P = w.d1, Q = pr.z_max / w.v;
  EXPECT_LT(std::hypot(P - 1.0, Q - 1.0), 1e-3);
}

TEST(PhiFunction, Values) {
  const auto& pr = profile();
  EXPECT_EQ(Phi(pr, 0.0), 1.0);
  double prev = 1.0;
  for (double z = 0.1; z < 50.0; z += 0.7) {
    const double ph = Phi(pr, z);
    EXPECT_LT(ph, prev);
    prev = ph;
  }
  const double g1a = Phi(pr, 40.0) * 1600.0, g1b = Phi(pr, 50.0) * 2500.0;
  EXPECT_GT(g1b, 0.0);
  EXPECT_NEAR(g1a / g1b, 1.0, 0.05);
}

TEST(LinearizedAlencar, PhiIsStationary) {
  const auto& pr = profile();
  EXPECT_EQ(linearized_at_alencar(pr, {0.0, 0.0, 0.0}, 1.0), 0.0);
  for (double xi = 0.1; xi <= 10.0; xi *= 1.25) {
    const double r = linearized_at_alencar(pr, Phi_jet(pr, xi), xi);
    EXPECT_LT(std::abs(r) * (1 + xi) * (1 + xi), 1e-6) << xi;
  }
  EXPECT_THROW(linearized_at_alencar(pr, {1.0, 0.0, 0.0}, 0.0), Error);
}

TEST(LinearizedAlencar, ShiftedPhiIsSubsolution) {
  const auto& pr = profile();
  const double ell = 2.0, half = 0.5 * Phi(pr, ell);
  for (double xi = 0.05; xi <= ell; xi += 0.05) {
    Jet psi = Phi_jet(pr, xi);
    psi.v -= half;
    const double r = linearized_at_alencar(pr, psi, xi);
    const double w = pr.eval(xi).v;
    EXPECT_LT(r, 0.0);
    EXPECT_NEAR(r, -3.0 * half / (w * w), 1e-6);
  }
}

TEST(LinearizedCone, StationarySolutionsAndSign) {
  for (double xi : {0.1, 1.0, 7.0}) {
    auto pw = [xi](double m) {
      const double v = std::pow(xi, -m);
      return Jet{v, -m * v / xi, m * (m + 1) * v / (xi * xi)};
    };
    EXPECT_NEAR(linearized_at_cone(pw(2.0), xi) * std::pow(xi, 4), 0.0, 1e-12);
    EXPECT_NEAR(linearized_at_cone(pw(3.0), xi) * std::pow(xi, 5), 0.0, 1e-12);
    for (double m : {2.25, 2.5, 2.9}) EXPECT_LT(linearized_at_cone(pw(m), xi), 0.0);
  }
  EXPECT_THROW(linearized_at_cone({1.0, 0.0, 0.0}, 0.0), Error);
}
