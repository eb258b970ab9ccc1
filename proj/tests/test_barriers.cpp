#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "mcf/barriers.hpp"

using namespace mcf;

namespace {

std::shared_ptr<const BarrierContext> context() {
  static const auto ctx = std::make_shared<const BarrierContext>(ModelParams{}, shoot_alencar(50.0, 1e-12));
  return ctx;
}

// Constants found by the search for k=4, K0=1, p=5/2.
BarrierParams found() {
  BarrierParams p;
  p.delta = std::ldexp(1.0, -15);
  p.B = 8.0;
  p.M = 64.0;
  p.Rstar = 888.18937714376068;
  p.taustar = -17.0;
  p.D = 1336.4318164425749;
  p.zeta = 0.125;
  p.tau_delta = -38.054627680087073;
  return p;
}

const BarrierSet& barriers() {
  static const BarrierSet bs(context(), found());
  return bs;
}

}  // namespace

TEST(BarrierSet, InnerScales) {
  const auto& bs = barriers();
  const double K1 = bs.K1(), d = bs.bp.delta;
  EXPECT_NEAR(std::pow(bs.bp.K2plus, 3) / (K1 + 2 * d), 1.0, 1e-14);
  EXPECT_NEAR(std::pow(bs.bp.K2minus, 3) / (K1 - 2 * d), 1.0, 1e-14);
  EXPECT_LT(bs.bp.K2minus, bs.bp.K2plus);
  BarrierParams bad = found();
  bad.delta = K1;
  EXPECT_THROW(BarrierSet(context(), bad), Error);
}

TEST(Outer, GapBetweenSigns) {
  const auto& bs = barriers();
  const double M = bs.bp.M;
  for (double t : {1e-10, 1e-8})
    for (double x : {0.05, 0.3, 0.9, 1.5}) {
      const double gap = bs.outer_excess(x, t, 1).v - bs.outer_excess(x, t, -1).v;
      const double want = 2 * M * t * std::min(1.0, std::pow(x, 4));
      EXPECT_NEAR(gap / want, 1.0, 1e-9) << x << " " << t;
    }
}

TEST(Outer, CollapsesToInitialData) {
  const auto& bs = barriers();
  for (double x : {0.05, 0.4, 0.8})
    for (int s : {1, -1}) {
      const double q0 = bs.ctx->u0.excess(x).v;
      EXPECT_NEAR(bs.outer_excess_unchecked(x, 1e-30, s).v, q0, 1e-25);
    }
}

TEST(Outer, RegionEnforced) {
  const auto& bs = barriers();
  EXPECT_THROW(bs.outer_excess(1e-5, 1e-6, 1), Error);
  EXPECT_THROW(bs.outer_excess(0.5, 1.0, 1), Error);
}

TEST(Intermediate, LimitProfiles) {
  const auto& bs = barriers();
  const double K1 = bs.K1(), d = bs.bp.delta;
  for (double y : {0.5, 1.0, 5.0}) {
    const double ph = bs.ctx->phi(y);
    EXPECT_NEAR(bs.f_scaled(y, -300.0, 1) / ((K1 + d) * ph), 1.0, 1e-12);
    EXPECT_NEAR(bs.f_scaled(y, -300.0, -1) / ((K1 - d) * ph), 1.0, 1e-12);
    const double e3 = std::exp(3.0 * bs.gamma() * -60.0);
    EXPECT_NEAR(bs.f_jet(y, -60.0, 1).v / e3, bs.f_scaled(y, -60.0, 1), 1e-9 * K1 * ph);
  }
}

TEST(Intermediate, RegionEnforced) {
  const auto& bs = barriers();
  EXPECT_THROW(bs.intermediate_excess(1.0, -10.0, 1), Error);  // tau beyond tau*
  EXPECT_THROW(bs.intermediate_excess(1e-30, -45.0, 1), Error);  // below R* e^{gamma tau}
  EXPECT_NO_THROW(bs.intermediate_excess(10.0, -45.0, 1));
}

TEST(Inner, Pieces) {
  const auto& bs = barriers();
  const auto& W = bs.ctx->W;
  const double tau = -45.0;
  for (double z : {0.0, 1.0, 40.0}) {
    EXPECT_EQ(bs.inner_excess(z, tau, 1).v, normalized_excess(W, bs.bp.K2plus, z).v);
    const double extra = bs.bp.D * std::exp(2.0 * bs.gamma() * tau);
    EXPECT_NEAR(bs.inner_excess(z, tau, -1).v, normalized_excess(W, bs.bp.K2minus, z).v + extra, 1e-15);
  }
  EXPECT_THROW(bs.inner_excess(1e17, tau, -1), Error);
  EXPECT_THROW(bs.inner_excess(-1.0, tau, 1), Error);
  EXPECT_GT(bs.tau_star_D(), bs.bp.tau_delta);
}

TEST(Global, OrderedAndAboveCone) {
  const auto& bs = barriers();
  const double t = std::exp(-45.0);
  const double tk = std::pow(t, 4.0 / 3.0);
  for (double x : {0.0, tk, 100 * tk, 1e5 * tk, std::sqrt(t), 1e-3, 0.2, 0.7, 2.0}) {
    const auto lo = bs.global_deviation(x, t, -1), hi = bs.global_deviation(x, t, 1);
    EXPECT_LT(lo.excess, hi.excess) << x;
    EXPECT_NE(lo.pieces, 0u);
    EXPECT_LE(bs.global_barrier(x, t, -1), bs.global_barrier(x, t, 1));
  }
  EXPECT_GT(barrier_above_cone(bs, t), 0.0);
  EXPECT_THROW(bs.global_excess(-1.0, t, 1), Error);
}

TEST(Verification, ResidualSignsOnReducedGrid) {
  const auto& bs = barriers();
  const GridSpec gs{40, 40, 20.0, 40};
  for (Region r : {Outer, Intermediate, Inner})
    for (int s : {1, -1}) {
      const auto rep = verify_residuals(bs, r, s, gs);
      EXPECT_GT(rep.count(), 0u);
      EXPECT_TRUE(rep.pass()) << rep.region << " " << s << " worst " << rep.worst_violation;
    }
}

TEST(Verification, MatchingAndLimitGap) {
  const auto& bs = barriers();
  const auto m = verify_matching(bs, 20.0, 21);
  EXPECT_TRUE(m.ok);
  EXPECT_LT(m.limit_gap_upper_Y, 0.0);
  EXPECT_GT(m.limit_gap_upper_Y4, 0.0);
  // -Y^{2k-4}(3M + c(Y)) with the delta terms
  const double Y = bs.spec.Ydelta;
  EXPECT_LT(limit_gap(bs, Y, 1), -std::pow(Y, 4) * (3 * bs.bp.M));
}

TEST(Verification, NestingOfHalvedDelta) {
  const auto& a = barriers();
  const BarrierSet b = with_delta(a, 0.5 * a.bp.delta, -41.498865748832308);
  EXPECT_EQ(b.bp.delta, 0.5 * a.bp.delta);
  const auto n = verify_nesting(a, b, 40, 20.0);
  EXPECT_GT(n.global_checked, 0u);
  EXPECT_TRUE(n.ok()) << n.intermediate_bad << " " << n.inner_bad << " " << n.global_bad;
}

TEST(Verification, TauDeltaWithinCap) {
  const auto& bs = barriers();
  const double td = find_tau_delta(bs, bs.bp.taustar);
  ASSERT_FALSE(std::isnan(td));
  EXPECT_LE(td, bs.bp.taustar);
  MatchingReport r;
  match_at(bs, td, r);
  EXPECT_TRUE(r.ok);
}

TEST(Search, ReproducesKnownConstants) {
  const auto res = search_constants(context(), GridSpec{}, 0.1, 0.5);
  const auto want = found();
  EXPECT_EQ(res.params.M, want.M);
  EXPECT_EQ(res.params.B, want.B);
  EXPECT_EQ(res.params.delta, want.delta);
  EXPECT_NEAR(res.params.Rstar / want.Rstar, 1.0, 1e-12);
  EXPECT_NEAR(res.params.D / want.D, 1.0, 1e-12);
  EXPECT_NEAR(res.params.tau_delta, want.tau_delta, 1e-9);
  EXPECT_LT(res.tau_delta_half, res.params.tau_delta);
  EXPECT_FALSE(res.log.lines.empty());
}
