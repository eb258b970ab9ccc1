#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "mcf/checks.hpp"
#include "mcf/continuation.hpp"
#include "mcf/evolve.hpp"

using namespace mcf;

namespace {

MeshState state_from(const Mesh& m, double (*u)(double), double t = 1.0) {
  std::vector<double> r(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) r[i] = u(m.x[i]) - m.x[i];
  return make_state(m, Problem{}, r, t);
}

}  // namespace

TEST(Mesh, UniformAndCoarsened) {
  const Mesh m = Mesh::uniform(0.0, 2.0, 21);
  EXPECT_EQ(m.size(), 21u);
  EXPECT_NEAR(m.h_min(), 0.1, 1e-15);
  const Mesh c = m.coarsened();
  EXPECT_EQ(c.size(), 11u);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c.x[i], m.x[2 * i]);
  EXPECT_THROW(Mesh::uniform(0.0, 1.0, 2), Error);
  EXPECT_THROW(Mesh::uniform(0.0, 1.0, 4).coarsened(), Error);
}

TEST(Mesh, GradedResolvesInnerScale) {
  MeshSpec spec;
  const double h0 = 1e-6;
  const Mesh m = Mesh::graded(h0, spec);
  EXPECT_EQ(m.x.front(), 0.0);
  EXPECT_EQ(m.x.back(), spec.xmax);
  EXPECT_EQ((m.size() - 1) % 2, 0u);
  EXPECT_NEAR(m.x[1] / h0, 1.0, 0.05);
  for (std::size_t i = 2; i < m.size(); ++i) {
    const double ratio = (m.x[i] - m.x[i - 1]) / (m.x[i - 1] - m.x[i - 2]);
    EXPECT_LT(std::log(ratio), 1.1 * spec.growth);
  }
  EXPECT_LE(m.x.back() - m.x[m.size() - 2], 1.01 * spec.hmax);
  EXPECT_THROW(Mesh::graded(1.0, spec), Error);
}

TEST(Stencil, ExactOnFittedFamily) {
  const Mesh m = Mesh::graded(1e-4, MeshSpec{});
  std::size_t fitted = 0, polynomial = 0;
  for (std::size_t i = 1; i + 1 < m.size(); i += 7) {
    const auto w = stencil_weights(m, i);
    const long double a = m.x[i - 1], b = m.x[i], c = m.x[i + 1];
    auto d1 = [&](auto f) { return w.d1m * f(a) + w.d10 * f(b) + w.d1p * f(c); };
    auto d2 = [&](auto f) { return w.d2m * f(a) + w.d20 * f(b) + w.d2p * f(c); };
    auto one = [](long double) { return 1.0L; };
    auto lin = [](long double x) { return x; };
    const long double sc = (c - a) * (c - a);
    EXPECT_NEAR(static_cast<double>(d1(one) * (c - a)), 0.0, 1e-12);
    EXPECT_NEAR(static_cast<double>(d1(lin)), 1.0, 1e-12);
    EXPECT_NEAR(static_cast<double>(d2(lin) * sc), 0.0, 1e-12);
    if (4 * (c - a) > b) {
      ++polynomial;
      auto sq = [](long double x) { return x * x; };
      EXPECT_NEAR(static_cast<double>(d2(sq)), 2.0, 1e-9);
    } else {
      ++fitted;
      auto inv2 = [](long double x) { return 1 / (x * x); };
      EXPECT_NEAR(static_cast<double>(d1(inv2) * b * b * b), -2.0, 1e-9);
      EXPECT_NEAR(static_cast<double>(d2(inv2) * b * b * b * b), 6.0, 1e-9);
    }
  }
  EXPECT_GT(fitted, 0u);
  EXPECT_GT(polynomial, 0u);
}

TEST(Geometry, Cylinder) {
  const Mesh m = Mesh::uniform(0.0, 3.0, 31);
  const MeshState s = state_from(m, [](double) { return 2.0; });
  const auto H = mean_curvature(s);
  const auto A = second_fundamental_norm(s);
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_NEAR(H[i], -1.5, 1e-12) << m.x[i];
    EXPECT_NEAR(A[i] * A[i], 0.75, 1e-12) << m.x[i];
  }
}

TEST(Geometry, Cone) {
  const Mesh m = Mesh::uniform(0.1, 3.0, 30);
  const MeshState s = state_from(m, [](double x) { return x; });
  const auto H = mean_curvature(s, LeftBoundary::Dirichlet);
  const auto A = second_fundamental_norm(s, LeftBoundary::Dirichlet);
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_NEAR(H[i], 0.0, 1e-12);
    const double x = m.x[i];
    EXPECT_NEAR(A[i] * A[i] * x * x, 3.0, 1e-10);
    const auto c = curvatures(x, x, Jet{});
    EXPECT_NEAR(c.k1, -c.k2, 1e-15);
    EXPECT_NEAR(c.k1 * x * std::sqrt(2.0), 1.0, 1e-14);
  }
}

TEST(Geometry, AlencarGraphIsMinimal) {
  const AlencarProfile W = shoot_alencar(50.0, 1e-12);
  for (double x : {0.0, 0.3, 2.0, 10.0, 45.0}) {
    const Jet e = W.excess(x);
    EXPECT_LT(std::abs(mean_curvature(x, x + e.v, e)), 1e-6) << x;
  }
}

TEST(Monitors, Lambda) {
  const Mesh m = Mesh::uniform(0.0, 1.0, 101);
  MeshState s = make_state(m, Problem{}, std::vector<double>(m.size(), 0.0), 0.01);
  const double tk = std::pow(0.01, 4.0 / 3.0), mm = 2.25;
  EXPECT_EQ(lambda_monitor(s, mm, 1.0, tk), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) s.h[i] = std::pow(1.0 + m.x[i] / tk, -mm);
  EXPECT_NEAR(lambda_monitor(s, mm, 1.0, tk), 1.0, 1e-12);
}

TEST(Monitors, HermiteInterpolationOfCubic) {
  const Mesh m = Mesh::uniform(0.0, 1.0, 11);
  const MeshState s = state_from(m, [](double x) { return 1.0 + x * x * x; });
  std::vector<Jet> q(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double x = m.x[i];
    q[i] = {1.0 + x * x * x - x, 3 * x * x - 1.0, 6 * x};
  }
  for (double x : {0.03, 0.47, 0.99}) EXPECT_NEAR(interpolate_u(s, q, x), 1.0 + x * x * x, 1e-14);
}

TEST(Solver, ShrinkingCylinder) { EXPECT_LT(cylinder_error(), 1e-6); }

TEST(Solver, ConeIsStationary) { EXPECT_LT(cone_drift(), 1e-10); }

TEST(Solver, TimeOrders) {
  // first order for single steps, second order after doubling with extrapolation
  const Mesh m = Mesh::uniform(0.5, 2.0, 61);
  auto bump = [](double x) { return 0.2 * std::exp(-(x - 1.2) * (x - 1.2) / 0.05); };
  Problem pb;
  pb.left = LeftBoundary::Dirichlet;
  pb.left_value = [=](double) { return bump(0.5); };
  pb.right_value = [=](double) { return bump(2.0); };
  std::vector<double> r0(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) r0[i] = bump(m.x[i]);
  const double T = 0.01;
  auto single = [&](int n) {
    auto s = make_state(m, pb, r0, 0.0);
    for (int j = 0; j < n; ++j) step(s, pb, T / n);
    return s.r;
  };
  auto doubled = [&](int n) {
    auto s = make_state(m, pb, r0, 0.0);
    advance_fixed(s, pb, T / n, T);
    EXPECT_NEAR(s.t, T, 1e-15);
    return s.r;
  };
  auto order = [&](auto run) {
    const auto a = run(10), b = run(20), c = run(40);
    double e1 = 0, e2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      e1 = std::max(e1, std::abs(a[i] - b[i]));
      e2 = std::max(e2, std::abs(b[i] - c[i]));
    }
    return std::log2(e1 / e2);
  };
  EXPECT_NEAR(order(single), 1.0, 0.2);
  EXPECT_NEAR(order(doubled), 2.0, 0.3);
}

TEST(Solver, SpatialOrderTwo) {
  const SolverStudy st = solver_study();
  EXPECT_NEAR(st.order, 2.0, 0.3);
  EXPECT_LT(st.e2, st.e1);
}

TEST(Solver, RejectsNonpositiveProfile) {
  // coarse cylinder u = 1 with a step close to the linearized blow-up time
  const Mesh m = Mesh::uniform(0.0, 40.0, 5);
  Problem pb;
  pb.right_value = [](double) { return -39.0; };
  std::vector<double> r(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) r[i] = 1.0 - m.x[i];
  auto s = make_state(m, pb, r, 0.0);
  try {
    step(s, pb, 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularProfile);
  }
  EXPECT_EQ(s.t, 0.0);
}

TEST(InitialData, GluedDataFollowsCapAndSandwich) {
  const auto ctx = std::make_shared<const BarrierContext>(ModelParams{}, shoot_alencar(50.0, 1e-12));
  BarrierParams p;
  p.delta = std::ldexp(1.0, -15);
  p.B = 8.0;
  p.M = 64.0;
  p.Rstar = 888.18937714376068;
  p.taustar = -17.0;
  p.D = 1336.4318164425749;
  p.zeta = 0.125;
  p.tau_delta = -38.054627680087073;
  const BarrierSet bs(ctx, p);
  const ContinuationConfig cc;
  const FamilyPlan fp = plan_family(bs, cc);
  ASSERT_EQ(fp.s.size(), 4u);
  const double s = fp.s[0];
  EXPECT_LT(s, fp.t_end);
  const double eps = glue_epsilon(cc.epsilon, p.delta, bs.K1());
  const Mesh mesh = continuation_mesh(s, 4.0 / 3.0, cc.mesh);
  const MeshState st = glued_initial_data(mesh, bs, {eps, s});
  const double tk = std::pow(s, 4.0 / 3.0), xs = eps * std::sqrt(s);
  std::size_t cap_nodes = 0;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double x = mesh.x[i];
    const double lo = x + bs.global_excess(x, s, -1).excess, hi = x + bs.global_excess(x, s, 1).excess;
    EXPECT_LE(st.u(i), hi + 1e-12 * hi);
    EXPECT_GE(st.u(i), lo - 1e-12 * hi);
    if (x <= xs) {
      ++cap_nodes;
      const double cap = tk * rescale_W(ctx->W, ctx->dc.K2 * ctx->W.Kstar, x / tk).v;
      EXPECT_NEAR(st.u(i) / cap, 1.0, 1e-14);
    }
  }
  EXPECT_GT(cap_nodes, 10u);
  EXPECT_THROW(glued_initial_data(mesh, bs, {eps, std::exp(-30.0)}), Error);
}
