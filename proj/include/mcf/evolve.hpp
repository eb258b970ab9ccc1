#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mcf/error.hpp"
#include "mcf/numerics.hpp"

namespace mcf {

// ---------------------------------------------------------------- mesh

struct MeshSpec {
  double eta = 0.05;     // smallest spacing as a fraction of the inner scale
  double xmax = 4.0;
  double hmax = 0.01;    // spacing far from the axis
  double growth = 0.04;  // log of the spacing ratio between neighbours in the graded zone
  double rho = 0.02;     // relative spacing excess at the first node

  bool operator==(const MeshSpec&) const = default;
};

struct Mesh {
  std::vector<double> x;

  std::size_t size() const { return x.size(); }
  double h_min() const {
    double h = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < x.size(); ++i) h = std::min(h, x[i] - x[i - 1]);
    return h;
  }

  void validate() const {
    if (x.size() < 3) fail(ErrorKind::InvalidParameter, "mesh needs at least 3 nodes");
    for (std::size_t i = 1; i < x.size(); ++i)
      if (!(x[i] > x[i - 1])) fail(ErrorKind::InvalidParameter, "mesh nodes must increase strictly");
  }

  static Mesh uniform(double a, double b, std::size_t n) {
    Mesh m;
    m.x = linspace(a, b, n);
    m.validate();
    return m;
  }

  // Spacing h0 (1 + (H-1) c e^{b xi} / (1 + c e^{b xi})) in the node index xi: nearly uniform h0 near
  // the axis, geometric growth at rate b, saturating at H h0. The node count is even in intervals.
  static Mesh graded(double h0, const MeshSpec& s) {
    if (!(h0 > 0.0 && h0 < s.hmax && s.xmax > 0.0 && s.growth > 0.0 && s.rho > 0.0))
      fail(ErrorKind::InvalidParameter, "invalid graded mesh specification");
    const double H = s.hmax / h0, b = s.growth, c = s.rho / H;
    auto X = [&](double xi) {
      return h0 * (xi + ((H - 1.0) / b) * (std::log1p(c * std::exp(b * xi)) - std::log1p(c)));
    };
    double lo = 0.0, hi = 1.0;
    while (X(hi) < s.xmax) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (X(mid) < s.xmax ? lo : hi) = mid;
    }
    auto n = static_cast<std::size_t>(std::ceil(hi));
    if (n % 2) ++n;
    const double scale = hi / static_cast<double>(n);
    Mesh m;
    m.x.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) m.x[i] = X(scale * static_cast<double>(i));
    m.x[0] = 0.0;
    m.x[n] = s.xmax;
    m.validate();
    return m;
  }

  // Every other node; the last node is kept.
  Mesh coarsened() const {
    if (x.size() % 2 == 0) fail(ErrorKind::InvalidParameter, "coarsening needs an even number of intervals");
    Mesh m;
    for (std::size_t i = 0; i < x.size(); i += 2) m.x.push_back(x[i]);
    return m;
  }
};

// ---------------------------------------------------------------- problem and state

// Unknown r = u - x - b(x) with a fixed analytic base excess b. The base carries the part of the
// profile that is known in closed form so that slow changes of order t stay resolvable.
enum class LeftBoundary { Axis, Dirichlet };

struct Problem {
  LeftBoundary left = LeftBoundary::Axis;
  std::function<double(double)> left_value;   // r at x_0 for Dirichlet
  std::function<double(double)> right_value;  // r at x_max
  std::function<Jet(double)> base;            // b, b', b''
};

// The unknown may be carried in a wider type than double; everything else stays double.
template <class Real>
struct BasicState {
  Mesh mesh;
  std::vector<Jet> base;
  std::vector<Real> r;
  std::vector<Real> h;  // u_t from the last accepted step
  double t = 0.0;

  double x(std::size_t i) const { return mesh.x[i]; }
  Real qr(std::size_t i) const { return Real(base[i].v) + r[i]; }
  Real ur(std::size_t i) const { return Real(mesh.x[i]) + Real(base[i].v) + r[i]; }
  double q(std::size_t i) const { return static_cast<double>(qr(i)); }
  double u(std::size_t i) const { return static_cast<double>(ur(i)); }
};

using MeshState = BasicState<double>;

template <class Real = double>
BasicState<Real> make_state(const Mesh& mesh, const Problem& pb, const std::vector<double>& r, double t) {
  mesh.validate();
  if (r.size() != mesh.size()) fail(ErrorKind::InvalidParameter, "state size does not match the mesh");
  BasicState<Real> s;
  s.mesh = mesh;
  s.base.resize(mesh.size());
  for (std::size_t i = 0; i < mesh.size(); ++i) s.base[i] = pb.base ? pb.base(mesh.x[i]) : Jet{};
  s.r.assign(r.begin(), r.end());
  s.h.assign(mesh.size(), Real(0));
  s.t = t;
  return s;
}

template <class Real>
MeshState to_double(const BasicState<Real>& s) {
  MeshState d;
  d.mesh = s.mesh;
  d.base = s.base;
  d.t = s.t;
  d.r.resize(s.r.size());
  d.h.resize(s.h.size());
  for (std::size_t i = 0; i < s.r.size(); ++i) {
    d.r[i] = static_cast<double>(s.r[i]);
    d.h[i] = static_cast<double>(s.h[i]);
  }
  return d;
}

// Three-point weights on a non-uniform mesh: f' and f'' at node i from i-1, i, i+1.
template <class Real = double>
struct Stencil {
  Real d1m, d10, d1p, d2m, d20, d2p;
};

// Away from the axis the weights are exact on {1, x, x^{-2}}; x^{-2} is a null solution of the
// static operator linearized at the cone, so the far tail of the inner profile carries no
// discretization drift across the many decades between the inner and outer scales. Near the axis
// (x_{i+1} - x_{i-1} > x_i/4) the usual polynomial weights, exact on {1, x, x^2}, are used.
inline Stencil<long double> stencil_weights(const Mesh& m, std::size_t i) {
  using L = long double;
  const L xm = m.x[i - 1], x0 = m.x[i], xp = m.x[i + 1];
  const L hm = x0 - xm, hp = xp - x0, hs = hm + hp;
  Stencil<L> w{-hp / (hm * hs), (hp - hm) / (hm * hp), hm / (hp * hs), 2 / (hm * hs), -2 / (hm * hp), 2 / (hp * hs)};
  if (xm <= 0 || 4 * hs > x0) return w;
  // basis in the scaled variable e = x/x0 - 1: 1, e, (1+e)^{-2} - 1 + 2e (the last has zero value
  // and slope at e = 0, curvature 6)
  const L em = xm / x0 - 1, ep = xp / x0 - 1;
  auto g = [](L e) { return 1 / ((1 + e) * (1 + e)) - 1 + 2 * e; };
  const L gm = g(em), gp = g(ep);
  // weights a (for e_{-}), c (for e_{+}), b = -(a + c); conditions on e and g
  auto solve = [&](L re, L rg, L& a, L& b, L& c) {
    const L det = em * gp - ep * gm;
    a = (re * gp - ep * rg) / det;
    c = (em * rg - re * gm) / det;
    b = -(a + c);
  };
  L a, b, c;
  solve(1, 0, a, b, c);
  w.d1m = a / x0;
  w.d10 = b / x0;
  w.d1p = c / x0;
  solve(0, 6, a, b, c);
  w.d2m = a / (x0 * x0);
  w.d20 = b / (x0 * x0);
  w.d2p = c / (x0 * x0);
  return w;
}

template <class Real = double>
Stencil<Real> stencil(const Mesh& m, std::size_t i) {
  const auto w = stencil_weights(m, i);
  return {Real(w.d1m), Real(w.d10), Real(w.d1p), Real(w.d2m), Real(w.d20), Real(w.d2p)};
}

// Jets of the excess q = u - x at every node. On the axis u_x = 0 and u_xx = 2(u_1 - u_0)/x_1^2.
inline std::vector<Jet> excess_jets(const MeshState& s, LeftBoundary left) {
  const std::size_t n = s.mesh.size();
  std::vector<Jet> q(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const auto w = stencil(s.mesh, i);
    q[i] = {s.q(i), s.base[i].d1 + w.d1m * s.r[i - 1] + w.d10 * s.r[i] + w.d1p * s.r[i + 1],
            s.base[i].d2 + w.d2m * s.r[i - 1] + w.d20 * s.r[i] + w.d2p * s.r[i + 1]};
  }
  // second-order one-sided slope of u; curvature is copied from the neighbour
  auto one_sided = [&](std::size_t a, std::size_t b, std::size_t c) {
    const double h1 = s.mesh.x[b] - s.mesh.x[a], h2 = s.mesh.x[c] - s.mesh.x[a];
    const double ua = s.u(a), ub = s.u(b), uc = s.u(c);
    return ((ub - ua) * h2 * h2 - (uc - ua) * h1 * h1) / (h1 * h2 * (h2 - h1));
  };
  if (left == LeftBoundary::Axis) {
    const double x1 = s.mesh.x[1];
    q[0] = {s.q(0), -1.0, 2.0 * (s.u(1) - s.u(0)) / (x1 * x1)};
  } else {
    q[0] = {s.q(0), one_sided(0, 1, 2) - 1.0, q[1].d2};
  }
  q[n - 1] = {s.q(n - 1), one_sided(n - 1, n - 2, n - 3) - 1.0, q[n - 2].d2};
  return q;
}

inline double diffusion_coeff(double p) { return 1.0 / (1.0 + (1.0 + p) * (1.0 + p)); }

// q_t = q_xx/(1+(1+q_x)^2) + 3 q_x/x + 3q/(x(x+q)) in the interior; on the axis 8(u_1-u_0)/x_1^2 - 3/u_0.
// Fills F and the tridiagonal Jacobian with respect to r.
template <class Real>
void assemble(const BasicState<Real>& s, LeftBoundary left, std::vector<Real>& F, std::vector<Real>& lo,
              std::vector<Real>& di, std::vector<Real>& up) {
  const std::size_t n = s.mesh.size();
  F.assign(n, Real(0));
  lo.assign(n, Real(0));
  di.assign(n, Real(0));
  up.assign(n, Real(0));
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const auto w = stencil<Real>(s.mesh, i);
    const Real x = Real(s.mesh.x[i]);
    const Real q = s.qr(i);
    const Real p = Real(s.base[i].d1) + w.d1m * s.r[i - 1] + w.d10 * s.r[i] + w.d1p * s.r[i + 1];
    const Real Q = Real(s.base[i].d2) + w.d2m * s.r[i - 1] + w.d20 * s.r[i] + w.d2p * s.r[i + 1];
    const Real a = Real(1) / (Real(1) + (Real(1) + p) * (Real(1) + p));
    const Real ap = Real(-2) * (Real(1) + p) * a * a;
    const Real xq = x + q;
    F[i] = a * Q + Real(3) * p / x + Real(3) * q / (x * xq);
    const Real c1 = ap * Q + Real(3) / x;
    lo[i] = a * w.d2m + c1 * w.d1m;
    di[i] = a * w.d20 + c1 * w.d10 + Real(3) / (xq * xq);
    up[i] = a * w.d2p + c1 * w.d1p;
  }
  if (left == LeftBoundary::Axis) {
    const Real x1 = Real(s.mesh.x[1]);
    const Real u0 = s.ur(0);
    F[0] = Real(8) * (s.ur(1) - u0) / (x1 * x1) - Real(3) / u0;
    di[0] = Real(-8) / (x1 * x1) + Real(3) / (u0 * u0);
    up[0] = Real(8) / (x1 * x1);
  }
}

// One linearly implicit Euler step: (I - dt J) dr = dt F, Dirichlet rows pinned to the boundary data.
template <class Real>
std::vector<Real> implicit_step(const BasicState<Real>& s, const Problem& pb, double dt) {
  if (!(dt > 0.0)) fail(ErrorKind::InvalidTime, "dt must be positive");
  const std::size_t n = s.mesh.size();
  std::vector<Real> F, lo, di, up;
  assemble(s, pb.left, F, lo, di, up);
  const Real h = Real(dt);
  std::vector<Real> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = h * F[i];
    lo[i] = -h * lo[i];
    up[i] = -h * up[i];
    di[i] = Real(1) - h * di[i];
  }
  const double tn = s.t + dt;
  if (pb.left == LeftBoundary::Dirichlet) {
    lo[0] = up[0] = Real(0);
    di[0] = Real(1);
    rhs[0] = Real(pb.left_value(tn)) - s.r[0];
  }
  lo[n - 1] = up[n - 1] = Real(0);
  di[n - 1] = Real(1);
  rhs[n - 1] = Real(pb.right_value(tn)) - s.r[n - 1];
  solve_tridiagonal(std::move(lo), std::move(di), std::move(up), rhs);
  std::vector<Real> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = s.r[i] + rhs[i];
  return r;
}

template <class Real>
void require_positive(const BasicState<Real>& s, const std::vector<Real>& r) {
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Real u = Real(s.mesh.x[i]) + Real(s.base[i].v) + r[i];
    if (!(u > Real(0))) fail(ErrorKind::SingularProfile, "u <= 0 at x = " + num(s.mesh.x[i]));
  }
}

// Single first-order step, advancing the state in place.
template <class Real>
void step(BasicState<Real>& s, const Problem& pb, double dt) {
  std::vector<Real> r = implicit_step(s, pb, dt);
  require_positive(s, r);
  for (std::size_t i = 0; i < r.size(); ++i) s.h[i] = (r[i] - s.r[i]) / Real(dt);
  s.r = std::move(r);
  s.t += dt;
}

// Step doubling: one step of dt against two of dt/2. Returns the extrapolated 2 r_half - r_full and the
// difference r_half - r_full as the local error estimate.
template <class Real>
struct DoubledStep {
  std::vector<Real> r;
  std::vector<double> err;
};

template <class Real>
DoubledStep<Real> doubled_step(const BasicState<Real>& s, const Problem& pb, double dt) {
  const std::vector<Real> full = implicit_step(s, pb, dt);
  BasicState<Real> half = s;
  half.r = implicit_step(s, pb, 0.5 * dt);
  half.t = s.t + 0.5 * dt;
  const std::vector<Real> two = implicit_step(half, pb, 0.5 * dt);
  DoubledStep<Real> d;
  d.r.resize(full.size());
  d.err.resize(full.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    d.r[i] = Real(2) * two[i] - full[i];
    d.err[i] = static_cast<double>(two[i] - full[i]);
  }
  return d;
}

// Fixed-step second-order advance (step doubling with extrapolation).
template <class Real>
void advance_fixed(BasicState<Real>& s, const Problem& pb, double dt, double t_end) {
  while (s.t < t_end - 1e-12 * dt) {
    const double h = std::min(dt, t_end - s.t);
    DoubledStep<Real> d = doubled_step(s, pb, h);
    require_positive(s, d.r);
    for (std::size_t i = 0; i < d.r.size(); ++i) s.h[i] = (d.r[i] - s.r[i]) / Real(h);
    s.r = std::move(d.r);
    s.t += h;
  }
}

struct StepControl {
  double tol = 1e-3;         // local error relative to the weights
  double dt_rel_max = 0.02;  // dt <= dt_rel_max * t
  double growth_max = 1.5;
  double dt_init_rel = 1e-4;
  int max_steps = 200000;

  bool operator==(const StepControl&) const = default;
};

struct EvolveStats {
  int accepted = 0;
  int rejected = 0;
  double last_dt = 0.0;
};

// Adaptive advance through the record times; on_record is called at t = initial t and at every
// record time. weights(state) gives the per-node error scale for the controller.
template <class Real>
EvolveStats evolve(BasicState<Real>& s, const Problem& pb, const std::vector<double>& record_times,
                   const StepControl& ctl, const std::function<std::vector<double>(const BasicState<Real>&)>& weights,
                   const std::function<void(const BasicState<Real>&, double dt)>& on_record) {
  EvolveStats st;
  double dt = ctl.dt_init_rel * s.t;
  on_record(s, 0.0);
  for (double T : record_times) {
    if (T <= s.t) continue;
    while (s.t < T) {
      dt = std::min({dt, ctl.dt_rel_max * s.t, T - s.t});
      const bool last = dt >= T - s.t;
      DoubledStep<Real> d;
      double err = 0.0;
      bool ok = true;
      try {
        d = doubled_step(s, pb, dt);
        require_positive(s, d.r);
        const std::vector<double> w = weights(s);
        for (std::size_t i = 0; i < d.err.size(); ++i) err = std::max(err, std::abs(d.err[i]) / (ctl.tol * w[i]));
        if (!std::isfinite(err)) ok = false;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularProfile && e.kind() != ErrorKind::LinearSolveFailure) throw;
        ok = false;
      }
      if (ok && err <= 1.0) {
        for (std::size_t i = 0; i < d.r.size(); ++i) s.h[i] = (d.r[i] - s.r[i]) / Real(dt);
        s.r = std::move(d.r);
        s.t = last ? T : s.t + dt;
        st.last_dt = dt;
        ++st.accepted;
        dt *= std::min(ctl.growth_max, 0.9 / std::sqrt(std::max(err, 1e-12)));
      } else {
        ++st.rejected;
        dt *= ok ? std::max(0.2, 0.9 / std::sqrt(err)) : 0.25;
        if (dt < 1e-14 * s.t) fail(ErrorKind::SingularProfile, "time step underflow at t = " + num(s.t));
      }
      if (st.accepted + st.rejected > ctl.max_steps) fail(ErrorKind::SingularProfile, "step budget exhausted");
    }
    on_record(s, st.last_dt);
  }
  return st;
}

// ---------------------------------------------------------------- geometry

struct Curvatures {
  double kp, k1, k2;  // profile, first sphere factor (x3), second sphere factor (x3)
  double H() const { return kp + 3.0 * k1 + 3.0 * k2; }
  double A() const { return std::sqrt(kp * kp + 3.0 * k1 * k1 + 3.0 * k2 * k2); }
};

// Principal curvatures from x, u and the excess jet q = u - x. At x = 0 the limit u_x/x -> u_xx is used.
inline Curvatures curvatures(double x, double u, const Jet& q) {
  const double ux = 1.0 + q.d1;
  const double g = std::sqrt(1.0 + ux * ux);
  const double kp = q.d2 / (g * g * g);
  const double k1 = x > 0.0 ? ux / (x * g) : q.d2 / g;
  const double k2 = -1.0 / (u * g);
  return {kp, k1, k2};
}

// Mean curvature evaluated without the x-3/u cancellation: 3u_x/x - 3/u = 3q_x/x + 3q/(x(x+q)).
inline double mean_curvature(double x, double u, const Jet& q) {
  const double ux = 1.0 + q.d1;
  const double g = std::sqrt(1.0 + ux * ux);
  if (x == 0.0) return (4.0 * q.d2 - 3.0 / u) / g;
  return (q.d2 / (g * g) + 3.0 * q.d1 / x + 3.0 * q.v / (x * u)) / g;
}

inline std::vector<double> mean_curvature(const MeshState& s, LeftBoundary left = LeftBoundary::Axis) {
  const auto q = excess_jets(s, left);
  std::vector<double> H(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) H[i] = mean_curvature(s.x(i), s.u(i), q[i]);
  return H;
}

inline std::vector<double> second_fundamental_norm(const MeshState& s, LeftBoundary left = LeftBoundary::Axis) {
  const auto q = excess_jets(s, left);
  std::vector<double> A(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) A[i] = curvatures(s.x(i), s.u(i), q[i]).A();
  return A;
}

// max over nodes with x <= xcap of (1 + x/tk)^m |h|
inline double lambda_monitor(const MeshState& s, double m, double xcap, double tk) {
  double L = 0.0;
  for (std::size_t i = 0; i < s.mesh.size() && s.x(i) <= xcap; ++i)
    L = std::max(L, std::pow(1.0 + s.x(i) / tk, m) * std::abs(s.h[i]));
  return L;
}

// Cubic Hermite interpolation of u at x from nodal values and slopes.
inline double interpolate_u(const MeshState& s, const std::vector<Jet>& q, double x) {
  const auto& X = s.mesh.x;
  if (x <= X.front()) return s.u(0);
  if (x >= X.back()) return s.u(X.size() - 1);
  const auto it = std::upper_bound(X.begin(), X.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - X.begin()) - 1;
  const double h = X[i + 1] - X[i], t = (x - X[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double u0 = s.u(i), u1 = s.u(i + 1), m0 = 1.0 + q[i].d1, m1 = 1.0 + q[i + 1].d1;
  return (2 * t3 - 3 * t2 + 1) * u0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * u1 + (t3 - t2) * h * m1;
}

}  // namespace mcf
