#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "mcf/alencar.hpp"
#include "mcf/barriers.hpp"
#include "mcf/error.hpp"
#include "mcf/evolve.hpp"
#include "mcf/numerics.hpp"

namespace mcf {

// The inner profile sits in a scaling mode whose restoring rate is ~1/t while the inner stiffness is
// ~t^{-2k/3}; rounding in the implicit solve is amplified by their ratio t^{1-2k/3}, which exceeds
// 1e30 at the certified start times. The run state is therefore carried in quad precision.
using Wide = __float128;
using WideState = BasicState<Wide>;

struct GlueConfig {
  double epsilon = 0.1;
  double s = 0.0;
};

// Psi = 1 on [0,1], 0 on [2,inf), septic transition.
inline Jet glue_cutoff(double xi) {
  const Jet s = smoothstep7(xi - 1.0);
  return {1.0 - s.v, -s.d1, -s.d2};
}

// Blend scale in y = x/sqrt(s). The cap K1 y^{-2} lies below (K1 - delta) phi(y) ~ (K1 - delta)(y^{-2} + 4/3)
// only while y^2 < 3 delta / (4 K1), so the configured epsilon is capped at half that bound.
inline double glue_epsilon(double eps_cfg, double delta, double K1) {
  return std::min(eps_cfg, 0.5 * std::sqrt(0.75 * delta / K1));
}

struct ContinuationConfig {
  MeshSpec mesh;
  StepControl control{1e-4};  // tighter than the generic default: the inner-error trace must resolve a plateau
  double epsilon = 0.1;
  double s0 = 0.0;           // 0 selects the largest admissible start time
  double t_end = 0.0;        // 0 selects t_delta for delta_0
  int n_runs = 4;
  double record_dtau = 0.25;  // spacing of record times in log t
  double Z = 5.0;             // inner-error window
  double abort_margin = 10.0;  // abort when a normalized margin falls below -abort_margin (1 + trunc)
  double ux_tol = 1e-6;
};

struct MonitorRecord {
  double t = 0, supH = 0, supA = 0, supUx = 0, minUx = 0, marginLo = 0, marginHi = 0, lambda = 0, innerErr = 0, dt = 0;
  double trunc = 0;     // max normalized truncation estimate from the coarse companion
  double c2w = 0;       // sup |u_xx| t^{k/3} (1+z)^4 over x <= M sqrt t
  double outerC = 0;    // sup |u_t| / min{1, x^{2k-4}} over x >= M sqrt t
  double uxAxis = 0;    // one-sided u_x at the axis
  double curvIdentity = 0;  // max |k_p + 3k_1 + 3k_2 - H| / (1 + |A|)
};

struct RunTrace {
  int n = 0;
  double s = 0, delta = 0, tau_delta = 0, t_end = 0, epsilon = 0;
  std::size_t nodes = 0;
  double h_min = 0;
  double C1 = 0;                 // sup u_x of the glued data
  double glueC2 = 0, glueC3 = 0;  // fitted weighted derivative constants of the glued data
  double glue_monotone_min = 0;  // smallest adjacent difference of the glued data
  double glue_sandwich_min = 0;  // smallest normalized initial margin against U_{delta_n}
  int accepted = 0, rejected = 0;
  std::vector<MonitorRecord> rec;
  std::vector<MeshState> checkpoints;
};

inline Problem continuation_problem(const InitialProfile& u0) {
  Problem pb;
  pb.left = LeftBoundary::Axis;
  pb.base = [u0](double x) { return u0.excess(x); };
  pb.right_value = [](double) { return 0.0; };
  return pb;
}

// Glued initial data: Alencar cap for x <= eps sqrt(s), lower barrier for x >= 2 eps sqrt(s).
inline MeshState glued_initial_data(const Mesh& mesh, const BarrierSet& bs, const GlueConfig& glue) {
  const auto& ctx = *bs.ctx;
  const double s = glue.s;
  require_time(s);
  const double g3 = ctx.dc.gamma;
  if (!(glue.epsilon * std::pow(s, -g3) > bs.spec.Zdelta))
    fail(ErrorKind::GlueFailure, "start time too large: eps s^{-gamma} <= Z_delta");
  if (!(std::log(s) <= bs.bp.tau_delta)) fail(ErrorKind::GlueFailure, "start time beyond the barrier range");
  const double tk = std::pow(s, ctx.dc.kthird());
  const double xs = glue.epsilon * std::sqrt(s);
  const Problem pb = continuation_problem(ctx.u0);
  std::vector<double> r(mesh.size());
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double x = mesh.x[i];
    const double psi = glue_cutoff(x / xs).v;
    const double q0 = ctx.u0.excess(x).v;
    double v = 0.0;
    if (psi > 0.0) v += psi * (tk * normalized_excess(ctx.W, ctx.dc.K2, x / tk).v - q0);
    if (psi < 1.0) v += (1.0 - psi) * bs.global_deviation(x, s, -1).excess;
    r[i] = v;
  }
  MeshState st = make_state(mesh, pb, r, s);
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double x = mesh.x[i];
    const double lo = bs.global_deviation(x, s, -1).excess, hi = bs.global_deviation(x, s, 1).excess;
    const double tol = 1e-12 * (std::abs(lo) + std::abs(hi));
    if (r[i] < lo - tol || r[i] > hi + tol)
      fail(ErrorKind::GlueFailure, "glued data leaves the barrier sandwich at x = " + num(x) + " (lo " + num(lo) +
                                       ", value " + num(r[i]) + ", hi " + num(hi) + ")");
  }
  return st;
}

namespace detail {

struct BarrierSnapshot {
  std::vector<double> lo, hi;  // deviations from the base excess
};

inline BarrierSnapshot barrier_snapshot(const BarrierSet& bs, const Mesh& mesh, double t) {
  BarrierSnapshot b;
  b.lo.resize(mesh.size());
  b.hi.resize(mesh.size());
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    b.lo[i] = bs.global_deviation(mesh.x[i], t, -1).excess;
    b.hi[i] = bs.global_deviation(mesh.x[i], t, 1).excess;
  }
  return b;
}

inline double inner_error(const MeshState& s, const std::vector<Jet>& q, const AlencarProfile& W, double K2, double Z,
                          double kthird) {
  const double tk = std::pow(s.t, kthird);
  const double xz = Z * tk;
  double hmax = 0.0;
  for (std::size_t i = 1; i < s.mesh.size() && s.x(i - 1) < xz; ++i) hmax = std::max(hmax, s.x(i) - s.x(i - 1));
  if (hmax > 0.5 * tk) fail(ErrorKind::MeshResolutionError, "inner scale unresolved by the mesh");
  double e = 0.0;
  for (double z : linspace(0.0, Z, 201)) {
    const double w = interpolate_u(s, q, z * tk) / tk;
    e = std::max(e, std::abs(w - z - normalized_excess(W, K2, z).v));
  }
  return e;
}

}  // namespace detail

// Record times: t_end e^{-j dtau} above s, in increasing order, ending at t_end.
inline std::vector<double> record_times(double s, double t_end, double dtau) {
  std::vector<double> r;
  for (int j = 0;; ++j) {
    const double t = t_end * std::exp(-dtau * j);
    if (t <= s * (1.0 + 1e-12)) break;
    r.push_back(t);
  }
  std::reverse(r.begin(), r.end());
  return r;
}

struct CoarseTrack {
  std::vector<double> t;
  std::vector<std::vector<double>> r;
};

// One run of the family. bs_run gives the glued data (delta_n); bs_ref gives the margins (delta_0).
inline RunTrace run_continuation(const BarrierSet& bs_run, const BarrierSet& bs_ref, double s, double t_end,
                                 const ContinuationConfig& cfg, const Mesh& mesh, const CoarseTrack* coarse,
                                 CoarseTrack* track) {
  const auto& ctx = *bs_ref.ctx;
  const double kt = ctx.dc.kthird();
  const int k = ctx.dc.k;
  RunTrace tr;
  tr.s = s;
  tr.delta = bs_run.bp.delta;
  tr.tau_delta = bs_run.bp.tau_delta;
  tr.t_end = t_end;
  tr.epsilon = glue_epsilon(cfg.epsilon, tr.delta, ctx.dc.K1);
  tr.nodes = mesh.size();
  tr.h_min = mesh.h_min();

  MeshState st = glued_initial_data(mesh, bs_run, {tr.epsilon, s});
  const Problem pb = continuation_problem(ctx.u0);

  // initial-data diagnostics
  {
    const auto q = excess_jets(st, LeftBoundary::Axis);
    const double tk = std::pow(s, kt);
    const double xg = 2.0 * tr.epsilon * std::sqrt(s);
    double mono = std::numeric_limits<double>::infinity(), C1 = 0.0, C2 = 0.0, C3 = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      C1 = std::max(C1, 1.0 + q[i].d1);
      if (i > 0) mono = std::min(mono, st.u(i) - st.u(i - 1));
      if (st.x(i) <= xg) {
        const double z = st.x(i) / tk;
        C2 = std::max(C2, std::abs(q[i].d2) * tk * std::pow(1.0 + z, 4));
        if (i > 0 && i + 1 < q.size()) {
          const auto w = stencil(st.mesh, i);
          const double d3 = w.d1m * q[i - 1].d2 + w.d10 * q[i].d2 + w.d1p * q[i + 1].d2;
          C3 = std::max(C3, std::abs(d3) * tk * tk * std::pow(1.0 + z, 5));
        }
      }
    }
    tr.C1 = C1;
    tr.glueC2 = C2;
    tr.glueC3 = C3;
    tr.glue_monotone_min = mono;
    const auto b = detail::barrier_snapshot(bs_run, mesh, s);
    double mm = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mesh.size(); ++i) {
      const double gap = b.hi[i] - b.lo[i];
      mm = std::min({mm, (st.r[i] - b.lo[i]) / gap, (b.hi[i] - st.r[i]) / gap});
    }
    tr.glue_sandwich_min = mm;
  }

  // controller weights: |r| plus the reference barrier gap, the gap refreshed when t has grown by 5%
  std::vector<double> gcache, wcache;
  double wt = -1.0;
  auto weights = [&](const WideState& m) -> std::vector<double> {
    if (wt < 0.0 || m.t > 1.05 * wt) {
      const auto b = detail::barrier_snapshot(bs_ref, m.mesh, m.t);
      gcache.resize(b.lo.size());
      for (std::size_t i = 0; i < b.lo.size(); ++i) gcache[i] = b.hi[i] - b.lo[i];
      wt = m.t;
    }
    wcache.resize(gcache.size());
    for (std::size_t i = 0; i < gcache.size(); ++i) wcache[i] = std::abs(static_cast<double>(m.r[i])) + gcache[i];
    return wcache;
  };

  const auto times = record_times(s, t_end, cfg.record_dtau);
  std::size_t coarse_idx = 0;
  auto on_record = [&](const WideState& wide, double dt) {
    const MeshState m = to_double(wide);
    const auto q = excess_jets(m, LeftBoundary::Axis);
    const auto b = detail::barrier_snapshot(bs_ref, m.mesh, m.t);
    const double tk = std::pow(m.t, kt);
    const double xo = bs_ref.bp.M * std::sqrt(m.t);
    MonitorRecord rc;
    rc.t = m.t;
    rc.dt = dt;
    rc.minUx = std::numeric_limits<double>::infinity();
    rc.supUx = -std::numeric_limits<double>::infinity();
    rc.marginLo = rc.marginHi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double x = m.x(i), u = m.u(i);
      const double ux = 1.0 + q[i].d1;
      const double g = std::sqrt(1.0 + ux * ux);
      const Curvatures c = curvatures(x, u, q[i]);
      const double H = mean_curvature(x, u, q[i]);
      rc.curvIdentity = std::max(rc.curvIdentity, std::abs(c.H() - H) / (1.0 + c.A()));
      rc.supA = std::max(rc.supA, c.A());
      rc.supH = std::max(rc.supH, std::abs(m.h[i]) / g);
      rc.supUx = std::max(rc.supUx, ux);
      rc.minUx = std::min(rc.minUx, ux);
      const double gap = b.hi[i] - b.lo[i];
      rc.marginLo = std::min(rc.marginLo, (m.r[i] - b.lo[i]) / gap);
      rc.marginHi = std::min(rc.marginHi, (b.hi[i] - m.r[i]) / gap);
      const double z = x / tk;
      if (x <= xo) rc.c2w = std::max(rc.c2w, std::abs(q[i].d2) * tk * std::pow(1.0 + z, 4));
      if (x >= xo) rc.outerC = std::max(rc.outerC, std::abs(m.h[i]) / std::min(1.0, std::pow(x, 2 * k - 4)));
      if (coarse && i % 2 == 0 && coarse_idx < coarse->t.size())
        rc.trunc = std::max(rc.trunc, std::abs(m.r[i] - coarse->r[coarse_idx][i / 2]) / (3.0 * gap));
    }
    {
      const double h1 = m.x(1), h2 = m.x(2);
      rc.uxAxis = ((m.u(1) - m.u(0)) * h2 * h2 - (m.u(2) - m.u(0)) * h1 * h1) / (h1 * h2 * (h2 - h1));
    }
    rc.lambda = lambda_monitor(m, ctx.model.m, xo, tk);
    rc.innerErr = detail::inner_error(m, q, ctx.W, ctx.dc.K2, cfg.Z, kt);
    if (coarse) ++coarse_idx;
    if (track) {
      track->t.push_back(m.t);
      track->r.push_back(m.r);
    }
    tr.rec.push_back(rc);
    if (tr.rec.size() == 1 || m.t == t_end || tr.rec.size() == times.size() / 2 + 1) tr.checkpoints.push_back(m);
    const double floor = -cfg.abort_margin * (1.0 + rc.trunc);
    if (coarse && (rc.marginLo < floor || rc.marginHi < floor))
      fail(ErrorKind::SandwichViolation, "sandwich margin below tolerance at t = " + num(m.t));
  };

  WideState ws;
  ws.mesh = st.mesh;
  ws.base = st.base;
  ws.t = st.t;
  ws.r.assign(st.r.begin(), st.r.end());
  ws.h.assign(st.h.size(), Wide(0));
  const EvolveStats es = evolve<Wide>(ws, pb, times, cfg.control, weights, on_record);
  tr.accepted = es.accepted;
  tr.rejected = es.rejected;
  return tr;
}

struct FamilyPlan {
  std::vector<double> s, delta, tau_delta;
  double t_end = 0.0;
};

// delta_n = delta_0 2^{-n}, s_n = s_0 2^{-n}; s_0 is the largest value admissible for every n.
inline FamilyPlan plan_family(const BarrierSet& base, const ContinuationConfig& cfg) {
  FamilyPlan fp;
  fp.t_end = std::exp(base.bp.tau_delta);
  if (cfg.t_end > 0.0) {
    if (cfg.t_end > fp.t_end) fail(ErrorKind::InvalidTime, "configured t_end exceeds t_delta = " + num(fp.t_end));
    fp.t_end = cfg.t_end;
  }
  const double g3 = base.gamma();
  double s0 = std::numeric_limits<double>::infinity();
  for (int n = 0; n < cfg.n_runs; ++n) {
    const double d = std::ldexp(base.bp.delta, -n);
    double td = base.bp.tau_delta;
    if (n > 0) {
      BarrierParams p = base.bp;
      p.delta = d;
      BarrierSet b(base.ctx, p);
      td = find_tau_delta(b, std::min(base.bp.tau_delta, b.tau_star_D()));
      if (std::isnan(td)) fail(ErrorKind::GlueFailure, "no matching window for delta_n");
    }
    fp.delta.push_back(d);
    fp.tau_delta.push_back(td);
    const double eps = glue_epsilon(cfg.epsilon, d, base.K1());
    const double smax = std::min(std::exp(td), 0.5 * std::pow(eps / z_delta(d, base.p()), 1.0 / g3));
    s0 = std::min(s0, std::ldexp(smax, n));
  }
  if (cfg.s0 > 0.0) {
    if (cfg.s0 > s0) fail(ErrorKind::GlueFailure, "configured s0 exceeds the admissible start time");
    s0 = cfg.s0;
  }
  if (!(s0 < fp.t_end)) fail(ErrorKind::InvalidTime, "start time s0 must precede t_end");
  for (int n = 0; n < cfg.n_runs; ++n) fp.s.push_back(std::ldexp(s0, -n));
  return fp;
}

inline Mesh continuation_mesh(double s, double kthird, const MeshSpec& spec) {
  return Mesh::graded(spec.eta * std::pow(s, kthird), spec);
}

struct FamilyResult {
  FamilyPlan plan;
  std::vector<RunTrace> runs;
};

// Runs n = 0..n_runs-1; each run is independent, so up to `threads` of them proceed concurrently.
// Results do not depend on the thread count.
inline FamilyResult run_family(const BarrierSet& base, const ContinuationConfig& cfg, int threads = 1) {
  FamilyResult fr;
  fr.plan = plan_family(base, cfg);
  const double kt = base.ctx->dc.kthird();
  fr.runs.resize(cfg.n_runs);
  auto one = [&](int n) {
    const BarrierSet bn = n == 0 ? base : with_delta(base, fr.plan.delta[n], fr.plan.tau_delta[n]);
    const Mesh fine = continuation_mesh(fr.plan.s[n], kt, cfg.mesh);
    CoarseTrack ct;
    run_continuation(bn, base, fr.plan.s[n], fr.plan.t_end, cfg, fine.coarsened(), nullptr, &ct);
    RunTrace tr = run_continuation(bn, base, fr.plan.s[n], fr.plan.t_end, cfg, fine, &ct, nullptr);
    tr.n = n;
    fr.runs[n] = std::move(tr);
  };
  const int nt = std::max(1, std::min(threads, cfg.n_runs));
  if (nt == 1) {
    for (int n = 0; n < cfg.n_runs; ++n) one(n);
    return fr;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errs(cfg.n_runs);
  std::vector<std::thread> pool;
  for (int w = 0; w < nt; ++w)
    pool.emplace_back([&] {
      for (int n = next++; n < cfg.n_runs; n = next++) {
        try {
          one(n);
        } catch (...) {
          errs[n] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return fr;
}

}  // namespace mcf
