#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "mcf/alencar.hpp"
#include "mcf/error.hpp"
#include "mcf/initial_data.hpp"
#include "mcf/numerics.hpp"
#include "mcf/params.hpp"
#include "mcf/special.hpp"

namespace mcf {

// Everything the barriers need that does not depend on the tuning constants.
struct BarrierContext {
  ModelParams model;
  DerivedConstants dc;
  EigenfunctionK phi;
  AuxiliaryG g;
  AlencarProfile W;
  InitialProfile u0;
  double phi_residual_max = 0.0;  // exact L phi - (k - 3/2) phi, evaluated; zero by construction

  BarrierContext(const ModelParams& mp, AlencarProfile profile, int g_nodes = 4000)
      : model(mp),
        dc(derive_constants(mp)),
        phi(mp.k),
        g(solve_g_extrapolated(mp.k, 1e-3, 100.0, g_nodes)),
        W(std::move(profile)),
        u0(build_initial_u0(mp, dc)) {
    const LaurentPoly r = phi.eigen_residual();
    phi_residual_max = r.is_zero() ? 0.0 : std::numeric_limits<double>::infinity();
  }
};

struct BarrierParams {
  double delta = 1e-5;
  double B = 0.0;
  double M = 64.0;
  double Rstar = 2.0;
  double taustar = -5.0;  // latest tau at which the intermediate barriers are certified
  double D = 2000.0;
  double zeta = 0.5;
  double K2plus = 0.0;
  double K2minus = 0.0;
  double epsilon = 0.1;
  double tau_delta = -40.0;  // latest tau at which the glued barriers are used
};

struct GridSpec {
  int n1 = 100;
  int n2 = 100;
  double tau_span = 20.0;
  int nest = 200;  // nesting grid is nest x nest

  bool operator==(const GridSpec&) const = default;
};

struct ResidualSample {
  double coord1, coord2, residual;
  int required_sign;
  bool ok;
};

struct ResidualReport {
  std::string region;
  int sign = 1;
  std::vector<ResidualSample> samples;
  double fraction_correct_sign = 0.0;
  double worst_violation = 0.0;  // largest wrong-signed normalized residual (0 if none)
  double worst_margin = 0.0;     // smallest correctly-signed normalized residual magnitude
  // intermediate only
  double nbound_fraction = 1.0;  // fraction of f >= 0 samples with |N| <= 3 [f]_2^2 / y^3
  double positive_fraction = 1.0;
  double f2_fraction = 1.0;      // fraction with (d_tau - L) f2 > (p+1) gamma f2 > 0
  std::size_t count() const { return samples.size(); }
  bool pass() const { return fraction_correct_sign == 1.0 && nbound_fraction == 1.0 && positive_fraction == 1.0; }
};

class BarrierSet {
 public:
  std::shared_ptr<const BarrierContext> ctx;
  BarrierParams bp;
  RegionSpec spec;

  BarrierSet(std::shared_ptr<const BarrierContext> c, BarrierParams p) : ctx(std::move(c)), bp(p) {
    const auto& dc = ctx->dc;
    if (!(bp.delta > 0.0 && bp.delta < 0.5 * dc.K1)) fail(ErrorKind::InvalidParameter, "delta must lie in (0, K1/2)");
    bp.K2plus = std::cbrt(dc.K1 + 2.0 * bp.delta);
    bp.K2minus = std::cbrt(dc.K1 - 2.0 * bp.delta);
    spec.M = bp.M;
    spec.Rstar = bp.Rstar;
    spec.Zdelta = z_delta(bp.delta, ctx->model.p);
    spec.Ydelta = y_delta(bp.delta, bp.M, dc);
    spec.taustar = bp.tau_delta;
    spec.validate();
  }

  double gamma() const { return ctx->dc.gamma; }
  int k() const { return ctx->dc.k; }
  double p() const { return ctx->model.p; }
  double K1() const { return ctx->dc.K1; }
  double t_delta() const { return std::exp(bp.tau_delta); }

  // ---- outer region: u = x + q, q = q0(x) +- M t min{1, x^{2k-4}} ----
  Jet outer_excess(double x, double t, int s) const {
    if (!(x >= bp.M * std::sqrt(t) && t < 1.0 / (bp.M * bp.M))) fail(ErrorKind::RegionError, "outside outer region");
    return outer_excess_unchecked(x, t, s);
  }

  Jet outer_excess_unchecked(double x, double t, int s) const {
    Jet q = ctx->u0.excess(x);
    const int e = 2 * k() - 4;
    if (x < 1.0) {
      const double xe2 = std::pow(x, e - 2);
      q.v += s * bp.M * t * xe2 * x * x;
      q.d1 += s * bp.M * t * e * xe2 * x;
      q.d2 += s * bp.M * t * e * (e - 1.0) * xe2;
    } else {
      q.v += s * bp.M * t;
    }
    return q;
  }

  // e^{-(k-1) tau} q_out(e^{tau/2} y, e^tau): outer piece in intermediate units, scaled by e^{-3 gamma tau}
  double outer_scaled(double y, double tau, int s) const {
    const double x = std::exp(0.5 * tau) * y;
    const Jet zc = unit_cutoff(x);
    const int kk = k();
    double v = ctx->u0.K0 * zc.v * std::pow(y, 2 * kk - 2);
    v += s * bp.M * (x < 1.0 ? std::pow(y, 2 * kk - 4) : std::exp(-(kk - 2.0) * tau));
    return v;
  }

  // ---- intermediate region: v = y + f ----
  struct FParts {
    Jet f0, f1, f2;  // f = f0 + s (f1 + f2)
  };

  FParts f_parts(double y, double tau, int s) const {
    const double g3 = gamma();
    const double e3 = std::exp(3.0 * g3 * tau), e6 = std::exp(6.0 * g3 * tau);
    const double ep = std::exp((p() + 1.0) * g3 * tau);
    const Jet ph = ctx->phi.eval(y);
    const Jet gg = ctx->g.eval(y);
    const double a0 = (K1() + s * bp.delta) * e3;
    const double a1 = bp.B * K1() * K1() * e6;
    const double pp = p();
    const double ymp = std::pow(y, -pp);
    FParts r;
    r.f0 = {a0 * ph.v, a0 * ph.d1, a0 * ph.d2};
    r.f1 = {a1 * gg.v, a1 * gg.d1, a1 * gg.d2};
    r.f2 = {ep * ymp, -pp * ep * ymp / y, pp * (pp + 1.0) * ep * ymp / (y * y)};
    return r;
  }

  Jet f_jet(double y, double tau, int s) const {
    const FParts r = f_parts(y, tau, s);
    return {r.f0.v + s * (r.f1.v + r.f2.v), r.f0.d1 + s * (r.f1.d1 + r.f2.d1), r.f0.d2 + s * (r.f1.d2 + r.f2.d2)};
  }

  Jet intermediate_excess(double y, double tau, int s) const {
    if (!(tau <= bp.taustar && y >= bp.Rstar * std::exp(gamma() * tau) && y <= std::exp(-0.5 * tau)))
      fail(ErrorKind::RegionError, "outside intermediate region");
    return f_jet(y, tau, s);
  }

  // e^{-3 gamma tau} f
  double f_scaled(double y, double tau, int s) const {
    const double g3 = gamma();
    return (K1() + s * bp.delta) * ctx->phi(y) +
           s * (bp.B * K1() * K1() * std::exp(3.0 * g3 * tau) * ctx->g(y) +
                std::exp((p() - 2.0) * g3 * tau) * std::pow(y, -p()));
  }

  // e^{-gamma tau} f(e^{gamma tau} z): intermediate piece in inner units
  double f_in_z(double z, double tau, int s) const {
    const double g3 = gamma();
    const double y = std::exp(g3 * tau) * z;
    return (K1() + s * bp.delta) * std::exp(2.0 * g3 * tau) * ctx->phi(y) +
           s * (bp.B * K1() * K1() * std::exp(5.0 * g3 * tau) * ctx->g(y) + std::pow(z, -p()));
  }

  // ---- inner region: w = z + excess ----
  double K_of(int s) const { return s > 0 ? bp.K2plus : bp.K2minus; }

  Jet inner_excess_unchecked(double z, double tau, int s) const {
    Jet e = normalized_excess(ctx->W, K_of(s), z);
    if (s < 0) e.v += bp.D * std::exp(2.0 * gamma() * tau);
    return e;
  }

  double tau_star_D() const {
    return std::log(bp.K2minus * ctx->W.Kstar / bp.D) / (2.0 * gamma());
  }

  Jet inner_excess(double z, double tau, int s) const {
    if (z < 0.0) fail(ErrorKind::DomainError, "z must be nonnegative");
    if (s < 0 && (z > bp.zeta * std::exp(-gamma() * tau) || tau > tau_star_D()))
      fail(ErrorKind::RegionError, "outside the inner sub-solution range");
    return inner_excess_unchecked(z, tau, s);
  }

  // ---- glued barrier, as excess over the cone ----
  // Pieces enter the min/max only inside their glue windows: inner z <= Z, intermediate z >= Z/2 and
  // y <= Y (and x <= 1), outer y >= Y/4. The windows overlap exactly on the crossing intervals.
  struct GlobalValue {
    double excess;
    unsigned pieces;  // Region bits of the pieces that entered
    unsigned active;  // Region bit of the piece attaining the min/max
  };

  GlobalValue global_excess(double x, double t, int s) const { return glue(x, t, s, false); }

  // Same min/max with the initial excess q0(x) subtracted from every piece. The outer pieces then
  // reduce to +-M t min{1, x^{2k-4}} exactly, which keeps the ordering resolvable where Mt << q0.
  GlobalValue global_deviation(double x, double t, int s) const { return glue(x, t, s, true); }

  double global_barrier(double x, double t, int s) const { return x + global_excess(x, t, s).excess; }

 private:
  GlobalValue glue(double x, double t, int s, bool deviation) const {
    require_time(t);
    if (x < 0.0) fail(ErrorKind::DomainError, "x must be nonnegative");
    const double tau = std::log(t);
    const double sq = std::sqrt(t);
    const double tk = std::exp(ctx->dc.kthird() * tau);
    const double y = x / sq, z = x / tk;
    const double q0 = deviation ? ctx->u0.excess(x).v : 0.0;
    GlobalValue r{s > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(), 0u, 0u};
    auto take = [&](double v, Region tag) {
      r.pieces |= tag;
      if ((s > 0 && v < r.excess) || (s < 0 && v > r.excess)) {
        r.excess = v;
        r.active = tag;
      }
    };
    if (y >= 0.25 * spec.Ydelta && x >= bp.M * sq && t < 1.0 / (bp.M * bp.M)) {
      const double mt = s * bp.M * t * (x < 1.0 ? std::pow(x, 2 * k() - 4) : 1.0);
      take(deviation ? mt : outer_excess_unchecked(x, t, s).v, Outer);
    }
    if (tau <= bp.tau_delta && z >= 0.5 * spec.Zdelta && y <= spec.Ydelta && x <= 1.0)
      take(sq * f_jet(y, tau, s).v - q0, Intermediate);
    if (tau <= bp.tau_delta && z <= spec.Zdelta) take(tk * inner_excess_unchecked(z, tau, s).v - q0, Inner);
    if (r.pieces == 0u) fail(ErrorKind::RegionError, "no barrier component defined at this point");
    return r;
  }

 public:
};

inline BarrierSet with_delta(const BarrierSet& base, double delta, double tau_delta) {
  BarrierParams p = base.bp;
  p.delta = delta;
  p.tau_delta = tau_delta;
  return BarrierSet(base.ctx, p);
}

// ---------------------------------------------------------------- residual sweeps

namespace detail {

inline void finish_report(ResidualReport& r) {
  std::size_t good = 0;
  double worst = 0.0, margin = std::numeric_limits<double>::infinity();
  for (const auto& s : r.samples) {
    if (s.ok) {
      ++good;
      margin = std::min(margin, std::abs(s.residual));
    } else {
      worst = std::max(worst, std::abs(s.residual));
    }
  }
  r.fraction_correct_sign = r.samples.empty() ? 0.0 : static_cast<double>(good) / static_cast<double>(r.samples.size());
  r.worst_violation = worst;
  r.worst_margin = std::isfinite(margin) ? margin : 0.0;
}

inline bool sign_ok(double r, int s) { return s > 0 ? r >= 0.0 : r <= 0.0; }

}  // namespace detail

// Outer: u_t - [u_xx/(1+u_x^2) + 3u_x/x - 3/u], normalized by M min{1, x^{2k-4}}.
inline ResidualReport verify_outer(const BarrierSet& bs, int s, const GridSpec& gs, double tau_hi) {
  ResidualReport rep;
  rep.region = "outer";
  rep.sign = s;
  const auto taus = linspace(tau_hi - gs.tau_span, tau_hi, static_cast<std::size_t>(gs.n2));
  const int e = 2 * bs.k() - 4;
  for (double tau : taus) {
    const double t = std::exp(tau);
    const auto xs = logspace(bs.bp.M * std::sqrt(t), 4.0, static_cast<std::size_t>(gs.n1));
    for (double x : xs) {
      const Jet q = bs.outer_excess(x, t, s);
      const double mx = x < 1.0 ? std::pow(x, e) : 1.0;
      const double ux = 1.0 + q.d1;
      const double F = q.d2 / (1.0 + ux * ux) + 3.0 * (x * q.d1 - q.v) / (x * (x + q.v));
      const double R = (s * bs.bp.M * mx - F) / (bs.bp.M * mx);
      rep.samples.push_back({x, t, R, s, detail::sign_ok(R, s)});
    }
  }
  detail::finish_report(rep);
  return rep;
}

// Intermediate: (d_tau - L) f - N[f], normalized by K1^2 e^{6 gamma tau} (y^{-7} + y^{4k-7}).
inline ResidualReport verify_intermediate(const BarrierSet& bs, int s, const GridSpec& gs, double tau_hi) {
  ResidualReport rep;
  rep.region = "intermediate";
  rep.sign = s;
  const double g3 = bs.gamma(), pp = bs.p();
  const double K1 = bs.K1();
  const auto taus = linspace(tau_hi - gs.tau_span, tau_hi, static_cast<std::size_t>(gs.n2));
  const double phi_res = bs.ctx->phi_residual_max;
  std::size_t nb_total = 0, nb_ok = 0, pos_ok = 0, f2_ok = 0;
  for (double tau : taus) {
    const auto ys = logspace(bs.bp.Rstar * std::exp(g3 * tau), std::exp(-0.5 * tau), static_cast<std::size_t>(gs.n1));
    const double e6 = std::exp(6.0 * g3 * tau);
    const double ep = std::exp((pp + 1.0) * g3 * tau);
    for (double y : ys) {
      const auto fp = bs.f_parts(y, tau, s);
      const Jet f{fp.f0.v + s * (fp.f1.v + fp.f2.v), fp.f0.d1 + s * (fp.f1.d1 + fp.f2.d1),
                  fp.f0.d2 + s * (fp.f1.d2 + fp.f2.d2)};
      // (d_tau - L) of each part
      const double op0 = (K1 + s * bs.bp.delta) * std::exp(3.0 * g3 * tau) * phi_res;
      const Jet gg = bs.ctx->g.eval(y);
      const double op1 = bs.bp.B * K1 * K1 * e6 * (6.0 * g3 * gg.v - apply_L(gg, y));
      const double Lyp = 0.5 * (2.0 - pp) * (3.0 - pp) * std::pow(y, -pp - 2.0) - 0.5 * (pp + 1.0) * std::pow(y, -pp);
      const double op2 = ep * ((pp + 1.0) * g3 * std::pow(y, -pp) - Lyp);
      const double N = -3.0 * f.v * f.v / (y * y * (y + f.v)) -
                       (2.0 + f.d1) / (1.0 + (1.0 + f.d1) * (1.0 + f.d1)) * f.d1 * f.d2;
      const double scale = K1 * K1 * e6 * AuxiliaryG::forcing(bs.k(), y);
      const double R = (op0 + s * (op1 + op2) - N) / scale;
      rep.samples.push_back({y, tau, R, s, detail::sign_ok(R, s)});
      if (f.v > 0.0) {
        ++pos_ok;
        ++nb_total;
        const double f2n = std::abs(f.v) + std::abs(y * f.d1) + std::abs(y * y * f.d2);
        if (std::abs(N) <= 3.0 / (y * y * y) * f2n * f2n) ++nb_ok;
      }
      if (op2 > (pp + 1.0) * g3 * fp.f2.v && fp.f2.v > 0.0) ++f2_ok;
    }
  }
  detail::finish_report(rep);
  const double n = static_cast<double>(rep.samples.size());
  rep.positive_fraction = static_cast<double>(pos_ok) / n;
  rep.nbound_fraction = nb_total ? static_cast<double>(nb_ok) / static_cast<double>(nb_total) : 1.0;
  rep.f2_fraction = static_cast<double>(f2_ok) / n;
  return rep;
}

// Inner: e^{2 gamma tau}[w_tau + (k/3)(w - z w_z)] - F[w], divided by e^{2 gamma tau}.
// F[W_K] = 0 since W_K solves the static equation; for w = W_K + c, F[w] = 3c/(W_K w) exactly.
inline ResidualReport verify_inner(const BarrierSet& bs, int s, const GridSpec& gs, double tau_hi) {
  ResidualReport rep;
  rep.region = "inner";
  rep.sign = s;
  const double g3 = bs.gamma(), k3 = bs.ctx->dc.kthird();
  const auto taus = linspace(tau_hi - gs.tau_span, tau_hi, static_cast<std::size_t>(gs.n2));
  for (double tau : taus) {
    const double zhi = s > 0 ? bs.spec.Zdelta : std::min(bs.spec.Zdelta, bs.bp.zeta * std::exp(-g3 * tau));
    std::vector<double> zs{0.0};
    const auto tail = logspace(1e-3, zhi, static_cast<std::size_t>(gs.n1 - 1));
    zs.insert(zs.end(), tail.begin(), tail.end());
    const double e2 = std::exp(2.0 * g3 * tau);
    for (double z : zs) {
      const double K = bs.K_of(s);
      const double PhiK = Phi_rescaled(bs.ctx->W, K * bs.ctx->W.Kstar, z);
      double R;
      if (s > 0) {
        R = k3 * PhiK;
      } else {
        const double c = bs.bp.D * e2;
        const double WK = z + normalized_excess(bs.ctx->W, K, z).v;
        R = (2.0 * g3 + k3) * c + k3 * PhiK - 3.0 * bs.bp.D / (WK * (WK + c));
      }
      rep.samples.push_back({z, tau, R, s, detail::sign_ok(R, s)});
    }
  }
  detail::finish_report(rep);
  return rep;
}

inline ResidualReport verify_residuals(const BarrierSet& bs, Region region, int s, const GridSpec& gs) {
  const double tau_hi = bs.bp.tau_delta;
  switch (region) {
    case Outer: return verify_outer(bs, s, gs, tau_hi);
    case Intermediate: return verify_intermediate(bs, s, gs, tau_hi);
    case Inner: return verify_inner(bs, s, gs, tau_hi);
  }
  fail(ErrorKind::InvalidParameter, "unknown region");
}

// ---------------------------------------------------------------- matching

struct MatchStation {
  std::string name;
  double tau;
  double value;
  int required_sign;
  bool ok;
};

struct MatchingReport {
  std::vector<MatchStation> stations;
  double limit_gap_upper_Y = 0.0;  // lim e^{-3 gamma tau}(v_out^+ - v^+)(Y), must be < 0
  double limit_gap_upper_Y4 = 0.0;
  bool ok = true;
};

// Sign pattern at the four crossing stations for one tau.
inline void match_at(const BarrierSet& bs, double tau, MatchingReport& rep) {
  const double Y = bs.spec.Ydelta, Z = bs.spec.Zdelta;
  for (int s : {1, -1}) {
    const char* sg = s > 0 ? "+" : "-";
    const double oY4 = bs.outer_scaled(0.25 * Y, tau, s) - bs.f_scaled(0.25 * Y, tau, s);
    const double oY = bs.outer_scaled(Y, tau, s) - bs.f_scaled(Y, tau, s);
    const double iZ2 = bs.f_in_z(0.5 * Z, tau, s) - bs.inner_excess_unchecked(0.5 * Z, tau, s).v;
    const double iZ = bs.f_in_z(Z, tau, s) - bs.inner_excess_unchecked(Z, tau, s).v;
    auto add = [&](const std::string& n, double v, int req) {
      const bool ok = req > 0 ? v > 0.0 : v < 0.0;
      rep.stations.push_back({n + sg, tau, v, req, ok});
      rep.ok = rep.ok && ok;
    };
    add("outer/intermediate Y/4 ", oY4, s);
    add("outer/intermediate Y ", oY, -s);
    add("intermediate/inner Z/2 ", iZ2, s);
    add("intermediate/inner Z ", iZ, -s);
  }
}

inline double limit_gap(const BarrierSet& bs, double y, int s) {
  const int kk = bs.k();
  const double df = static_cast<double>(bs.ctx->dc.dblfact);
  const double d = bs.bp.delta;
  return -s * d * std::pow(y, 2 * kk - 2) / df + s * bs.bp.M * std::pow(y, 2 * kk - 4) -
         (bs.K1() + s * d) * c_of_y(kk, y) * std::pow(y, 2 * kk - 4);
}

// Matching on a tau sample: the geometric grid below tau_delta plus a uniform sweep over the
// residual window.
inline MatchingReport verify_matching(const BarrierSet& bs, double tau_span = 20.0, int n = 41) {
  MatchingReport rep;
  for (double tau : linspace(bs.bp.tau_delta - tau_span, bs.bp.tau_delta, static_cast<std::size_t>(n)))
    match_at(bs, tau, rep);
  rep.limit_gap_upper_Y = limit_gap(bs, bs.spec.Ydelta, 1);
  rep.limit_gap_upper_Y4 = limit_gap(bs, 0.25 * bs.spec.Ydelta, 1);
  rep.ok = rep.ok && rep.limit_gap_upper_Y < 0.0 && rep.limit_gap_upper_Y4 > 0.0;
  return rep;
}

inline std::vector<double> tau_search_grid() {
  std::vector<double> g;
  for (int j = 0;; ++j) {
    const double t = -std::pow(2.0, j / 8.0);
    if (t < -150.0) break;
    g.push_back(t);
  }
  return g;  // decreasing
}

// Largest tau on the geometric grid such that matching holds at it and at every deeper grid point.
// Returns NaN if none.
inline double find_tau_delta(const BarrierSet& bs, double tau_cap) {
  const auto g = tau_search_grid();
  double best = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = g.size(); i-- > 0;) {
    if (g[i] > tau_cap) break;
    MatchingReport r;
    match_at(bs, g[i], r);
    if (!r.ok) break;
    best = g[i];
  }
  return best;
}

// ---------------------------------------------------------------- nesting

struct NestingReport {
  std::size_t intermediate_checked = 0, intermediate_bad = 0;
  std::size_t inner_checked = 0, inner_bad = 0;
  std::size_t global_checked = 0, global_bad = 0;
  bool ok() const { return intermediate_bad == 0 && inner_bad == 0 && global_bad == 0; }
};

inline NestingReport verify_nesting(const BarrierSet& a, const BarrierSet& b, int n = 200, double tau_span = 20.0) {
  NestingReport rep;
  const double tau_hi = std::min(a.bp.tau_delta, b.bp.tau_delta);
  const auto taus = linspace(tau_hi - tau_span, tau_hi, static_cast<std::size_t>(n));
  const double g3 = a.gamma();
  for (double tau : taus) {
    const auto ys = logspace(a.bp.Rstar * std::exp(g3 * tau), std::exp(-0.5 * tau), static_cast<std::size_t>(n));
    for (double y : ys) {
      const double lo_a = a.f_scaled(y, tau, -1), lo_b = b.f_scaled(y, tau, -1);
      const double hi_a = a.f_scaled(y, tau, 1), hi_b = b.f_scaled(y, tau, 1);
      ++rep.intermediate_checked;
      if (!(lo_a < lo_b && lo_b < hi_b && hi_b < hi_a)) ++rep.intermediate_bad;
    }
    std::vector<double> zs{0.0};
    const auto tail = logspace(1e-3, a.spec.Zdelta, static_cast<std::size_t>(n - 1));
    zs.insert(zs.end(), tail.begin(), tail.end());
    for (double z : zs) {
      const double lo_a = a.inner_excess_unchecked(z, tau, -1).v, lo_b = b.inner_excess_unchecked(z, tau, -1).v;
      const double hi_a = a.inner_excess_unchecked(z, tau, 1).v, hi_b = b.inner_excess_unchecked(z, tau, 1).v;
      ++rep.inner_checked;
      if (!(lo_a < lo_b && lo_b < hi_b && hi_b < hi_a)) ++rep.inner_bad;
    }
  }
  const double kt = a.ctx->dc.kthird();
  for (double tau : taus) {
    const double t = std::exp(tau);
    std::vector<double> xs{0.0};
    const auto tail = logspace(1e-2 * std::exp(kt * tau), 4.0, static_cast<std::size_t>(n - 1));
    xs.insert(xs.end(), tail.begin(), tail.end());
    for (double x : xs) {
      const double lo_a = a.global_deviation(x, t, -1).excess, lo_b = b.global_deviation(x, t, -1).excess;
      const double hi_a = a.global_deviation(x, t, 1).excess, hi_b = b.global_deviation(x, t, 1).excess;
      ++rep.global_checked;
      if (!(lo_a <= lo_b && lo_b < hi_b && hi_b <= hi_a)) ++rep.global_bad;
    }
  }
  return rep;
}

// Largest alpha on a sample such that U^- >= x on [0, alpha].
inline double barrier_above_cone(const BarrierSet& bs, double t, int n = 400) {
  std::vector<double> xs{0.0};
  const auto tail = logspace(1e-3 * std::exp(bs.ctx->dc.kthird() * std::log(t)), 4.0, static_cast<std::size_t>(n));
  xs.insert(xs.end(), tail.begin(), tail.end());
  double alpha = 0.0;
  for (double x : xs) {
    if (bs.global_excess(x, t, -1).excess < 0.0) break;
    alpha = x;
  }
  return alpha;
}

// ---------------------------------------------------------------- constant search

struct SearchLog {
  std::vector<std::string> lines;
};

struct BarrierVerification {
  ResidualReport res[3][2];  // region x sign
  MatchingReport match_a, match_b;
  NestingReport nesting;
  bool residuals_ok() const {
    for (const auto& r : res)
      for (const auto& q : r)
        if (!q.pass() || q.count() < 10000) return false;
    return true;
  }
  bool ok() const { return residuals_ok() && match_a.ok && match_b.ok && nesting.ok(); }
};

inline BarrierVerification verify_barriers(const BarrierSet& a, const BarrierSet& b, const GridSpec& gs) {
  BarrierVerification v;
  const Region regions[3] = {Outer, Intermediate, Inner};
  for (int r = 0; r < 3; ++r)
    for (int si = 0; si < 2; ++si) v.res[r][si] = verify_residuals(a, regions[r], si == 0 ? 1 : -1, gs);
  v.match_a = verify_matching(a, gs.tau_span);
  v.match_b = verify_matching(b, gs.tau_span);
  v.nesting = verify_nesting(a, b, gs.nest, gs.tau_span);
  return v;
}

struct SearchResult {
  BarrierParams params;
  double tau_delta_half = 0.0;  // tau_delta for delta0/2
  SearchLog log;
};

// Deterministic staged search. Each stage scans a fixed geometric schedule and keeps the first
// candidate that passes its own check; the final joint verification escalates M on failure.
// delta0 is the largest 2^{-j} not exceeding delta_max that admits a matching window.
inline SearchResult search_constants(std::shared_ptr<const BarrierContext> ctx, const GridSpec& gs = {},
                                     double epsilon = 0.1, double delta_max = 0.5) {
  SearchResult out;
  auto& log = out.log.lines;
  const auto& dc = ctx->dc;
  const double K1 = dc.K1;
  const double g3 = dc.gamma;

  BarrierParams p;
  p.epsilon = epsilon;
  p.delta = 1e-3;
  GridSpec coarse{60, 60, gs.tau_span};

  auto make = [&](const BarrierParams& q) { return BarrierSet(ctx, q); };

  // Stage 1: outer slope M (powers of two); also require the limiting outer/intermediate crossing.
  double M_start = 2.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    bool found = false;
    for (double M = M_start; M <= 65536.0; M *= 2.0) {
      p.M = M;
      p.tau_delta = -30.0;
      p.Rstar = 1.0;
      BarrierSet bs = make(p);
      const auto up = verify_outer(bs, 1, coarse, -30.0), lo = verify_outer(bs, -1, coarse, -30.0);
      const double Y4 = 0.25 * y_delta(1e-6, M, dc);
      const bool crossing = 0.75 * M > 1.25 * (K1 + 1e-6) * c_of_y(dc.k, Y4);
      if (up.pass() && lo.pass() && crossing) {
        found = true;
        break;
      }
    }
    if (!found) fail(ErrorKind::ConstantSearchFailure, "no outer slope M found up to 65536");
    log.push_back("M = " + std::to_string(p.M));

    // Stage 2: B, R* >= max(1, K1^{1/3}, (B K1^2)^{1/6}), tau* descending.
    bool inter_found = false;
    for (double B = 1.0; B <= 4096.0 && !inter_found; B *= 2.0) {
      p.B = B;
      const double rbase = std::max({1.0, std::cbrt(K1), std::pow(B * K1 * K1, 1.0 / 6.0)});
      for (int ri = 0; ri <= 6 && !inter_found; ++ri) {
        p.Rstar = rbase * std::pow(2.0, ri);
        for (double ts = -1.0; ts >= -80.0 && !inter_found; ts -= 2.0) {
          p.taustar = ts;
          p.tau_delta = ts;
          BarrierSet bs = make(p);
          const auto up = verify_intermediate(bs, 1, coarse, ts);
          if (!up.pass()) continue;
          const auto lo = verify_intermediate(bs, -1, coarse, ts);
          if (lo.pass()) inter_found = true;
        }
      }
    }
    if (!inter_found) fail(ErrorKind::ConstantSearchFailure, "intermediate barrier constants not found");
    log.push_back("B = " + std::to_string(p.B) + ", R* = " + std::to_string(p.Rstar) + ", tau* = " + std::to_string(p.taustar));

    // Stage 3: D and zeta for the inner lower barrier (checked over a deep tau window).
    bool inner_found = false;
    for (int di = 0; di <= 16 && !inner_found; ++di) {
      p.D = K1 * std::pow(2.0, di / 2.0);
      for (double zeta = 1.0; zeta >= 1.0 / 64.0 && !inner_found; zeta *= 0.5) {
        p.zeta = zeta;
        // sub-solution inequality up to z = zeta e^{-gamma tau}
        p.tau_delta = p.taustar;
        BarrierSet bs = make(p);
        bool ok = true;
        for (double tau : linspace(-60.0, -20.0, 9)) {
          const double zhi = zeta * std::exp(-g3 * tau);
          for (double z : logspace(1e-3, zhi, 200)) {
            const double WK = z + normalized_excess(ctx->W, bs.bp.K2minus, z).v;
            const double c = p.D * std::exp(2.0 * g3 * tau);
            const double PhiK = Phi_rescaled(ctx->W, bs.bp.K2minus * ctx->W.Kstar, z);
            const double R = (2.0 * g3 + dc.kthird()) * c + dc.kthird() * PhiK - 3.0 * p.D / (WK * (WK + c));
            if (!(R < 0.0)) ok = false;
          }
        }
        if (ok) inner_found = true;
      }
    }
    if (!inner_found) fail(ErrorKind::ConstantSearchFailure, "inner sub-solution constants not found");
    log.push_back("D = " + std::to_string(p.D) + ", zeta = " + std::to_string(p.zeta));

    // Stage 4: delta0 = 2^{-j}; largest for which matching yields tau_delta for delta0 and delta0/2.
    const double tau_cap = std::min(p.taustar, 0.0);
    bool delta_found = false;
    for (int j = 1; j <= 60 && !delta_found; ++j) {
      const double d = std::ldexp(1.0, -j);
      if (d >= 0.5 * K1 || d > delta_max) continue;
      if (z_delta(d, ctx->model.p) <= 2.0 * p.Rstar) continue;
      p.delta = d;
      p.tau_delta = tau_cap;
      BarrierSet bs = make(p);
      const double ta = find_tau_delta(bs, std::min(tau_cap, bs.tau_star_D()));
      if (std::isnan(ta)) continue;
      BarrierParams ph = p;
      ph.delta = 0.5 * d;
      BarrierSet bh = make(ph);
      const double tb = find_tau_delta(bh, std::min(tau_cap, bh.tau_star_D()));
      if (std::isnan(tb)) continue;
      // the inner window must stay inside the sub-solution range
      if (z_delta(d, ctx->model.p) > p.zeta * std::exp(-g3 * ta)) continue;
      p.tau_delta = ta;
      out.tau_delta_half = tb;
      delta_found = true;
    }
    if (!delta_found) fail(ErrorKind::ConstantSearchFailure, "no delta0 with a matching window");
    log.push_back("delta0 = " + std::to_string(p.delta) + ", tau_delta = " + std::to_string(p.tau_delta) +
                  ", tau_delta/2 = " + std::to_string(out.tau_delta_half));

    // Final joint verification on the standard grids.
    BarrierSet a = make(p);
    BarrierSet b = with_delta(a, 0.5 * p.delta, out.tau_delta_half);
    const auto v = verify_barriers(a, b, gs);
    if (v.ok()) {
      out.params = a.bp;
      log.push_back("verification passed");
      return out;
    }
    log.push_back("verification failed at M = " + std::to_string(p.M) + "; escalating");
    M_start = 2.0 * p.M;
  }
  std::string trail;
  for (const auto& l : log) trail += "\n  " + l;
  fail(ErrorKind::ConstantSearchFailure, "joint verification failed after escalation:" + trail);
}

}  // namespace mcf
