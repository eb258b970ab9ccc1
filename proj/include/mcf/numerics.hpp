#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "mcf/error.hpp"

namespace mcf {

// Shortest round-trip decimal text for messages.
inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Value with first and second derivative at a point.
struct Jet {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

// Thomas sweep for a tridiagonal system; lo[0] and up[n-1] are ignored.
// Solves in place: rhs holds the solution on return.
template <class Real>
void solve_tridiagonal(std::vector<Real> lo, std::vector<Real> di, std::vector<Real> up, std::vector<Real>& rhs) {
  const std::size_t n = di.size();
  auto finite = [](const Real& v) { return std::isfinite(static_cast<double>(v)); };
  if (n == 0 || lo.size() != n || up.size() != n || rhs.size() != n)
    fail(ErrorKind::LinearSolveFailure, "tridiagonal size mismatch");
  for (std::size_t i = 1; i < n; ++i) {
    if (di[i - 1] == Real(0) || !finite(di[i - 1])) fail(ErrorKind::LinearSolveFailure, "zero pivot");
    const Real w = lo[i] / di[i - 1];
    di[i] -= w * up[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  if (di[n - 1] == Real(0) || !finite(di[n - 1])) fail(ErrorKind::LinearSolveFailure, "zero pivot");
  rhs[n - 1] /= di[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - up[i] * rhs[i + 1]) / di[i];
  for (const Real& v : rhs)
    if (!finite(v)) fail(ErrorKind::LinearSolveFailure, "non-finite solution");
}

// Quintic Hermite interpolation on [a, a+h] from value, slope and curvature at both ends.
// Returns derivatives with respect to the physical variable.
inline Jet quintic_hermite(double t, double h, const Jet& a, const Jet& b) {
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  const double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5, h0p = -30 * t2 + 60 * t3 - 30 * t4,
               h0pp = -60 * t + 180 * t2 - 120 * t3;
  const double h1 = t - 6 * t3 + 8 * t4 - 3 * t5, h1p = 1 - 18 * t2 + 32 * t3 - 15 * t4,
               h1pp = -36 * t + 96 * t2 - 60 * t3;
  const double h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5), h2p = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4),
               h2pp = 0.5 * (2 - 18 * t + 36 * t2 - 20 * t3);
  const double h3 = 0.5 * (t3 - 2 * t4 + t5), h3p = 0.5 * (3 * t2 - 8 * t3 + 5 * t4),
               h3pp = 0.5 * (6 * t - 24 * t2 + 20 * t3);
  const double h4 = -4 * t3 + 7 * t4 - 3 * t5, h4p = -12 * t2 + 28 * t3 - 15 * t4,
               h4pp = -24 * t + 84 * t2 - 60 * t3;
  const double h5 = 10 * t3 - 15 * t4 + 6 * t5, h5p = 30 * t2 - 60 * t3 + 30 * t4,
               h5pp = 60 * t - 180 * t2 + 120 * t3;
  const double hh = h * h;
  Jet r;
  r.v = a.v * h0 + h * a.d1 * h1 + hh * a.d2 * h2 + hh * b.d2 * h3 + h * b.d1 * h4 + b.v * h5;
  r.d1 = (a.v * h0p + h * a.d1 * h1p + hh * a.d2 * h2p + hh * b.d2 * h3p + h * b.d1 * h4p + b.v * h5p) / h;
  r.d2 = (a.v * h0pp + h * a.d1 * h1pp + hh * a.d2 * h2pp + hh * b.d2 * h3pp + h * b.d1 * h4pp + b.v * h5pp) /
         hh;
  return r;
}

// Septic smoothstep: 0 on (-inf,0], 1 on [1,inf), C^3 at both joins.
inline Jet smoothstep7(double t) {
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  if (t >= 1.0) return {1.0, 0.0, 0.0};
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
  const double s = t4 * (35 - 84 * t + 70 * t2 - 20 * t3);
  const double om = 1 - t;
  const double s1 = 140 * t3 * om * om * om;
  const double s2 = 420 * t2 * om * om * (1 - 2 * t);
  return {s, s1, s2};
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> r(n);
  if (n == 1) {
    r[0] = a;
    return r;
  }
  for (std::size_t i = 0; i < n; ++i) r[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return r;
}

inline std::vector<double> logspace(double a, double b, std::size_t n) {
  auto r = linspace(std::log(a), std::log(b), n);
  for (auto& v : r) v = std::exp(v);
  if (n > 0) {
    r.front() = a;
    r.back() = b;
  }
  return r;
}

}  // namespace mcf
