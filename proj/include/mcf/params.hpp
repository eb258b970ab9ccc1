#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "mcf/error.hpp"

namespace mcf {

struct ModelParams {
  int k = 4;
  double K0 = 1.0;
  double p = 2.5;
  double m = 2.25;

  bool operator==(const ModelParams&) const = default;

  void validate() const {
    if (k < 4 || k > 15) fail(ErrorKind::InvalidParameter, "k must be an integer in [4,15], got " + std::to_string(k));
    if (!(K0 > 0.0) || !std::isfinite(K0)) fail(ErrorKind::InvalidParameter, "K0 must be positive");
    if (!(p > 2.0 && p < 3.0)) fail(ErrorKind::InvalidParameter, "p must lie in (2,3)");
    if (!(m > 2.0 && m < 3.0)) fail(ErrorKind::InvalidParameter, "m must lie in (2,3)");
  }
};

struct DerivedConstants {
  int k = 4;
  double gamma = 0.0;  // k/3 - 1/2
  double K1 = 0.0;     // (2k+1)!! K0
  double K2 = 0.0;     // K1^{1/3}
  std::uint64_t dblfact = 1;

  double kthird() const { return k / 3.0; }
};

inline std::uint64_t double_factorial(int n) {
  if (n < 1 || n > 31 || n % 2 == 0)
    fail(ErrorKind::InvalidParameter, "double_factorial needs odd n in [1,31], got " + std::to_string(n));
  std::uint64_t r = 1;
  for (int j = 3; j <= n; j += 2) r *= static_cast<std::uint64_t>(j);
  return r;
}

inline DerivedConstants derive_constants(const ModelParams& mp) {
  mp.validate();
  DerivedConstants c;
  c.k = mp.k;
  c.gamma = static_cast<double>(2 * mp.k - 3) / 6.0;
  c.dblfact = double_factorial(2 * mp.k + 1);
  c.K1 = static_cast<double>(c.dblfact) * mp.K0;
  c.K2 = std::cbrt(c.K1);
  return c;
}

struct IntermediateCoords {
  double y;
  double tau;
};

struct InnerCoords {
  double z;
  double tau;
};

struct SpaceTime {
  double x;
  double t;
};

inline void require_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorKind::InvalidTime, "time must be positive and finite");
}

inline IntermediateCoords to_intermediate(double x, double t) {
  require_time(t);
  if (x < 0.0) fail(ErrorKind::DomainError, "x must be nonnegative");
  return {x / std::sqrt(t), std::log(t)};
}

inline SpaceTime from_intermediate(double y, double tau) {
  const double t = std::exp(tau);
  return {y * std::sqrt(t), t};
}

inline InnerCoords to_inner(double x, double t, const DerivedConstants& c) {
  require_time(t);
  if (x < 0.0) fail(ErrorKind::DomainError, "x must be nonnegative");
  const double tau = std::log(t);
  return {x * std::exp(-c.kthird() * tau), tau};
}

inline SpaceTime from_inner(double z, double tau, const DerivedConstants& c) {
  return {z * std::exp(c.kthird() * tau), std::exp(tau)};
}

struct RegionSpec {
  double M = 2.0;
  double Rstar = 1.0;
  double Zdelta = 4.0;
  double Ydelta = 1.0;
  double taustar = 0.0;

  void validate() const {
    if (!(M > 1.0)) fail(ErrorKind::InvalidParameter, "M must exceed 1");
    if (!(Zdelta > 2.0 * Rstar)) fail(ErrorKind::InvalidParameter, "Z_delta must exceed 2 R*");
  }
};

inline double z_delta(double delta, double p) { return (4.0 / 3.0) * std::pow(delta, -1.0 / (p - 2.0)); }

inline double y_delta(double delta, double M, const DerivedConstants& c) {
  return 2.0 * std::sqrt(static_cast<double>(c.dblfact) * M / delta);
}

inline RegionSpec make_region_spec(double M, double Rstar, double delta, double p, double taustar,
                                   const DerivedConstants& c) {
  RegionSpec s{M, Rstar, z_delta(delta, p), y_delta(delta, M, c), taustar};
  s.validate();
  return s;
}

enum Region : unsigned { Outer = 1u, Intermediate = 2u, Inner = 4u };

struct RegionSet {
  unsigned bits = 0;
  bool contains(Region r) const { return (bits & r) != 0; }
  bool empty() const { return bits == 0; }
};

inline RegionSet region_classify(double x, double t, const RegionSpec& s, const DerivedConstants& c) {
  require_time(t);
  RegionSet r;
  const double tau = std::log(t);
  const double tk = std::exp(c.kthird() * tau);
  if (x >= s.M * std::sqrt(t) && t < 1.0 / (s.M * s.M)) r.bits |= Outer;
  if (tau <= s.taustar && x >= s.Rstar * tk && x <= 1.0) r.bits |= Intermediate;
  if (tau <= s.taustar && x >= 0.0 && x <= s.Zdelta * tk) r.bits |= Inner;
  return r;
}

}  // namespace mcf
