#pragma once

#include <algorithm>
#include <cmath>

#include "mcf/error.hpp"
#include "mcf/numerics.hpp"
#include "mcf/params.hpp"

namespace mcf {

// Cutoff equal to 1 on [0,1/2], 0 on [1,inf), smooth septic transition in between.
inline Jet unit_cutoff(double x) {
  const Jet s = smoothstep7(2.0 * x - 1.0);
  return {1.0 - s.v, -2.0 * s.d1, -4.0 * s.d2};
}

// u0(x) = x + K0 zeta(x) x^{2k-2}; stored as the excess q0 = u0 - x.
struct InitialProfile {
  int k = 4;
  double K0 = 1.0;
  double C0 = 0.0;        // sup |u0''| / x^{2k-4} on (0,1]
  double c_min = 0.0;     // min u0' on [0,1]
  double grad_max = 0.0;  // sup u0'

  Jet excess(double x) const {
    if (x >= 1.0 || x <= 0.0) return {0.0, 0.0, 0.0};
    const int n = 2 * k - 2;
    const Jet z = unit_cutoff(x);
    const double xn2 = std::pow(x, n - 2);
    const double xn1 = xn2 * x, xn = xn1 * x;
    return {K0 * z.v * xn, K0 * (z.d1 * xn + n * z.v * xn1),
            K0 * (z.d2 * xn + 2.0 * n * z.d1 * xn1 + n * (n - 1.0) * z.v * xn2)};
  }

  Jet eval(double x) const {
    const Jet e = excess(x);
    return {x + e.v, 1.0 + e.d1, e.d2};
  }
};

inline InitialProfile build_initial_u0(const ModelParams& mp, const DerivedConstants& /*c*/) {
  mp.validate();
  InitialProfile u;
  u.k = mp.k;
  u.K0 = mp.K0;
  double C0 = 0.0, cmin = 1.0, gmax = 1.0;
  const int n = 4000;
  for (int i = 1; i <= n; ++i) {
    const double x = static_cast<double>(i) / n;
    const Jet j = u.eval(x);
    C0 = std::max(C0, std::abs(j.d2) / std::pow(x, 2 * mp.k - 4));
    cmin = std::min(cmin, j.d1);
    gmax = std::max(gmax, j.d1);
  }
  if (!(cmin >= 0.0))
    fail(ErrorKind::InvalidInitialData, "u0' becomes negative (min " + std::to_string(cmin) + ")");
  u.C0 = C0;
  u.c_min = cmin;
  u.grad_max = gmax;
  return u;
}

}  // namespace mcf
