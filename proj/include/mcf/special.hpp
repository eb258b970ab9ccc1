#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "mcf/error.hpp"
#include "mcf/numerics.hpp"
#include "mcf/params.hpp"

namespace mcf {

using Rational = boost::multiprecision::cpp_rational;

inline Rational binomial(int n, int r) {
  Rational b = 1;
  for (int j = 1; j <= r; ++j) b = b * (n - r + j) / j;
  return b;
}

inline Rational rational_double_factorial(int n) {
  Rational r = 1;
  for (int j = 3; j <= n; j += 2) r *= j;
  return r;
}

// Sparse Laurent polynomial in y with exact coefficients.
class LaurentPoly {
 public:
  std::map<int, Rational> terms;  // exponent -> coefficient

  void add(int e, const Rational& c) {
    auto& slot = terms[e];
    slot += c;
    if (slot == 0) terms.erase(e);
  }
  bool is_zero() const { return terms.empty(); }

  LaurentPoly operator-(const LaurentPoly& o) const {
    LaurentPoly r = *this;
    for (const auto& [e, c] : o.terms) r.add(e, -c);
    return r;
  }
  LaurentPoly scaled(const Rational& s) const {
    LaurentPoly r;
    for (const auto& [e, c] : terms) r.add(e, c * s);
    return r;
  }

  double eval(double y) const {
    double s = 0.0;
    for (const auto& [e, c] : terms) s += static_cast<double>(c) * std::pow(y, e);
    return s;
  }
};

// L[y^r] = 1/2 (r+2)(r+3) y^{r-2} + 1/2 (r-1) y^r, applied termwise.
inline LaurentPoly apply_L_exact(const LaurentPoly& f) {
  LaurentPoly r;
  for (const auto& [e, c] : f.terms) {
    r.add(e - 2, c * Rational(e + 2) * (e + 3) / 2);
    r.add(e, c * Rational(e - 1) / 2);
  }
  return r;
}

// phi_k = y^{-2} sum_n binom(k,n) y^{2n} / (2n+1)!!, eigenfunction of L with eigenvalue k - 3/2.
class EigenfunctionK {
 public:
  explicit EigenfunctionK(int k) : k_(k) {
    if (k < 1) fail(ErrorKind::InvalidParameter, "eigenfunction index must be positive");
    for (int n = 0; n <= k; ++n) {
      coeffs_.push_back(binomial(k, n) / rational_double_factorial(2 * n + 1));
      dcoeffs_.push_back(static_cast<double>(coeffs_.back()));
    }
  }

  int k() const { return k_; }
  // coefficient of y^{2n-2}
  const std::vector<Rational>& coeffs() const { return coeffs_; }

  LaurentPoly as_poly() const {
    LaurentPoly p;
    for (int n = 0; n <= k_; ++n) p.add(2 * n - 2, coeffs_[n]);
    return p;
  }

  // L phi - (k - 3/2) phi, computed exactly; identically zero.
  LaurentPoly eigen_residual() const {
    const auto p = as_poly();
    return apply_L_exact(p) - p.scaled(Rational(2 * k_ - 3, 2));
  }

  Jet eval(double y) const {
    if (!(y > 0.0)) fail(ErrorKind::DomainError, "phi_k needs y > 0");
    // y^{-2} sum c_n w^n with w = y^2; Horner in w.
    const double w = y * y;
    double s = 0.0, s1 = 0.0, s2 = 0.0;  // S(w), S'(w), S''(w)
    for (int n = k_; n >= 0; --n) {
      s2 = s2 * w + 2.0 * s1;
      s1 = s1 * w + s;
      s = s * w + dcoeffs_[n];
    }
    // phi = S(w)/w, w = y^2
    const double inv = 1.0 / w;
    const double phi_w = s * inv;
    const double dphi_w = (s1 - phi_w) * inv;
    const double ddphi_w = (s2 - 2.0 * dphi_w) * inv;
    return {phi_w, 2.0 * y * dphi_w, 2.0 * dphi_w + 4.0 * w * ddphi_w};
  }

  double operator()(double y) const { return eval(y).v; }

 private:
  int k_;
  std::vector<Rational> coeffs_;
  std::vector<double> dcoeffs_;
};

// c(y) with phi_k = y^{2k-2}/(2k+1)!! + c(y) y^{2k-4}; c_j = binom(k,j+1)/(2(k-j)-1)!!.
inline std::vector<Rational> c_coefficients(int k) {
  std::vector<Rational> c;
  for (int j = 0; j < k; ++j) c.push_back(binomial(k, j + 1) / rational_double_factorial(2 * (k - j) - 1));
  return c;
}

inline double c_of_y(int k, double y) {
  const auto c = c_coefficients(k);
  double s = 0.0;
  for (int j = k - 1; j >= 0; --j) s = s / (y * y) + static_cast<double>(c[j]);
  return s;
}

inline double chi_k_series(double k, double y, int nterms) {
  double sum = 0.0, term = 1.0;
  const double w = y * y;
  for (int n = 0; n < nterms; ++n) {
    sum += term;
    // term_{n+1}/term_n = (k-n) w / ((n+1)(2n+3))
    term *= (k - n) * w / ((n + 1.0) * (2.0 * n + 3.0));
    if (term == 0.0) break;
  }
  return sum;
}

inline double apply_L(const Jet& f, double y) {
  if (!(y > 0.0)) fail(ErrorKind::DomainError, "L needs y > 0");
  return 0.5 * f.d2 + (3.0 / y + 0.5 * y) * f.d1 + (3.0 / (y * y) - 0.5) * f.v;
}

struct PowerAction {
  double a;  // coefficient of y^{r-2}
  double b;  // coefficient of y^r
};

// (6 gamma - L)[y^r] = a y^{r-2} + b y^r
inline PowerAction L_power_action(double r, const DerivedConstants& c) {
  return {-0.5 * (r + 2.0) * (r + 3.0), 0.5 * (4.0 * c.k - 5.0 - r)};
}

// Terminating particular solution of (6 gamma - L) P = y^{4k-7}:
// P = sum_{j=0}^{2k-2} a_j y^{4k-7-2j}, a_0 = 1.
inline LaurentPoly g_particular(int k) {
  LaurentPoly p;
  Rational a = 1;
  int r = 4 * k - 7;
  p.add(r, a);
  for (int j = 1; j <= 2 * k - 2; ++j) {
    a = a * Rational(r + 2) * (r + 3) / 2 / (j + 1);
    r -= 2;
    p.add(r, a);
  }
  return p;
}

inline Jet eval_poly_jet(const LaurentPoly& p, double y) {
  Jet j;
  for (const auto& [e, c] : p.terms) {
    const double cd = static_cast<double>(c);
    const double ye = std::pow(y, e);
    j.v += cd * ye;
    j.d1 += cd * e * ye / y;
    j.d2 += cd * e * (e - 1.0) * ye / (y * y);
  }
  return j;
}

// Solution of 6 gamma g - L g = y^{-7} + y^{4k-7} on a log grid, with asymptotic tails outside.
class AuxiliaryG {
 public:
  int k = 4;
  double gamma = 0.0;
  std::vector<double> grid;    // y values
  std::vector<double> values;  // g at grid
  double residual_norm = 0.0;  // max discrete residual relative to the forcing
  double C1 = 0.0;             // measured coefficient of y^{-3} log y near 0
  double c3 = 0.0;             // coefficient of y^{-3} near 0
  double c5 = -1.0 / 3.0;      // effective coefficient of y^{-5} near 0
  double c2 = 0.0;             // coefficient of y^{-2} near 0

  double s0() const { return std::log(grid.front()); }
  double h() const { return hs_; }
  double y_min() const { return grid.front(); }
  double y_max() const { return grid.back(); }

  static double forcing(int k, double y) { return std::pow(y, -7) + std::pow(y, 4 * k - 7); }

  Jet eval(double y) const {
    if (!(y > 0.0)) fail(ErrorKind::DomainError, "g needs y > 0");
    if (y < grid.front()) return small_tail(y);
    if (y > grid.back()) return eval_poly_jet(particular_, y);
    const double s = std::log(y);
    const std::size_t n = grid.size();
    double fi = (s - s0()) / hs_;
    std::size_t i = static_cast<std::size_t>(std::max(0.0, std::floor(fi)));
    if (i >= n - 1) i = n - 2;
    const double t = std::clamp(fi - static_cast<double>(i), 0.0, 1.0);
    const Jet js = quintic_hermite(t, hs_, sjet_[i], sjet_[i + 1]);
    // convert s-derivatives to y-derivatives
    return {js.v, js.d1 / y, (js.d2 - js.d1) / (y * y)};
  }

  double operator()(double y) const { return eval(y).v; }

  // 6 gamma g - L g from the interpolated jet
  double operator_residual(double y) const {
    const Jet j = eval(y);
    return 6.0 * gamma * j.v - apply_L(j, y) - forcing(k, y);
  }

  const LaurentPoly& particular() const { return particular_; }

  friend AuxiliaryG solve_g(int k, double y_min, double y_max, int npoints);
  friend AuxiliaryG solve_g_extrapolated(int k, double y_min, double y_max, int npoints);

 private:
  Jet small_tail(double y) const {
    const double l = std::log(y);
    const double y3 = std::pow(y, -3), y5 = std::pow(y, -5);
    const double y2 = 1.0 / (y * y);
    const double v = c5 * y5 + C1 * y3 * l + c3 * y3 + c2 * y2;
    const double d1 = -5.0 * c5 * y5 / y + C1 * y3 / y * (1.0 - 3.0 * l) - 3.0 * c3 * y3 / y - 2.0 * c2 * y2 / y;
    const double d2 = 30.0 * c5 * y5 * y2 + C1 * y3 * y2 * (12.0 * l - 7.0) + 12.0 * c3 * y3 * y2 +
                      6.0 * c2 * y2 * y2;
    return {v, d1, d2};
  }

  double hs_ = 0.0;
  std::vector<Jet> sjet_;  // (g, g_s, g_ss) per node
  LaurentPoly particular_;
};

namespace detail {

inline void g_finalize(AuxiliaryG& g, std::vector<Jet>& sjet, double h) {
  const auto& sol = g.values;
  const std::size_t n = sol.size();
  // s-derivatives: fourth-order centred stencils, one-sided second order at the ends
  sjet.assign(n, Jet{});
  for (std::size_t i = 0; i < n; ++i) {
    Jet& j = sjet[i];
    j.v = sol[i];
    if (i >= 2 && i + 2 < n) {
      j.d1 = (-sol[i + 2] + 8.0 * sol[i + 1] - 8.0 * sol[i - 1] + sol[i - 2]) / (12.0 * h);
      j.d2 = (-sol[i + 2] + 16.0 * sol[i + 1] - 30.0 * sol[i] + 16.0 * sol[i - 1] - sol[i - 2]) / (12.0 * h * h);
    } else if (i == 0) {
      j.d1 = (-3.0 * sol[0] + 4.0 * sol[1] - sol[2]) / (2.0 * h);
      j.d2 = (2.0 * sol[0] - 5.0 * sol[1] + 4.0 * sol[2] - sol[3]) / (h * h);
    } else if (i == n - 1) {
      j.d1 = (3.0 * sol[i] - 4.0 * sol[i - 1] + sol[i - 2]) / (2.0 * h);
      j.d2 = (2.0 * sol[i] - 5.0 * sol[i - 1] + 4.0 * sol[i - 2] - sol[i - 3]) / (h * h);
    } else {
      j.d1 = (sol[i + 1] - sol[i - 1]) / (2.0 * h);
      j.d2 = (sol[i + 1] - 2.0 * sol[i] + sol[i - 1]) / (h * h);
    }
  }

  // Near-zero expansion: y^3 (g + y^{-5}/3) = a y^{-2} + C1 log y + c3 + c2 y, fitted on the first decade.
  // a absorbs the O(h^2) shift of the leading coefficient; c2 is the regular y^{-2} mode.
  const double y_min = g.grid.front();
  const double y_hi = std::min(10.0 * y_min, 0.5);
  std::vector<std::size_t> rows;
  for (std::size_t i = 2; i < n && g.grid[i] <= y_hi; ++i) rows.push_back(i);
  if (rows.size() < 8) fail(ErrorKind::FitFailure, "too few nodes for the near-zero fit");
  Eigen::MatrixXd A(rows.size(), 4);
  Eigen::VectorXd b(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double y = g.grid[rows[r]];
    A(r, 0) = std::pow(y_min / y, 2);
    A(r, 1) = std::log(y);
    A(r, 2) = 1.0;
    A(r, 3) = y / y_hi;
    b(r) = std::pow(y, 3) * (sol[rows[r]] + std::pow(y, -5) / 3.0);
  }
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  g.c5 = -1.0 / 3.0 + x(0) * y_min * y_min;
  g.C1 = x(1);
  g.c3 = x(2);
  g.c2 = x(3) / y_hi;
}

}  // namespace detail

// Second-order finite differences in s = log y on a uniform s-grid, Dirichlet data from the
// asymptotic expansions at both ends.
inline AuxiliaryG solve_g(int k, double y_min, double y_max, int npoints) {
  if (!(y_min > 0.0 && y_min < 1.0 && y_max > 1.0) || npoints < 100)
    fail(ErrorKind::InvalidParameter, "solve_g needs 0 < y_min < 1 < y_max and npoints >= 100");
  AuxiliaryG g;
  g.k = k;
  g.gamma = (2.0 * k - 3.0) / 6.0;
  g.particular_ = g_particular(k);
  const std::size_t n = static_cast<std::size_t>(npoints);
  const double s0 = std::log(y_min), s1 = std::log(y_max);
  const double h = (s1 - s0) / static_cast<double>(n - 1);
  g.hs_ = h;
  g.grid.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.grid[i] = std::exp(s0 + h * static_cast<double>(i));
  g.grid.front() = y_min;
  g.grid.back() = y_max;

  // Leading y^{-5} coefficient as the discrete operator sees it, so the boundary value does not
  // excite the homogeneous y^{-3} mode through an O(h^2) mismatch.
  const double sig2 = 4.0 * std::pow(std::sinh(2.5 * h), 2) / (h * h);
  const double sig1 = -std::sinh(5.0 * h) / h;
  const double c5h = 1.0 / (-0.5 * sig2 - 2.5 * sig1 - 3.0);
  const double kk = static_cast<double>(k);
  const double left = c5h * std::pow(y_min, -5) + (4.0 * kk / 3.0) * std::pow(y_min, -3) * std::log(y_min);
  const double right = g.particular_.eval(y_max);
  if (!std::isfinite(left) || !std::isfinite(right)) fail(ErrorKind::DomainError, "non-finite boundary value");

  // In s = log y:  y^2 (6 gamma g - L g) =
  //   -1/2 g_ss - (5/2 + y^2/2) g_s + ((6 gamma + 1/2) y^2 - 3) g = y^2 F.
  // Rows are divided by y^2 F so the residual is relative to the forcing.
  std::vector<double> lo(n, 0.0), di(n, 0.0), up(n, 0.0), rhs(n, 0.0);
  di[0] = 1.0;
  rhs[0] = left;
  di[n - 1] = 1.0;
  rhs[n - 1] = right;
  const double g6 = 6.0 * g.gamma;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double y = g.grid[i];
    const double y2 = y * y;
    const double w = 1.0 / (y2 * AuxiliaryG::forcing(k, y));
    const double cs = -(2.5 + 0.5 * y2);
    lo[i] = w * (-0.5 / (h * h) - cs / (2.0 * h));
    up[i] = w * (-0.5 / (h * h) + cs / (2.0 * h));
    di[i] = w * (1.0 / (h * h) + (g6 + 0.5) * y2 - 3.0);
    rhs[i] = 1.0;
  }
  std::vector<double> sol = rhs;
  solve_tridiagonal(lo, di, up, sol);
  g.values = sol;

  long double res = 0.0L;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const long double r = static_cast<long double>(lo[i]) * sol[i - 1] + static_cast<long double>(di[i]) * sol[i] +
                          static_cast<long double>(up[i]) * sol[i + 1] - 1.0L;
    res = std::max(res, std::abs(r));
  }
  g.residual_norm = static_cast<double>(res);
  detail::g_finalize(g, g.sjet_, h);
  return g;
}

// Richardson combination of the solutions on npoints and 2 npoints - 1 nodes, reported on the
// coarse grid. Fourth order; used where g feeds the barrier residuals.
inline AuxiliaryG solve_g_extrapolated(int k, double y_min, double y_max, int npoints) {
  AuxiliaryG coarse = solve_g(k, y_min, y_max, npoints);
  const AuxiliaryG fine = solve_g(k, y_min, y_max, 2 * npoints - 1);
  for (std::size_t i = 0; i < coarse.values.size(); ++i)
    coarse.values[i] = (4.0 * fine.values[2 * i] - coarse.values[i]) / 3.0;
  coarse.residual_norm = std::max(coarse.residual_norm, fine.residual_norm);
  detail::g_finalize(coarse, coarse.sjet_, coarse.hs_);
  return coarse;
}

}  // namespace mcf
