#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "mcf/error.hpp"
#include "mcf/numerics.hpp"

namespace mcf {

// Rotationally symmetric minimal graph desingularizing the cone:
//   W'' = (1 + W'^2)(3/W - 3W'/z),  W(0) = 1, W'(0) = 0.
// Stored as the excess E = W - z, which stays accurate where W ~ z.
class AlencarProfile {
 public:
  std::vector<double> z;
  std::vector<double> W, W1, W2;
  double Gamma2 = 0.0, Gamma3 = 0.0, Gamma5 = 0.0;
  double Kstar = 1.0;
  double z_max = 0.0;
  double z0 = 1e-3;
  double start_sensitivity = 0.0;  // |E(z_max)| change when starting at z0/2
  double tol = 1e-12;

  // series start
  static Jet series(double zz) {
    const double z2 = zz * zz;
    return {1.0 + 0.375 * z2 - (15.0 / 512.0) * z2 * z2, 0.75 * zz - (15.0 / 128.0) * z2 * zz,
            0.75 - (45.0 / 128.0) * z2};
  }

  // W - z with derivatives (E, E', E'') at z >= 0
  Jet excess(double zz) const {
    if (zz < 0.0) fail(ErrorKind::DomainError, "Alencar profile needs z >= 0");
    if (zz <= z0) {
      const Jet s = series(zz);
      return {s.v - zz, s.d1 - 1.0, s.d2};
    }
    if (zz > z_max) {
      const double i1 = 1.0 / zz, i2 = i1 * i1, i3 = i2 * i1, i5 = i3 * i2;
      return {Gamma2 * i2 + Gamma3 * i3 + Gamma5 * i5,
              (-2.0 * Gamma2 * i2 - 3.0 * Gamma3 * i3 - 5.0 * Gamma5 * i5) * i1,
              (6.0 * Gamma2 * i2 + 12.0 * Gamma3 * i3 + 30.0 * Gamma5 * i5) * i1 * i1};
    }
    auto it = std::upper_bound(z.begin(), z.end(), zz);
    std::size_t i = static_cast<std::size_t>(it - z.begin());
    if (i == 0) i = 1;
    if (i >= z.size()) i = z.size() - 1;
    const std::size_t a = i - 1;
    const double h = z[i] - z[a];
    const Jet ja{E_[a], E1_[a], W2[a]}, jb{E_[i], E1_[i], W2[i]};
    return quintic_hermite((zz - z[a]) / h, h, ja, jb);
  }

  Jet eval(double zz) const {
    const Jet e = excess(zz);
    return {zz + e.v, 1.0 + e.d1, e.d2};
  }

  // third derivative from differentiating the ODE
  double third(double zz) const {
    const Jet w = eval(zz);
    if (zz == 0.0) return 0.0;
    const double P = w.d1;
    const double G = 3.0 / w.v - 3.0 * P / zz;
    return 2.0 * P * w.d2 * G + (1.0 + P * P) * (-3.0 * P / (w.v * w.v) - 3.0 * w.d2 / zz + 3.0 * P / (zz * zz));
  }

  // right-hand side of the ODE in excess form; E'' = -3(1+W'^2)(E + zE' + E E')/(zW)
  static double rhs(double zz, double E, double E1) {
    const double P = 1.0 + E1;
    const double Wv = zz + E;
    return -3.0 * (1.0 + P * P) * (E + zz * E1 + E * E1) / (zz * Wv);
  }

  // residual of the minimal-surface ODE W''/(1+W'^2) + 3W'/z - 3/W, computed from stored samples
  double ode_residual(double zz) const {
    const Jet e = excess(zz);
    const double P = 1.0 + e.d1;
    return e.d2 / (1.0 + P * P) + 3.0 * (e.v + zz * e.d1 + e.v * e.d1) / (zz * (zz + e.v));
  }

  void set_samples(std::vector<double> zs, std::vector<double> E, std::vector<double> E1) {
    z = std::move(zs);
    E_ = std::move(E);
    E1_ = std::move(E1);
    const std::size_t n = z.size();
    W.resize(n);
    W1.resize(n);
    W2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      W[i] = z[i] + E_[i];
      W1[i] = 1.0 + E1_[i];
      W2[i] = z[i] == 0.0 ? 0.75 : rhs(z[i], E_[i], E1_[i]);
    }
  }

  const std::vector<double>& excess_samples() const { return E_; }

 private:
  std::vector<double> E_, E1_;
};

struct AsymptoticFit {
  double Gamma2, Gamma3, Gamma5, Kstar;
};

inline AsymptoticFit fit_asymptotics(const AlencarProfile& pr, double z_lo, double z_hi) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < pr.z.size(); ++i)
    if (pr.z[i] >= z_lo && pr.z[i] <= z_hi) rows.push_back(i);
  if (rows.size() < 10) fail(ErrorKind::FitFailure, "too few samples in the fit window");
  const auto& E = pr.excess_samples();
  Eigen::MatrixXd A(rows.size(), 3);
  Eigen::VectorXd b(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double zz = pr.z[rows[r]];
    const double s = zz / z_hi;  // scaled columns keep the system well conditioned
    A(r, 0) = 1.0 / (s * s);
    A(r, 1) = 1.0 / (s * s * s);
    A(r, 2) = 1.0 / std::pow(s, 5);
    b(r) = E[rows[r]] * z_hi * z_hi;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 0.0 || sv(0) / sv(sv.size() - 1) > 1e12) fail(ErrorKind::FitFailure, "ill-conditioned fit");
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  AsymptoticFit f;
  f.Gamma2 = x(0);
  f.Gamma3 = x(1) * z_hi;
  f.Gamma5 = x(2) * z_hi * z_hi * z_hi;
  if (!(f.Gamma2 > 0.0) || !std::isfinite(f.Gamma3)) fail(ErrorKind::FitFailure, "non-positive z^-2 coefficient");
  f.Kstar = std::cbrt(1.0 / f.Gamma2);
  return f;
}

inline AsymptoticFit fit_asymptotics(const AlencarProfile& pr) { return fit_asymptotics(pr, 0.5 * pr.z_max, pr.z_max); }

namespace detail {

inline std::vector<double> alencar_sample_grid(double z0, double z_max) {
  std::vector<double> g;
  g.push_back(z0);
  // geometric up to 0.05, then uniform 0.01
  double zz = z0;
  while (zz * 1.2 < 0.05) {
    zz *= 1.2;
    g.push_back(zz);
  }
  const double h = 0.01;
  const std::size_t nu = static_cast<std::size_t>(std::ceil((z_max - 0.05) / h));
  for (std::size_t i = 0; i <= nu; ++i) g.push_back(0.05 + (z_max - 0.05) * static_cast<double>(i) / nu);
  return g;
}

inline void alencar_integrate(double z0, const std::vector<double>& grid, double tol, std::vector<double>& E,
                              std::vector<double>& E1) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 2>;
  const Jet s = AlencarProfile::series(z0);
  State x{s.v - z0, s.d1 - 1.0};
  E.clear();
  E1.clear();
  auto sys = [](const State& u, State& du, double zz) {
    du[0] = u[1];
    du[1] = AlencarProfile::rhs(zz, u[0], u[1]);
  };
  auto obs = [&](const State& u, double) {
    if (!(u[0] + 1.0 > 0.0) || !std::isfinite(u[0]) || !std::isfinite(u[1]))
      fail(ErrorKind::ShootingFailure, "profile left the admissible range");
    E.push_back(u[0]);
    E1.push_back(u[1]);
  };
  auto stepper = odeint::make_dense_output(tol, tol, odeint::runge_kutta_dopri5<State>());
  try {
    odeint::integrate_times(stepper, sys, x, grid.begin(), grid.end(), 1e-4, obs,
                            odeint::max_step_checker(10'000'000));
  } catch (const odeint::step_adjustment_error& e) {
    fail(ErrorKind::ShootingFailure, e.what());
  } catch (const odeint::no_progress_error& e) {
    fail(ErrorKind::ShootingFailure, e.what());
  }
  if (E.size() != grid.size()) fail(ErrorKind::ShootingFailure, "integration stopped early");
}

}  // namespace detail

inline AlencarProfile shoot_alencar(double z_max = 50.0, double tol = 1e-12) {
  if (!(z_max >= 20.0)) fail(ErrorKind::InvalidParameter, "z_max must be at least 20");
  if (!(tol >= 1e-13 && tol <= 1e-6)) fail(ErrorKind::InvalidParameter, "tol must lie in [1e-13, 1e-6]");
  AlencarProfile pr;
  pr.tol = tol;
  pr.z_max = z_max;
  pr.z0 = 1e-3;
  const auto grid = detail::alencar_sample_grid(pr.z0, z_max);
  std::vector<double> E, E1;
  detail::alencar_integrate(pr.z0, grid, tol, E, E1);

  // start-point check from z0/2
  {
    std::vector<double> g2 = grid;
    g2.insert(g2.begin(), 0.5 * pr.z0);
    std::vector<double> Eh, E1h;
    detail::alencar_integrate(0.5 * pr.z0, g2, tol, Eh, E1h);
    pr.start_sensitivity = std::abs(Eh.back() - E.back());
  }

  std::vector<double> zs{0.0};
  std::vector<double> Es{1.0}, E1s{-1.0};
  zs.insert(zs.end(), grid.begin(), grid.end());
  Es.insert(Es.end(), E.begin(), E.end());
  E1s.insert(E1s.end(), E1.begin(), E1.end());
  pr.set_samples(std::move(zs), std::move(Es), std::move(E1s));
  for (double w2 : pr.W2)
    if (!(w2 > 0.0)) fail(ErrorKind::ShootingFailure, "profile lost convexity");

  const AsymptoticFit f = fit_asymptotics(pr);
  pr.Gamma2 = f.Gamma2;
  pr.Gamma3 = f.Gamma3;
  pr.Gamma5 = f.Gamma5;
  pr.Kstar = f.Kstar;
  return pr;
}

// K W(z/K) and its derivatives, as excess over z
inline Jet rescale_excess(const AlencarProfile& pr, double K, double zz) {
  if (!(K > 0.0)) fail(ErrorKind::InvalidParameter, "rescaling needs K > 0");
  const Jet e = pr.excess(zz / K);
  return {K * e.v, e.d1, e.d2 / K};
}

inline Jet rescale_W(const AlencarProfile& pr, double K, double zz) {
  const Jet e = rescale_excess(pr, K, zz);
  return {zz + e.v, 1.0 + e.d1, e.d2};
}

// W_K for the normalized profile z + 1/z^2 + ...: scale K * Kstar applied to the raw profile
inline Jet normalized_excess(const AlencarProfile& pr, double K, double zz) {
  return rescale_excess(pr, K * pr.Kstar, zz);
}

// W - z W', computed from the excess
inline double Phi(const AlencarProfile& pr, double zz) {
  const Jet e = pr.excess(zz);
  return e.v - zz * e.d1;
}

inline double Phi_rescaled(const AlencarProfile& pr, double K, double zz) {
  return K * Phi(pr, zz / K);
}

struct PhasePoint {
  double P;
  double Q;
};

struct PhaseVelocity {
  double dP;  // z P_z
  double dQ;  // z Q_z
  std::array<std::array<double, 2>, 2> jac;
};

// P = W', Q = z/W:  z P_z = 3(1+P^2)(Q-P),  z Q_z = Q(1 - PQ)
inline PhaseVelocity phase_system(const PhasePoint& pt) {
  const double P = pt.P, Q = pt.Q;
  PhaseVelocity v;
  v.dP = 3.0 * (1.0 + P * P) * (Q - P);
  v.dQ = Q * (1.0 - P * Q);
  v.jac[0][0] = 6.0 * P * (Q - P) - 3.0 * (1.0 + P * P);
  v.jac[0][1] = 3.0 * (1.0 + P * P);
  v.jac[1][0] = -Q * Q;
  v.jac[1][1] = 1.0 - 2.0 * P * Q;
  return v;
}

inline std::array<std::complex<double>, 2> eigenvalues2(const std::array<std::array<double, 2>, 2>& a) {
  const double tr = a[0][0] + a[1][1];
  const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
  const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4.0 * det));
  std::array<std::complex<double>, 2> ev{0.5 * (tr - disc), 0.5 * (tr + disc)};
  if (ev[0].real() > ev[1].real()) std::swap(ev[0], ev[1]);
  return ev;
}

// M_inf[eta] = (eta'/(1+W'^2))' + 3 eta'/xi + 3 eta/W^2
inline double linearized_at_alencar(const AlencarProfile& pr, const Jet& eta, double xi) {
  if (!(xi > 0.0)) fail(ErrorKind::DomainError, "M_inf needs xi > 0");
  const Jet w = pr.eval(xi);
  const double a = 1.0 + w.d1 * w.d1;
  return eta.d2 / a - 2.0 * w.d1 * w.d2 * eta.d1 / (a * a) + 3.0 * eta.d1 / xi + 3.0 * eta.v / (w.v * w.v);
}

// Phi with its two derivatives: Phi' = -xi W'', Phi'' = -W'' - xi W'''
inline Jet Phi_jet(const AlencarProfile& pr, double xi) {
  const Jet e = pr.excess(xi);
  return {e.v - xi * e.d1, -xi * e.d2, -e.d2 - xi * pr.third(xi)};
}

// M_0[h] = h''/2 + 3h'/xi + 3h/xi^2
inline double linearized_at_cone(const Jet& eta, double xi) {
  if (!(xi > 0.0)) fail(ErrorKind::DomainError, "M_0 needs xi > 0");
  return 0.5 * eta.d2 + 3.0 * eta.d1 / xi + 3.0 * eta.v / (xi * xi);
}

}  // namespace mcf
