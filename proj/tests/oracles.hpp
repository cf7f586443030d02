#pragma once

// Reference computations for the tests. They take model inputs from the
// library types but never call the library's numerics.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "neuromfg/core_model.hpp"

namespace oracle {

using neuromfg::JumpMeasure;
using neuromfg::ModelParams;
using neuromfg::NeuronType;

struct Moments {
  double m1 = 0.0, m2 = 0.0;
};

inline Moments moments(const JumpMeasure& nu) {
  Moments m;
  for (const auto& a : nu.atoms()) {
    m.m1 += nu.rate() * a.q * a.z;
    m.m2 += nu.rate() * a.q * a.z * a.z;
  }
  return m;
}

// A' = c^2 A^2 + (2a + rho c - (m2 - 2 m1)) A + rho^2/4 - beta.
inline double riccati_rhs(const NeuronType& p, const ModelParams& pr,
                          const JumpMeasure& nu, double A) {
  const auto [m1, m2] = moments(nu);
  const double c = p.c();
  return c * c * A * A + (2.0 * p.a() + pr.rho() * c - (m2 - 2.0 * m1)) * A +
         pr.rho() * pr.rho() / 4.0 - pr.beta();
}

// Backward RK4 from A(T) = gamma; returns A at the n_nodes uniform nodes,
// taking `sub` RK4 steps per interval.
inline std::vector<double> riccati_rk4(const NeuronType& p,
                                       const ModelParams& pr,
                                       const JumpMeasure& nu,
                                       std::size_t n_steps, std::size_t sub) {
  std::vector<double> A(n_steps + 1);
  const double h = -pr.T() / static_cast<double>(n_steps * sub);
  double y = pr.gamma();
  A[n_steps] = y;
  auto f = [&](double v) { return riccati_rhs(p, pr, nu, v); };
  for (std::size_t i = n_steps; i-- > 0;) {
    for (std::size_t s = 0; s < sub; ++s) {
      const double k1 = f(y);
      const double k2 = f(y + 0.5 * h * k1);
      const double k3 = f(y + 0.5 * h * k2);
      const double k4 = f(y + h * k3);
      y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
    A[i] = y;
  }
  return A;
}

// Running trapezoid sums. fwd[i] = int_0^{t_i}, bwd[i] = int_{t_i}^T.
inline std::vector<double> cum_fwd(const std::vector<double>& f, double dt) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = 1; i < f.size(); ++i) {
    out[i] = out[i - 1] + 0.5 * dt * (f[i - 1] + f[i]);
  }
  return out;
}

inline std::vector<double> cum_bwd(const std::vector<double>& f, double dt) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = f.size() - 1; i-- > 0;) {
    out[i] = out[i + 1] + 0.5 * dt * (f[i] + f[i + 1]);
  }
  return out;
}

inline std::vector<double> sample(const std::function<double(double)>& f,
                                  double T, std::size_t n_steps) {
  std::vector<double> v(n_steps + 1);
  for (std::size_t i = 0; i <= n_steps; ++i) {
    v[i] = f(T * static_cast<double>(i) / static_cast<double>(n_steps));
  }
  return v;
}

// h on a grid from tabulated A: exp(-int_t^T (a + c^2 A + m1 + rho c/2)).
inline std::vector<double> weight_h(const NeuronType& p, const ModelParams& pr,
                                    const JumpMeasure& nu,
                                    const std::vector<double>& A, double dt) {
  const double m1 = moments(nu).m1;
  std::vector<double> g(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) {
    g[i] = p.a() + p.c() * p.c() * A[i] + m1 + pr.rho() * p.c() / 2.0;
  }
  auto I = cum_bwd(g, dt);
  for (double& x : I) x = std::exp(-x);
  return I;
}

// Discretized consistency map Phi(m) = K m + b on the nodes, assembled column
// by column from the affine form and solved as (I - K) m = b by LU.
struct DenseSystem {
  Eigen::MatrixXd K;
  Eigen::VectorXd b;

  Eigen::VectorXd solve() const {
    const auto n = K.rows();
    return (Eigen::MatrixXd::Identity(n, n) - K).partialPivLu().solve(b);
  }
};

inline DenseSystem dense_system(const NeuronType& p, const ModelParams& pr,
                                const JumpMeasure& nu,
                                const std::vector<double>& A,
                                const std::vector<double>& h, double dt) {
  const std::size_t n = A.size();
  const std::size_t N = n - 1;
  const auto [m1, m2] = moments(nu);
  (void)m2;
  const double c2 = p.c() * p.c();
  const double L = pr.ell() * nu.rate();
  const double q = pr.rho() * pr.rho() / 4.0 - pr.beta();
  std::vector<double> w(n), A_h(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = ((p.a() + pr.rho() * p.c() / 2.0 + pr.k() * m1) * A[i] + q) / h[i];
    A_h[i] = A[i] / h[i];
  }
  const auto I1 = cum_bwd(A_h, dt);

  DenseSystem sys{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  // Constant part: H0 = c^2 h L I1.
  std::vector<double> H0(n);
  for (std::size_t i = 0; i < n; ++i) H0[i] = c2 * h[i] * L * I1[i];
  const auto cH0 = cum_fwd(H0, dt);
  for (std::size_t i = 0; i < n; ++i) {
    sys.b(i) = p.u() - cH0[i] + L * dt * static_cast<double>(i);
  }
  std::vector<double> e(n, 0.0), H(n), wm(n);
  for (std::size_t j = 0; j < n; ++j) {
    e.assign(n, 0.0);
    e[j] = 1.0;
    for (std::size_t i = 0; i < n; ++i) wm[i] = w[i] * e[i];
    const auto I2 = cum_bwd(wm, dt);
    for (std::size_t i = 0; i < n; ++i) {
      H[i] = c2 * (-pr.gamma() * h[i] * e[N] + A[i] * e[i] + h[i] * I2[i]);
    }
    const auto cH = cum_fwd(H, dt);
    const auto cm = cum_fwd(e, dt);
    for (std::size_t i = 0; i < n; ++i) {
      sys.K(i, j) = -cH[i] + (pr.k() - 1.0) * m1 * cm[i];
    }
  }
  return sys;
}

// V_t + min_theta {drift V_x + theta^2 + rho theta d} + beta d^2 + jump term,
// for V = A d^2 + B d + C with d = x - m and V_t from the three given time
// slices by central difference.
struct Slice {
  double A, B, C, m;
  double V(double x) const {
    const double d = x - m;
    return A * d * d + B * d + C;
  }
};

inline double hjb_residual(const NeuronType& p, const ModelParams& pr,
                           const JumpMeasure& nu, const Slice& prev,
                           const Slice& now, const Slice& next, double dt,
                           double mphi, double x) {
  const double Vt = (next.V(x) - prev.V(x)) / (2.0 * dt);
  const double d = x - now.m;
  const double Vx = 2.0 * now.A * d + now.B;
  // argmin of theta^2 + (rho d + c Vx) theta
  const double th = -(pr.rho() * d + p.c() * Vx) / 2.0;
  double jump = 0.0;
  for (const auto& a : nu.atoms()) {
    jump += nu.rate() * a.q * (now.V(x - a.z * x) - now.V(x));
  }
  return Vt + (-p.a() * d + p.c() * th + mphi) * Vx + th * th +
         pr.rho() * th * d + pr.beta() * d * d + jump;
}

}  // namespace oracle
