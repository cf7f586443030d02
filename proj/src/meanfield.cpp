#include "neuromfg/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "neuromfg/csv.hpp"
#include "neuromfg/errors.hpp"

namespace neuromfg {

namespace {

// Per-type quantities that do not depend on the candidate path m_U.
struct AffineTerms {
  double u;
  double c2;
  double gamma;
  double income;      // ell nu([0,1])
  double self_decay;  // (k - 1) int z nu
  std::vector<double> A;
  std::vector<double> h;
  std::vector<double> w;         // ((a + rho c/2 + k int z nu) A + q) / h
  std::vector<double> tail_A_h;  // int_t^T A/h

  AffineTerms(const NeuronType& p, const ModelParams& params,
              const JumpMeasure& nu, const CoefficientTable& table)
      : u(p.u()),
        c2(p.c() * p.c()),
        gamma(params.gamma()),
        income(income_offset(params, nu)),
        self_decay((params.k() - 1.0) * nu.m1()),
        A(table.A),
        h(table.h),
        w(table.A.size()) {
    const double kappa =
        p.a() + 0.5 * params.rho() * p.c() + params.k() * nu.m1();
    const double q = params.cost_constant();
    std::vector<double> a_over_h(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) {
      w[i] = (kappa * A[i] + q) / h[i];
      a_over_h[i] = A[i] / h[i];
    }
    tail_A_h = quad::cumulative_backward(a_over_h, table.grid.dt());
  }

  double H_node(std::size_t i, double m_i, double m_T, double tail) const {
    return c2 * (-gamma * h[i] * m_T + A[i] * m_i +
                 h[i] * (income * tail_A_h[i] + tail));
  }
};

void check_grid(const TimeGrid& expected, const TimeGrid& got) {
  if (!(expected == got)) throw GridMismatch("path grid differs from table grid");
}

std::vector<double> H_from_terms(const AffineTerms& terms, const Path& mU) {
  const std::size_t n = mU.size();
  std::vector<double> wm(n);
  for (std::size_t i = 0; i < n; ++i) wm[i] = terms.w[i] * mU[i];
  const auto tail = quad::cumulative_backward(wm, mU.grid.dt());
  std::vector<double> H(n);
  const double m_T = mU.values.back();
  for (std::size_t i = 0; i < n; ++i) {
    H[i] = terms.H_node(i, mU[i], m_T, tail[i]);
  }
  return H;
}

std::vector<double> Phi_from_terms(const AffineTerms& terms, const Path& mU) {
  const double dt = mU.grid.dt();
  const auto H = H_from_terms(terms, mU);
  const auto int_H = quad::cumulative_forward(H, dt);
  const auto int_m = quad::cumulative_forward(mU.values, dt);
  std::vector<double> out(mU.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = terms.u - int_H[i] + terms.self_decay * int_m[i] +
             terms.income * mU.grid.node(i);
  }
  out[0] = terms.u;
  return out;
}

std::vector<double> derivative_from_terms(const AffineTerms& terms,
                                          const Path& m) {
  const auto H = H_from_terms(terms, m);
  std::vector<double> d(m.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = -H[i] + terms.self_decay * m[i] + terms.income;
  }
  return d;
}

Path with_derivative(const AffineTerms& terms, Path m) {
  m.derivative = derivative_from_terms(terms, m);
  return m;
}

// Marching state at the last solved node.
struct MarchState {
  double m;
  double tail_prefix;  // int_0^t w m
  double H;
  double int_H;
  double int_m;
};

}  // namespace

Path::Path(TimeGrid g, std::vector<double> v, std::vector<double> d)
    : grid(g), values(std::move(v)), derivative(std::move(d)) {
  if (values.size() != grid.size()) throw GridMismatch("path length != grid size");
  if (!derivative.empty() && derivative.size() != grid.size()) {
    throw GridMismatch("path derivative length != grid size");
  }
}

Path Path::constant(const TimeGrid& g, double value) {
  return Path(g, std::vector<double>(g.size(), value),
              std::vector<double>(g.size(), 0.0));
}

double Path::at(double t) const {
  const auto [i, w] = grid.locate(t);
  return (1.0 - w) * values[i] + w * values[i + 1];
}

double sup_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

double sup_distance(const Path& a, const Path& b) {
  if (!(a.grid == b.grid)) throw GridMismatch("sup_distance: grids differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (!(d <= s)) s = d;  // propagates NaN
  }
  return s;
}

Path mean_income_path(const ModelParams& params, const JumpMeasure& nu,
                      const Path& mU) {
  const double slope = params.k() * nu.m1();
  const double offset = income_offset(params, nu);
  std::vector<double> v(mU.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = slope * mU[i] + offset;
  std::vector<double> d;
  if (mU.has_derivative()) {
    d.resize(mU.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = slope * mU.derivative[i];
  }
  return Path(mU.grid, std::move(v), std::move(d));
}

std::vector<double> H_path(const NeuronType& p, const ModelParams& params,
                           const JumpMeasure& nu, const CoefficientTable& table,
                           const Path& mU) {
  check_grid(table.grid, mU.grid);
  return H_from_terms(AffineTerms(p, params, nu, table), mU);
}

double H_eval(const NeuronType& p, const ModelParams& params,
              const JumpMeasure& nu, const CoefficientTable& table,
              std::size_t node, const Path& mU) {
  return H_path(p, params, nu, table, mU).at(node);
}

Path Phi_map(const NeuronType& p, const ModelParams& params,
             const JumpMeasure& nu, const CoefficientTable& table,
             const Path& mU) {
  check_grid(table.grid, mU.grid);
  return Path(mU.grid, Phi_from_terms(AffineTerms(p, params, nu, table), mU));
}

ContractionBound contraction_bound(const NeuronType& p,
                                   const ModelParams& params,
                                   const JumpMeasure& nu,
                                   const CoefficientTable& table,
                                   double horizon) {
  const AffineTerms terms(p, params, nu, table);
  const double h_sup = sup_norm(terms.h);
  const double M1 = terms.gamma * terms.c2 * h_sup +
                    terms.c2 * sup_norm(terms.A) +
                    h_sup * terms.c2 * sup_norm(terms.w) * horizon;
  const double M = M1 * horizon + std::abs(terms.self_decay) * horizon;
  return {M1, M};
}

double contraction_horizon(const NeuronType& p, const ModelParams& params,
                           const JumpMeasure& nu,
                           const CoefficientTable& table, double target) {
  const AffineTerms terms(p, params, nu, table);
  const double h_sup = sup_norm(terms.h);
  // M(s) = quad s^2 + lin s; positive root of M(s) = target.
  const double quad_coef = h_sup * terms.c2 * sup_norm(terms.w);
  const double lin = terms.gamma * terms.c2 * h_sup +
                     terms.c2 * sup_norm(terms.A) + std::abs(terms.self_decay);
  if (quad_coef == 0.0 && lin == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * target /
         (lin + std::sqrt(lin * lin + 4.0 * quad_coef * target));
}

FixedPointResult solve_fixed_point_marching(const NeuronType& p,
                                            const ModelParams& params,
                                            const JumpMeasure& nu,
                                            const CoefficientTable& table,
                                            double tol, std::size_t max_iter) {
  // H depends on the future through m(T) and int_t^T w m. Writing
  // int_t^T w m = W - int_0^t w m with W = int_0^T w m leaves a causal
  // Volterra equation in m for fixed scalars (m(T), W), which is marched
  // forward block by block. The scalars are closed afterwards with one 2x2
  // solve since the marched path is affine in them.
  const AffineTerms terms(p, params, nu, table);
  const TimeGrid& grid = table.grid;
  const std::size_t N = grid.n_steps();
  const double dt = grid.dt();
  const double horizon = contraction_horizon(p, params, nu, table, 0.5);
  const std::size_t block = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::min<double>(
             static_cast<double>(N), std::floor(horizon / dt))));
  const double inner_tol = 1e-3 * tol;

  std::size_t iterations = 0;
  std::size_t sub_intervals = 0;

  auto march = [&](double m_T, double W) {
    std::vector<double> m(N + 1, terms.u);
    MarchState state{terms.u, 0.0, terms.H_node(0, terms.u, m_T, W), 0.0, 0.0};
    std::vector<double> trial(N + 1);
    sub_intervals = 0;
    for (std::size_t s = 0; s < N; s += block) {
      const std::size_t e = std::min(N, s + block);
      ++sub_intervals;
      for (std::size_t j = s + 1; j <= e; ++j) m[j] = state.m;
      bool converged = false;
      for (std::size_t it = 0; it < max_iter; ++it) {
        ++iterations;
        MarchState cur = state;
        double prev_m = state.m;
        double change = 0.0;
        for (std::size_t j = s + 1; j <= e; ++j) {
          const double tail_prefix =
              cur.tail_prefix + 0.5 * dt * (terms.w[j - 1] * prev_m + terms.w[j] * m[j]);
          const double H = terms.H_node(j, m[j], m_T, W - tail_prefix);
          const double int_H = cur.int_H + 0.5 * dt * (cur.H + H);
          const double int_m = cur.int_m + 0.5 * dt * (prev_m + m[j]);
          trial[j] = terms.u - int_H + terms.self_decay * int_m +
                     terms.income * grid.node(j);
          change = std::max(change, std::abs(trial[j] - m[j]));
          cur = {m[j], tail_prefix, H, int_H, int_m};
          prev_m = m[j];
        }
        if (!std::isfinite(change)) break;
        for (std::size_t j = s + 1; j <= e; ++j) m[j] = trial[j];
        if (change <= inner_tol * std::max(1.0, std::abs(state.m))) {
          converged = true;
          break;
        }
      }
      if (!converged) throw NonConvergence(std::numeric_limits<double>::quiet_NaN(), iterations);
      // Re-evaluate the accumulators at the accepted values.
      MarchState cur = state;
      for (std::size_t j = s + 1; j <= e; ++j) {
        const double tail_prefix =
            cur.tail_prefix + 0.5 * dt * (terms.w[j - 1] * cur.m + terms.w[j] * m[j]);
        const double H = terms.H_node(j, m[j], m_T, W - tail_prefix);
        cur = {m[j], tail_prefix, H, cur.int_H + 0.5 * dt * (cur.H + H),
               cur.int_m + 0.5 * dt * (cur.m + m[j])};
      }
      state = cur;
    }
    return m;
  };

  auto weighted_total = [&](const std::vector<double>& m) {
    std::vector<double> wm(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) wm[i] = terms.w[i] * m[i];
    return quad::trapezoid(wm, dt);
  };

  const auto base = march(0.0, 0.0);
  const auto unit_T = march(1.0, 0.0);
  const auto unit_W = march(0.0, 1.0);
  const double base_W = weighted_total(base);
  const double dT_T = unit_T[N] - base[N];
  const double dT_W = weighted_total(unit_T) - base_W;
  const double dW_T = unit_W[N] - base[N];
  const double dW_W = weighted_total(unit_W) - base_W;
  // [1 - dT_T, -dW_T; -dT_W, 1 - dW_W] (m_T, W) = (base(T), base_W)
  const double a11 = 1.0 - dT_T, a12 = -dW_T;
  const double a21 = -dT_W, a22 = 1.0 - dW_W;
  const double det = a11 * a22 - a12 * a21;
  if (!(std::abs(det) > 0.0) || !std::isfinite(det)) {
    throw NonConvergence(std::numeric_limits<double>::infinity(), iterations);
  }
  double m_T = (base[N] * a22 - a12 * base_W) / det;
  double W = (a11 * base_W - a21 * base[N]) / det;

  Path m(grid, march(m_T, W));
  double residual = sup_distance(Path(grid, Phi_from_terms(terms, m)), m);
  // The unit marches lose digits when |m| is large; refine the scalars
  // with the same 2x2 matrix until the residual stops improving.
  for (int refine = 0; refine < 10 && !(residual < tol); ++refine) {
    const double r_T = m[N] - m_T;
    const double r_W = weighted_total(m.values) - W;
    const double next_T = m_T + (r_T * a22 - a12 * r_W) / det;
    const double next_W = W + (a11 * r_W - a21 * r_T) / det;
    Path next(grid, march(next_T, next_W));
    const double next_residual =
        sup_distance(Path(grid, Phi_from_terms(terms, next)), next);
    if (!(next_residual < residual)) break;
    m_T = next_T;
    W = next_W;
    m = std::move(next);
    residual = next_residual;
  }
  FixedPointResult result{with_derivative(terms, m), residual, iterations,
                          true, sub_intervals};
  return result;
}

FixedPointResult solve_fixed_point(const NeuronType& p,
                                   const ModelParams& params,
                                   const JumpMeasure& nu,
                                   const CoefficientTable& table, double tol,
                                   std::size_t max_iter, const Path* initial) {
  if (!(tol > 0.0)) throw InvalidArgument("fixed point tolerance must be > 0");
  const AffineTerms terms(p, params, nu, table);
  Path m = initial ? *initial : Path::constant(table.grid, p.u());
  check_grid(table.grid, m.grid);

  double prev_residual = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Path phi(m.grid, Phi_from_terms(terms, m));
    const double residual = sup_distance(phi, m);
    if (residual < tol) {
      return {with_derivative(terms, std::move(m)), residual, it, false, 0};
    }
    stalled = (residual > 0.95 * prev_residual) ? stalled + 1 : 0;
    if (stalled >= 5 || !std::isfinite(residual)) {
      auto result = solve_fixed_point_marching(p, params, nu, table, tol,
                                               max_iter);
      result.iterations += it + 1;
      if (!(result.residual < tol)) {
        throw NonConvergence(result.residual, result.iterations);
      }
      return result;
    }
    prev_residual = residual;
    m = std::move(phi);
  }
  throw NonConvergence(prev_residual, max_iter);
}

std::vector<double> B_coeff(const NeuronType& p, const ModelParams& params,
                            const JumpMeasure& nu,
                            const CoefficientTable& table, const Path& mU,
                            const Path& mPhi) {
  (void)p;
  (void)params;
  check_grid(table.grid, mU.grid);
  check_grid(table.grid, mPhi.grid);
  if (!mU.has_derivative()) throw MissingDerivative("B_coeff needs m_U'");
  const double jump_drift = nu.m2() - nu.m1();
  std::vector<double> f(mU.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = table.A[i] / table.h[i] *
           (-mU.derivative[i] + mPhi[i] + mU[i] * jump_drift);
  }
  auto B = quad::cumulative_backward(f, table.grid.dt());
  for (std::size_t i = 0; i < B.size(); ++i) B[i] *= 2.0 * table.h[i];
  return B;
}

std::vector<double> C_path(const NeuronType& p, const ModelParams& params,
                           const JumpMeasure& nu,
                           const CoefficientTable& table, const Path& mU,
                           const Path& mPhi, const std::vector<double>& B) {
  (void)params;
  check_grid(table.grid, mU.grid);
  check_grid(table.grid, mPhi.grid);
  if (!mU.has_derivative()) throw MissingDerivative("C_coeff needs m_U'");
  if (B.size() != mU.size()) throw GridMismatch("B length != grid size");
  const double c2 = p.c() * p.c();
  std::vector<double> g(mU.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double A = table.A[i];
    const double m = mU[i];
    g[i] = nu.m2() * A * m * m + B[i] * (mPhi[i] - nu.m1() * m) -
           0.25 * c2 * B[i] * B[i] - B[i] * mU.derivative[i];
  }
  return quad::cumulative_backward(g, table.grid.dt());
}

double C_coeff(const NeuronType& p, const ModelParams& params,
               const JumpMeasure& nu, const CoefficientTable& table,
               const Path& mU, const Path& mPhi, const std::vector<double>& B,
               std::size_t node) {
  return C_path(p, params, nu, table, mU, mPhi, B).at(node);
}

double value_function(const CoefficientTable& table,
                      const std::vector<double>& B,
                      const std::vector<double>& C, std::size_t node, double x,
                      const Path& mU) {
  const double d = x - mU[node];
  return table.A[node] * d * d + B[node] * d + C[node];
}

double optimal_feedback(const NeuronType& p, const ModelParams& params,
                        const CoefficientTable& table,
                        const std::vector<double>& B, std::size_t node,
                        double x, const Path& mU) {
  return (-p.c() * table.A[node] - 0.5 * params.rho()) * (x - mU[node]) -
         0.5 * p.c() * B[node];
}

std::pair<Path, Path> aggregate_mean_field(const TypeDistribution& dist,
                                           const std::vector<Path>& per_type,
                                           const ModelParams& params,
                                           const JumpMeasure& nu) {
  if (per_type.size() != dist.size() || per_type.empty()) {
    throw GridMismatch("one path per type atom required");
  }
  const TimeGrid& grid = per_type.front().grid;
  bool derivative = true;
  for (const auto& path : per_type) {
    check_grid(grid, path.grid);
    derivative = derivative && path.has_derivative();
  }
  std::vector<double> v(grid.size(), 0.0);
  std::vector<double> d(derivative ? grid.size() : 0, 0.0);
  for (std::size_t m = 0; m < dist.size(); ++m) {
    const double w = dist.weight(m);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] += w * per_type[m][i];
      if (derivative) d[i] += w * per_type[m].derivative[i];
    }
  }
  Path mU(grid, std::move(v), std::move(d));
  Path mPhi = mean_income_path(params, nu, mU);
  return {std::move(mU), std::move(mPhi)};
}

EquilibriumBundle solve_equilibrium(const TypeDistribution& dist,
                                    const ModelParams& params,
                                    const JumpMeasure& nu,
                                    const TimeGrid& grid,
                                    const SolverOptions& options) {
  std::vector<TypeEquilibrium> types;
  std::vector<Path> per_type;
  for (const auto& atom : dist.atoms()) {
    const NeuronType& p = atom.type;
    auto table = make_coefficient_table(p, params, nu, grid);
    auto fp = solve_fixed_point(p, params, nu, table, options.tol,
                                options.max_iter);
    const auto bound = contraction_bound(p, params, nu, table, params.T());
    Path mPhi = mean_income_path(params, nu, fp.m);
    auto B = B_coeff(p, params, nu, table, fp.m, mPhi);
    auto C = C_path(p, params, nu, table, fp.m, mPhi, B);
    per_type.push_back(fp.m);
    types.push_back(TypeEquilibrium{std::move(table), std::move(fp), bound,
                                    std::move(mPhi), std::move(B), std::move(C),
                                    {}, {}});
  }
  auto [mU_star, mPhi_star] = aggregate_mean_field(dist, per_type, params, nu);
  for (std::size_t m = 0; m < types.size(); ++m) {
    const NeuronType& p = dist.type(m);
    auto& te = types[m];
    te.B_star = B_coeff(p, params, nu, te.table, mU_star, mPhi_star);
    te.C_star = C_path(p, params, nu, te.table, mU_star, mPhi_star, te.B_star);
  }
  return EquilibriumBundle{params, nu, dist, grid, std::move(types),
                           std::move(mU_star), std::move(mPhi_star)};
}

void write_meanfield_csv(const std::string& path,
                         const EquilibriumBundle& bundle) {
  std::vector<std::string> header{"t", "mU_star", "mPhi_star"};
  for (std::size_t m = 0; m < bundle.types.size(); ++m) {
    header.push_back("mU_" + std::to_string(m));
  }
  CsvWriter csv(path, header);
  for (std::size_t i = 0; i < bundle.grid.size(); ++i) {
    std::vector<double> row{bundle.grid.node(i), bundle.mU_star[i],
                            bundle.mPhi_star[i]};
    for (const auto& te : bundle.types) row.push_back(te.mU()[i]);
    csv.row(row);
  }
}

void write_coefB_csv(const std::string& path, const EquilibriumBundle& bundle,
                     std::size_t type) {
  const auto& te = bundle.types.at(type);
  CsvWriter csv(path, {"t", "B", "C", "B_star", "C_star"});
  for (std::size_t i = 0; i < bundle.grid.size(); ++i) {
    csv.row({bundle.grid.node(i), te.B[i], te.C[i], te.B_star[i], te.C_star[i]});
  }
}

}  // namespace neuromfg
