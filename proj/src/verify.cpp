#include "neuromfg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "neuromfg/riccati.hpp"

namespace neuromfg {

double riccati_rk4_error(const NeuronType& p, const ModelParams& params,
                         const JumpMeasure& nu, const TimeGrid& grid,
                         std::size_t min_steps) {
  const std::size_t N = grid.n_steps();
  const std::size_t sub = std::max<std::size_t>(1, (min_steps + N - 1) / N);
  const double h = -grid.dt() / static_cast<double>(sub);
  const auto f = [&](double A) { return riccati_ode_rhs(p, params, nu, A); };
  double A = params.gamma();
  double err = std::abs(A - A_of_t(p, params, nu, grid.node(N)));
  for (std::size_t i = N; i-- > 0;) {
    for (std::size_t s = 0; s < sub; ++s) {
      const double k1 = f(A);
      const double k2 = f(A + 0.5 * h * k1);
      const double k3 = f(A + 0.5 * h * k2);
      const double k4 = f(A + h * k3);
      A += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    err = std::max(err, std::abs(A - A_of_t(p, params, nu, grid.node(i))));
  }
  return err;
}

double hjb_residual(const NeuronType& p, const ModelParams& params,
                    const JumpMeasure& nu, const CoefficientTable& table,
                    const std::vector<double>& B, const std::vector<double>& C,
                    const Path& mU, const Path& mPhi, std::size_t node,
                    double x) {
  const auto V = [&](std::size_t i, double y) {
    const double d = y - mU[i];
    return table.A[i] * d * d + B[i] * d + C[i];
  };
  const double dt = table.grid.dt();
  const double V_t = (V(node + 1, x) - V(node - 1, x)) / (2.0 * dt);
  const double d = x - mU[node];
  const double V_x = 2.0 * table.A[node] * d + B[node];
  const double theta = -0.5 * p.c() * V_x - 0.5 * params.rho() * d;
  double jumps = 0.0;
  for (const auto& atom : nu.atoms()) {
    jumps += nu.rate() * atom.q * (V(node, x * (1.0 - atom.z)) - V(node, x));
  }
  return V_t + V_x * (-p.a() * d + mPhi[node] + p.c() * theta) + theta * theta +
         params.rho() * theta * d + params.beta() * d * d + jumps;
}

double max_hjb_residual(const EquilibriumBundle& bundle, std::size_t atom) {
  const auto& te = bundle.types.at(atom);
  const NeuronType& p = bundle.dist.type(atom);
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < bundle.grid.size(); ++i) {
    for (double dx : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      const double r = hjb_residual(p, bundle.params, bundle.nu, te.table, te.B,
                                    te.C, te.mU(), te.mPhi, i, te.mU()[i] + dx);
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

std::vector<CheckResult> verify_suite(const EquilibriumBundle& bundle,
                                      const SolverOptions& solver,
                                      const McSettings& mc,
                                      const std::vector<double>& t_checks,
                                      const std::vector<std::size_t>& n_list) {
  std::vector<CheckResult> out;
  const auto check = [&](std::string name, double value, double threshold) {
    const bool ok = std::isfinite(value) && value <= threshold;
    out.push_back({std::move(name), value, threshold, ok});
  };
  const ModelParams& params = bundle.params;
  const JumpMeasure& nu = bundle.nu;

  for (std::size_t m = 0; m < bundle.types.size(); ++m) {
    const std::string tag = "[" + std::to_string(m) + "]";
    const NeuronType& p = bundle.dist.type(m);
    const auto& te = bundle.types[m];
    check("riccati_rk4_sup_error" + tag,
          riccati_rk4_error(p, params, nu, bundle.grid), 1e-6);
    check("riccati_terminal" + tag,
          std::abs(A_of_t(p, params, nu, params.T()) - params.gamma()), 0.0);
    check("fixed_point_residual" + tag, te.fixed_point.residual, solver.tol);
    check("B_terminal" + tag, std::abs(te.B.back()), 0.0);
    check("C_terminal" + tag, std::abs(te.C.back()), 0.0);
    const auto H = H_path(p, params, nu, te.table, te.mU());
    double bh = 0.0;
    for (std::size_t i = 0; i < H.size(); ++i) {
      bh = std::max(bh, std::abs(0.5 * p.c() * p.c() * te.B[i] - H[i]));
    }
    check("B_vs_H_sup_error" + tag, bh, 1e-7);
    check("hjb_residual" + tag, max_hjb_residual(bundle, m), 1e-4);

    const auto report = consistency_report(bundle, m, mc, t_checks);
    double violations = 0.0;
    for (const auto& r : report.rows) violations += r.violated ? 1.0 : 0.0;
    check("consistency_violations" + tag, violations, 0.0);

    // Limiting problem: theta* attains V(0, u) and beats every deviation.
    const FeedbackLaw star = atom_equilibrium_law(bundle, m);
    const SimOptions options = sim_options(mc, params.T());
    const auto base = simulate_representative(p, params, nu, star, bundle.mU_star,
                                              bundle.mPhi_star, options);
    const auto J = estimate_from_samples(base.cost[0], CostFunctional::Auxiliary);
    const double V = limiting_optimum(bundle, m);
    check("limiting_optimum_z" + tag,
          J.se > 0.0 ? std::abs(J.mean - V) / J.se : std::abs(J.mean - V) / 1e-8, 3.0);
    double worst_gain = -std::numeric_limits<double>::infinity();
    for (const auto& dev : deviation_family(bundle, m)) {
      const auto run = simulate_representative(p, params, nu, dev.law, bundle.mU_star,
                                               bundle.mPhi_star, options);
      std::vector<double> diff(run.cost[0].size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = base.cost[0][i] - run.cost[0][i];
      const auto d = estimate_from_samples(diff, CostFunctional::Auxiliary);
      worst_gain = std::max(worst_gain, d.mean - 3.0 * d.se);
    }
    // The family contains theta* itself, whose paired difference is roundoff.
    check("limiting_deviation_gain" + tag, worst_gain, 1e-12);
  }

  for (const auto& rec : nash_gap_curve(bundle, n_list, mc)) {
    const std::string tag = "[n=" + std::to_string(rec.n) + ",atom=" + std::to_string(rec.atom) + "]";
    double excess = -std::numeric_limits<double>::infinity();
    for (const auto& d : rec.deviations) {
      const double se = std::sqrt(rec.gap_se * rec.gap_se + d.se * d.se);
      excess = std::max(excess, d.improvement - rec.gap - 3.0 * se);
    }
    check("nash_certificate_excess" + tag, excess, 0.0);
    check("nash_gap_lower_bound" + tag, -rec.gap - 3.0 * rec.gap_se, 0.0);
  }
  return out;
}

}  // namespace neuromfg
