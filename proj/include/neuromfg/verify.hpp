#pragma once

// Runtime invariant suite behind the "verify" experiment.

#include <cstddef>
#include <string>
#include <vector>

#include "neuromfg/game_eval.hpp"
#include "neuromfg/meanfield.hpp"

namespace neuromfg {

struct CheckResult {
  std::string name;
  double value;
  double threshold;
  bool passed;  // value <= threshold
};

// sup over grid nodes of |A_of_t - backward RK4 of the Riccati ODE|, RK4
// step at most T / min_steps.
double riccati_rk4_error(const NeuronType& p, const ModelParams& params,
                         const JumpMeasure& nu, const TimeGrid& grid,
                         std::size_t min_steps = 10000);

// Residual of the HJB equation for V = A (x - m)^2 + B (x - m) + C at an
// interior node, with V_t by central differences and the minimizing theta.
double hjb_residual(const NeuronType& p, const ModelParams& params,
                    const JumpMeasure& nu, const CoefficientTable& table,
                    const std::vector<double>& B, const std::vector<double>& C,
                    const Path& mU, const Path& mPhi, std::size_t node,
                    double x);

// Max HJB residual over interior nodes and x in mU(t) + {-1, -0.5, 0, 0.5, 1}.
double max_hjb_residual(const EquilibriumBundle& bundle, std::size_t atom);

std::vector<CheckResult> verify_suite(const EquilibriumBundle& bundle,
                                      const SolverOptions& solver,
                                      const McSettings& mc,
                                      const std::vector<double>& t_checks,
                                      const std::vector<std::size_t>& n_list);

}  // namespace neuromfg
