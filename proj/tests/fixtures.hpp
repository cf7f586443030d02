#pragma once

#include "neuromfg/core_model.hpp"
#include "neuromfg/meanfield.hpp"

namespace fixture {

using namespace neuromfg;

// Single type p = (1, 1, 1), rho = 0.5, beta = gamma = 1, T = 1, one spike
// mark z = 0.5 at rate 1, k = 0.5, ell = 0.2.
inline NeuronType demo_type() { return NeuronType(1.0, 1.0, 1.0); }
inline ModelParams demo_params() { return ModelParams(0.5, 1.0, 1.0, 0.5, 0.2, 1.0); }
inline JumpMeasure demo_nu() { return JumpMeasure(1.0, {{0.5, 1.0}}); }
inline TypeDistribution demo_dist() { return TypeDistribution({{demo_type(), 1.0}}); }

inline EquilibriumBundle demo_bundle(std::size_t n_steps = 2000) {
  return solve_equilibrium(demo_dist(), demo_params(), demo_nu(),
                           TimeGrid(1.0, n_steps));
}

// No spike income (ell = 0), k = 1 and u = 0: m = 0 solves the consistency
// equation.
inline ModelParams silent_params() {
  return ModelParams(unchecked, 0.5, 1.0, 1.0, 1.0, 0.0, 1.0);
}
inline NeuronType silent_type() { return NeuronType(unchecked, 0.0, 1.0, 1.0); }

}  // namespace fixture
