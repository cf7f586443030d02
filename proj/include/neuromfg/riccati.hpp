#pragma once

// Closed-form quadratic coefficient A_p(t) of the value function and the
// exponential weight h_p(t) that discounts the linear coefficient.
//
// A_p solves A' = c^2 A^2 + (2a + rho c - int (z^2 - 2z) nu) A + rho^2/4 - beta
// backward from A(T) = gamma. With b = a + rho c/2 - int (z^2 - 2z) nu / 2 the
// characteristic roots are delta(+/-) = -b +/- sqrt(R), R = b^2 - c^2
// (rho^2/4 - beta) > 0.

#include <string>
#include <vector>

#include "neuromfg/core_model.hpp"

namespace neuromfg {

struct RiccatiConstants {
  double R;
  double delta_plus;
  double delta_minus;
};

RiccatiConstants riccati_constants(const NeuronType& p,
                                   const ModelParams& params,
                                   const JumpMeasure& nu);

// Throws DomainError for t outside [0, T].
double A_of_t(const NeuronType& p, const ModelParams& params,
              const JumpMeasure& nu, double t);

double riccati_ode_rhs(const NeuronType& p, const ModelParams& params,
                       const JumpMeasure& nu, double A);

// h(t_i) = exp(-int_{t_i}^T (a + c^2 A + int z nu + rho c/2) ds), trapezoid on
// the grid nodes.
std::vector<double> h_of_t(const NeuronType& p, const ModelParams& params,
                           const JumpMeasure& nu, const TimeGrid& grid);

// A and h tabulated on one grid for one neuron type.
struct CoefficientTable {
  TimeGrid grid;
  std::vector<double> A;
  std::vector<double> h;

  // Linear interpolation between nodes.
  double A_at(double t) const;
  double h_at(double t) const;
};

CoefficientTable make_coefficient_table(const NeuronType& p,
                                        const ModelParams& params,
                                        const JumpMeasure& nu,
                                        const TimeGrid& grid);

// Columns t, A, h at 17 significant digits.
void write_coefficients_csv(const std::string& path,
                            const CoefficientTable& table);

}  // namespace neuromfg
