#include "neuromfg/riccati.hpp"

#include <cmath>

#include "neuromfg/csv.hpp"
#include "neuromfg/errors.hpp"

namespace neuromfg {

namespace {

double half_linear_coefficient(const NeuronType& p, const ModelParams& params,
                               const JumpMeasure& nu) {
  return p.a() + 0.5 * params.rho() * p.c() - 0.5 * nu.compensator_moment();
}

double lerp_table(const TimeGrid& grid, const std::vector<double>& v,
                  double t) {
  const auto [i, w] = grid.locate(t);
  return (1.0 - w) * v[i] + w * v[i + 1];
}

}  // namespace

RiccatiConstants riccati_constants(const NeuronType& p,
                                   const ModelParams& params,
                                   const JumpMeasure& nu) {
  const double b = half_linear_coefficient(p, params, nu);
  const double c2q = p.c() * p.c() * params.cost_constant();
  const double R = b * b - c2q;
  // b > 0 because int (z^2 - 2z) nu <= 0, so delta_minus carries no
  // cancellation; delta_plus follows from the root product c^2 q.
  const double delta_minus = -b - std::sqrt(R);
  const double delta_plus = c2q / delta_minus;
  return {R, delta_plus, delta_minus};
}

double A_of_t(const NeuronType& p, const ModelParams& params,
              const JumpMeasure& nu, double t) {
  const double T = params.T();
  if (!(t >= 0.0 && t <= T)) {
    throw DomainError("A_of_t: t=" + std::to_string(t) + " outside [0, T]");
  }
  const double gamma = params.gamma();
  if (t == T) return gamma;
  const auto [R, dp, dm] = riccati_constants(p, params, nu);
  const double q = params.cost_constant();
  const double c2 = p.c() * p.c();
  // Numerator and denominator of the closed form divided by
  // exp((delta+ - delta-)(T - t)) to stay finite on long horizons.
  const double decay = std::exp(-(dp - dm) * (T - t));
  const double one_minus = -std::expm1(-(dp - dm) * (T - t));
  const double num = q * one_minus - gamma * (dp - dm * decay);
  const double den = dm - dp * decay - c2 * gamma * one_minus;
  return num / den;
}

double riccati_ode_rhs(const NeuronType& p, const ModelParams& params,
                       const JumpMeasure& nu, double A) {
  const double c = p.c();
  return c * c * A * A +
         (2.0 * p.a() + params.rho() * c - nu.compensator_moment()) * A +
         params.cost_constant();
}

std::vector<double> h_of_t(const NeuronType& p, const ModelParams& params,
                           const JumpMeasure& nu, const TimeGrid& grid) {
  const double c2 = p.c() * p.c();
  const double base = p.a() + nu.m1() + 0.5 * params.rho() * p.c();
  std::vector<double> rate(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rate[i] = base + c2 * A_of_t(p, params, nu, grid.node(i));
  }
  auto h = quad::cumulative_backward(rate, grid.dt());
  for (double& v : h) v = std::exp(-v);
  return h;
}

double CoefficientTable::A_at(double t) const { return lerp_table(grid, A, t); }

double CoefficientTable::h_at(double t) const { return lerp_table(grid, h, t); }

CoefficientTable make_coefficient_table(const NeuronType& p,
                                        const ModelParams& params,
                                        const JumpMeasure& nu,
                                        const TimeGrid& grid) {
  if (grid.T() != params.T()) {
    throw GridMismatch("coefficient grid horizon differs from model T");
  }
  CoefficientTable table{grid, std::vector<double>(grid.size()), {}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    table.A[i] = A_of_t(p, params, nu, grid.node(i));
  }
  table.h = h_of_t(p, params, nu, grid);
  return table;
}

void write_coefficients_csv(const std::string& path,
                            const CoefficientTable& table) {
  CsvWriter csv(path, {"t", "A", "h"});
  for (std::size_t i = 0; i < table.grid.size(); ++i) {
    csv.row({table.grid.node(i), table.A[i], table.h[i]});
  }
}

}  // namespace neuromfg
