#pragma once

// Conditional mean field equilibrium: the consistency fixed point for the
// mean potential path m_U of each neuron type, the linear/constant value
// function coefficients B and C built from it, and the population aggregate.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "neuromfg/core_model.hpp"
#include "neuromfg/riccati.hpp"

namespace neuromfg {

// A function sampled on a grid, optionally with its derivative.
struct Path {
  TimeGrid grid;
  std::vector<double> values;
  std::vector<double> derivative;  // empty when absent

  Path(TimeGrid g, std::vector<double> v, std::vector<double> d = {});
  static Path constant(const TimeGrid& g, double value);

  bool has_derivative() const { return !derivative.empty(); }
  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  // Linear interpolation between nodes.
  double at(double t) const;
};

double sup_norm(const std::vector<double>& v);
double sup_distance(const Path& a, const Path& b);

// Mean spike income path m_phi = k int z nu * m_U + ell nu([0,1]).
Path mean_income_path(const ModelParams& params, const JumpMeasure& nu,
                      const Path& mU);

// H(t_i, m_U) at every grid node; H is affine in m_U and equals c^2/2 B when
// m_U is consistent.
std::vector<double> H_path(const NeuronType& p, const ModelParams& params,
                           const JumpMeasure& nu, const CoefficientTable& table,
                           const Path& mU);

double H_eval(const NeuronType& p, const ModelParams& params,
              const JumpMeasure& nu, const CoefficientTable& table,
              std::size_t node, const Path& mU);

// Phi(m)(t_i) = u - int_0^{t_i} H + (k-1) int z nu int_0^{t_i} m + ell
// nu([0,1]) t_i.
Path Phi_map(const NeuronType& p, const ModelParams& params,
             const JumpMeasure& nu, const CoefficientTable& table,
             const Path& mU);

struct ContractionBound {
  double M1;  // Lipschitz constant of H in the sup norm
  double M;   // Lipschitz constant of Phi on [0, horizon]
};

ContractionBound contraction_bound(const NeuronType& p,
                                   const ModelParams& params,
                                   const JumpMeasure& nu,
                                   const CoefficientTable& table,
                                   double horizon);

// Largest horizon with M(horizon) <= target.
double contraction_horizon(const NeuronType& p, const ModelParams& params,
                           const JumpMeasure& nu,
                           const CoefficientTable& table, double target);

struct FixedPointResult {
  Path m;  // carries m' = -H + (k-1) int z nu m + ell nu([0,1])
  double residual = 0.0;
  std::size_t iterations = 0;
  bool used_marching = false;
  std::size_t sub_intervals = 0;
};

// Picard iteration from `initial` (default: the constant path u). After five
// consecutive residual ratios above 0.95 it switches to time marching over
// sub-intervals with M <= 0.5. Throws NonConvergence when max_iter is spent.
FixedPointResult solve_fixed_point(const NeuronType& p,
                                   const ModelParams& params,
                                   const JumpMeasure& nu,
                                   const CoefficientTable& table, double tol,
                                   std::size_t max_iter,
                                   const Path* initial = nullptr);

// Time-marching solve used as the Picard fallback; exposed for testing.
FixedPointResult solve_fixed_point_marching(const NeuronType& p,
                                            const ModelParams& params,
                                            const JumpMeasure& nu,
                                            const CoefficientTable& table,
                                            double tol, std::size_t max_iter);

// B(t) = 2 h(t) int_t^T (A/h)(-m_U' + m_phi + m_U int (z^2 - z) nu) ds.
// Throws MissingDerivative if mU has no derivative.
std::vector<double> B_coeff(const NeuronType& p, const ModelParams& params,
                            const JumpMeasure& nu,
                            const CoefficientTable& table, const Path& mU,
                            const Path& mPhi);

// C(t) = int_t^T (int z^2 nu A m_U^2 + B (m_phi - int z nu m_U) - c^2 B^2/4
// - B m_U') ds at every node. This is the (x - m_U)^0 part of the HJB
// equation with the quadratic ansatz.
std::vector<double> C_path(const NeuronType& p, const ModelParams& params,
                           const JumpMeasure& nu,
                           const CoefficientTable& table, const Path& mU,
                           const Path& mPhi, const std::vector<double>& B);

double C_coeff(const NeuronType& p, const ModelParams& params,
               const JumpMeasure& nu, const CoefficientTable& table,
               const Path& mU, const Path& mPhi, const std::vector<double>& B,
               std::size_t node);

double value_function(const CoefficientTable& table,
                      const std::vector<double>& B,
                      const std::vector<double>& C, std::size_t node, double x,
                      const Path& mU);

double optimal_feedback(const NeuronType& p, const ModelParams& params,
                        const CoefficientTable& table,
                        const std::vector<double>& B, std::size_t node,
                        double x, const Path& mU);

// mU* = sum_m w_m m_U^(m); mPhi* from mU*. Throws GridMismatch.
std::pair<Path, Path> aggregate_mean_field(const TypeDistribution& dist,
                                           const std::vector<Path>& per_type,
                                           const ModelParams& params,
                                           const JumpMeasure& nu);

struct TypeEquilibrium {
  CoefficientTable table;
  FixedPointResult fixed_point;
  ContractionBound bound;
  Path mPhi;
  // Coefficients of the type's own conditional equilibrium.
  std::vector<double> B;
  std::vector<double> C;
  // Coefficients against the aggregated mU*, mPhi* (n-player strategies).
  std::vector<double> B_star;
  std::vector<double> C_star;

  const Path& mU() const { return fixed_point.m; }
};

struct EquilibriumBundle {
  ModelParams params;
  JumpMeasure nu;
  TypeDistribution dist;
  TimeGrid grid;
  std::vector<TypeEquilibrium> types;
  Path mU_star;
  Path mPhi_star;
};

struct SolverOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
};

EquilibriumBundle solve_equilibrium(const TypeDistribution& dist,
                                    const ModelParams& params,
                                    const JumpMeasure& nu,
                                    const TimeGrid& grid,
                                    const SolverOptions& options = {});

// meanfield.csv: t, mU_star, mPhi_star, mU_<type>...
void write_meanfield_csv(const std::string& path,
                         const EquilibriumBundle& bundle);
// coefB_<type>.csv: t, B, C, B_star, C_star
void write_coefB_csv(const std::string& path, const EquilibriumBundle& bundle,
                     std::size_t type);

}  // namespace neuromfg
