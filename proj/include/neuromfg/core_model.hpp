#pragma once

// Model constants shared by every module: cost/coupling parameters, neuron
// types, the spike (jump) measure, the type distribution and the time grid.
// Everything here is immutable after construction.

#include <cstddef>
#include <utility>
#include <vector>

namespace neuromfg {

// Tag for constructing types that skip invariant checks. Only used to probe
// degenerate limits (e.g. u = 0 or ell = 0) in tests.
struct Unchecked {
  explicit Unchecked() = default;
};
inline constexpr Unchecked unchecked{};

class ModelParams {
 public:
  // Throws InvalidArgument unless all scalars are positive and rho^2 < 4 beta.
  ModelParams(double rho, double beta, double gamma, double k, double ell,
              double T);
  ModelParams(Unchecked, double rho, double beta, double gamma, double k,
              double ell, double T)
      : rho_(rho), beta_(beta), gamma_(gamma), k_(k), ell_(ell), T_(T) {}

  double rho() const { return rho_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  double k() const { return k_; }
  double ell() const { return ell_; }
  double T() const { return T_; }

  // rho^2/4 - beta, always negative for valid parameters.
  double cost_constant() const { return 0.25 * rho_ * rho_ - beta_; }
  // Lower bound factor of the running cost in the control energy.
  double coercivity() const { return 1.0 - rho_ * rho_ / (4.0 * beta_); }

  // Synaptic connection strength phi(x) = k x + ell.
  double connection_strength(double x) const { return k_ * x + ell_; }

 private:
  double rho_, beta_, gamma_, k_, ell_, T_;
};

// Type vector p = (u, a, c): initial potential, gap-junction rate, control
// scale.
class NeuronType {
 public:
  NeuronType(double u, double a, double c);
  NeuronType(Unchecked, double u, double a, double c) : u_(u), a_(a), c_(c) {}

  double u() const { return u_; }
  double a() const { return a_; }
  double c() const { return c_; }

  friend bool operator==(const NeuronType&, const NeuronType&) = default;

 private:
  double u_, a_, c_;
};

struct JumpAtom {
  double z;  // fraction of potential lost at a spike, in [0, 1]
  double q;  // probability of this mark
};

// Finite-activity spike measure nu = rate * sum_j q_j delta_{z_j}.
class JumpMeasure {
 public:
  JumpMeasure(double rate, std::vector<JumpAtom> atoms);

  static JumpMeasure none() { return JumpMeasure(0.0, {{0.0, 1.0}}); }

  double rate() const { return rate_; }
  const std::vector<JumpAtom>& atoms() const { return atoms_; }
  // int z nu(dz)
  double m1() const { return m1_; }
  // int z^2 nu(dz)
  double m2() const { return m2_; }
  // int (z^2 - 2z) nu(dz)
  double compensator_moment() const { return m2_ - 2.0 * m1_; }

 private:
  double rate_;
  std::vector<JumpAtom> atoms_;
  double m1_;
  double m2_;
};

std::pair<double, double> jump_moments(const JumpMeasure& nu);

// Mean spike income offset per unit time, int ell nu(dz) = ell * nu([0,1]).
inline double income_offset(const ModelParams& params, const JumpMeasure& nu) {
  return params.ell() * nu.rate();
}

struct TypeAtom {
  NeuronType type;
  double weight;
};

class TypeDistribution {
 public:
  explicit TypeDistribution(std::vector<TypeAtom> atoms);
  // Checks the weights only, so atoms may hold Unchecked types.
  TypeDistribution(Unchecked, std::vector<TypeAtom> atoms);

  const std::vector<TypeAtom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  const NeuronType& type(std::size_t m) const { return atoms_[m].type; }
  double weight(std::size_t m) const { return atoms_[m].weight; }

 private:
  std::vector<TypeAtom> atoms_;
};

// Largest-remainder apportionment of n neurons to the atoms. Ties in the
// remainders go to the lower atom index.
std::vector<std::size_t> assign_type_counts(const TypeDistribution& dist,
                                            std::size_t n);
// Atom index of every neuron; atom 0 occupies the first slots, then atom 1...
std::vector<std::size_t> assign_type_atoms(const TypeDistribution& dist,
                                           std::size_t n);
std::vector<NeuronType> assign_types(const TypeDistribution& dist,
                                     std::size_t n);

// Uniform grid t_i = i T / N with t_N = T exactly.
class TimeGrid {
 public:
  TimeGrid(double T, std::size_t n_steps);

  double T() const { return T_; }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t size() const { return n_steps_ + 1; }
  double dt() const { return T_ / static_cast<double>(n_steps_); }
  double node(std::size_t i) const {
    return i == n_steps_ ? T_ : static_cast<double>(i) * dt();
  }
  std::vector<double> nodes() const;

  // Interval index i and fraction w with t = (1-w) t_i + w t_{i+1}; t is
  // clamped to [0, T].
  std::pair<std::size_t, double> locate(double t) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double T_;
  std::size_t n_steps_;
};

// Composite trapezoid helpers on a uniform grid.
namespace quad {

// Integral over the whole grid.
double trapezoid(const std::vector<double>& f, double dt);

// out[i] = int_{t_0}^{t_i} f.
std::vector<double> cumulative_forward(const std::vector<double>& f,
                                       double dt);

// out[i] = int_{t_i}^{t_N} f.
std::vector<double> cumulative_backward(const std::vector<double>& f,
                                        double dt);

}  // namespace quad

}  // namespace neuromfg
