#pragma once

// Monte Carlo estimates of the neuron costs, the mean-field consistency
// check, the law-of-large-numbers check for the population mean, and the
// approximate-Nash gap curve with a deviation sweep.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "neuromfg/meanfield.hpp"
#include "neuromfg/sde_sim.hpp"

namespace neuromfg {

enum class CostFunctional {
  NPlayer,     // J_i in the n-neuron game
  MeanField,   // representative neuron against its own mean path
  Auxiliary,   // representative neuron against the aggregated mean path
};

struct CostEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n_paths = 0;
  CostFunctional functional = CostFunctional::NPlayer;
};

CostEstimate estimate_from_samples(const std::vector<double>& samples,
                                   CostFunctional functional);

struct McSettings {
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  std::size_t n_steps = 200;  // simulation nodes on [0, T]
  std::optional<std::size_t> threads;
};

SimOptions sim_options(const McSettings& mc, double T, bool store_nodes = false);

// theta* for every neuron of an n-neuron system with stratified types; all
// neurons of one atom share one law object.
std::vector<FeedbackLaw> equilibrium_strategies(const EquilibriumBundle& bundle,
                                                std::size_t n);

// The atom's equilibrium law against the aggregated mean field.
FeedbackLaw atom_equilibrium_law(const EquilibriumBundle& bundle,
                                 std::size_t atom);

// Lowest neuron index of each atom under assign_type_atoms, npos if the atom
// received no neuron.
std::vector<std::size_t> probe_neurons(const TypeDistribution& dist,
                                       std::size_t n);

CostEstimate cost_nplayer(std::size_t i, const std::vector<NeuronType>& types,
                          const std::vector<FeedbackLaw>& strategies,
                          const ModelParams& params, const JumpMeasure& nu,
                          const McSettings& mc);

// V(0, u) of the atom with A, B_star, C_star and the aggregated mU*.
double limiting_optimum(const EquilibriumBundle& bundle, std::size_t atom);

// Representative neuron of the atom driven by the aggregated mU*, mPhi*.
CostEstimate cost_auxiliary(const EquilibriumBundle& bundle, std::size_t atom,
                            const FeedbackLaw& law, const McSettings& mc);

struct Deviation {
  std::string name;
  FeedbackLaw law;
};

// theta* scaled by 0.9, 1.1, 0.75, 1.25; shifted by +-0.1 c; zero control;
// theta* re-targeted at the realized population mean. Optionally theta*
// itself as the first member.
std::vector<Deviation> deviation_family(const EquilibriumBundle& bundle,
                                        std::size_t atom,
                                        bool include_equilibrium = false);

struct DeviationResult {
  std::string name;
  double improvement;  // J_i(theta*) - J_i(deviation), paired per path
  double se;
};

struct GapRecord {
  std::size_t n;
  std::size_t atom;
  std::size_t probe;
  CostEstimate J_star;  // class average over the atom's neurons
  double V_limit;
  double gap;
  double gap_se;
  std::string best_deviation;
  double best_improvement;
  double best_improvement_se;
  std::vector<DeviationResult> deviations;

  // No deviation improves by more than gap + 3 combined SE.
  bool certified() const;
};

std::vector<GapRecord> nash_gap_curve(const EquilibriumBundle& bundle,
                                      const std::vector<std::size_t>& n_list,
                                      const McSettings& mc,
                                      bool include_equilibrium = false);

struct LlnRecord {
  std::size_t n;
  double t;
  double metric;  // E |Ubar_t - mU*(t)|^2
  double se;
};

std::vector<LlnRecord> lln_check(const EquilibriumBundle& bundle,
                                 const std::vector<std::size_t>& n_list,
                                 const std::vector<double>& t_list,
                                 const McSettings& mc);

struct ConsistencyRow {
  double t;
  double mc_mean;
  double se;
  double mU;
  double z;          // (mc_mean - mU) / se, 0 when both agree exactly
  double mPhi_mc;    // k int z nu mc_mean + ell nu([0,1])
  double mPhi;
  bool violated;     // |mc_mean - mU| > 3 se + 1e-8
};

struct ConsistencyReport {
  std::size_t atom;
  std::vector<ConsistencyRow> rows;
  double max_abs_z = 0.0;
  double fraction_within_2 = 1.0;

  bool ok() const;
  const ConsistencyRow& worst() const;
};

// n + 1 equally spaced times 0, T/n, ..., T.
std::vector<double> checkpoints(double T, std::size_t n);

// Simulates the atom's representative neuron with the feedback built from
// `candidate` (default: the atom's own fixed point) and compares E[U_t] with
// the candidate at each time in `times`, which must be simulation nodes.
ConsistencyReport consistency_report(const EquilibriumBundle& bundle,
                                     std::size_t atom, const McSettings& mc,
                                     const std::vector<double>& times,
                                     const Path* candidate = nullptr);

// Throws ConsistencyViolation at the node with the largest |z| if any node
// is violated.
void consistency_check(const ConsistencyReport& report);

}  // namespace neuromfg
