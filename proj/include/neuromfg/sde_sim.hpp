#pragma once

// Jump-adapted Monte Carlo for the representative neuron and for the coupled
// n-neuron system. Jump times are sampled exactly; the drift between events
// is integrated by RK4 on the union of simulation nodes and jump times.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "neuromfg/core_model.hpp"
#include "neuromfg/meanfield.hpp"
#include "neuromfg/riccati.hpp"

namespace neuromfg {

// Affine feedback theta(t, x, xbar) = scale * (slope(t) (x - ref) - offset(t))
// + shift, where ref is a target path or the population mean xbar. Without a
// table the law is the constant `shift`.
class FeedbackLaw {
 public:
  enum class Reference { Target, PopulationMean };

  // theta = gain x + mean_gain xbar + bias at a fixed time.
  struct Affine {
    double gain;
    double mean_gain;
    double bias;
  };

  static FeedbackLaw zero() { return constant(0.0); }
  static FeedbackLaw constant(double value);
  // Linear law on a table grid: slope, target and offset sampled at the nodes.
  static FeedbackLaw tabulated(const TimeGrid& grid, std::vector<double> slope,
                               std::vector<double> target,
                               std::vector<double> offset);
  // theta = (-c A - rho/2)(x - mU) - (c/2) B.
  static FeedbackLaw equilibrium(const NeuronType& p, const ModelParams& params,
                                 const CoefficientTable& table,
                                 const std::vector<double>& B, const Path& mU);

  FeedbackLaw scaled(double factor) const;
  FeedbackLaw shifted(double delta) const;
  FeedbackLaw retargeted() const;  // reference becomes the population mean

  Affine affine(double t) const;
  double operator()(double t, double x, double xbar) const;

  Reference reference() const { return reference_; }

  // Same table object, scale, shift and reference.
  friend bool operator==(const FeedbackLaw& a, const FeedbackLaw& b) {
    return a.table_ == b.table_ && a.scale_ == b.scale_ &&
           a.shift_ == b.shift_ && a.reference_ == b.reference_;
  }

 private:
  struct Table {
    TimeGrid grid;
    std::vector<double> slope, target, offset;
  };

  std::shared_ptr<const Table> table_;
  double scale_ = 1.0;
  double shift_ = 0.0;
  Reference reference_ = Reference::Target;
};

struct SimOptions {
  TimeGrid grid;  // simulation nodes; every node is a RK4 breakpoint
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> threads;  // default: worker_count()
  bool store_nodes = false;  // keep the tracked state of every path at nodes
  bool store_paths = false;  // keep full event-level sample paths
};

struct JumpRecord {
  double time;
  std::size_t neuron;
  double z;
  double before;  // U_neuron(t-)
  double after;   // U_neuron(t)
};

struct SamplePath {
  std::size_t width = 1;      // neurons per row
  std::vector<double> times;  // nodes and jump times, increasing
  std::vector<double> states; // times.size() x width, row-major; post-jump
  std::vector<JumpRecord> jumps;
};

// Streaming mean/variance with an order-fixed merge.
struct RunningStats {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const RunningStats& other);
  double variance() const;  // unbiased; 0 for fewer than two samples
  double standard_error() const;
};

struct SimEnsemble {
  TimeGrid grid;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  // Tracked scalar is U for the representative neuron and the population
  // mean for the n-neuron system.
  std::vector<RunningStats> node_stats;
  std::vector<double> node_values;  // n_paths x grid.size() when stored
  std::vector<double> terminal;     // tracked scalar at T, per path
  std::vector<std::size_t> jump_count;
  // Cost and control energy int theta^2 per slot and path. Representative:
  // one slot. n-neuron: probes first, then class averages.
  std::vector<std::vector<double>> cost;
  std::vector<std::vector<double>> energy;
  std::vector<SamplePath> paths;  // when stored

  double node_value(std::size_t path, std::size_t node) const {
    return node_values[path * grid.size() + node];
  }
};

// dU = [-a (U - mU) + c theta(t, U, mU) + mPhi] dt, U <- U (1 - z) at spikes;
// cost int theta^2 + rho theta (U - mU) + beta (U - mU)^2 + gamma (U_T -
// mU(T))^2. Throws NonFiniteState.
SimEnsemble simulate_representative(const NeuronType& p,
                                    const ModelParams& params,
                                    const JumpMeasure& nu,
                                    const FeedbackLaw& controller,
                                    const Path& mU, const Path& mPhi,
                                    const SimOptions& options);

struct NPlayerSetup {
  std::vector<NeuronType> types;
  std::vector<FeedbackLaw> strategies;
  // Neurons whose individual cost is reported (cost slots 0..probes-1).
  std::vector<std::size_t> probes;
  // Optional class label per neuron; average cost per class follows the
  // probe slots. Labels must be 0..n_classes-1.
  std::vector<std::size_t> classes;
};

// Coupled system: dU_i = [-a_i (U_i - Ubar) + c_i theta_i] dt, at a spike
// of j U_j <- U_j (1 - z) and every other neuron gains (k z U_j(t-) + ell)/n.
// Neurons sharing type, strategy and class move as one affine family, so a
// path costs O(groups) per event. Throws NonFiniteState, InvalidArgument.
SimEnsemble simulate_n_player(const NPlayerSetup& setup,
                              const ModelParams& params, const JumpMeasure& nu,
                              const SimOptions& options);

// Mean and standard error of the tracked state at a simulation node.
std::pair<double, double> marginal_mean(const SimEnsemble& ensemble, double t);

// CSV path,t,neuron,U for every stored sample path.
void write_paths_csv(const std::string& path, const SimEnsemble& ensemble);

}  // namespace neuromfg
