#include "neuromfg/sde_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <random>

#include "neuromfg/csv.hpp"
#include "neuromfg/errors.hpp"
#include "neuromfg/parallel.hpp"
#include "neuromfg/rng.hpp"

namespace neuromfg {

namespace {

constexpr std::size_t kPathBlock = 256;
constexpr double kInf = std::numeric_limits<double>::infinity();

double lerp(const TimeGrid& grid, const std::vector<double>& v, double t) {
  const auto [i, w] = grid.locate(t);
  return (1.0 - w) * v[i] + w * v[i + 1];
}

// One neuron's spike stream: exponential gaps at the measure's rate and
// marks drawn from the atom probabilities.
class SpikeStream {
 public:
  SpikeStream(const JumpMeasure& nu, std::uint64_t seed, std::size_t path,
              std::size_t neuron)
      : rng_(seed, path, neuron) {
    if (nu.rate() > 0.0) {
      gap_ = std::exponential_distribution<double>(nu.rate());
      next_ = gap_(rng_);
    }
  }

  double next() const { return next_; }

  // Mark index of the pending spike; schedules the following one.
  template <class Marks>
  std::size_t fire(Marks& marks) {
    const std::size_t m = marks(rng_);
    next_ += gap_(rng_);
    return m;
  }

 private:
  CounterRng rng_;
  std::exponential_distribution<double> gap_;
  double next_ = kInf;
};

std::discrete_distribution<std::size_t> mark_distribution(const JumpMeasure& nu) {
  std::vector<double> q;
  for (const auto& atom : nu.atoms()) q.push_back(atom.q);
  return std::discrete_distribution<std::size_t>(q.begin(), q.end());
}

template <std::size_t D, class Rhs>
void rk4_step(const Rhs& rhs, double t, double h, std::array<double, D>& y) {
  std::array<double, D> k1, k2, k3, k4, tmp;
  rhs(t, y, k1);
  for (std::size_t i = 0; i < D; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  rhs(t + 0.5 * h, tmp, k2);
  for (std::size_t i = 0; i < D; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  rhs(t + 0.5 * h, tmp, k3);
  for (std::size_t i = 0; i < D; ++i) tmp[i] = y[i] + h * k3[i];
  rhs(t + h, tmp, k4);
  for (std::size_t i = 0; i < D; ++i) {
    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

struct Rk4Scratch {
  std::vector<double> k1, k2, k3, k4, tmp;
  explicit Rk4Scratch(std::size_t d) : k1(d), k2(d), k3(d), k4(d), tmp(d) {}
};

template <class Rhs>
void rk4_step(const Rhs& rhs, double t, double h, std::vector<double>& y,
              Rk4Scratch& s) {
  const std::size_t D = y.size();
  rhs(t, y, s.k1);
  for (std::size_t i = 0; i < D; ++i) s.tmp[i] = y[i] + 0.5 * h * s.k1[i];
  rhs(t + 0.5 * h, s.tmp, s.k2);
  for (std::size_t i = 0; i < D; ++i) s.tmp[i] = y[i] + 0.5 * h * s.k2[i];
  rhs(t + 0.5 * h, s.tmp, s.k3);
  for (std::size_t i = 0; i < D; ++i) s.tmp[i] = y[i] + h * s.k3[i];
  rhs(t + h, s.tmp, s.k4);
  for (std::size_t i = 0; i < D; ++i) {
    y[i] += h / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
  }
}

SimEnsemble make_ensemble(const SimOptions& options, std::size_t slots) {
  if (options.n_paths == 0) throw InvalidArgument("n_paths must be >= 1");
  SimEnsemble e{options.grid, options.n_paths, options.seed, {}, {}, {}, {}, {}, {}, {}};
  e.node_stats.assign(options.grid.size(), RunningStats{});
  if (options.store_nodes) e.node_values.assign(options.n_paths * options.grid.size(), 0.0);
  e.terminal.assign(options.n_paths, 0.0);
  e.jump_count.assign(options.n_paths, 0);
  e.cost.assign(slots, std::vector<double>(options.n_paths, 0.0));
  e.energy.assign(slots, std::vector<double>(options.n_paths, 0.0));
  if (options.store_paths) e.paths.resize(options.n_paths);
  return e;
}

// Runs path_fn(path, block_stats) over all paths in blocks and merges the
// per-node statistics in block order.
template <class PathFn>
void run_paths(SimEnsemble& e, const SimOptions& options, PathFn&& path_fn) {
  const std::size_t n_blocks = block_count(options.n_paths, kPathBlock);
  std::vector<std::vector<RunningStats>> block_stats(
      n_blocks, std::vector<RunningStats>(options.grid.size()));
  for_each_block(options.n_paths, kPathBlock, worker_count(options.threads),
                 [&](std::size_t b, std::size_t begin, std::size_t end) {
                   for (std::size_t path = begin; path < end; ++path) {
                     path_fn(path, block_stats[b]);
                   }
                 });
  for (const auto& stats : block_stats) {
    for (std::size_t i = 0; i < stats.size(); ++i) e.node_stats[i].merge(stats[i]);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// FeedbackLaw

FeedbackLaw FeedbackLaw::constant(double value) {
  FeedbackLaw law;
  law.shift_ = value;
  return law;
}

FeedbackLaw FeedbackLaw::tabulated(const TimeGrid& grid,
                                   std::vector<double> slope,
                                   std::vector<double> target,
                                   std::vector<double> offset) {
  if (slope.size() != grid.size() || target.size() != grid.size() ||
      offset.size() != grid.size()) {
    throw GridMismatch("feedback table length != grid size");
  }
  FeedbackLaw law;
  law.table_ = std::make_shared<const Table>(
      Table{grid, std::move(slope), std::move(target), std::move(offset)});
  return law;
}

FeedbackLaw FeedbackLaw::equilibrium(const NeuronType& p,
                                     const ModelParams& params,
                                     const CoefficientTable& table,
                                     const std::vector<double>& B,
                                     const Path& mU) {
  if (!(table.grid == mU.grid) || B.size() != table.grid.size()) {
    throw GridMismatch("equilibrium feedback inputs on different grids");
  }
  std::vector<double> slope(B.size()), offset(B.size());
  for (std::size_t i = 0; i < B.size(); ++i) {
    slope[i] = -p.c() * table.A[i] - 0.5 * params.rho();
    offset[i] = 0.5 * p.c() * B[i];
  }
  return tabulated(table.grid, std::move(slope), mU.values, std::move(offset));
}

FeedbackLaw FeedbackLaw::scaled(double factor) const {
  FeedbackLaw law = *this;
  law.scale_ *= factor;
  law.shift_ *= factor;
  return law;
}

FeedbackLaw FeedbackLaw::shifted(double delta) const {
  FeedbackLaw law = *this;
  law.shift_ += delta;
  return law;
}

FeedbackLaw FeedbackLaw::retargeted() const {
  FeedbackLaw law = *this;
  law.reference_ = Reference::PopulationMean;
  return law;
}

FeedbackLaw::Affine FeedbackLaw::affine(double t) const {
  if (!table_) return {0.0, 0.0, shift_};
  const double slope = scale_ * lerp(table_->grid, table_->slope, t);
  const double offset = scale_ * lerp(table_->grid, table_->offset, t);
  if (reference_ == Reference::PopulationMean) {
    return {slope, -slope, shift_ - offset};
  }
  const double target = lerp(table_->grid, table_->target, t);
  return {slope, 0.0, shift_ - offset - slope * target};
}

double FeedbackLaw::operator()(double t, double x, double xbar) const {
  const Affine f = affine(t);
  return f.gain * x + f.mean_gain * xbar + f.bias;
}

// ---------------------------------------------------------------------------
// RunningStats

void RunningStats::add(double x) {
  count += 1.0;
  const double delta = x - mean;
  mean += delta / count;
  m2 += delta * (x - mean);
}

void RunningStats::merge(const RunningStats& other) {
  if (other.count == 0.0) return;
  if (count == 0.0) {
    *this = other;
    return;
  }
  const double total = count + other.count;
  const double delta = other.mean - mean;
  mean += delta * other.count / total;
  m2 += other.m2 + delta * delta * count * other.count / total;
  count = total;
}

double RunningStats::variance() const {
  return count > 1.0 ? std::max(0.0, m2 / (count - 1.0)) : 0.0;
}

double RunningStats::standard_error() const {
  return count > 0.0 ? std::sqrt(variance() / count) : 0.0;
}

// ---------------------------------------------------------------------------
// Representative neuron

SimEnsemble simulate_representative(const NeuronType& p,
                                    const ModelParams& params,
                                    const JumpMeasure& nu,
                                    const FeedbackLaw& controller,
                                    const Path& mU, const Path& mPhi,
                                    const SimOptions& options) {
  if (!(mU.grid == mPhi.grid)) throw GridMismatch("mU and mPhi grids differ");
  if (options.grid.T() != mU.grid.T()) {
    throw GridMismatch("simulation horizon differs from mean-field horizon");
  }
  SimEnsemble e = make_ensemble(options, 1);
  const TimeGrid& grid = options.grid;
  const auto marks_proto = mark_distribution(nu);
  const double a = p.a(), c = p.c(), rho = params.rho(), beta = params.beta();

  // y = (U, running cost, control energy)
  const auto rhs = [&](double t, const std::array<double, 3>& y,
                       std::array<double, 3>& dy) {
    const double m = mU.at(t);
    const double theta = controller(t, y[0], m);
    const double d = y[0] - m;
    dy[0] = -a * d + c * theta + mPhi.at(t);
    dy[1] = theta * theta + rho * theta * d + beta * d * d;
    dy[2] = theta * theta;
  };

  run_paths(e, options, [&](std::size_t path, std::vector<RunningStats>& stats) {
    auto marks = marks_proto;
    SpikeStream spikes(nu, options.seed, path, 0);
    std::array<double, 3> y{p.u(), 0.0, 0.0};
    double t = 0.0;
    SamplePath* sample = options.store_paths ? &e.paths[path] : nullptr;
    auto record_node = [&](std::size_t i) {
      stats[i].add(y[0]);
      if (options.store_nodes) e.node_values[path * grid.size() + i] = y[0];
      if (sample) {
        sample->times.push_back(t);
        sample->states.push_back(y[0]);
      }
    };
    auto advance = [&](double t1) {
      if (t1 > t) rk4_step(rhs, t, t1 - t, y);
      t = t1;
      if (!std::isfinite(y[0]) || !std::isfinite(y[1])) throw NonFiniteState(path, t);
    };

    std::size_t jumps = 0;
    record_node(0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double t_node = grid.node(i);
      while (spikes.next() < t_node) {
        advance(spikes.next());
        const double z = nu.atoms()[spikes.fire(marks)].z;
        const double before = y[0];
        y[0] = before * (1.0 - z);
        ++jumps;
        if (sample) {
          sample->jumps.push_back({t, 0, z, before, y[0]});
          sample->times.push_back(t);
          sample->states.push_back(y[0]);
        }
      }
      advance(t_node);
      record_node(i);
    }
    const double d_T = y[0] - mU.values.back();
    e.terminal[path] = y[0];
    e.jump_count[path] = jumps;
    e.cost[0][path] = y[1] + params.gamma() * d_T * d_T;
    e.energy[0][path] = y[2];
  });
  return e;
}

// ---------------------------------------------------------------------------
// n-neuron system

namespace {

// Neurons with equal (type, strategy, class) share U_i = F Y_i + Z where
// F' = p F, Z' = p Z + q Ubar + r and Y_i only changes at the neuron's own
// spikes.
struct Group {
  double a;
  double c;
  const FeedbackLaw* law;
  std::size_t cls;  // class label or npos
  double count = 0.0;
  std::vector<std::size_t> members;
};

struct GroupLayout {
  std::vector<Group> groups;
  std::vector<std::size_t> group_of;
  std::vector<std::size_t> probe_group;  // group of each probe (singleton)
  std::size_t n_classes = 0;
  std::vector<double> class_size;
};

constexpr std::size_t kNoClass = static_cast<std::size_t>(-1);

GroupLayout build_groups(const NPlayerSetup& setup) {
  const std::size_t n = setup.types.size();
  if (n == 0) throw InvalidArgument("n-neuron system needs n >= 1");
  if (setup.strategies.size() != n) {
    throw InvalidArgument("one strategy per neuron required");
  }
  if (!setup.classes.empty() && setup.classes.size() != n) {
    throw InvalidArgument("class labels must cover every neuron");
  }
  GroupLayout layout;
  layout.group_of.assign(n, 0);
  std::vector<bool> is_probe(n, false);
  for (std::size_t i : setup.probes) {
    if (i >= n) throw InvalidArgument("probe index out of range");
    if (is_probe[i]) throw InvalidArgument("duplicate probe index");
    is_probe[i] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = setup.classes.empty() ? kNoClass : setup.classes[i];
    if (cls != kNoClass) layout.n_classes = std::max(layout.n_classes, cls + 1);
    const NeuronType& p = setup.types[i];
    std::size_t g = layout.groups.size();
    if (!is_probe[i]) {
      for (std::size_t h = 0; h < layout.groups.size(); ++h) {
        const Group& G = layout.groups[h];
        const bool probe_group = G.members.size() == 1 && is_probe[G.members[0]];
        if (!probe_group && G.a == p.a() && G.c == p.c() && G.cls == cls &&
            *G.law == setup.strategies[i]) {
          g = h;
          break;
        }
      }
    }
    if (g == layout.groups.size()) {
      layout.groups.push_back(Group{p.a(), p.c(), &setup.strategies[i], cls, 0.0, {}});
    }
    layout.groups[g].members.push_back(i);
    layout.groups[g].count += 1.0;
    layout.group_of[i] = g;
  }
  for (std::size_t i : setup.probes) layout.probe_group.push_back(layout.group_of[i]);
  layout.class_size.assign(layout.n_classes, 0.0);
  for (std::size_t i = 0; i < n && !setup.classes.empty(); ++i) {
    layout.class_size[setup.classes[i]] += 1.0;
  }
  return layout;
}

}  // namespace

SimEnsemble simulate_n_player(const NPlayerSetup& setup,
                              const ModelParams& params, const JumpMeasure& nu,
                              const SimOptions& options) {
  if (options.grid.T() != params.T()) {
    throw GridMismatch("simulation horizon differs from model T");
  }
  const GroupLayout layout = build_groups(setup);
  const std::size_t n = setup.types.size();
  const double n_d = static_cast<double>(n);
  const std::size_t G = layout.groups.size();
  const std::size_t n_probes = setup.probes.size();
  SimEnsemble e = make_ensemble(options, n_probes + layout.n_classes);
  const TimeGrid& grid = options.grid;
  const auto marks_proto = mark_distribution(nu);
  const double rho = params.rho(), beta = params.beta();
  const double k = params.k(), ell = params.ell();

  run_paths(e, options, [&](std::size_t path, std::vector<RunningStats>& stats) {
    auto marks = marks_proto;
    // State: per group F, Z, group-summed running cost and control energy.
    std::vector<double> y(4 * G, 0.0);
    std::vector<double> SY(G, 0.0), SYY(G, 0.0);
    std::vector<double> Y(n, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
      const Group& grp = layout.groups[g];
      double mean = 0.0;
      for (std::size_t i : grp.members) mean += setup.types[i].u();
      mean /= grp.count;
      y[4 * g] = 1.0;
      y[4 * g + 1] = mean;
      for (std::size_t i : grp.members) {
        Y[i] = setup.types[i].u() - mean;
        SY[g] += Y[i];
        SYY[g] += Y[i] * Y[i];
      }
    }

    const auto population_mean = [&](const std::vector<double>& s) {
      double total = 0.0;
      for (std::size_t g = 0; g < G; ++g) {
        total += s[4 * g] * SY[g] + layout.groups[g].count * s[4 * g + 1];
      }
      return total / n_d;
    };

    const auto rhs = [&](double t, const std::vector<double>& s,
                         std::vector<double>& ds) {
      const double ubar = population_mean(s);
      for (std::size_t g = 0; g < G; ++g) {
        const Group& grp = layout.groups[g];
        const FeedbackLaw::Affine law = grp.law->affine(t);
        const double F = s[4 * g], Z = s[4 * g + 1];
        const double pg = -grp.a + grp.c * law.gain;
        const double qg = grp.a + grp.c * law.mean_gain;
        const double rg = grp.c * law.bias;
        ds[4 * g] = pg * F;
        ds[4 * g + 1] = pg * Z + qg * ubar + rg;
        // theta_i = a1 Y_i + a0 and U_i - Ubar = F Y_i + d0, summed in Y.
        const double a1 = law.gain * F;
        const double a0 = law.gain * Z + law.mean_gain * ubar + law.bias;
        const double d0 = Z - ubar;
        const double cnt = grp.count;
        const double theta2 = a1 * a1 * SYY[g] + 2.0 * a1 * a0 * SY[g] + cnt * a0 * a0;
        const double theta_d = a1 * F * SYY[g] + (a1 * d0 + a0 * F) * SY[g] + cnt * a0 * d0;
        const double d2 = F * F * SYY[g] + 2.0 * F * d0 * SY[g] + cnt * d0 * d0;
        ds[4 * g + 2] = theta2 + rho * theta_d + beta * d2;
        ds[4 * g + 3] = theta2;
      }
    };

    // Keeps F away from under/overflow on long horizons.
    const auto renormalize = [&](std::size_t g) {
      const double F = y[4 * g];
      if (std::abs(F) > 1e-100 && std::abs(F) < 1e100) return;
      for (std::size_t i : layout.groups[g].members) Y[i] *= F;
      SY[g] *= F;
      SYY[g] *= F * F;
      y[4 * g] = 1.0;
    };

    std::vector<SpikeStream> spikes;
    spikes.reserve(n);
    using Pending = std::pair<double, std::size_t>;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> queue;
    for (std::size_t i = 0; i < n; ++i) {
      spikes.emplace_back(nu, options.seed, path, i);
      if (spikes[i].next() < kInf) queue.emplace(spikes[i].next(), i);
    }

    SamplePath* sample = options.store_paths ? &e.paths[path] : nullptr;
    if (sample) sample->width = n;
    const auto potential = [&](std::size_t i) {
      const std::size_t g = layout.group_of[i];
      return y[4 * g] * Y[i] + y[4 * g + 1];
    };
    const auto snapshot = [&](double t) {
      sample->times.push_back(t);
      for (std::size_t i = 0; i < n; ++i) sample->states.push_back(potential(i));
    };

    Rk4Scratch scratch(4 * G);
    double t = 0.0;
    double ubar = population_mean(y);
    const auto advance = [&](double t1) {
      if (t1 > t) rk4_step(rhs, t, t1 - t, y, scratch);
      t = t1;
      for (std::size_t g = 0; g < G; ++g) renormalize(g);
      ubar = population_mean(y);
      if (!std::isfinite(ubar)) throw NonFiniteState(path, t);
    };
    const auto record_node = [&](std::size_t i) {
      stats[i].add(ubar);
      if (options.store_nodes) e.node_values[path * grid.size() + i] = ubar;
      if (sample) snapshot(t);
    };

    std::size_t jumps = 0;
    record_node(0);
    for (std::size_t node = 1; node < grid.size(); ++node) {
      const double t_node = grid.node(node);
      while (!queue.empty() && queue.top().first < t_node) {
        const auto [t_jump, j] = queue.top();
        queue.pop();
        advance(t_jump);
        const double z = nu.atoms()[spikes[j].fire(marks)].z;
        queue.emplace(spikes[j].next(), j);
        const std::size_t gj = layout.group_of[j];
        const double before = potential(j);
        const double income = (k * z * before + ell) / n_d;
        for (std::size_t g = 0; g < G; ++g) y[4 * g + 1] += income;
        const double after = before * (1.0 - z);
        const double y_new = (after - y[4 * gj + 1]) / y[4 * gj];
        SY[gj] += y_new - Y[j];
        SYY[gj] += y_new * y_new - Y[j] * Y[j];
        Y[j] = y_new;
        ubar = population_mean(y);
        ++jumps;
        if (sample) {
          sample->jumps.push_back({t, j, z, before, after});
          snapshot(t);
        }
      }
      advance(t_node);
      record_node(node);
    }

    // Terminal cost gamma (U_i - Ubar)^2 summed per group.
    std::vector<double> group_cost(G), group_energy(G);
    for (std::size_t g = 0; g < G; ++g) {
      const double F = y[4 * g], d0 = y[4 * g + 1] - ubar;
      const double d2 = F * F * SYY[g] + 2.0 * F * d0 * SY[g] +
                        layout.groups[g].count * d0 * d0;
      group_cost[g] = y[4 * g + 2] + params.gamma() * d2;
      group_energy[g] = y[4 * g + 3];
    }
    for (std::size_t s = 0; s < n_probes; ++s) {
      e.cost[s][path] = group_cost[layout.probe_group[s]];
      e.energy[s][path] = group_energy[layout.probe_group[s]];
    }
    for (std::size_t cls = 0; cls < layout.n_classes; ++cls) {
      double cost = 0.0, energy = 0.0;
      for (std::size_t g = 0; g < G; ++g) {
        if (layout.groups[g].cls != cls) continue;
        cost += group_cost[g];
        energy += group_energy[g];
      }
      e.cost[n_probes + cls][path] = cost / layout.class_size[cls];
      e.energy[n_probes + cls][path] = energy / layout.class_size[cls];
    }
    e.terminal[path] = ubar;
    e.jump_count[path] = jumps;
  });
  return e;
}

std::pair<double, double> marginal_mean(const SimEnsemble& ensemble, double t) {
  const auto [i, w] = ensemble.grid.locate(t);
  const double tol = 1e-12 * ensemble.grid.T();
  std::size_t node = i;
  if (std::abs(ensemble.grid.node(i) - t) > tol) {
    if (std::abs(ensemble.grid.node(i + 1) - t) > tol) {
      throw InvalidArgument("marginal_mean: t is not a simulation node");
    }
    node = i + 1;
  }
  const RunningStats& s = ensemble.node_stats[node];
  return {s.mean, s.standard_error()};
}

void write_paths_csv(const std::string& path, const SimEnsemble& ensemble) {
  CsvWriter csv(path, {"path", "t", "neuron", "U"});
  for (std::size_t p = 0; p < ensemble.paths.size(); ++p) {
    const SamplePath& sp = ensemble.paths[p];
    for (std::size_t r = 0; r < sp.times.size(); ++r) {
      for (std::size_t i = 0; i < sp.width; ++i) {
        csv.row({static_cast<double>(p), sp.times[r], static_cast<double>(i),
                 sp.states[r * sp.width + i]});
      }
    }
  }
}

}  // namespace neuromfg
