#include "neuromfg/game_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "neuromfg/errors.hpp"

namespace neuromfg {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

CostEstimate paired_difference(const std::vector<double>& a,
                               const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return estimate_from_samples(d, CostFunctional::NPlayer);
}

std::size_t node_index(const TimeGrid& grid, double t) {
  const double x = t / grid.T() * static_cast<double>(grid.n_steps());
  const double r = std::round(x);
  if (std::abs(x - r) > 1e-9 || r < 0.0 || r > static_cast<double>(grid.n_steps())) {
    throw InvalidArgument("time " + std::to_string(t) + " is not a simulation node");
  }
  return static_cast<std::size_t>(r);
}

}  // namespace

CostEstimate estimate_from_samples(const std::vector<double>& samples,
                                   CostFunctional functional) {
  RunningStats s;
  for (double x : samples) s.add(x);
  return {s.mean, s.standard_error(), samples.size(), functional};
}

SimOptions sim_options(const McSettings& mc, double T, bool store_nodes) {
  SimOptions o{TimeGrid(T, mc.n_steps), mc.n_paths, mc.seed, mc.threads,
               store_nodes, false};
  return o;
}

FeedbackLaw atom_equilibrium_law(const EquilibriumBundle& bundle,
                                 std::size_t atom) {
  const auto& te = bundle.types.at(atom);
  return FeedbackLaw::equilibrium(bundle.dist.type(atom), bundle.params,
                                  te.table, te.B_star, bundle.mU_star);
}

std::vector<FeedbackLaw> equilibrium_strategies(const EquilibriumBundle& bundle,
                                                std::size_t n) {
  std::vector<FeedbackLaw> per_atom;
  for (std::size_t m = 0; m < bundle.dist.size(); ++m) {
    per_atom.push_back(atom_equilibrium_law(bundle, m));
  }
  std::vector<FeedbackLaw> out;
  out.reserve(n);
  for (std::size_t m : assign_type_atoms(bundle.dist, n)) out.push_back(per_atom[m]);
  return out;
}

std::vector<std::size_t> probe_neurons(const TypeDistribution& dist,
                                       std::size_t n) {
  std::vector<std::size_t> probes(dist.size(), kNone);
  const auto atoms = assign_type_atoms(dist, n);
  for (std::size_t i = atoms.size(); i-- > 0;) probes[atoms[i]] = i;
  return probes;
}

CostEstimate cost_nplayer(std::size_t i, const std::vector<NeuronType>& types,
                          const std::vector<FeedbackLaw>& strategies,
                          const ModelParams& params, const JumpMeasure& nu,
                          const McSettings& mc) {
  NPlayerSetup setup{types, strategies, {i}, {}};
  const auto e = simulate_n_player(setup, params, nu, sim_options(mc, params.T()));
  return estimate_from_samples(e.cost[0], CostFunctional::NPlayer);
}

double limiting_optimum(const EquilibriumBundle& bundle, std::size_t atom) {
  const auto& te = bundle.types.at(atom);
  return value_function(te.table, te.B_star, te.C_star, 0,
                        bundle.dist.type(atom).u(), bundle.mU_star);
}

CostEstimate cost_auxiliary(const EquilibriumBundle& bundle, std::size_t atom,
                            const FeedbackLaw& law, const McSettings& mc) {
  const auto e = simulate_representative(
      bundle.dist.type(atom), bundle.params, bundle.nu, law, bundle.mU_star,
      bundle.mPhi_star, sim_options(mc, bundle.params.T()));
  return estimate_from_samples(e.cost[0], CostFunctional::Auxiliary);
}

std::vector<Deviation> deviation_family(const EquilibriumBundle& bundle,
                                        std::size_t atom,
                                        bool include_equilibrium) {
  const FeedbackLaw star = atom_equilibrium_law(bundle, atom);
  const double c = bundle.dist.type(atom).c();
  std::vector<Deviation> family;
  if (include_equilibrium) family.push_back({"equilibrium", star});
  family.push_back({"scale_0.9", star.scaled(0.9)});
  family.push_back({"scale_1.1", star.scaled(1.1)});
  family.push_back({"scale_0.75", star.scaled(0.75)});
  family.push_back({"scale_1.25", star.scaled(1.25)});
  family.push_back({"shift_+0.1c", star.shifted(0.1 * c)});
  family.push_back({"shift_-0.1c", star.shifted(-0.1 * c)});
  family.push_back({"zero", FeedbackLaw::zero()});
  family.push_back({"retarget_population_mean", star.retargeted()});
  return family;
}

bool GapRecord::certified() const {
  for (const auto& d : deviations) {
    const double se = std::sqrt(gap_se * gap_se + d.se * d.se);
    if (d.improvement > gap + 3.0 * se) return false;
  }
  return true;
}

std::vector<GapRecord> nash_gap_curve(const EquilibriumBundle& bundle,
                                      const std::vector<std::size_t>& n_list,
                                      const McSettings& mc,
                                      bool include_equilibrium) {
  const ModelParams& params = bundle.params;
  const SimOptions options = sim_options(mc, params.T());
  std::vector<GapRecord> records;
  for (std::size_t n : n_list) {
    const auto types = assign_types(bundle.dist, n);
    const auto atoms = assign_type_atoms(bundle.dist, n);
    const auto strategies = equilibrium_strategies(bundle, n);
    const auto probes = probe_neurons(bundle.dist, n);
    std::vector<std::size_t> present;
    for (std::size_t m = 0; m < probes.size(); ++m) {
      if (probes[m] != kNone) present.push_back(m);
    }
    std::vector<std::size_t> probe_list;
    for (std::size_t m : present) probe_list.push_back(probes[m]);

    NPlayerSetup base{types, strategies, probe_list, atoms};
    const auto baseline = simulate_n_player(base, params, bundle.nu, options);

    for (std::size_t s = 0; s < present.size(); ++s) {
      const std::size_t m = present[s];
      const std::size_t probe = probes[m];
      GapRecord rec{};
      rec.n = n;
      rec.atom = m;
      rec.probe = probe;
      rec.J_star = estimate_from_samples(baseline.cost[probe_list.size() + m],
                                         CostFunctional::NPlayer);
      rec.V_limit = limiting_optimum(bundle, m);
      rec.gap = rec.J_star.mean - rec.V_limit;
      rec.gap_se = rec.J_star.se;
      rec.best_improvement = -std::numeric_limits<double>::infinity();

      for (const auto& dev : deviation_family(bundle, m, include_equilibrium)) {
        NPlayerSetup setup = base;
        setup.strategies[probe] = dev.law;
        const auto run = simulate_n_player(setup, params, bundle.nu, options);
        const auto diff = paired_difference(baseline.cost[s], run.cost[s]);
        rec.deviations.push_back({dev.name, diff.mean, diff.se});
        if (diff.mean > rec.best_improvement) {
          rec.best_improvement = diff.mean;
          rec.best_improvement_se = diff.se;
          rec.best_deviation = dev.name;
        }
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::vector<LlnRecord> lln_check(const EquilibriumBundle& bundle,
                                 const std::vector<std::size_t>& n_list,
                                 const std::vector<double>& t_list,
                                 const McSettings& mc) {
  const ModelParams& params = bundle.params;
  const SimOptions options = sim_options(mc, params.T(), true);
  std::vector<std::size_t> nodes;
  for (double t : t_list) nodes.push_back(node_index(options.grid, t));
  std::vector<LlnRecord> records;
  for (std::size_t n : n_list) {
    NPlayerSetup setup{assign_types(bundle.dist, n),
                       equilibrium_strategies(bundle, n), {}, {}};
    const auto e = simulate_n_player(setup, params, bundle.nu, options);
    for (std::size_t node : nodes) {
      const double t = options.grid.node(node);
      const double m = bundle.mU_star.at(t);
      RunningStats s;
      for (std::size_t path = 0; path < e.n_paths; ++path) {
        const double d = e.node_value(path, node) - m;
        s.add(d * d);
      }
      records.push_back({n, t, s.mean, s.standard_error()});
    }
  }
  return records;
}

bool ConsistencyReport::ok() const {
  return std::none_of(rows.begin(), rows.end(),
                      [](const ConsistencyRow& r) { return r.violated; });
}

const ConsistencyRow& ConsistencyReport::worst() const {
  return *std::max_element(rows.begin(), rows.end(),
                           [](const ConsistencyRow& a, const ConsistencyRow& b) {
                             return std::abs(a.z) < std::abs(b.z);
                           });
}

std::vector<double> checkpoints(double T, std::size_t n) {
  if (n == 0) throw InvalidArgument("need at least one checkpoint interval");
  std::vector<double> times(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    times[j] = j == n ? T : T * static_cast<double>(j) / static_cast<double>(n);
  }
  return times;
}

ConsistencyReport consistency_report(const EquilibriumBundle& bundle,
                                     std::size_t atom, const McSettings& mc,
                                     const std::vector<double>& times,
                                     const Path* candidate) {
  if (times.empty()) throw InvalidArgument("need at least one checkpoint");
  const NeuronType& p = bundle.dist.type(atom);
  const ModelParams& params = bundle.params;
  const JumpMeasure& nu = bundle.nu;
  const auto& te = bundle.types.at(atom);
  const Path& mU = candidate ? *candidate : te.mU();
  const Path mPhi = mean_income_path(params, nu, mU);
  const auto B = candidate ? B_coeff(p, params, nu, te.table, mU, mPhi) : te.B;
  const FeedbackLaw law = FeedbackLaw::equilibrium(p, params, te.table, B, mU);

  const SimOptions options = sim_options(mc, params.T());
  const auto e = simulate_representative(p, params, nu, law, mU, mPhi, options);

  ConsistencyReport report{atom, {}, 0.0, 1.0};
  const double slope = params.k() * nu.m1();
  const double offset = income_offset(params, nu);
  std::size_t within_2 = 0;
  for (double t : times) {
    const std::size_t node = node_index(options.grid, t);
    const auto [mean, se] = marginal_mean(e, options.grid.node(node));
    const double m = mU.at(t);
    const double diff = mean - m;
    double z = 0.0;
    if (diff != 0.0) {
      z = se > 0.0 ? diff / se : std::copysign(std::numeric_limits<double>::infinity(), diff);
    }
    const bool violated = std::abs(diff) > 3.0 * se + 1e-8;
    if (std::abs(z) <= 2.0 || std::abs(diff) <= 1e-8) ++within_2;
    report.rows.push_back({t, mean, se, m, z, slope * mean + offset, mPhi.at(t), violated});
    report.max_abs_z = std::max(report.max_abs_z, std::abs(z));
  }
  report.fraction_within_2 =
      static_cast<double>(within_2) / static_cast<double>(report.rows.size());
  return report;
}

void consistency_check(const ConsistencyReport& report) {
  if (report.ok()) return;
  const ConsistencyRow* worst = nullptr;
  for (const auto& r : report.rows) {
    if (r.violated && (!worst || std::abs(r.z) > std::abs(worst->z))) worst = &r;
  }
  throw ConsistencyViolation(worst->t, worst->z);
}

}  // namespace neuromfg
