#include "neuromfg/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "neuromfg/csv.hpp"
#include "neuromfg/errors.hpp"
#include "neuromfg/parallel.hpp"
#include "neuromfg/riccati.hpp"
#include "neuromfg/verify.hpp"

namespace neuromfg {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
}

void allow_keys(const json& j, const std::set<std::string>& keys,
                const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + where);
  }
}

const json& member(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing \"" + key + "\" in " + where);
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + " must be finite");
  return v;
}

double number_at(const json& j, const std::string& key, const std::string& where) {
  return number(member(j, key, where), where + "." + key);
}

std::uint64_t unsigned_at(const json& j, const std::string& key,
                          const std::string& where) {
  const json& v = member(j, key, where);
  if (!v.is_number_unsigned()) {
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::size_t positive_at(const json& j, const std::string& key,
                        const std::string& where) {
  const auto v = unsigned_at(j, key, where);
  if (v == 0) throw ConfigError(where + "." + key + " must be >= 1");
  return static_cast<std::size_t>(v);
}

std::vector<double> row(const json& j, std::size_t width, const std::string& where) {
  if (!j.is_array() || j.size() != width) {
    throw ConfigError(where + " must be an array of " + std::to_string(width) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < width; ++i) {
    out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Experiment parse_experiment(const json& j) {
  if (!j.is_string()) throw ConfigError("experiment must be a string");
  const std::string s = j.get<std::string>();
  for (Experiment e : {Experiment::SolveMfe, Experiment::Consistency,
                       Experiment::NashGap, Experiment::Lln, Experiment::Verify}) {
    if (experiment_name(e) == s) return e;
  }
  throw ConfigError("unknown experiment \"" + s + "\"");
}

template <class Fn>
auto rethrow_as_config(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void write_solution(const fs::path& dir, const EquilibriumBundle& bundle,
                    std::vector<std::string>& files) {
  write_meanfield_csv((dir / "meanfield.csv").string(), bundle);
  files.push_back("meanfield.csv");
  for (std::size_t m = 0; m < bundle.types.size(); ++m) {
    const std::string coef = "coefficients_" + std::to_string(m) + ".csv";
    const std::string coefB = "coefB_" + std::to_string(m) + ".csv";
    write_coefficients_csv((dir / coef).string(), bundle.types[m].table);
    write_coefB_csv((dir / coefB).string(), bundle, m);
    files.push_back(coef);
    files.push_back(coefB);
  }
}

std::string yes_no(bool b) { return b ? "1" : "0"; }

}  // namespace

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::SolveMfe: return "solve-mfe";
    case Experiment::Consistency: return "consistency";
    case Experiment::NashGap: return "nash-gap";
    case Experiment::Lln: return "lln";
    case Experiment::Verify: return "verify";
  }
  return "";
}

RunConfig parse_config(const json& doc) {
  allow_keys(doc, {"params", "jump", "types", "grid", "mc", "solver",
                   "experiment", "n_list", "t_checks", "out_dir"},
             "config");

  const json& jp = member(doc, "params", "config");
  allow_keys(jp, {"rho", "beta", "gamma", "k", "ell", "T"}, "params");
  const ModelParams params = rethrow_as_config([&] {
    return ModelParams(number_at(jp, "rho", "params"), number_at(jp, "beta", "params"),
                       number_at(jp, "gamma", "params"), number_at(jp, "k", "params"),
                       number_at(jp, "ell", "params"), number_at(jp, "T", "params"));
  });

  const json& jj = member(doc, "jump", "config");
  allow_keys(jj, {"rate", "atoms"}, "jump");
  const json& jatoms = member(jj, "atoms", "jump");
  if (!jatoms.is_array()) throw ConfigError("jump.atoms must be an array");
  std::vector<JumpAtom> jump_atoms;
  for (std::size_t i = 0; i < jatoms.size(); ++i) {
    const auto r = row(jatoms[i], 2, "jump.atoms[" + std::to_string(i) + "]");
    jump_atoms.push_back({r[0], r[1]});
  }
  const double rate = number_at(jj, "rate", "jump");
  const JumpMeasure nu = rethrow_as_config([&] { return JumpMeasure(rate, jump_atoms); });

  const json& jt = member(doc, "types", "config");
  allow_keys(jt, {"atoms"}, "types");
  const json& tatoms = member(jt, "atoms", "types");
  if (!tatoms.is_array() || tatoms.empty()) {
    throw ConfigError("types.atoms must be a non-empty array");
  }
  std::vector<std::vector<double>> type_rows;
  for (std::size_t i = 0; i < tatoms.size(); ++i) {
    type_rows.push_back(row(tatoms[i], 4, "types.atoms[" + std::to_string(i) + "]"));
  }
  const TypeDistribution dist = rethrow_as_config([&] {
    std::vector<TypeAtom> atoms;
    for (const auto& r : type_rows) atoms.push_back({NeuronType(r[0], r[1], r[2]), r[3]});
    return TypeDistribution(std::move(atoms));
  });

  const json& jg = member(doc, "grid", "config");
  allow_keys(jg, {"n_steps"}, "grid");
  const TimeGrid grid(params.T(), positive_at(jg, "n_steps", "grid"));

  McSettings mc;
  mc.n_paths = 10000;
  if (doc.contains("mc")) {
    const json& jm = doc.at("mc");
    allow_keys(jm, {"n_paths", "seed", "n_steps", "threads", "dump_paths"}, "mc");
    if (jm.contains("n_paths")) mc.n_paths = positive_at(jm, "n_paths", "mc");
    if (jm.contains("seed")) mc.seed = unsigned_at(jm, "seed", "mc");
    if (jm.contains("n_steps")) mc.n_steps = positive_at(jm, "n_steps", "mc");
    if (jm.contains("threads")) mc.threads = positive_at(jm, "threads", "mc");
  }

  SolverOptions solver;
  if (doc.contains("solver")) {
    const json& js = doc.at("solver");
    allow_keys(js, {"tol", "max_iter"}, "solver");
    if (js.contains("tol")) {
      solver.tol = number_at(js, "tol", "solver");
      if (!(solver.tol > 0.0)) throw ConfigError("solver.tol must be > 0");
    }
    if (js.contains("max_iter")) solver.max_iter = positive_at(js, "max_iter", "solver");
  }

  RunConfig cfg{doc, params, nu, dist, grid, mc, solver};
  if (doc.contains("mc") && doc.at("mc").contains("dump_paths")) {
    cfg.dump_paths = static_cast<std::size_t>(unsigned_at(doc.at("mc"), "dump_paths", "mc"));
  }
  if (doc.contains("experiment")) cfg.experiment = parse_experiment(doc.at("experiment"));

  if (doc.contains("n_list")) {
    const json& jn = doc.at("n_list");
    if (!jn.is_array() || jn.empty()) throw ConfigError("n_list must be a non-empty array");
    for (const auto& v : jn) {
      if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
        throw ConfigError("n_list entries must be positive integers");
      }
      cfg.n_list.push_back(v.get<std::size_t>());
    }
    if (!std::is_sorted(cfg.n_list.begin(), cfg.n_list.end()) ||
        std::adjacent_find(cfg.n_list.begin(), cfg.n_list.end()) != cfg.n_list.end()) {
      throw ConfigError("n_list must be strictly increasing");
    }
  } else if (cfg.experiment == Experiment::NashGap) {
    cfg.n_list = {8, 32, 128, 512};
  } else if (cfg.experiment == Experiment::Lln) {
    cfg.n_list = {8, 32, 128, 512, 2048};
  } else {
    cfg.n_list = {8, 32};
  }

  const double T = params.T();
  if (doc.contains("t_checks")) {
    const json& jc = doc.at("t_checks");
    if (!jc.is_array() || jc.empty()) throw ConfigError("t_checks must be a non-empty array");
    for (std::size_t i = 0; i < jc.size(); ++i) {
      const double t = number(jc[i], "t_checks[" + std::to_string(i) + "]");
      if (t < 0.0 || t > T) throw ConfigError("t_checks entries must lie in [0, T]");
      cfg.t_checks.push_back(t);
    }
  } else if (cfg.experiment == Experiment::Lln) {
    cfg.t_checks = {0.5 * T, T};
  } else {
    cfg.t_checks = checkpoints(T, 20);
  }
  for (double t : cfg.t_checks) {
    const double x = t / T * static_cast<double>(mc.n_steps);
    if (std::abs(x - std::round(x)) > 1e-9) {
      throw ConfigError("t_checks entry " + format_double(t) +
                        " is not a node of the simulation grid (mc.n_steps)");
    }
  }

  if (doc.contains("out_dir")) {
    if (!doc.at("out_dir").is_string() || doc.at("out_dir").get<std::string>().empty()) {
      throw ConfigError("out_dir must be a non-empty string");
    }
    cfg.out_dir = doc.at("out_dir").get<std::string>();
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

int run(const std::string& config_path, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  std::optional<RunConfig> parsed;
  try {
    parsed = load_config(config_path);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const RunConfig& cfg = *parsed;
  const fs::path dir(cfg.out_dir);
  std::vector<std::string> files;
  int status = kExitOk;
  json summary = json::object();

  try {
    fs::create_directories(dir);
    const auto bundle = solve_equilibrium(cfg.dist, cfg.params, cfg.nu, cfg.grid, cfg.solver);
    for (std::size_t m = 0; m < bundle.types.size(); ++m) {
      const auto& fp = bundle.types[m].fixed_point;
      log << "type " << m << ": fixed point residual " << fp.residual << " after "
          << fp.iterations << " iterations" << (fp.used_marching ? " (marching)" : "")
          << "\n";
    }
    write_solution(dir, bundle, files);

    switch (cfg.experiment) {
      case Experiment::SolveMfe:
        break;

      case Experiment::Consistency: {
        CsvWriter csv((dir / "consistency.csv").string(),
                      {"atom", "t", "mc_mean", "se", "mU", "z", "mPhi_mc", "mPhi", "violated"});
        files.push_back("consistency.csv");
        std::optional<ConsistencyReport> failed;
        for (std::size_t m = 0; m < bundle.types.size(); ++m) {
          const auto report = consistency_report(bundle, m, cfg.mc, cfg.t_checks);
          for (const auto& r : report.rows) {
            csv.row_fields({std::to_string(m), format_double(r.t), format_double(r.mc_mean),
                            format_double(r.se), format_double(r.mU), format_double(r.z),
                            format_double(r.mPhi_mc), format_double(r.mPhi),
                            yes_no(r.violated)});
          }
          log << "type " << m << ": max |z| " << report.max_abs_z << "\n";
          summary["max_abs_z"].push_back(report.max_abs_z);
          if (!report.ok() && !failed) failed = report;

          if (cfg.dump_paths > 0) {
            McSettings small = cfg.mc;
            small.n_paths = cfg.dump_paths;
            SimOptions options = sim_options(small, cfg.params.T());
            options.store_paths = true;
            const auto& te = bundle.types[m];
            const auto law = FeedbackLaw::equilibrium(bundle.dist.type(m), cfg.params,
                                                      te.table, te.B, te.mU());
            const auto e = simulate_representative(bundle.dist.type(m), cfg.params, cfg.nu,
                                                   law, te.mU(), te.mPhi, options);
            const std::string name = "paths_consistency-s" + std::to_string(cfg.mc.seed) +
                                     "-a" + std::to_string(m) + ".csv";
            write_paths_csv((dir / name).string(), e);
            files.push_back(name);
          }
        }
        if (failed) consistency_check(*failed);
        break;
      }

      case Experiment::NashGap: {
        const auto records = nash_gap_curve(bundle, cfg.n_list, cfg.mc);
        CsvWriter csv((dir / "nash_gap.csv").string(),
                      {"n", "atom", "probe", "J_star", "J_star_se", "V_limit", "gap", "gap_se",
                       "best_deviation", "best_deviation_improvement",
                       "best_deviation_improvement_se", "certified"});
        CsvWriter devs((dir / "nash_deviations.csv").string(),
                       {"n", "atom", "deviation", "improvement", "se"});
        files.push_back("nash_gap.csv");
        files.push_back("nash_deviations.csv");
        for (const auto& r : records) {
          csv.row_fields({std::to_string(r.n), std::to_string(r.atom), std::to_string(r.probe),
                          format_double(r.J_star.mean), format_double(r.J_star.se),
                          format_double(r.V_limit), format_double(r.gap),
                          format_double(r.gap_se), r.best_deviation,
                          format_double(r.best_improvement),
                          format_double(r.best_improvement_se), yes_no(r.certified())});
          for (const auto& d : r.deviations) {
            devs.row_fields({std::to_string(r.n), std::to_string(r.atom), d.name,
                             format_double(d.improvement), format_double(d.se)});
          }
          log << "n=" << r.n << " atom " << r.atom << ": gap " << r.gap << " (se "
              << r.gap_se << "), best deviation " << r.best_deviation << " "
              << r.best_improvement << "\n";
        }
        break;
      }

      case Experiment::Lln: {
        const auto records = lln_check(bundle, cfg.n_list, cfg.t_checks, cfg.mc);
        CsvWriter csv((dir / "lln.csv").string(), {"n", "t", "metric", "se"});
        files.push_back("lln.csv");
        for (const auto& r : records) {
          csv.row_fields({std::to_string(r.n), format_double(r.t), format_double(r.metric),
                          format_double(r.se)});
          log << "n=" << r.n << " t=" << r.t << ": " << r.metric << "\n";
        }
        break;
      }

      case Experiment::Verify: {
        const auto checks = verify_suite(bundle, cfg.solver, cfg.mc, cfg.t_checks, cfg.n_list);
        CsvWriter csv((dir / "verify.csv").string(), {"check", "value", "threshold", "passed"});
        files.push_back("verify.csv");
        std::size_t failures = 0;
        for (const auto& c : checks) {
          csv.row_fields({c.name, format_double(c.value), format_double(c.threshold),
                          yes_no(c.passed)});
          log << (c.passed ? "ok   " : "FAIL ") << c.name << " " << c.value << " (<= "
              << c.threshold << ")\n";
          failures += c.passed ? 0 : 1;
        }
        summary["failed_checks"] = failures;
        if (failures > 0) status = kExitVerification;
        break;
      }
    }
  } catch (const NonConvergence& e) {
    log << "error: " << e.what() << "\n";
    status = kExitNonConvergence;
  } catch (const ConsistencyViolation& e) {
    log << "verification failure: " << e.what() << "\n";
    status = kExitVerification;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest = {
      {"config", cfg.source},
      {"config_path", config_path},
      {"experiment", experiment_name(cfg.experiment)},
      {"seed", cfg.mc.seed},
      {"grid", {{"T", cfg.grid.T()}, {"n_steps", cfg.grid.n_steps()}}},
      {"mc", {{"n_paths", cfg.mc.n_paths}, {"n_steps", cfg.mc.n_steps},
              {"threads", worker_count(cfg.mc.threads)}}},
      {"tolerances", {{"solver_tol", cfg.solver.tol}, {"solver_max_iter", cfg.solver.max_iter},
                      {"consistency_z", 3.0}}},
      {"n_list", cfg.n_list},
      {"t_checks", cfg.t_checks},
      {"outputs", files},
      {"summary", summary},
      {"exit_code", status},
      {"wall_time_s", wall},
  };
  std::ofstream out(dir / "run_manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) {
    log << "error: cannot write run_manifest.json\n";
    return kExitFailure;
  }
  return status;
}

}  // namespace neuromfg
