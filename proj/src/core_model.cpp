#include "neuromfg/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "neuromfg/errors.hpp"

namespace neuromfg {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace

ModelParams::ModelParams(double rho, double beta, double gamma, double k,
                         double ell, double T)
    : rho_(rho), beta_(beta), gamma_(gamma), k_(k), ell_(ell), T_(T) {
  require(positive_finite(rho), "rho must be positive");
  require(positive_finite(beta), "beta must be positive");
  require(positive_finite(gamma), "gamma must be positive");
  require(positive_finite(k), "k must be positive");
  require(positive_finite(ell), "ell must be positive");
  require(positive_finite(T), "T must be positive");
  require(rho * rho < 4.0 * beta, "running cost not convex: rho^2 >= 4 beta");
}

NeuronType::NeuronType(double u, double a, double c) : u_(u), a_(a), c_(c) {
  require(positive_finite(u), "neuron type needs u > 0");
  require(positive_finite(a), "neuron type needs a > 0");
  require(positive_finite(c), "neuron type needs c > 0");
}

JumpMeasure::JumpMeasure(double rate, std::vector<JumpAtom> atoms)
    : rate_(rate), atoms_(std::move(atoms)), m1_(0.0), m2_(0.0) {
  require(std::isfinite(rate) && rate >= 0.0, "jump rate must be >= 0");
  require(!atoms_.empty(), "jump measure needs at least one atom");
  double total = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  for (const auto& atom : atoms_) {
    require(std::isfinite(atom.z) && atom.z >= 0.0 && atom.z <= 1.0,
            "jump mark z must lie in [0, 1]");
    require(positive_finite(atom.q), "jump atom probability must be > 0");
    total += atom.q;
    s1 += atom.q * atom.z;
    s2 += atom.q * atom.z * atom.z;
  }
  require(std::abs(total - 1.0) <= 1e-12, "jump atom probabilities must sum to 1");
  m1_ = rate_ * s1;
  m2_ = rate_ * s2;
}

std::pair<double, double> jump_moments(const JumpMeasure& nu) {
  return {nu.m1(), nu.m2()};
}

TypeDistribution::TypeDistribution(Unchecked, std::vector<TypeAtom> atoms)
    : atoms_(std::move(atoms)) {
  require(!atoms_.empty(), "type distribution needs at least one atom");
  double total = 0.0;
  for (const auto& atom : atoms_) {
    require(positive_finite(atom.weight), "type weights must be positive");
    total += atom.weight;
  }
  require(std::abs(total - 1.0) <= 1e-12, "type weights must sum to 1");
}

TypeDistribution::TypeDistribution(std::vector<TypeAtom> atoms)
    : TypeDistribution(unchecked, std::move(atoms)) {
  // Atoms built with Unchecked are rejected here.
  for (const auto& atom : atoms_) {
    NeuronType(atom.type.u(), atom.type.a(), atom.type.c());
  }
}

std::vector<std::size_t> assign_type_counts(const TypeDistribution& dist,
                                            std::size_t n) {
  if (n == 0) throw InvalidArgument("assign_types needs n >= 1");
  const std::size_t m = dist.size();
  std::vector<std::size_t> counts(m);
  std::vector<double> remainder(m);
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double share = static_cast<double>(n) * dist.weight(j);
    const double base = std::floor(share);
    counts[j] = static_cast<std::size_t>(base);
    remainder[j] = share - base;
    assigned += counts[j];
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return remainder[l] > remainder[r];
  });
  // sum floor(n w_j) <= n(1 + 1e-12) < n + 1, so only a shortfall is possible.
  for (std::size_t idx = 0; assigned < n; idx = (idx + 1) % m) {
    ++counts[order[idx]];
    ++assigned;
  }
  return counts;
}

std::vector<std::size_t> assign_type_atoms(const TypeDistribution& dist,
                                           std::size_t n) {
  const auto counts = assign_type_counts(dist, n);
  std::vector<std::size_t> atoms;
  atoms.reserve(n);
  for (std::size_t j = 0; j < counts.size(); ++j) {
    atoms.insert(atoms.end(), counts[j], j);
  }
  return atoms;
}

std::vector<NeuronType> assign_types(const TypeDistribution& dist,
                                     std::size_t n) {
  std::vector<NeuronType> types;
  types.reserve(n);
  for (std::size_t j : assign_type_atoms(dist, n)) types.push_back(dist.type(j));
  return types;
}

TimeGrid::TimeGrid(double T, std::size_t n_steps) : T_(T), n_steps_(n_steps) {
  require(positive_finite(T), "grid horizon must be positive");
  require(n_steps > 0, "grid needs at least one step");
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(i);
  return out;
}

std::pair<std::size_t, double> TimeGrid::locate(double t) const {
  if (!(t > 0.0)) return {0, 0.0};
  if (t >= T_) return {n_steps_ - 1, 1.0};
  const double x = t / dt();
  auto i = static_cast<std::size_t>(x);
  if (i >= n_steps_) i = n_steps_ - 1;
  return {i, x - static_cast<double>(i)};
}

namespace quad {

double trapezoid(const std::vector<double>& f, double dt) {
  if (f.size() < 2) return 0.0;
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
  return s * dt;
}

std::vector<double> cumulative_forward(const std::vector<double>& f,
                                       double dt) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = 1; i < f.size(); ++i) {
    out[i] = out[i - 1] + 0.5 * dt * (f[i - 1] + f[i]);
  }
  return out;
}

std::vector<double> cumulative_backward(const std::vector<double>& f,
                                        double dt) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = f.size(); i-- > 1;) {
    out[i - 1] = out[i] + 0.5 * dt * (f[i - 1] + f[i]);
  }
  return out;
}

}  // namespace quad

}  // namespace neuromfg
