#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "neuromfg/errors.hpp"
#include "neuromfg/riccati.hpp"
#include "oracles.hpp"

using namespace neuromfg;

namespace {

const NeuronType kP(1.0, 1.0, 1.0);
const ModelParams kParams(0.5, 1.0, 1.0, 0.5, 0.2, 1.0);
const JumpMeasure kNu(1.0, {{0.5, 1.0}});

struct Case {
  NeuronType p;
  ModelParams params;
  JumpMeasure nu;
};

std::vector<Case> random_cases(std::size_t count, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> U(0.1, 3.0), Z(0.0, 1.0);
  std::vector<Case> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double beta = U(gen);
    const double rho = 1.9 * std::sqrt(beta) * Z(gen) + 1e-3;
    const double z1 = Z(gen), z2 = Z(gen), q = 0.05 + 0.9 * Z(gen);
    out.push_back({NeuronType(U(gen), U(gen), U(gen)),
                   ModelParams(rho, beta, U(gen), U(gen), U(gen), 0.2 + U(gen)),
                   JumpMeasure(2.0 * Z(gen), {{z1, q}, {z2, 1.0 - q}})});
  }
  return out;
}

}  // namespace

TEST_CASE("riccati constants on the demo") {
  const auto rc = riccati_constants(kP, kParams, kNu);
  CHECK(rc.delta_plus + rc.delta_minus == doctest::Approx(-3.25).epsilon(1e-14));
  CHECK(rc.R == doctest::Approx(3.578125).epsilon(1e-14));
  const double half = 0.5 * (rc.delta_plus + rc.delta_minus);
  CHECK(rc.delta_plus * rc.delta_minus == doctest::Approx(half * half - rc.R).epsilon(1e-12));
  CHECK(rc.delta_plus > 0.0);
  CHECK(rc.delta_minus < 0.0);
}

TEST_CASE("riccati constants in the small control-scale limit") {
  const auto rc = riccati_constants(NeuronType(1.0, 1.0, 1e-6), kParams,
                                    JumpMeasure::none());
  CHECK(std::abs(rc.delta_plus - 0.0) < 1e-5);
  CHECK(std::abs(rc.delta_minus + 2.0) < 1e-5);
  CHECK(rc.delta_plus > 0.0);
}

TEST_CASE("characteristic roots have fixed signs") {
  for (const auto& c : random_cases(200, 7)) {
    const auto rc = riccati_constants(c.p, c.params, c.nu);
    CHECK(rc.R > 0.0);
    CHECK(rc.delta_plus > 0.0);
    CHECK(rc.delta_minus < 0.0);
  }
}

TEST_CASE("A terminal value and domain") {
  CHECK(A_of_t(kP, kParams, kNu, 1.0) == 1.0);
  for (const auto& c : random_cases(50, 11)) {
    CHECK(A_of_t(c.p, c.params, c.nu, c.params.T()) == c.params.gamma());
  }
  CHECK_THROWS_AS(A_of_t(kP, kParams, kNu, -1e-9), DomainError);
  CHECK_THROWS_AS(A_of_t(kP, kParams, kNu, 1.0 + 1e-9), DomainError);
}

TEST_CASE("A against backward RK4") {
  const auto rk = oracle::riccati_rk4(kP, kParams, kNu, 10000, 1);
  CHECK(std::abs(A_of_t(kP, kParams, kNu, 0.0) - rk[0]) < 1e-8);
  for (const auto& c : random_cases(20, 3)) {
    const auto ref = oracle::riccati_rk4(c.p, c.params, c.nu, 1000, 10);
    const double T = c.params.T();
    for (std::size_t i = 0; i <= 1000; i += 50) {
      const double t = T * static_cast<double>(i) / 1000.0;
      CHECK(std::abs(A_of_t(c.p, c.params, c.nu, t) - ref[i]) < 1e-8 * (1.0 + ref[i]));
    }
  }
}

TEST_CASE("A is grid free") {
  const auto coarse = make_coefficient_table(kP, kParams, kNu, TimeGrid(1.0, 500));
  const auto fine = make_coefficient_table(kP, kParams, kNu, TimeGrid(1.0, 1000));
  for (std::size_t i = 0; i <= 500; ++i) CHECK(coarse.A[i] == fine.A[2 * i]);
}

TEST_CASE("riccati rhs") {
  CHECK(riccati_ode_rhs(kP, kParams, kNu, 0.0) == 0.0625 - 1.0);
  const ModelParams no_rho(unchecked, 0.0, 1.0, 1.0, 0.5, 0.2, 1.0);
  CHECK(riccati_ode_rhs(kP, no_rho, JumpMeasure::none(), 1.0) == 2.0);

  const double eps = 1e-5;
  for (double t : {0.1, 0.4, 0.75, 0.95}) {
    const double d = (A_of_t(kP, kParams, kNu, t + eps) -
                      A_of_t(kP, kParams, kNu, t - eps)) / (2.0 * eps);
    CHECK(std::abs(d - riccati_ode_rhs(kP, kParams, kNu, A_of_t(kP, kParams, kNu, t))) < 1e-8);
  }
}

TEST_CASE("closed form solves the ODE at every node") {
  auto cases = random_cases(10, 5);
  cases.insert(cases.begin(), Case{kP, kParams, kNu});
  for (std::size_t n = 0; n < cases.size(); ++n) {
    const Case& c = cases[n];
    // The demo at 2000 nodes; steeper random cases on a finer grid.
    const TimeGrid g(c.params.T(), n == 0 ? 2000 : 8000);
    const double h = g.dt();
    const auto A = [&](double t) { return A_of_t(c.p, c.params, c.nu, t); };
    for (std::size_t i = 2; i + 2 < g.size(); ++i) {
      const double d = (A(g.node(i - 2)) - 8 * A(g.node(i - 1)) + 8 * A(g.node(i + 1)) -
                        A(g.node(i + 2))) / (12 * h);
      CHECK(std::abs(d - riccati_ode_rhs(c.p, c.params, c.nu, A(g.node(i)))) < 1e-6);
    }
  }
}

TEST_CASE("coefficient table invariants") {
  for (const auto& c : random_cases(20, 9)) {
    const auto tab = make_coefficient_table(c.p, c.params, c.nu, TimeGrid(c.params.T(), 800));
    CHECK(tab.A.back() == c.params.gamma());
    CHECK(tab.h.back() == 1.0);
    for (std::size_t i = 0; i < tab.A.size(); ++i) {
      CHECK(tab.A[i] >= 0.0);
      CHECK(tab.h[i] > 0.0);
      CHECK(tab.h[i] <= 1.0);
      if (i > 0) CHECK(tab.h[i] > tab.h[i - 1]);
    }
    // log h is additive over sub-intervals of the trapezoid sum.
    std::vector<double> g(tab.A.size());
    const double m1 = c.nu.m1();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = c.p.a() + c.p.c() * c.p.c() * tab.A[i] + m1 + c.params.rho() * c.p.c() / 2;
    }
    const auto I = oracle::cum_fwd(g, tab.grid.dt());
    for (std::size_t i = 0; i + 100 < g.size(); i += 100) {
      const double lhs = std::log(tab.h[i + 100]) - std::log(tab.h[i]);
      CHECK(std::abs(lhs - (I[i + 100] - I[i])) < 1e-12);
    }
  }
}

TEST_CASE("h examples") {
  const auto tab = make_coefficient_table(kP, kParams, kNu, TimeGrid(1.0, 100));
  CHECK(tab.h.back() == 1.0);

  const ModelParams no_rho(unchecked, 0.0, 1.0, 1.0, 0.5, 0.2, 2.0);
  const auto h = h_of_t(NeuronType(1.0, 1.0, 1e-9), no_rho, kNu, TimeGrid(2.0, 100));
  CHECK(h.front() == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));
}

TEST_CASE("h against refined quadrature") {
  const std::size_t N = 20000;
  const auto h = h_of_t(kP, kParams, kNu, TimeGrid(1.0, N));
  // Richardson of the 10N and 20N trapezoid sums of the exponent.
  const auto A10 = oracle::riccati_rk4(kP, kParams, kNu, 10 * N, 1);
  const auto A20 = oracle::riccati_rk4(kP, kParams, kNu, 20 * N, 1);
  const auto h10 = oracle::weight_h(kP, kParams, kNu, A10, 1.0 / (10.0 * N));
  const auto h20 = oracle::weight_h(kP, kParams, kNu, A20, 1.0 / (20.0 * N));
  double err = 0.0;
  for (std::size_t i = 0; i <= N; i += 10) {
    const double ref = std::exp((4.0 * std::log(h20[20 * i]) - std::log(h10[10 * i])) / 3.0);
    err = std::max(err, std::abs(h[i] - ref));
  }
  CHECK(err < 1e-8);
}

TEST_CASE("coefficients csv round trips") {
  const auto tab = make_coefficient_table(kP, kParams, kNu, TimeGrid(1.0, 10));
  const auto path = std::filesystem::temp_directory_path() / "neuromfg_coef_test.csv";
  write_coefficients_csv(path.string(), tab);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,A,h");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    double t, A, h;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &A, &h) == 3);
    CHECK(t == tab.grid.node(row));
    CHECK(A == tab.A[row]);
    CHECK(h == tab.h[row]);
    ++row;
  }
  CHECK(row == 11);
  std::filesystem::remove(path);
}
