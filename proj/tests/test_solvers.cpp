#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "flagopt/oracles.hpp"
#include "flagopt/rohf.hpp"
#include "flagopt/solvers.hpp"
#include "test_helpers.hpp"

using namespace flagopt;
using testutil::random_integrals;

namespace {

// eri = 0 model: E = 2 Tr(h Pi_I) + Tr(h Pi_A) with a fixed diagonal h.
rohf::IntegralSet diagonal_model() {
  rohf::IntegralSet ints(6);
  const double diag[6] = {-3.0, -2.0, -1.2, -0.5, 0.3, 1.1};
  for (int i = 0; i < 6; ++i) ints.set_h(i, i, diag[i]);
  return ints;
}

bool traces_identical(const std::vector<opt::IterationRecord>& a,
                      const std::vector<opt::IterationRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].index != b[i].index || a[i].energy != b[i].energy ||
        a[i].grad_norm != b[i].grad_norm || a[i].step != b[i].step)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("convergence check") {
  FlagShape s(4, 1, 1);
  REQUIRE(opt::check_convergence(TangentBlocks(s), 1e-5));
  TangentBlocks g = random_tangent(s, 1);
  g = (1e-5 / metric_norm(g)) * g;
  REQUIRE(opt::check_convergence(g, 1e-5));  // inclusive boundary
  REQUIRE_FALSE(opt::check_convergence(2.0 * g, 1e-5));
}

TEST_CASE("steepest descent") {
  rohf::IntegralSet model = diagonal_model();
  FlagShape s(6, 2, 2);
  opt::Objective obj = rohf::make_objective(model, s, false);
  opt::MethodConfig cfg;
  cfg.method = opt::Method::RSD;
  cfg.tolerance = 1e-6;
  cfg.max_iterations = 5000;

  SECTION("stationary start terminates immediately") {
    FlagPoint x0 = rohf::core_guess(model, s);
    opt::OptimResult res = opt::solve_rsd(obj, x0, cfg);
    REQUIRE(res.converged);
    REQUIRE(res.iterations == 0);
    REQUIRE(res.trace.size() == 1);
  }
  SECTION("reaches the analytic minimum of the diagonal model") {
    const double expected =
        verify::linear_model_minimum({-3.0, -2.0, -1.2, -0.5, 0.3, 1.1}, 2, 2);
    for (unsigned seed = 0; seed < 3; ++seed) {
      opt::OptimResult res = opt::solve_rsd(obj, random_point(s, seed), cfg);
      REQUIRE(res.converged);
      REQUIRE(res.trace.back().energy == Catch::Approx(expected).margin(1e-8));
    }
  }
  SECTION("energies decrease strictly along the trace") {
    opt::OptimResult res = opt::solve_rsd(obj, random_point(s, 77), cfg);
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      REQUIRE(res.trace[i].energy < res.trace[i - 1].energy);
  }
  SECTION("identical runs give identical traces") {
    opt::OptimResult a = opt::solve_rsd(obj, random_point(s, 5), cfg);
    opt::OptimResult b = opt::solve_rsd(obj, random_point(s, 5), cfg);
    REQUIRE(traces_identical(a.trace, b.trace));
  }
}

TEST_CASE("conjugate gradient") {
  rohf::IntegralSet ints = random_integrals(6, 81, 0.2);
  FlagShape s(6, 2, 1);
  opt::Objective obj = rohf::make_objective(ints, s, false);
  opt::MethodConfig cfg;
  cfg.method = opt::Method::RCG;
  cfg.tolerance = 1e-6;
  cfg.max_iterations = 2000;

  SECTION("first iteration is a steepest-descent step") {
    FlagPoint x0 = random_point(s, 82);
    opt::MethodConfig one = cfg;
    one.max_iterations = 1;
    opt::OptimResult rcg = opt::solve_rcg(obj, x0, one);
    opt::OptimResult rsd = opt::solve_rsd(obj, x0, one);
    REQUIRE(rcg.trace.size() == 2);
    REQUIRE(rcg.trace[1].beta == 0.0);
    REQUIRE(rcg.trace[1].energy == rsd.trace[1].energy);
    REQUIRE(rcg.trace[1].step == rsd.trace[1].step);
  }
  SECTION("beta forced to zero reproduces the steepest-descent trace bitwise") {
    FlagPoint x0 = random_point(s, 83);
    opt::MethodConfig zero = cfg;
    zero.beta_variant = opt::BetaVariant::Zero;
    opt::OptimResult a = opt::solve_rcg(obj, x0, zero);
    opt::OptimResult b = opt::solve_rsd(obj, x0, cfg);
    REQUIRE(traces_identical(a.trace, b.trace));
  }
  SECTION("all three beta variants reach the same minimum") {
    FlagPoint x0 = random_point(s, 84);
    double energies[3];
    int i = 0;
    for (opt::BetaVariant bv : {opt::BetaVariant::FletcherReeves,
                                opt::BetaVariant::PolakRibiere,
                                opt::BetaVariant::HestenesStiefel}) {
      opt::MethodConfig c = cfg;
      c.beta_variant = bv;
      opt::OptimResult res = opt::solve_rcg(obj, x0, c);
      REQUIRE(res.converged);
      energies[i++] = res.trace.back().energy;
    }
    REQUIRE(energies[0] == Catch::Approx(energies[1]).margin(1e-8));
    REQUIRE(energies[1] == Catch::Approx(energies[2]).margin(1e-8));
  }
  SECTION("monotone trace") {
    opt::OptimResult res = opt::solve_rcg(obj, random_point(s, 85), cfg);
    REQUIRE(res.converged);
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      REQUIRE(res.trace[i].energy < res.trace[i - 1].energy);
  }
}

TEST_CASE("limited-memory bfgs") {
  rohf::IntegralSet ints = random_integrals(6, 91, 0.2);
  FlagShape s(6, 2, 1);
  opt::Objective obj = rohf::make_objective(ints, s, true);
  opt::MethodConfig cfg;
  cfg.method = opt::Method::RLBFGS;
  cfg.tolerance = 1e-6;
  cfg.max_iterations = 2000;

  SECTION("memory zero without preconditioner degenerates to steepest descent") {
    FlagPoint x0 = random_point(s, 92);
    opt::MethodConfig m0 = cfg;
    m0.memory = 0;
    m0.use_preconditioner = false;
    opt::OptimResult a = opt::solve_rlbfgs(obj, x0, m0);
    opt::MethodConfig sd = cfg;
    sd.use_preconditioner = false;
    opt::OptimResult b = opt::solve_rsd(obj, x0, sd);
    REQUIRE(traces_identical(a.trace, b.trace));
  }
  SECTION("converges with both restart strategies, with and without preconditioner") {
    FlagPoint x0 = random_point(s, 93);
    double energies[4];
    int i = 0;
    for (bool pre : {false, true})
      for (opt::RestartStrategy rs : {opt::RestartStrategy::Dynamic, opt::RestartStrategy::Fixed}) {
        opt::MethodConfig c = cfg;
        c.use_preconditioner = pre;
        c.restart = rs;
        opt::OptimResult res = opt::solve_rlbfgs(obj, x0, c);
        REQUIRE(res.converged);
        energies[i++] = res.trace.back().energy;
      }
    for (int j = 1; j < 4; ++j)
      REQUIRE(energies[0] == Catch::Approx(energies[j]).margin(1e-8));
  }
  SECTION("uses fewer iterations than steepest descent on the same instance") {
    FlagPoint x0 = random_point(s, 94);
    opt::MethodConfig sd = cfg;
    sd.use_preconditioner = false;
    opt::OptimResult rsd = opt::solve_rsd(obj, x0, sd);
    opt::OptimResult lbfgs = opt::solve_rlbfgs(obj, x0, cfg);
    REQUIRE(lbfgs.converged);
    REQUIRE(rsd.converged);
    REQUIRE(lbfgs.iterations < rsd.iterations);
  }
  SECTION("monotone trace") {
    opt::OptimResult res = opt::solve_rlbfgs(obj, random_point(s, 95), cfg);
    REQUIRE(res.converged);
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      REQUIRE(res.trace[i].energy < res.trace[i - 1].energy);
  }
}

TEST_CASE("method agreement on a random small instance") {
  rohf::IntegralSet ints = random_integrals(5, 96, 0.15);
  FlagShape s(5, 1, 1);
  opt::Objective obj = rohf::make_objective(ints, s, true);
  FlagPoint x0 = rohf::core_guess(ints, s);
  opt::MethodConfig cfg;
  cfg.tolerance = 1e-6;
  cfg.max_iterations = 3000;

  std::vector<double> finals;
  {
    opt::MethodConfig c = cfg;
    c.method = opt::Method::RSD;
    c.use_preconditioner = false;
    finals.push_back(opt::solve(obj, x0, c).trace.back().energy);
  }
  {
    opt::MethodConfig c = cfg;
    c.method = opt::Method::RCG;
    finals.push_back(opt::solve(obj, x0, c).trace.back().energy);
  }
  {
    opt::MethodConfig c = cfg;
    c.method = opt::Method::RLBFGS;
    c.use_preconditioner = true;
    finals.push_back(opt::solve(obj, x0, c).trace.back().energy);
  }
  for (std::size_t i = 1; i < finals.size(); ++i)
    REQUIRE(finals[0] == Catch::Approx(finals[i]).margin(1e-8));
}

TEST_CASE("config validation") {
  rohf::IntegralSet ints = random_integrals(4, 97);
  FlagShape s(4, 1, 1);
  opt::Objective obj = rohf::make_objective(ints, s, false);
  FlagPoint x0 = random_point(s, 98);
  opt::MethodConfig cfg;
  cfg.tolerance = -1.0;
  REQUIRE_THROWS_AS(opt::solve_rsd(obj, x0, cfg), ContractViolation);
  cfg.tolerance = 1e-5;
  cfg.line_search.curvature = 2.0;
  REQUIRE_THROWS_AS(opt::solve_rcg(obj, x0, cfg), ContractViolation);
}

#ifndef FIXTURE_DIR
#define FIXTURE_DIR "fixtures"
#endif

namespace {

rohf::IntegralSet load_fixture(const std::string& name) {
  std::ifstream in(std::string(FIXTURE_DIR) + "/" + name);
  REQUIRE(in.good());
  return rohf::parse_fcidump(in);
}

}  // namespace

TEST_CASE("method agreement on the bundled fixtures") {
  struct Case {
    const char* file;
    int ni, na;
  };
  for (const Case& c : {Case{"oh_sto3g.fcidump", 4, 1}, Case{"ch2_sto3g.fcidump", 3, 2}}) {
    rohf::IntegralSet ints = load_fixture(c.file);
    FlagShape s(ints.n_orb(), c.ni, c.na);
    opt::Objective obj = rohf::make_objective(ints, s);
    FlagPoint x0 = rohf::core_guess(ints, s);
    opt::MethodConfig cfg;
    cfg.tolerance = 1e-5;
    cfg.max_iterations = 20000;

    std::vector<double> finals;
    {
      opt::MethodConfig r = cfg;
      r.method = opt::Method::RSD;
      opt::OptimResult res = opt::solve(obj, x0, r);
      REQUIRE(res.converged);
      finals.push_back(res.trace.back().energy);
    }
    for (opt::BetaVariant bv : {opt::BetaVariant::FletcherReeves,
                                opt::BetaVariant::PolakRibiere,
                                opt::BetaVariant::HestenesStiefel}) {
      opt::MethodConfig r = cfg;
      r.method = opt::Method::RCG;
      r.beta_variant = bv;
      opt::OptimResult res = opt::solve(obj, x0, r);
      REQUIRE(res.converged);
      finals.push_back(res.trace.back().energy);
    }
    for (opt::RestartStrategy rs : {opt::RestartStrategy::Dynamic, opt::RestartStrategy::Fixed}) {
      opt::MethodConfig r = cfg;
      r.method = opt::Method::RLBFGS;
      r.restart = rs;
      r.use_preconditioner = true;
      opt::OptimResult res = opt::solve(obj, x0, r);
      REQUIRE(res.converged);
      finals.push_back(res.trace.back().energy);
    }
    for (std::size_t i = 1; i < finals.size(); ++i)
      REQUIRE(finals[0] == Catch::Approx(finals[i]).margin(1e-8));
  }
}

TEST_CASE("conjugate gradient beats steepest descent on the methylene fixture") {
  rohf::IntegralSet ints = load_fixture("ch2_sto3g.fcidump");
  FlagShape s(ints.n_orb(), 3, 2);
  opt::Objective obj = rohf::make_objective(ints, s, false);
  FlagPoint x0 = rohf::core_guess(ints, s);
  opt::MethodConfig cfg;
  cfg.tolerance = 1e-5;
  cfg.max_iterations = 20000;
  cfg.method = opt::Method::RSD;
  opt::OptimResult rsd = opt::solve(obj, x0, cfg);
  cfg.method = opt::Method::RCG;
  cfg.beta_variant = opt::BetaVariant::PolakRibiere;
  opt::OptimResult rcg = opt::solve(obj, x0, cfg);
  REQUIRE(rsd.converged);
  REQUIRE(rcg.converged);
  REQUIRE(rcg.trace.back().energy == Catch::Approx(rsd.trace.back().energy).margin(1e-8));
  REQUIRE(rcg.iterations < rsd.iterations);
}
