#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "flagopt/line_search.hpp"
#include "flagopt/rohf.hpp"
#include "test_helpers.hpp"

using namespace flagopt;
using testutil::random_integrals;

namespace {

// Objective whose pullback along the one free rotation angle of shape (1,1,0)
// is exactly quadratic: E = (theta - theta_star)^2 / 2 with the angle read
// back from the coefficient matrix.
struct QuadraticAngleModel {
  double theta_star;
  opt::Objective objective() const {
    const double ts = theta_star;
    opt::Objective obj;
    obj.energy = [ts](const FlagPoint& x) {
      const double theta = std::atan2(x.C(0, 1), x.C(0, 0));
      return 0.5 * (theta - ts) * (theta - ts);
    };
    obj.gradient = [ts](const FlagPoint& x) {
      const double theta = std::atan2(x.C(0, 1), x.C(0, 0));
      Matrix ia(1, 1);
      ia << 0.5 * (theta - ts);  // metric(g, d) = dE/dt for d with k_ia = 1
      return TangentBlocks(x.shape, ia, Matrix::Zero(1, 0), Matrix::Zero(1, 0));
    };
    return obj;
  }
};

TangentBlocks unit_direction() {
  FlagShape s(2, 1, 1);
  Matrix ia(1, 1);
  ia << 1.0;
  return TangentBlocks(s, ia, Matrix::Zero(1, 0), Matrix::Zero(1, 0));
}

}  // namespace

TEST_CASE("strong wolfe line search") {
  FlagShape s(2, 1, 1);
  FlagPoint x0(s, Matrix::Identity(2, 2));
  const double tstar = 0.3;
  QuadraticAngleModel model{tstar};
  opt::Objective obj = model.objective();
  TangentBlocks d = unit_direction();

  SECTION("quadratic pullback: lands near the 1-D minimum from far away") {
    // t0 choices stay inside |t| < pi where the angle does not wrap
    for (double t0 : {0.01 * tstar, 4.0 * tstar, 10.0 * tstar}) {
      opt::LineSearchResult r = line_search(obj, x0, d, t0);
      REQUIRE(r.ok);
      REQUIRE(r.t >= 0.5 * tstar);
      REQUIRE(r.t <= 1.5 * tstar);
      // strong Wolfe at the returned point
      const double phi0 = obj.energy(x0), dphi0 = metric(obj.gradient(x0), d);
      REQUIRE(r.energy <= phi0 + 1e-4 * r.t * dphi0);
      REQUIRE(std::abs(metric(r.gradient, d)) <= 0.9 * std::abs(dphi0));
    }
  }
  SECTION("steepest descent direction strictly lowers a rohf energy") {
    rohf::IntegralSet ints = random_integrals(5, 71);
    FlagShape sh(5, 2, 1);
    FlagPoint x = random_point(sh, 72);
    opt::Objective robj = rohf::make_objective(ints, sh, false);
    TangentBlocks g = robj.gradient(x);
    opt::LineSearchResult r = line_search(robj, x, -g, 0.5);
    REQUIRE(r.ok);
    REQUIRE(r.energy < robj.energy(x));
    REQUIRE(r.t > 0.0);
  }
  SECTION("non-positive initial step violates the contract") {
    REQUIRE_THROWS_AS(line_search(obj, x0, d, 0.0), ContractViolation);
  }
  SECTION("ascent direction violates the contract") {
    rohf::IntegralSet ints = random_integrals(4, 73);
    FlagShape sh(4, 1, 1);
    FlagPoint x = random_point(sh, 74);
    opt::Objective robj = rohf::make_objective(ints, sh, false);
    TangentBlocks g = robj.gradient(x);
    REQUIRE_THROWS_AS(line_search(robj, x, g, 0.1), ContractViolation);
  }
  SECTION("evaluation budget is respected and reported") {
    opt::LineSearchParams params;
    params.max_evaluations = 3;
    opt::LineSearchResult r = line_search(obj, x0, d, 1e-9, params);
    REQUIRE(r.evaluations <= 3);
  }
  SECTION("returned point and gradient match a fresh evaluation") {
    opt::LineSearchResult r = line_search(obj, x0, d, 0.1);
    REQUIRE(r.ok);
    REQUIRE(r.energy == Catch::Approx(obj.energy(r.point)).margin(1e-15));
    REQUIRE(block_frobenius_norm(r.gradient - obj.gradient(r.point)) <= 1e-15);
  }
}
