#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "flagopt/oracles.hpp"
#include "flagopt/rohf.hpp"
#include "test_helpers.hpp"

using namespace flagopt;
using testutil::random_integrals;

TEST_CASE("finite difference oracles") {
  FlagShape s(4, 1, 1);
  FlagPoint x = random_point(s, 1);
  TangentBlocks k = random_tangent(s, 2);

  SECTION("constant objective differentiates to zero") {
    opt::Objective obj;
    obj.energy = [](const FlagPoint&) { return 7.25; };
    obj.gradient = [](const FlagPoint& p) { return TangentBlocks(p.shape); };
    REQUIRE(verify::fd_directional_derivative(obj, x, k) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(verify::fd_second_derivative(obj, x, k) == Catch::Approx(0.0).margin(1e-8));
  }
  SECTION("linear trace model has a closed-form derivative") {
    // E(X) = Tr(M^T X.C); dE/dt along k at t=0 is Tr(M^T X.C kappa)
    Matrix M = Matrix::Random(4, 4);
    opt::Objective obj;
    obj.energy = [M](const FlagPoint& p) { return (M.transpose() * p.C).trace(); };
    obj.gradient = [](const FlagPoint& p) { return TangentBlocks(p.shape); };
    const double expected = (M.transpose() * x.C * embed(k)).trace();
    REQUIRE(verify::fd_directional_derivative(obj, x, k) ==
            Catch::Approx(expected).epsilon(1e-8));
  }
  SECTION("step must be positive") {
    REQUIRE_THROWS_AS(verify::FDConfig(0.0), ContractViolation);
  }
}

TEST_CASE("dense transport oracle") {
  SECTION("commuting and trivial cases") {
    FlagShape s(5, 2, 1);
    TangentBlocks k = random_tangent(s, 3);
    REQUIRE(block_frobenius_norm(verify::dense_transport_oracle(k, k) - k) <= 1e-12);
    TangentBlocks k2 = random_tangent(s, 4);
    REQUIRE(block_frobenius_norm(verify::dense_transport_oracle(TangentBlocks(s), k2) - k2) <=
            1e-14);
  }
  SECTION("cross-validates the series implementation on shape (1,1,2)") {
    FlagShape s(4, 1, 1);
    for (unsigned seed = 0; seed < 10; ++seed) {
      TangentBlocks k = random_tangent(s, 10 + seed), k2 = random_tangent(s, 30 + seed);
      TangentBlocks dense = verify::dense_transport_oracle(k, k2);
      TangentBlocks series = transport(random_point(s, seed), k, k2).vector;
      REQUIRE(block_frobenius_norm(dense - series) <= 1e-10);
    }
  }
  SECTION("dimension cap") {
    FlagShape s(40, 10, 10);
    TangentBlocks k = random_tangent(s, 5);
    REQUIRE(s.tangent_dim() > 200);
    REQUIRE_THROWS_AS(verify::dense_transport_oracle(k, k), ShapeError);
  }
}

TEST_CASE("brute force J/K") {
  SECTION("scalar closed form") {
    rohf::IntegralSet ints(1);
    ints.set_eri(0, 0, 0, 0, 0.625);
    Matrix P(1, 1);
    P << 2.0;
    auto [J, K] = verify::brute_force_jk(ints, P);
    REQUIRE(J(0, 0) == Catch::Approx(1.25));
    REQUIRE(K(0, 0) == Catch::Approx(1.25));
  }
  SECTION("symmetric output for symmetric input") {
    rohf::IntegralSet ints = random_integrals(4, 6);
    Matrix P = Matrix::Random(4, 4);
    P = 0.5 * (P + Matrix(P.transpose()));
    auto [J, K] = verify::brute_force_jk(ints, P);
    REQUIRE((J - Matrix(J.transpose())).norm() <= 1e-12);
    REQUIRE((K - Matrix(K.transpose())).norm() <= 1e-12);
  }
}

TEST_CASE("linear model minimum") {
  SECTION("worked example") {
    REQUIRE(verify::linear_model_minimum({-2.0, -1.0, 0.0}, 1, 1) == Catch::Approx(-5.0));
  }
  SECTION("no occupied orbitals gives zero") {
    REQUIRE(verify::linear_model_minimum({1.0, 2.0, 3.0}, 0, 0) == 0.0);
  }
  SECTION("equal eigenvalues count multiplicities only") {
    REQUIRE(verify::linear_model_minimum({0.7, 0.7, 0.7, 0.7}, 2, 1) ==
            Catch::Approx((2 * 2 + 1) * 0.7));
  }
  SECTION("exhaustive check over all occupation assignments, n <= 8") {
    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int n = 2; n <= 8; ++n) {
      std::vector<double> eig(n);
      for (double& e : eig) e = unif(eng);
      std::sort(eig.begin(), eig.end());
      for (int ni = 0; ni <= 2; ++ni)
        for (int na = 0; na + ni <= n && na <= 2; ++na) {
          // enumerate every way to pick internal and active index sets
          double best = std::numeric_limits<double>::infinity();
          std::vector<int> idx(n);
          std::iota(idx.begin(), idx.end(), 0);
          std::vector<bool> pick_i(n, false);
          std::fill(pick_i.begin(), pick_i.begin() + ni, true);
          std::sort(pick_i.begin(), pick_i.end());
          do {
            std::vector<int> internal, rest;
            for (int t = 0; t < n; ++t)
              (pick_i[t] ? internal : rest).push_back(t);
            std::vector<bool> pick_a(rest.size(), false);
            std::fill(pick_a.begin(), pick_a.begin() + na, true);
            std::sort(pick_a.begin(), pick_a.end());
            do {
              double e = 0.0;
              for (int t : internal) e += 2.0 * eig[t];
              for (std::size_t t = 0; t < rest.size(); ++t)
                if (pick_a[t]) e += eig[rest[t]];
              best = std::min(best, e);
            } while (std::next_permutation(pick_a.begin(), pick_a.end()));
          } while (std::next_permutation(pick_i.begin(), pick_i.end()));
          if (ni + na == 0) best = 0.0;
          REQUIRE(verify::linear_model_minimum(eig, ni, na) ==
                  Catch::Approx(best).margin(1e-12));
        }
    }
  }
  SECTION("input validation") {
    REQUIRE_THROWS_AS(verify::linear_model_minimum({1.0, 0.0}, 1, 0), ContractViolation);
    REQUIRE_THROWS_AS(verify::linear_model_minimum({0.0, 1.0}, 2, 1), ShapeError);
  }
}

TEST_CASE("second-derivative oracle on the linear trace model") {
  FlagShape s(4, 1, 1);
  FlagPoint x = random_point(s, 8);
  TangentBlocks k = random_tangent(s, 9);
  Matrix M = Matrix::Random(4, 4);
  opt::Objective obj;
  obj.energy = [M](const FlagPoint& p) { return (M.transpose() * p.C).trace(); };
  obj.gradient = [](const FlagPoint& p) { return TangentBlocks(p.shape); };
  // d^2/dt^2 Tr(M^T X C e^{t kappa}) = Tr(M^T X C kappa^2) at t = 0
  Matrix kappa = embed(k);
  const double expected = (M.transpose() * x.C * kappa * kappa).trace();
  REQUIRE(verify::fd_second_derivative(obj, x, k) == Catch::Approx(expected).margin(1e-6));
}
