#pragma once

// Independent reference computations used to validate the fast paths: central
// finite differences of the pullback energy, a dense operator exponential for
// parallel transport, quadruple-loop J/K contractions, and the analytic
// minimum of the one-electron (eri = 0) model. None of these share
// contraction or exponentiation code with the implementations they check.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <functional>
#include <utility>
#include <vector>

#include "flagopt/errors.hpp"
#include "flagopt/integrals.hpp"
#include "flagopt/line_search.hpp"
#include "flagopt/manifold.hpp"

namespace flagopt::verify {

struct FDConfig {
  double step = 1e-4;
  FDConfig() = default;
  explicit FDConfig(double h) : step(h) {
    if (!(h > 0.0)) throw ContractViolation("finite-difference step must be positive");
  }
};

/// Central two-point derivative of t -> E(retract(x, t k)) at t = 0.
inline double fd_directional_derivative(const opt::Objective& obj, const FlagPoint& x,
                                        const TangentBlocks& k, const FDConfig& cfg = {}) {
  const double h = cfg.step;
  return (obj.energy(retract(x, h * k)) - obj.energy(retract(x, (-h) * k))) / (2.0 * h);
}

/// Central three-point second derivative of the same pullback at t = 0.
inline double fd_second_derivative(const opt::Objective& obj, const FlagPoint& x,
                                   const TangentBlocks& k, const FDConfig& cfg = {}) {
  const double h = cfg.step;
  return (obj.energy(retract(x, h * k)) - 2.0 * obj.energy(x) +
          obj.energy(retract(x, (-h) * k))) /
         (h * h);
}

/// e^{-phi_k}(k2) evaluated by assembling the dense matrix of phi_k in the
/// canonical block basis and exponentiating it, with no series truncation.
inline TangentBlocks dense_transport_oracle(const TangentBlocks& k, const TangentBlocks& k2) {
  check_same_shape(k, k2);
  const FlagShape& s = k.shape;
  const int dim = s.tangent_dim();
  if (dim > 200) throw ShapeError("dense transport oracle capped at dimension 200");
  if (dim == 0) return k2;

  const auto to_vec = [&](const TangentBlocks& t) {
    Vector v(dim);
    int at = 0;
    for (const Matrix* m : {&t.k_ia, &t.k_ie, &t.k_ae})
      for (int i = 0; i < m->rows(); ++i)
        for (int j = 0; j < m->cols(); ++j) v(at++) = (*m)(i, j);
    return v;
  };
  const auto from_vec = [&](const Vector& v) {
    TangentBlocks t(s);
    int at = 0;
    for (Matrix* m : {&t.k_ia, &t.k_ie, &t.k_ae})
      for (int i = 0; i < m->rows(); ++i)
        for (int j = 0; j < m->cols(); ++j) (*m)(i, j) = v(at++);
    return t;
  };

  Matrix op(dim, dim);
  for (int col = 0; col < dim; ++col) {
    Vector e = Vector::Zero(dim);
    e(col) = 1.0;
    op.col(col) = to_vec(phi(k, from_vec(e)));
  }
  Matrix expneg = (-op).exp();
  return from_vec(expneg * to_vec(k2));
}

/// Naive O(n^4) J and K builds straight from the definition, through the
/// 8-fold accessor; reference for the scatter-based fast path.
inline std::pair<Matrix, Matrix> brute_force_jk(const rohf::IntegralSet& ints,
                                                const Matrix& P) {
  const int n = ints.n_orb();
  if (P.rows() != n || P.cols() != n)
    throw ShapeError("density matrix size does not match the integral set");
  Matrix J = Matrix::Zero(n, n), K = Matrix::Zero(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
          J(p, q) += ints.eri(p, q, r, s) * P(r, s);
          K(p, q) += ints.eri(p, r, q, s) * P(r, s);
        }
  return {std::move(J), std::move(K)};
}

/// Ground-state value of the eri = 0 model: 2 * (sum of the n_internal
/// smallest h-eigenvalues) + (sum of the next n_active). Eigenvalues must be
/// sorted ascending.
inline double linear_model_minimum(const std::vector<double>& eigenvalues, int n_internal,
                                   int n_active) {
  if (n_internal < 0 || n_active < 0 ||
      n_internal + n_active > static_cast<int>(eigenvalues.size()))
    throw ShapeError("occupation counts exceed the number of eigenvalues");
  if (!std::is_sorted(eigenvalues.begin(), eigenvalues.end()))
    throw ContractViolation("eigenvalues must be sorted ascending");
  double e = 0.0;
  for (int i = 0; i < n_internal; ++i) e += 2.0 * eigenvalues[i];
  for (int i = n_internal; i < n_internal + n_active; ++i) e += eigenvalues[i];
  return e;
}

}  // namespace flagopt::verify
