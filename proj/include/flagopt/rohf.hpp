#pragma once

// High-spin ROHF energy functional on the flag manifold and its calculus:
// Fock matrices, Riemannian gradient, exact and Fock-only Hessian-vector
// products, the Sylvester-equation preconditioner, and the core guess.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <utility>

#include "flagopt/errors.hpp"
#include "flagopt/integrals.hpp"
#include "flagopt/manifold.hpp"
#include "flagopt/objective.hpp"

namespace flagopt::rohf {

struct FockPair {
  Matrix F_I, F_A;
};

inline void check_shape(const FlagShape& shape, const IntegralSet& ints) {
  if (shape.n_basis != ints.n_orb())
    throw ShapeError("flag shape does not match the integral set dimension");
}

/// F_I = h + 2J(Pi_I) + J(Pi_A) - K(Pi_I) - K(Pi_A)/2,  F_A = (h + 2J(Pi_I)
/// + J(Pi_A) - K(Pi_I) - K(Pi_A))/2 (the internal and active Fock matrices).
inline FockPair fock_pair(const DensityPair& d, const IntegralSet& ints) {
  const Matrix JI = coulomb(ints, d.Pi_I), JA = coulomb(ints, d.Pi_A);
  const Matrix KI = exchange(ints, d.Pi_I), KA = exchange(ints, d.Pi_A);
  Matrix common = ints.h() + 2.0 * JI + JA - KI;
  return {common - 0.5 * KA, 0.5 * (common - KA)};
}

/// The quadratic energy functional of the density pair; defined for arbitrary
/// symmetric (Pi_I, Pi_A), not only manifold points.
inline double energy_from_densities(const Matrix& Pi_I, const Matrix& Pi_A,
                                    const IntegralSet& ints) {
  const Matrix JI = coulomb(ints, Pi_I), JA = coulomb(ints, Pi_A);
  const Matrix KI = exchange(ints, Pi_I), KA = exchange(ints, Pi_A);
  double e = ints.e_core();
  e += 2.0 * (ints.h() * Pi_I).trace() + (ints.h() * Pi_A).trace();
  e += ((2.0 * JI - KI) * (Pi_I + Pi_A)).trace();
  e += 0.5 * ((JA - KA) * Pi_A).trace();
  return e;
}

inline double energy(const FlagPoint& x, const IntegralSet& ints) {
  check_shape(x.shape, ints);
  const DensityPair d = mo_to_dm(x);
  return energy_from_densities(d.Pi_I, d.Pi_A, ints);
}

namespace detail {

/// MO-frame block (M)_XY = C_X^T M C_Y.
struct MoBlocks {
  const FlagPoint& x;
  Matrix block(const Matrix& M, int row_class, int col_class) const {
    return cols(row_class).transpose() * M * cols(col_class);
  }
  Eigen::Block<const Matrix> cols(int cls) const {
    const FlagShape& s = x.shape;
    switch (cls) {
      case 0: return x.C.block(0, 0, s.n_basis, s.n_internal);
      case 1: return x.C.block(0, s.n_internal, s.n_basis, s.n_active);
      default: return x.C.block(0, s.n_internal + s.n_active, s.n_basis, s.n_external());
    }
  }
};

constexpr int kI = 0, kA = 1, kE = 2;

}  // namespace detail

/// Riemannian gradient in block form. Equivalent to projecting the ambient
/// gradient (4 F_I C_I | 4 F_A C_A | 0) onto the tangent space; evaluated via
/// the closed forms 2(F_A - F_I)_IA, -2(F_I)_IE, -2(F_A)_AE.
inline TangentBlocks riemannian_gradient(const FlagPoint& x, const IntegralSet& ints) {
  check_shape(x.shape, ints);
  const FockPair f = fock_pair(mo_to_dm(x), ints);
  detail::MoBlocks mo{x};
  using namespace detail;
  return TangentBlocks(x.shape, 2.0 * (mo.block(f.F_A, kI, kA) - mo.block(f.F_I, kI, kA)),
                       -2.0 * mo.block(f.F_I, kI, kE), -2.0 * mo.block(f.F_A, kA, kE));
}

/// Euclidean (ambient, Frobenius) gradient of the energy with respect to C.
inline Matrix euclidean_gradient(const FlagPoint& x, const IntegralSet& ints) {
  check_shape(x.shape, ints);
  const FockPair f = fock_pair(mo_to_dm(x), ints);
  Matrix G = Matrix::Zero(x.shape.n_basis, x.shape.n_basis);
  G.leftCols(x.shape.n_internal) = 4.0 * f.F_I * x.internal();
  G.middleCols(x.shape.n_internal, x.shape.n_active) = 4.0 * f.F_A * x.active();
  return G;
}

namespace detail {

/// Symmetric one-index-class matrices lambda_1, lambda_2 built from k's blocks
/// (the derivatives of the density pair along -k), in the MO frame.
inline std::pair<Matrix, Matrix> density_response_frames(const TangentBlocks& k) {
  const FlagShape& s = k.shape;
  const int ni = s.n_internal, na = s.n_active, ne = s.n_external(), n = s.n_basis;
  Matrix l1 = Matrix::Zero(n, n), l2 = Matrix::Zero(n, n);
  l1.block(0, ni, ni, na) = k.k_ia;
  l1.block(0, ni + na, ni, ne) = k.k_ie;
  l1 += Matrix(l1.transpose());
  l2.block(0, ni, ni, na) = -k.k_ia;
  l2.block(ni, ni + na, na, ne) = k.k_ae;
  l2 += Matrix(l2.transpose());
  return {std::move(l1), std::move(l2)};
}

}  // namespace detail

/// Exact Hessian-vector product L(k) of the energy along geodesics, in block
/// form: metric(hessian_vector(x,k), k) equals d^2/dt^2 E(retract(x, t k)) at
/// t = 0, and the operator is self-adjoint for the metric.
inline TangentBlocks hessian_vector(const FlagPoint& x, const TangentBlocks& k,
                                    const IntegralSet& ints) {
  check_shape(x.shape, ints);
  if (!(x.shape == k.shape)) throw ShapeError("tangent vector does not match point");
  using namespace detail;
  const FockPair f = fock_pair(mo_to_dm(x), ints);
  MoBlocks mo{x};
  const Matrix FI_II = mo.block(f.F_I, kI, kI), FI_AA = mo.block(f.F_I, kA, kA);
  const Matrix FI_EE = mo.block(f.F_I, kE, kE), FI_IA = mo.block(f.F_I, kI, kA);
  const Matrix FI_IE = mo.block(f.F_I, kI, kE), FI_AE = mo.block(f.F_I, kA, kE);
  const Matrix FA_II = mo.block(f.F_A, kI, kI), FA_AA = mo.block(f.F_A, kA, kA);
  const Matrix FA_EE = mo.block(f.F_A, kE, kE), FA_IA = mo.block(f.F_A, kI, kA);
  const Matrix FA_IE = mo.block(f.F_A, kI, kE), FA_AE = mo.block(f.F_A, kA, kE);

  auto [l1, l2] = density_response_frames(k);
  const Matrix l1ao = x.C * l1 * x.C.transpose();
  const Matrix l2ao = x.C * l2 * x.C.transpose();
  const Matrix A1 = 2.0 * coulomb(ints, l1ao) - exchange(ints, l1ao);
  const Matrix J2 = coulomb(ints, l2ao);
  const Matrix K2 = exchange(ints, l2ao);

  const Matrix& a = k.k_ia;
  const Matrix& b = k.k_ie;
  const Matrix& c = k.k_ae;

  Matrix X = 2.0 * (a * (FI_AA - FA_AA) - (FI_II - FA_II) * a)
           + b * (2.0 * FI_AE - FA_AE).transpose()
           + (FI_IE - 2.0 * FA_IE) * c.transpose()
           + mo.block(A1 + J2, kI, kA);
  Matrix Y = a * (2.0 * FI_AE - FA_AE)
           + 2.0 * (b * FI_EE - FI_II * b)
           - (FI_IA + FA_IA) * c
           + mo.block(2.0 * A1 + 2.0 * J2 - K2, kI, kE);
  Matrix Z = a.transpose() * (FI_IE - 2.0 * FA_IE)
           - (FI_IA + FA_IA).transpose() * b
           + 2.0 * (c * FA_EE - FA_AA * c)
           + mo.block(A1 + J2 - K2, kA, kE);
  return TangentBlocks(x.shape, std::move(X), std::move(Y), std::move(Z));
}

/// Fock-only part of the Hessian (the two-electron response and the
/// cross-block couplings dropped); needs no extra J/K builds.
inline TangentBlocks approx_hessian_vector(const FlagPoint& x, const TangentBlocks& k,
                                           const IntegralSet& ints) {
  check_shape(x.shape, ints);
  if (!(x.shape == k.shape)) throw ShapeError("tangent vector does not match point");
  using namespace detail;
  const FockPair f = fock_pair(mo_to_dm(x), ints);
  MoBlocks mo{x};
  const Matrix D = f.F_I - f.F_A;
  return TangentBlocks(
      x.shape,
      2.0 * (k.k_ia * mo.block(D, kA, kA) - mo.block(D, kI, kI) * k.k_ia),
      2.0 * (k.k_ie * mo.block(f.F_I, kE, kE) - mo.block(f.F_I, kI, kI) * k.k_ie),
      2.0 * (k.k_ae * mo.block(f.F_A, kE, kE) - mo.block(f.F_A, kA, kA) * k.k_ae));
}

/// Level shift floor (Hartree) for the Sylvester denominators.
inline constexpr double kPreconditionerFloor = 1e-3;

/// Inverse of the Fock-only Hessian: three decoupled Sylvester equations
/// solved by eigendecomposition, with a global non-negative shift that keeps
/// every denominator at or above the floor when the operator is indefinite.
class SylvesterPreconditioner {
 public:
  SylvesterPreconditioner(const FlagPoint& x, const IntegralSet& ints) : shape_(x.shape) {
    check_shape(x.shape, ints);
    using namespace detail;
    const FockPair f = fock_pair(mo_to_dm(x), ints);
    MoBlocks mo{x};
    const Matrix D = f.F_I - f.F_A;
    decompose(mo.block(D, kI, kI), ia_left_);
    decompose(mo.block(D, kA, kA), ia_right_);
    decompose(mo.block(f.F_I, kI, kI), ie_left_);
    decompose(mo.block(f.F_I, kE, kE), ie_right_);
    decompose(mo.block(f.F_A, kA, kA), ae_left_);
    decompose(mo.block(f.F_A, kE, kE), ae_right_);

    double dmin = std::numeric_limits<double>::infinity();
    const auto scan = [&dmin](const Eig& l, const Eig& r) {
      for (int i = 0; i < l.w.size(); ++i)
        for (int j = 0; j < r.w.size(); ++j) dmin = std::min(dmin, 2.0 * (r.w(j) - l.w(i)));
    };
    scan(ia_left_, ia_right_);
    scan(ie_left_, ie_right_);
    scan(ae_left_, ae_right_);
    sigma_ = (std::isfinite(dmin) && dmin < kPreconditionerFloor)
                 ? kPreconditionerFloor - dmin
                 : 0.0;
  }

  double shift() const { return sigma_; }

  TangentBlocks apply(const TangentBlocks& g) const {
    if (!(g.shape == shape_)) throw ShapeError("tangent vector does not match preconditioner");
    return TangentBlocks(shape_, solve(ia_left_, ia_right_, g.k_ia),
                         solve(ie_left_, ie_right_, g.k_ie),
                         solve(ae_left_, ae_right_, g.k_ae));
  }

  /// Unshifted diagonal of the Fock-only Hessian in its eigenframe, as one
  /// vector over all three blocks (IA, IE, AE order).
  Vector denominators() const {
    Vector v(shape_.tangent_dim());
    int at = 0;
    const auto fill = [&](const Eig& l, const Eig& r) {
      for (int i = 0; i < l.w.size(); ++i)
        for (int j = 0; j < r.w.size(); ++j) v(at++) = 2.0 * (r.w(j) - l.w(i));
    };
    fill(ia_left_, ia_right_);
    fill(ie_left_, ie_right_);
    fill(ae_left_, ae_right_);
    return v;
  }

 private:
  struct Eig {
    Matrix U;
    Vector w;
  };

  static void decompose(const Matrix& block, Eig& out) {
    if (block.rows() == 0) {
      out.U.resize(0, 0);
      out.w.resize(0);
      return;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(block);
    if (es.info() != Eigen::Success)
      throw NumericalError("eigendecomposition failed in the preconditioner");
    out.U = es.eigenvectors();
    out.w = es.eigenvalues();
  }

  Matrix solve(const Eig& l, const Eig& r, const Matrix& rhs) const {
    if (rhs.size() == 0) return rhs;
    Matrix t = l.U.transpose() * rhs * r.U;
    for (int i = 0; i < t.rows(); ++i)
      for (int j = 0; j < t.cols(); ++j) {
        const double denom =
            std::max(2.0 * (r.w(j) - l.w(i)) + sigma_, kPreconditionerFloor);
        t(i, j) /= denom;
      }
    return l.U * t * r.U.transpose();
  }

  FlagShape shape_;
  Eig ia_left_, ia_right_, ie_left_, ie_right_, ae_left_, ae_right_;
  double sigma_ = 0.0;
};

inline TangentBlocks precondition(const FlagPoint& x, const TangentBlocks& g,
                                  const IntegralSet& ints) {
  return SylvesterPreconditioner(x, ints).apply(g);
}

/// Bundle the ROHF functional as a solver objective. The integral set is
/// captured by reference and must outlive the returned object.
inline opt::Objective make_objective(const IntegralSet& ints, const FlagShape& shape,
                                     bool with_preconditioner = true) {
  check_shape(shape, ints);
  opt::Objective obj;
  obj.energy = [&ints](const FlagPoint& x) { return energy(x, ints); };
  obj.gradient = [&ints](const FlagPoint& x) { return riemannian_gradient(x, ints); };
  if (with_preconditioner) {
    obj.preconditioner = [&ints](const FlagPoint& x) {
      auto solver = std::make_shared<SylvesterPreconditioner>(x, ints);
      opt::Preconditioner p;
      p.denominators = solver->denominators();
      p.apply = [solver](const TangentBlocks& g) { return solver->apply(g); };
      return p;
    };
  }
  return obj;
}

/// Eigenvectors of h by ascending eigenvalue; each column's first component
/// above 1e-12 in magnitude is made positive for reproducibility.
inline FlagPoint core_guess(const IntegralSet& ints, const FlagShape& shape) {
  check_shape(shape, ints);
  Eigen::SelfAdjointEigenSolver<Matrix> es(ints.h());
  if (es.info() != Eigen::Success) throw NumericalError("core-guess eigendecomposition failed");
  Matrix C = es.eigenvectors();
  for (int j = 0; j < C.cols(); ++j) {
    for (int i = 0; i < C.rows(); ++i) {
      if (std::abs(C(i, j)) > 1e-12) {
        if (C(i, j) < 0.0) C.col(j) *= -1.0;
        break;
      }
    }
  }
  return FlagPoint(shape, std::move(C));
}

}  // namespace flagopt::rohf
