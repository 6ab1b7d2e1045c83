#pragma once

// Geometry of the flag manifold Flag(nI, nI+nA; R^n) in the molecular-orbital
// representation: points are orthogonal coefficient matrices modulo rotations
// inside the internal/active/external blocks, tangent vectors are kept in the
// non-redundant (IA, IE, AE) block form, and the exponential retraction and
// the associated parallel transport are exact.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "flagopt/errors.hpp"

namespace flagopt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dimensions (n_basis, n_internal, n_active) of Flag(nI, nI+nA; R^n).
struct FlagShape {
  int n_basis = 0;
  int n_internal = 0;
  int n_active = 0;

  FlagShape() = default;
  FlagShape(int nb, int ni, int na) : n_basis(nb), n_internal(ni), n_active(na) {
    if (nb < 1 || ni < 0 || na < 0 || ni + na > nb)
      throw ShapeError("inconsistent flag shape (" + std::to_string(ni) + "," +
                       std::to_string(na) + ") in basis of size " + std::to_string(nb));
    if (ni + na < 1) throw ShapeError("flag shape needs at least one occupied orbital");
  }

  int n_external() const { return n_basis - n_internal - n_active; }
  int n_electrons() const { return 2 * n_internal + n_active; }
  /// Dimension of the tangent space nI*nA + nI*nE + nA*nE.
  int tangent_dim() const {
    return n_internal * n_active + n_internal * n_external() + n_active * n_external();
  }
  bool operator==(const FlagShape&) const = default;
};

/// Tangent vector at a point, in block form (kappa_IA, kappa_IE, kappa_AE).
struct TangentBlocks {
  FlagShape shape;
  Matrix k_ia, k_ie, k_ae;

  TangentBlocks() = default;
  explicit TangentBlocks(const FlagShape& s)
      : shape(s),
        k_ia(Matrix::Zero(s.n_internal, s.n_active)),
        k_ie(Matrix::Zero(s.n_internal, s.n_external())),
        k_ae(Matrix::Zero(s.n_active, s.n_external())) {}
  TangentBlocks(const FlagShape& s, Matrix ia, Matrix ie, Matrix ae)
      : shape(s), k_ia(std::move(ia)), k_ie(std::move(ie)), k_ae(std::move(ae)) {
    if (k_ia.rows() != s.n_internal || k_ia.cols() != s.n_active ||
        k_ie.rows() != s.n_internal || k_ie.cols() != s.n_external() ||
        k_ae.rows() != s.n_active || k_ae.cols() != s.n_external())
      throw ShapeError("tangent block dimensions do not match shape");
  }

  bool all_finite() const {
    return k_ia.allFinite() && k_ie.allFinite() && k_ae.allFinite();
  }
  bool is_zero() const {
    return k_ia.isZero(0.0) && k_ie.isZero(0.0) && k_ae.isZero(0.0);
  }

  TangentBlocks& operator+=(const TangentBlocks& o) {
    k_ia += o.k_ia; k_ie += o.k_ie; k_ae += o.k_ae; return *this;
  }
  TangentBlocks& operator-=(const TangentBlocks& o) {
    k_ia -= o.k_ia; k_ie -= o.k_ie; k_ae -= o.k_ae; return *this;
  }
  TangentBlocks& operator*=(double a) {
    k_ia *= a; k_ie *= a; k_ae *= a; return *this;
  }
};

inline TangentBlocks operator+(TangentBlocks a, const TangentBlocks& b) { return a += b; }
inline TangentBlocks operator-(TangentBlocks a, const TangentBlocks& b) { return a -= b; }
inline TangentBlocks operator*(double s, TangentBlocks a) { return a *= s; }
inline TangentBlocks operator*(TangentBlocks a, double s) { return a *= s; }
inline TangentBlocks operator-(TangentBlocks a) { return a *= -1.0; }

inline void check_same_shape(const TangentBlocks& a, const TangentBlocks& b) {
  if (!(a.shape == b.shape)) throw ShapeError("tangent vectors live on different flags");
}

/// Metric g(k,k2) = Tr(embed(k)^T embed(k2)) = 2 (<IA,IA'> + <IE,IE'> + <AE,AE'>).
inline double metric(const TangentBlocks& a, const TangentBlocks& b) {
  check_same_shape(a, b);
  return 2.0 * (a.k_ia.cwiseProduct(b.k_ia).sum() + a.k_ie.cwiseProduct(b.k_ie).sum() +
                a.k_ae.cwiseProduct(b.k_ae).sum());
}

inline double metric_norm(const TangentBlocks& a) { return std::sqrt(metric(a, a)); }

/// Plain block Frobenius norm (no factor 2); used by the transport series cutoff.
inline double block_frobenius_norm(const TangentBlocks& a) {
  return std::sqrt(a.k_ia.squaredNorm() + a.k_ie.squaredNorm() + a.k_ae.squaredNorm());
}

/// Full antisymmetric matrix with (IA, IE, AE) upper blocks and zero diagonal blocks.
inline Matrix embed(const TangentBlocks& k) {
  const FlagShape& s = k.shape;
  const int ni = s.n_internal, na = s.n_active, ne = s.n_external();
  Matrix full = Matrix::Zero(s.n_basis, s.n_basis);
  full.block(0, ni, ni, na) = k.k_ia;
  full.block(0, ni + na, ni, ne) = k.k_ie;
  full.block(ni, ni + na, na, ne) = k.k_ae;
  full -= Matrix(full.transpose());
  return full;
}

/// Off-diagonal upper blocks of a full matrix; inverse of embed on its image.
inline TangentBlocks extract(const FlagShape& s, const Matrix& full) {
  if (full.rows() != s.n_basis || full.cols() != s.n_basis)
    throw ShapeError("matrix size does not match shape");
  const int ni = s.n_internal, na = s.n_active, ne = s.n_external();
  return TangentBlocks(s, full.block(0, ni, ni, na), full.block(0, ni + na, ni, ne),
                       full.block(ni, ni + na, na, ne));
}

/// Point of the flag manifold: an orthogonal MO coefficient matrix.
struct FlagPoint {
  FlagShape shape;
  Matrix C;

  FlagPoint() = default;
  FlagPoint(const FlagShape& s, Matrix coeffs) : shape(s), C(std::move(coeffs)) {
    if (C.rows() != s.n_basis || C.cols() != s.n_basis)
      throw ShapeError("coefficient matrix size does not match shape");
    if (orthogonality_error() > 1e-10)
      throw NumericalError("coefficient matrix is not orthogonal");
  }

  double orthogonality_error() const {
    return (C.transpose() * C - Matrix::Identity(C.cols(), C.cols())).norm();
  }
  auto internal() const { return C.leftCols(shape.n_internal); }
  auto active() const { return C.middleCols(shape.n_internal, shape.n_active); }
  auto external() const { return C.rightCols(shape.n_external()); }
};

/// Blocks of Proj_K( (C^T M - M^T C)/2 ): the Riemannian projection of an
/// ambient matrix onto the tangent space at C.
inline TangentBlocks project_to_tangent(const FlagPoint& x, const Matrix& M) {
  if (M.rows() != x.shape.n_basis || M.cols() != x.shape.n_basis)
    throw ShapeError("ambient matrix size does not match shape");
  Matrix A = x.C.transpose() * M;
  A = 0.5 * (A - Matrix(A.transpose()));
  return extract(x.shape, A);
}

/// Exponential retraction C e^kappa. The result is repolished with one
/// Newton-Schulz sweep so that long products of retractions stay orthogonal
/// to machine precision.
inline FlagPoint retract(const FlagPoint& x, const TangentBlocks& k) {
  if (!k.all_finite()) throw NumericalError("retraction direction has non-finite entries");
  if (k.is_zero()) return x;
  Matrix kappa = embed(k);
  Matrix Cn = x.C * kappa.exp();
  const int n = x.shape.n_basis;
  Cn = 0.5 * Cn * (3.0 * Matrix::Identity(n, n) - Matrix(Cn.transpose() * Cn));
  return FlagPoint(x.shape, std::move(Cn));
}

/// The mixing operator of parallel transport: phi_k(k2) = (1/2) Proj_K([kappa, kappa2])
/// written directly on blocks.
inline TangentBlocks phi(const TangentBlocks& k, const TangentBlocks& k2) {
  check_same_shape(k, k2);
  return TangentBlocks(
      k.shape,
      0.5 * (-k.k_ie * k2.k_ae.transpose() + k2.k_ie * k.k_ae.transpose()),
      0.5 * (k.k_ia * k2.k_ae - k2.k_ia * k.k_ae),
      0.5 * (-k.k_ia.transpose() * k2.k_ie + k2.k_ia.transpose() * k.k_ie));
}

struct Transported {
  FlagPoint point;
  TangentBlocks vector;
};

inline constexpr double kTransportSeriesTolerance = 1e-16;
inline constexpr int kTransportSeriesCap = 200;

/// Parallel transport of k2 along the geodesic through x with velocity k:
/// returns (C e^kappa, e^{-phi_k}(k2)). The operator exponential is summed as
/// v_{n+1} = -phi_k(v_n)/(n+1) until the term drops below 1e-16 * |k2|_F,
/// with a 200-term cap.
inline Transported transport(const FlagPoint& x, const TangentBlocks& k,
                             const TangentBlocks& k2) {
  check_same_shape(k, k2);
  FlagPoint moved = retract(x, k);
  const double ref = block_frobenius_norm(k2);
  TangentBlocks sum = k2;
  TangentBlocks v = k2;
  for (int n = 1; n <= kTransportSeriesCap; ++n) {
    v = phi(k, v) * (-1.0 / n);
    sum += v;
    if (block_frobenius_norm(v) <= kTransportSeriesTolerance * ref)
      return {std::move(moved), std::move(sum)};
  }
  throw NumericalError("transport series did not converge within the term cap");
}

/// Pair of orthogonal projectors (internal, active) representing the same
/// point in the density-matrix picture.
struct DensityPair {
  Matrix Pi_I, Pi_A;

  DensityPair() = default;
  DensityPair(Matrix pi, Matrix pa) : Pi_I(std::move(pi)), Pi_A(std::move(pa)) {
    const auto idem = [](const Matrix& P) { return (P * P - P).norm(); };
    if (idem(Pi_I) > 1e-10 || idem(Pi_A) > 1e-10)
      throw NumericalError("density matrices are not idempotent");
    if ((Pi_I * Pi_A).norm() > 1e-10)
      throw NumericalError("internal and active projectors are not orthogonal");
  }
};

/// MO -> DM map: Pi_I = C_I C_I^T over the internal columns, Pi_A likewise.
inline DensityPair mo_to_dm(const FlagPoint& x) {
  return DensityPair(x.internal() * x.internal().transpose(),
                     x.active() * x.active().transpose());
}

struct SpinDensities {
  Matrix P_total, P_alpha, P_beta;
};

/// High-spin one-body densities: P = 2 Pi_I + Pi_A, P_alpha = Pi_I + Pi_A, P_beta = Pi_I.
inline SpinDensities rohf_densities(const DensityPair& d) {
  return {2.0 * d.Pi_I + d.Pi_A, d.Pi_I + d.Pi_A, d.Pi_I};
}

namespace detail {
inline Matrix seeded_gaussian(int rows, int cols, std::mt19937_64& eng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(eng);
  return m;
}
}  // namespace detail

/// Orthogonal factor of a seeded Gaussian matrix (QR with positive R diagonal).
inline FlagPoint random_point(const FlagShape& shape, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  Matrix G = detail::seeded_gaussian(shape.n_basis, shape.n_basis, eng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < Q.cols(); ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  return FlagPoint(shape, std::move(Q));
}

/// Standard-normal blocks, filled IA then IE then AE, row-major.
inline TangentBlocks random_tangent(const FlagShape& shape, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  Matrix ia = detail::seeded_gaussian(shape.n_internal, shape.n_active, eng);
  Matrix ie = detail::seeded_gaussian(shape.n_internal, shape.n_external(), eng);
  Matrix ae = detail::seeded_gaussian(shape.n_active, shape.n_external(), eng);
  return TangentBlocks(shape, std::move(ia), std::move(ie), std::move(ae));
}

}  // namespace flagopt
