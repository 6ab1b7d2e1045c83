#pragma once

#include <functional>

#include "flagopt/manifold.hpp"

namespace flagopt::opt {

/// Linear map on tangent blocks plus the diagonal it was built from (the
/// fixed restart strategy compares these diagonals between iterates).
struct Preconditioner {
  std::function<TangentBlocks(const TangentBlocks&)> apply;
  Vector denominators;
};

/// What a solver needs from a model: energy, Riemannian gradient, and an
/// optional preconditioner factory evaluated at a point.
struct Objective {
  std::function<double(const FlagPoint&)> energy;
  std::function<TangentBlocks(const FlagPoint&)> gradient;
  std::function<Preconditioner(const FlagPoint&)> preconditioner;  // may be empty

  bool has_preconditioner() const { return static_cast<bool>(preconditioner); }
};

}  // namespace flagopt::opt
