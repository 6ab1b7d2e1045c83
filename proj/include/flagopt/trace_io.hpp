#pragma once

// Convergence-trace serialization: comma-separated text, one row per accepted
// iteration (row 0 is the starting point), numbers printed with 17 significant
// digits so that reparsing reproduces the doubles exactly.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "flagopt/solvers.hpp"

namespace flagopt::opt {

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_trace(std::ostream& os, const std::vector<IterationRecord>& trace) {
  os << "iter,energy,grad_norm,step,restart,beta\n";
  for (const IterationRecord& r : trace) {
    os << r.index << ',' << format_g17(r.energy) << ',' << format_g17(r.grad_norm) << ','
       << format_g17(r.step) << ',' << (r.restart ? 1 : 0) << ',' << format_g17(r.beta)
       << '\n';
  }
}

}  // namespace flagopt::opt
