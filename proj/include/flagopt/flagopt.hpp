#pragma once

#include "flagopt/errors.hpp"
#include "flagopt/integrals.hpp"
#include "flagopt/line_search.hpp"
#include "flagopt/manifold.hpp"
#include "flagopt/objective.hpp"
#include "flagopt/oracles.hpp"
#include "flagopt/rohf.hpp"
#include "flagopt/solvers.hpp"
#include "flagopt/trace_io.hpp"
