#pragma once

#include "zempc/numerics/integrate.hpp"
#include "zempc/numerics/linalg.hpp"

namespace zempc {

/// Central differences with h_i = max(1e-6, 1e-6 |x_i|) (same rule for u).
/// The result lives in whatever coordinates f uses. Throws SolverError naming
/// the coordinate when an entry is non-finite.
LinearModel linearize(const RhsFunction& f, const Vector& x_s, double u_s);

}  // namespace zempc
