#pragma once

#include "styletopo/grid.hpp"

namespace styletopo::mechanics {

// Non-overlapping k x k mean pooling (kernel = stride = k). Throws
// DimensionError unless both extents are divisible by k.
ScalarField average_pool(const ScalarField& rho, int k);

// Adjoint of average_pool: each input cell receives 1/k^2 of its block's
// incoming gradient.
ScalarField average_pool_backward(const ScalarField& d_pooled, int k);

}  // namespace styletopo::mechanics
