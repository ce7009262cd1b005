#pragma once
// Connected-component labeling by iterated masked 3x3 max-pooling, and the
// disconnected-density loss built on it.

#include <cstdint>
#include <map>
#include <vector>

#include "styletopo/grid.hpp"

namespace styletopo::connectivity {

struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;  // row-major, 1 = material

  std::uint8_t at(int i, int j) const { return bits[static_cast<std::size_t>(i) * width + j]; }
  std::size_t count() const;
};

// rho >= threshold. No gradient.
Mask binarize(const ScalarField& rho, double threshold);

struct ComponentLabels {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> labels;       // 0 = background
  std::map<std::int32_t, std::size_t> counts;  // label -> cells
  std::vector<std::uint8_t> disconnected; // filled by conn_loss; empty until then
  int iterations = 0;                     // pooling passes run
  bool converged = false;                 // fixed point reached within max_iters

  std::int32_t at(int i, int j) const { return labels[static_cast<std::size_t>(i) * width + j]; }
};

// Labels start as 1..h*w in row-major order (0 outside the mask); each pass
// takes the 3x3 max and re-applies the mask, stopping at the fixed point.
// Emits a warning on stderr (no throw) when max_iters is exhausted first.
ComponentLabels ccl_labels(const Mask& mask, int max_iters);

// One extra pooling pass; returns true when nothing changed.
bool is_fixed_point(const Mask& mask, const ComponentLabels& labels);

struct ConnLoss {
  double value = 0.0;
  ScalarField gradient;  // indicator of disconnected cells
  std::size_t flagged_components = 0;
};

// Components smaller than min_fraction * h * w are disconnected, except the
// largest component, which is always kept. value = sum of rho over them.
ConnLoss conn_loss(const ScalarField& rho, ComponentLabels& labels, double min_fraction);

}  // namespace styletopo::connectivity
