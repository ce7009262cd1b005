#pragma once
// Alpha compositing of the structure over a background, and its adjoint.

#include <random>

#include "styletopo/grid.hpp"

namespace styletopo::stylization {

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

struct ComposeOptions {
  double alpha_penalty = 1.0;   // exponent on rho in the alpha blend, >= 1
  bool grayscale_only = false;  // replace the structure colour by its luminance
};

// I = Y * rho^p + Z * (1 - rho^p). S is h x w x 4 (rho, r, g, b); Z is h x w x 3.
Image compose_image(const StructureGrid& S, const Image& Z, const ComposeOptions& opts);

// Adjoint of compose_image: maps dL/dI (h x w x 3) to dL/dS (h x w x 4).
// Z receives no gradient.
StructureGrid compose_backward(const StructureGrid& S, const Image& Z, const Image& dI,
                               const ComposeOptions& opts);

// Uniform noise in [0, 1]^3 blurred by a Gaussian of standard deviation sigma
// pixels, with clamped edges.
Image sample_background(int h, int w, double sigma, std::mt19937_64& rng);

}  // namespace styletopo::stylization
