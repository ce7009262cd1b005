#include "styletopo/stylization/compose.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace styletopo::stylization {

namespace {

void check_inputs(const StructureGrid& S, const Image& Z, const ComposeOptions& opts) {
  if (S.channels != 4) throw ShapeMismatchError("compose: structure must have 4 channels");
  if (Z.channels != 3 || Z.height != S.height || Z.width != S.width) {
    throw ShapeMismatchError("compose: background is " + std::to_string(Z.height) + "x" + std::to_string(Z.width) +
                             "x" + std::to_string(Z.channels) + ", expected " + std::to_string(S.height) + "x" +
                             std::to_string(S.width) + "x3");
  }
  if (!(opts.alpha_penalty >= 1.0)) throw ValidationError("compose: alpha penalty must be >= 1");
}

}  // namespace

Image compose_image(const StructureGrid& S, const Image& Z, const ComposeOptions& opts) {
  check_inputs(S, Z, opts);
  Image I(S.height, S.width, 3);
  const double p = opts.alpha_penalty;
  for (std::size_t px = 0; px < S.pixels(); ++px) {
    const double* s = &S.data[px * 4];
    const double* z = &Z.data[px * 3];
    double* out = &I.data[px * 3];
    const double a = std::pow(s[0], p);
    if (opts.grayscale_only) {
      const double y = kLumaR * s[1] + kLumaG * s[2] + kLumaB * s[3];
      for (int c = 0; c < 3; ++c) out[c] = y * a + z[c] * (1.0 - a);
    } else {
      for (int c = 0; c < 3; ++c) out[c] = s[1 + c] * a + z[c] * (1.0 - a);
    }
  }
  return I;
}

StructureGrid compose_backward(const StructureGrid& S, const Image& Z, const Image& dI,
                               const ComposeOptions& opts) {
  check_inputs(S, Z, opts);
  if (!dI.same_shape(Z)) throw ShapeMismatchError("compose_backward: gradient shape differs from the image");
  StructureGrid dS(S.height, S.width, 4);
  const double p = opts.alpha_penalty;
  for (std::size_t px = 0; px < S.pixels(); ++px) {
    const double* s = &S.data[px * 4];
    const double* z = &Z.data[px * 3];
    const double* g = &dI.data[px * 3];
    double* d = &dS.data[px * 4];
    const double a = std::pow(s[0], p);
    const double da = p * std::pow(s[0], p - 1.0);
    if (opts.grayscale_only) {
      const double y = kLumaR * s[1] + kLumaG * s[2] + kLumaB * s[3];
      const double gsum = g[0] + g[1] + g[2];
      d[0] = da * (g[0] * (y - z[0]) + g[1] * (y - z[1]) + g[2] * (y - z[2]));
      d[1] = a * kLumaR * gsum;
      d[2] = a * kLumaG * gsum;
      d[3] = a * kLumaB * gsum;
    } else {
      double drho = 0.0;
      for (int c = 0; c < 3; ++c) {
        drho += g[c] * (s[1 + c] - z[c]);
        d[1 + c] = a * g[c];
      }
      d[0] = da * drho;
    }
  }
  return dS;
}

Image sample_background(int h, int w, double sigma, std::mt19937_64& rng) {
  if (!(sigma > 0.0)) throw ValidationError("background: sigma must be positive");
  if (h < 1 || w < 1) throw DimensionError("background: empty extent");
  Image noise(h, w, 3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (double& v : noise.data) v = uni(rng);

  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * (k * k) / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = v;
    total += v;
  }
  for (double& v : kernel) v /= total;

  Image tmp(h, w, 3);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int jj = std::clamp(j + k, 0, w - 1);
          acc += kernel[static_cast<std::size_t>(k + radius)] * noise.at(i, jj, c);
        }
        tmp.at(i, j, c) = acc;
      }
    }
  }
  Image out(h, w, 3);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int ii = std::clamp(i + k, 0, h - 1);
          acc += kernel[static_cast<std::size_t>(k + radius)] * tmp.at(ii, j, c);
        }
        out.at(i, j, c) = std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace styletopo::stylization
