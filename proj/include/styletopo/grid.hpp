#pragma once
// Dense row-major raster types shared across modules.

#include <cstddef>
#include <span>
#include <vector>

#include "styletopo/errors.hpp"

namespace styletopo {

// h x w x c interleaved samples; row 0 is the top of the design domain.
struct Raster {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Raster() = default;
  Raster(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {
    if (h < 0 || w < 0 || c < 0) throw DimensionError("negative raster extent");
  }

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }

  std::size_t offset(int i, int j, int c = 0) const {
    return (static_cast<std::size_t>(i) * width + j) * channels + c;
  }
  double& at(int i, int j, int c = 0) { return data[offset(i, j, c)]; }
  double at(int i, int j, int c = 0) const { return data[offset(i, j, c)]; }

  bool same_shape(const Raster& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// The sampled structure S: channels (rho, r, g, b).
using StructureGrid = Raster;
// RGB image, channels (r, g, b).
using Image = Raster;

// Single-channel field such as a density map or a pooled mesh density.
using ScalarField = Raster;

inline ScalarField extract_channel(const Raster& src, int channel) {
  ScalarField out(src.height, src.width, 1);
  for (std::size_t p = 0; p < src.pixels(); ++p) {
    out.data[p] = src.data[p * src.channels + channel];
  }
  return out;
}

}  // namespace styletopo
