#pragma once
// 8-bit RGBA PNG export of a sampled structure.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "styletopo/field/hash_field.hpp"
#include "styletopo/grid.hpp"

namespace styletopo::io {

struct Rgba8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // row-major RGBA
};

inline std::uint8_t quantize(double v) {
  const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(c * 255.0 + 0.5);
}

// RGB from channels 1..3 of S, alpha from rho.
Rgba8 to_rgba(const StructureGrid& S);

void write_png(const Rgba8& img, const std::filesystem::path& path);
Rgba8 read_png(const std::filesystem::path& path);

void export_png(const StructureGrid& S, const std::filesystem::path& path);

// Samples the field directly at factor * (h, w) cell centres and writes it.
StructureGrid export_upsampled(const field::HashField& field, int h, int w, int factor,
                               const std::filesystem::path& path);

}  // namespace styletopo::io
