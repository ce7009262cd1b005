#pragma once
// Marching-squares extraction of the iso-region of a density field, extruded
// into a closed coloured solid and written as binary PLY.
//
// Mesh coordinates are in sample units: the centre of pixel (i, j) of an
// h x w field sits at (j + 0.5, h - i - 0.5), so y points up.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "styletopo/field/hash_field.hpp"
#include "styletopo/grid.hpp"

namespace styletopo::io {

struct MeshVertex {
  float x = 0.0f, y = 0.0f, z = 0.0f;
  std::array<std::uint8_t, 3> rgb{};

  bool operator==(const MeshVertex&) const = default;
};

struct ColoredMesh {
  std::vector<MeshVertex> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool operator==(const ColoredMesh&) const = default;
};

// Colour at normalized image coordinates (u right, v down, both in [0, 1]).
using ColorSampler = std::function<std::array<double, 3>(double u, double v)>;

// Bilinear colour lookup into channels 1..3 of S.
ColorSampler structure_colors(const StructureGrid& S);
// Direct field evaluation.
ColorSampler field_colors(const field::HashField& field);

// Closed solid of the region rho >= iso, extruded from z = 0 to z = depth.
// Throws EmptyStructureError when no sample reaches iso.
ColoredMesh extract_mesh(const ScalarField& rho, double iso, double depth, const ColorSampler& colors);
ColoredMesh extract_mesh(const StructureGrid& S, double iso, double depth);

// Total length of the iso-contour (the outline of the cap).
double contour_length(const ScalarField& rho, double iso);

// Edges shared by other than exactly two triangles; zero for a closed surface.
std::size_t open_edge_count(const ColoredMesh& mesh);
double triangle_area(const ColoredMesh& mesh, std::size_t t);

void write_ply(const ColoredMesh& mesh, const std::filesystem::path& path);
ColoredMesh read_ply(const std::filesystem::path& path);

}  // namespace styletopo::io
