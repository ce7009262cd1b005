#pragma once
// Benchmark presets and the human-readable problem-definition file.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "styletopo/mechanics/fem.hpp"

namespace styletopo::mechanics {

// "mbb", "bridge" or "lbracket" on a resolution x resolution element mesh.
// Throws ValidationError for unknown names.
FemProblem preset_problem(std::string_view name, int resolution);

std::vector<std::string> preset_names();

// Published reference values for the benchmark presets at 64 x 64.
struct PresetReference {
  std::string name;
  double compliance;
  double volume;
  double compliance_lo, compliance_hi;
  double volume_tol;
};
std::vector<PresetReference> preset_references();

// Run-length encoding of a row-major bitmap: alternating run lengths starting
// with a run of zeros (which may be empty).
std::vector<int> rle_encode(const std::vector<std::uint8_t>& bits);
std::vector<std::uint8_t> rle_decode(const std::vector<int>& runs, std::size_t expected_size);

// Problem file (JSON):
// {
//   "nelx": 64, "nely": 64,
//   "fixed": [[node, axis], ...],            axis 0 = x, 1 = y
//   "loads": [[node, axis, magnitude], ...],
//   "volume_fraction": 0.3, "volume_penalty": 3000,
//   "youngs_modulus": 1, "poisson": 0.3, "simp_exponent": 2, "density_floor": 0.001,
//   "passive_rle": [runs...]                 optional
// }
FemProblem parse_problem(std::string_view text);
FemProblem load_problem(const std::filesystem::path& path);
std::string problem_to_json(const FemProblem& problem);

}  // namespace styletopo::mechanics
