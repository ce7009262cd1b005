#include "styletopo/mechanics/problem.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "styletopo/errors.hpp"
#include "styletopo/json_util.hpp"

namespace styletopo::mechanics {

namespace {

FemProblem base_problem(int n) {
  if (n < 4) throw ValidationError("preset: resolution must be >= 4");
  FemProblem p;
  p.nelx = n;
  p.nely = n;
  p.youngs_modulus = 1.0;
  p.poisson = 0.3;
  p.simp_exponent = 2.0;
  p.density_floor = 1e-3;
  p.volume_penalty = 3e3;
  return p;
}

// Half MBB beam: symmetry plane on the left edge, roller at the bottom-right
// corner, unit downward point load at the top-left corner.
FemProblem mbb(int n) {
  FemProblem p = base_problem(n);
  p.volume_fraction = 0.277;
  for (int y = 0; y <= p.nely; ++y) p.fixed_dofs.push_back(2 * p.node(0, y));
  p.fixed_dofs.push_back(2 * p.node(p.nelx, p.nely) + 1);
  p.loads.push_back({2 * p.node(0, 0) + 1, -1.0});
  return p;
}

// Deck bridge: pinned at both bottom corners, uniform downward load along the
// top edge (trapezoidal nodal lumping).
constexpr double kBridgeDeckLoad = 5.5;

FemProblem bridge(int n) {
  FemProblem p = base_problem(n);
  p.volume_fraction = 0.335;
  for (int x : {0, p.nelx}) {
    p.fixed_dofs.push_back(2 * p.node(x, p.nely));
    p.fixed_dofs.push_back(2 * p.node(x, p.nely) + 1);
  }
  const double per_segment = kBridgeDeckLoad / p.nelx;
  for (int x = 0; x <= p.nelx; ++x) {
    const double w = (x == 0 || x == p.nelx) ? 0.5 : 1.0;
    p.loads.push_back({2 * p.node(x, 0) + 1, -w * per_segment});
  }
  return p;
}

// L-bracket: arms 40% of the domain wide, top edge of the vertical arm
// clamped, unit downward load at mid-height of the horizontal arm's tip.
FemProblem lbracket(int n) {
  FemProblem p = base_problem(n);
  p.volume_fraction = 0.258;
  const int arm = static_cast<int>(std::lround(0.4 * n));
  p.passive.assign(static_cast<std::size_t>(p.element_count()), 0);
  for (int ey = 0; ey < p.nely - arm; ++ey) {
    for (int ex = arm; ex < p.nelx; ++ex) p.passive[static_cast<std::size_t>(ey) * p.nelx + ex] = 1;
  }
  for (int x = 0; x <= arm; ++x) {
    p.fixed_dofs.push_back(2 * p.node(x, 0));
    p.fixed_dofs.push_back(2 * p.node(x, 0) + 1);
  }
  p.loads.push_back({2 * p.node(p.nelx, p.nely - arm / 2) + 1, -1.0});
  return p;
}

}  // namespace

FemProblem preset_problem(std::string_view name, int resolution) {
  FemProblem p;
  if (name == "mbb") {
    p = mbb(resolution);
  } else if (name == "bridge") {
    p = bridge(resolution);
  } else if (name == "lbracket") {
    p = lbracket(resolution);
  } else {
    throw ValidationError("unknown preset \"" + std::string(name) + "\" (expected mbb, bridge or lbracket)");
  }
  p.validate();
  return p;
}

std::vector<std::string> preset_names() { return {"bridge", "mbb", "lbracket"}; }

std::vector<PresetReference> preset_references() {
  return {
      {"bridge", 181.08, 0.37, 165.0, 200.0, 0.02},
      {"mbb", 40.80, 0.293, 37.0, 45.0, 0.015},
      {"lbracket", 177.23, 0.33, 160.0, 195.0, 0.02},
  };
}

std::vector<int> rle_encode(const std::vector<std::uint8_t>& bits) {
  std::vector<int> runs;
  std::uint8_t current = 0;
  int count = 0;
  for (std::uint8_t b : bits) {
    const std::uint8_t v = b ? 1 : 0;
    if (v != current) {
      runs.push_back(count);
      current = v;
      count = 0;
    }
    ++count;
  }
  runs.push_back(count);
  return runs;
}

std::vector<std::uint8_t> rle_decode(const std::vector<int>& runs, std::size_t expected) {
  std::vector<std::uint8_t> bits;
  bits.reserve(expected);
  std::uint8_t v = 0;
  for (int r : runs) {
    if (r < 0) throw ValidationError("passive_rle: negative run length");
    bits.insert(bits.end(), static_cast<std::size_t>(r), v);
    v ^= 1;
  }
  if (bits.size() != expected) {
    throw ValidationError("passive_rle: decodes to " + std::to_string(bits.size()) + " cells, expected " +
                          std::to_string(expected));
  }
  return bits;
}

FemProblem parse_problem(std::string_view text) {
  using namespace json_util;
  const Json j = parse(text);
  reject_unknown_keys(j,
                      {"nelx", "nely", "fixed", "loads", "volume_fraction", "volume_penalty", "youngs_modulus",
                       "poisson", "simp_exponent", "density_floor", "passive_rle"},
                      "problem");
  FemProblem p;
  p.nelx = require<int>(j, "nelx", "problem");
  p.nely = require<int>(j, "nely", "problem");
  p.volume_fraction = require<double>(j, "volume_fraction", "problem");
  p.volume_penalty = get_or<double>(j, "volume_penalty", 3e3, "problem");
  p.youngs_modulus = get_or<double>(j, "youngs_modulus", 1.0, "problem");
  p.poisson = get_or<double>(j, "poisson", 0.3, "problem");
  p.simp_exponent = get_or<double>(j, "simp_exponent", 2.0, "problem");
  p.density_floor = get_or<double>(j, "density_floor", 1e-3, "problem");
  const int nodes = (p.nelx + 1) * (p.nely + 1);
  auto dof_of = [&](int node, int axis, const char* what) {
    if (node < 0 || node >= nodes) throw ValidationError(std::string("problem.") + what + ": node index out of range");
    if (axis != 0 && axis != 1) throw ValidationError(std::string("problem.") + what + ": axis must be 0 or 1");
    return 2 * node + axis;
  };
  for (const auto& f : require<std::vector<std::vector<int>>>(j, "fixed", "problem")) {
    if (f.size() != 2) throw ValidationError("problem.fixed: entries are [node, axis]");
    p.fixed_dofs.push_back(dof_of(f[0], f[1], "fixed"));
  }
  for (const auto& l : require<std::vector<std::vector<double>>>(j, "loads", "problem")) {
    if (l.size() != 3) throw ValidationError("problem.loads: entries are [node, axis, magnitude]");
    p.loads.push_back({dof_of(static_cast<int>(l[0]), static_cast<int>(l[1]), "loads"), l[2]});
  }
  if (j.contains("passive_rle")) {
    p.passive = rle_decode(require<std::vector<int>>(j, "passive_rle", "problem"),
                           static_cast<std::size_t>(p.nelx) * p.nely);
  }
  p.validate();
  return p;
}

FemProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("problem file not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

std::string problem_to_json(const FemProblem& p) {
  json_util::Json j;
  j["nelx"] = p.nelx;
  j["nely"] = p.nely;
  auto fixed = json_util::Json::array();
  for (int d : p.fixed_dofs) fixed.push_back({d / 2, d % 2});
  j["fixed"] = fixed;
  auto loads = json_util::Json::array();
  for (const auto& l : p.loads) loads.push_back({l.dof / 2, l.dof % 2, l.magnitude});
  j["loads"] = loads;
  j["volume_fraction"] = p.volume_fraction;
  j["volume_penalty"] = p.volume_penalty;
  j["youngs_modulus"] = p.youngs_modulus;
  j["poisson"] = p.poisson;
  j["simp_exponent"] = p.simp_exponent;
  j["density_floor"] = p.density_floor;
  if (!p.passive.empty()) j["passive_rle"] = rle_encode(p.passive);
  return j.dump(2);
}

}  // namespace styletopo::mechanics
