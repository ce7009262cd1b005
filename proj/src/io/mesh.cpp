#include "styletopo/io/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "styletopo/io/image_io.hpp"

namespace styletopo::io {

static_assert(std::endian::native == std::endian::little, "PLY output assumes a little-endian host");

namespace {

struct Point {
  double x, y;
};

struct Cap {
  std::vector<Point> points;
  std::vector<std::array<std::uint32_t, 3>> triangles;  // counter-clockwise seen from +z
};

// Marching squares over the field padded by a ring of zeros, so every region
// closes inside the padded domain. Vertices on shared corners and edges are
// merged through their grid keys.
Cap triangulate_cap(const ScalarField& rho, double iso) {
  if (rho.channels != 1) throw DimensionError("mesh: density must be single-channel");
  if (!(iso > 0.0 && iso < 1.0)) throw ValidationError("mesh: iso level must lie in (0, 1)");
  const int h = rho.height;
  const int w = rho.width;
  const int ph = h + 2;
  const int pw = w + 2;
  auto val = [&](int ip, int jp) {
    if (ip < 1 || jp < 1 || ip > h || jp > w) return 0.0;
    return rho.at(ip - 1, jp - 1);
  };
  auto pos = [&](int ip, int jp) { return Point{jp - 0.5, h - ip + 0.5}; };

  bool any = false;
  for (double v : rho.data) any |= v >= iso;
  if (!any) throw EmptyStructureError("mesh: no sample reaches the iso level " + std::to_string(iso));

  Cap cap;
  std::unordered_map<std::uint64_t, std::uint32_t> ids;
  auto corner = [&](int ip, int jp) {
    const std::uint64_t key = (static_cast<std::uint64_t>(ip) * pw + jp) * 3;
    auto [it, fresh] = ids.try_emplace(key, static_cast<std::uint32_t>(cap.points.size()));
    if (fresh) cap.points.push_back(pos(ip, jp));
    return it->second;
  };
  // Edge from node (ip, jp) to (ip + di, jp + dj), di + dj == 1.
  auto edge = [&](int ip, int jp, int di, int dj) {
    const std::uint64_t key = (static_cast<std::uint64_t>(ip) * pw + jp) * 3 + (dj == 1 ? 1 : 2);
    auto [it, fresh] = ids.try_emplace(key, static_cast<std::uint32_t>(cap.points.size()));
    if (fresh) {
      const double va = val(ip, jp);
      const double vb = val(ip + di, jp + dj);
      const double t = std::clamp((iso - va) / (vb - va), 1e-6, 1.0 - 1e-6);
      const Point a = pos(ip, jp);
      const Point b = pos(ip + di, jp + dj);
      cap.points.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
    return it->second;
  };

  for (int ip = 0; ip + 1 < ph; ++ip) {
    for (int jp = 0; jp + 1 < pw; ++jp) {
      // corners counter-clockwise in mesh space: BL, BR, TR, TL
      const int ci[4] = {ip + 1, ip + 1, ip, ip};
      const int cj[4] = {jp, jp + 1, jp + 1, jp};
      double v[4];
      bool in[4];
      int count = 0;
      for (int k = 0; k < 4; ++k) {
        v[k] = val(ci[k], cj[k]);
        in[k] = v[k] >= iso;
        count += in[k] ? 1 : 0;
      }
      if (count == 0) continue;
      auto edge_id = [&](int k) {
        switch (k) {
          case 0: return edge(ip + 1, jp, 0, 1);  // bottom
          case 1: return edge(ip, jp + 1, 1, 0);  // right
          case 2: return edge(ip, jp, 0, 1);      // top
          default: return edge(ip, jp, 1, 0);     // left
        }
      };
      const bool saddle = count == 2 && in[0] == in[2];
      if (saddle && 0.25 * (v[0] + v[1] + v[2] + v[3]) < iso) {
        for (int k = 0; k < 4; ++k) {
          if (!in[k]) continue;
          cap.triangles.push_back({edge_id((k + 3) % 4), corner(ci[k], cj[k]), edge_id(k)});
        }
        continue;
      }
      std::uint32_t poly[8];
      int n = 0;
      for (int k = 0; k < 4; ++k) {
        if (in[k]) poly[n++] = corner(ci[k], cj[k]);
        if (in[k] != in[(k + 1) % 4]) poly[n++] = edge_id(k);
      }
      for (int k = 1; k + 1 < n; ++k) cap.triangles.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  return cap;
}

// Directed edges that belong to exactly one cap triangle.
std::vector<std::array<std::uint32_t, 2>> outline(const Cap& cap) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
  for (const auto& t : cap.triangles) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = t[static_cast<std::size_t>(k)];
      const std::uint32_t b = t[static_cast<std::size_t>((k + 1) % 3)];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::vector<std::array<std::uint32_t, 2>> out;
  for (const auto& t : cap.triangles) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = t[static_cast<std::size_t>(k)];
      const std::uint32_t b = t[static_cast<std::size_t>((k + 1) % 3)];
      if (count[{std::min(a, b), std::max(a, b)}] == 1) out.push_back({a, b});
    }
  }
  return out;
}

std::array<double, 3> bilinear_rgb(const StructureGrid& S, double u, double v) {
  const double x = std::clamp(u * S.width - 0.5, 0.0, S.width - 1.0);
  const double y = std::clamp(v * S.height - 0.5, 0.0, S.height - 1.0);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, S.width - 1);
  const int y1 = std::min(y0 + 1, S.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    out[static_cast<std::size_t>(c)] = (1 - fy) * ((1 - fx) * S.at(y0, x0, c + 1) + fx * S.at(y0, x1, c + 1)) +
                                       fy * ((1 - fx) * S.at(y1, x0, c + 1) + fx * S.at(y1, x1, c + 1));
  }
  return out;
}

}  // namespace

ColorSampler structure_colors(const StructureGrid& S) {
  if (S.channels != 4) throw DimensionError("mesh: structure must have 4 channels");
  return [&S](double u, double v) { return bilinear_rgb(S, u, v); };
}

ColorSampler field_colors(const field::HashField& field) {
  return [&field](double u, double v) {
    const auto out = field::evaluate(field, {std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0)});
    return std::array<double, 3>{out[1], out[2], out[3]};
  };
}

ColoredMesh extract_mesh(const ScalarField& rho, double iso, double depth, const ColorSampler& colors) {
  if (!(depth > 0.0)) throw ValidationError("mesh: extrusion depth must be positive");
  const Cap cap = triangulate_cap(rho, iso);
  const auto n = static_cast<std::uint32_t>(cap.points.size());
  ColoredMesh mesh;
  mesh.vertices.resize(2 * static_cast<std::size_t>(n));
  for (std::uint32_t k = 0; k < n; ++k) {
    const Point& p = cap.points[k];
    const auto rgb = colors(p.x / rho.width, (rho.height - p.y) / rho.height);
    const std::array<std::uint8_t, 3> q{quantize(rgb[0]), quantize(rgb[1]), quantize(rgb[2])};
    mesh.vertices[k] = {static_cast<float>(p.x), static_cast<float>(p.y), 0.0f, q};
    mesh.vertices[k + n] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(depth), q};
  }
  for (const auto& t : cap.triangles) {
    mesh.triangles.push_back({t[0] + n, t[1] + n, t[2] + n});  // top faces up
    mesh.triangles.push_back({t[0], t[2], t[1]});              // bottom faces down
  }
  for (const auto& e : outline(cap)) {
    const std::uint32_t a0 = e[0], b0 = e[1], a1 = e[0] + n, b1 = e[1] + n;
    mesh.triangles.push_back({a0, b0, b1});
    mesh.triangles.push_back({a0, b1, a1});
  }
  return mesh;
}

ColoredMesh extract_mesh(const StructureGrid& S, double iso, double depth) {
  return extract_mesh(extract_channel(S, 0), iso, depth, structure_colors(S));
}

double contour_length(const ScalarField& rho, double iso) {
  const Cap cap = triangulate_cap(rho, iso);
  double total = 0.0;
  for (const auto& e : outline(cap)) {
    const Point& a = cap.points[e[0]];
    const Point& b = cap.points[e[1]];
    total += std::hypot(b.x - a.x, b.y - a.y);
  }
  return total;
}

std::size_t open_edge_count(const ColoredMesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = t[static_cast<std::size_t>(k)];
      const std::uint32_t b = t[static_cast<std::size_t>((k + 1) % 3)];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::size_t open = 0;
  for (const auto& [edge, c] : count) open += c != 2 ? 1 : 0;
  return open;
}

double triangle_area(const ColoredMesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const auto& a = mesh.vertices[tri[0]];
  const auto& b = mesh.vertices[tri[1]];
  const auto& c = mesh.vertices[tri[2]];
  const double ux = b.x - a.x, uy = b.y - a.y, uz = b.z - a.z;
  const double vx = c.x - a.x, vy = c.y - a.y, vz = c.z - a.z;
  const double cx = uy * vz - uz * vy, cy = uz * vx - ux * vz, cz = ux * vy - uy * vx;
  return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

void write_ply(const ColoredMesh& mesh, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "ply\nformat binary_little_endian 1.0\ncomment styletopo extruded structure\n"
     << "element vertex " << mesh.vertices.size() << "\n"
     << "property float x\nproperty float y\nproperty float z\n"
     << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
     << "element face " << mesh.triangles.size() << "\n"
     << "property list uchar int vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices) {
    const float xyz[3] = {v.x, v.y, v.z};
    os.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    os.write(reinterpret_cast<const char*>(v.rgb.data()), 3);
  }
  for (const auto& t : mesh.triangles) {
    const std::uint8_t three = 3;
    const std::int32_t idx[3] = {static_cast<std::int32_t>(t[0]), static_cast<std::int32_t>(t[1]),
                                 static_cast<std::int32_t>(t[2])};
    os.write(reinterpret_cast<const char*>(&three), 1);
    os.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

ColoredMesh read_ply(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  const std::vector<std::string> expected_props = {
      "property float x",      "property float y",       "property float z",
      "property uchar red",    "property uchar green",   "property uchar blue",
      "property list uchar int vertex_indices"};
  std::string line;
  std::getline(is, line);
  if (line != "ply") throw IoError(path.string() + ": not a PLY file");
  std::size_t nv = 0, nf = 0;
  std::vector<std::string> props;
  bool little = false;
  while (std::getline(is, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      little = fmt == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") nv = count;
      else if (name == "face") nf = count;
      else throw IoError(path.string() + ": unsupported element " + name);
    } else if (word == "property") {
      props.push_back(line);
    }
  }
  if (!little) throw IoError(path.string() + ": only binary little-endian PLY is supported");
  if (props != expected_props) throw IoError(path.string() + ": unsupported vertex or face layout");
  ColoredMesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices) {
    float xyz[3];
    is.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    is.read(reinterpret_cast<char*>(v.rgb.data()), 3);
    v.x = xyz[0];
    v.y = xyz[1];
    v.z = xyz[2];
  }
  mesh.triangles.resize(nf);
  for (auto& t : mesh.triangles) {
    std::uint8_t k = 0;
    is.read(reinterpret_cast<char*>(&k), 1);
    if (k != 3) throw IoError(path.string() + ": only triangular faces are supported");
    std::int32_t idx[3];
    is.read(reinterpret_cast<char*>(idx), sizeof(idx));
    for (int c = 0; c < 3; ++c) {
      if (idx[c] < 0 || static_cast<std::size_t>(idx[c]) >= nv) throw IoError(path.string() + ": face index out of range");
      t[static_cast<std::size_t>(c)] = static_cast<std::uint32_t>(idx[c]);
    }
  }
  if (!is) throw IoError(path.string() + ": truncated PLY body");
  return mesh;
}

}  // namespace styletopo::io
