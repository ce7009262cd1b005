#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "styletopo/errors.hpp"
#include "styletopo/io/image_io.hpp"
#include "styletopo/io/mesh.hpp"
#include "styletopo/io/run_spec.hpp"
#include "styletopo/mechanics/pooling.hpp"
#include "styletopo/trainer/trainer.hpp"

using namespace styletopo;
using namespace styletopo::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("styletopo_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Smooth radial ramp: 1 inside the disk, 0 outside, linear over two pixels.
ScalarField disk(int n, double radius) {
  ScalarField r(n, n, 1);
  const double c = 0.5 * n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double d = std::hypot(i + 0.5 - c, j + 0.5 - c);
      r.at(i, j) = std::clamp(0.5 + (radius - d) / 4.0, 0.0, 1.0);
    }
  }
  return r;
}

ColorSampler flat_color() {
  return [](double, double) { return std::array<double, 3>{0.2, 0.4, 0.6}; };
}

struct CliResult {
  int code;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(STYLETOPO_CLI) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  std::ifstream is(err);
  std::stringstream ss;
  ss << is.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

}  // namespace

TEST(RunSpec, DefaultsFromMinimalSpec) {
  const RunSpec s = parse_run_spec(R"({"problem": {"preset": "mbb"}})");
  EXPECT_EQ(s.preset, "mbb");
  EXPECT_EQ(s.train.alpha, 9e3);
  EXPECT_EQ(s.train.beta, 1.0);
  EXPECT_EQ(s.train.gamma, 3e3);
  EXPECT_EQ(s.train.iterations, 500);
  EXPECT_EQ(s.train.pooling, 4);
  EXPECT_EQ(s.train.fea_resolution, 64);
  EXPECT_EQ(s.train.style_resolution, 256);
  EXPECT_EQ(s.train.grid.levels, 16);
  EXPECT_EQ(s.train.grid.table_size, 1u << 19);
  EXPECT_EQ(s.train.augment.batch, 16);
  EXPECT_EQ(s.backend.kind, "stub");
  EXPECT_FALSE(s.train.seed.has_value());
  EXPECT_NO_THROW(s.validate());
}

TEST(RunSpec, RejectsBadValues) {
  EXPECT_THROW(parse_run_spec(R"({"problem": {"preset": "mbb", "volume_fraction": 1.5}})"), ValidationError);
  EXPECT_THROW(parse_run_spec(R"({"problem": {"preset": "mbb"}, "train": {"style_resolution": 250}})"),
               DimensionError);
  EXPECT_THROW(parse_run_spec(R"({"problem": {"preset": "mbb"}, "train": {"alpah": 1}})"), ValidationError);
  EXPECT_THROW(parse_run_spec(R"({"problem": {"preset": "mbb"}, "backend": {"encoding": "xml"}})"), ValidationError);
  EXPECT_THROW(parse_run_spec(R"({"problem": {"preset": "mbb", "file": "p.json"}})"), ValidationError);
  EXPECT_THROW(load_run_spec("/nonexistent/spec.json"), IoError);
}

TEST(RunSpec, ParseErrorsCarryTheLine) {
  try {
    parse_run_spec("{\n  \"problem\": {\"preset\": \"mbb\"},\n  \"train\": {\"alpha\": ,}\n}");
    FAIL() << "expected a ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(RunSpec, JsonRoundTrip) {
  const RunSpec s = parse_run_spec(R"({"problem": {"preset": "bridge", "resolution": 32, "volume_fraction": 0.3},
    "train": {"alpha": 10, "seed": 42, "iterations": 7, "solver": "pcg"},
    "backend": {"kind": "remote", "url": "http://localhost:9000", "encoding": "raw"},
    "export": {"png_scale": 2}, "output_dir": "runs/a"})");
  const std::string j = run_spec_to_json(s);
  const RunSpec t = parse_run_spec(j);
  EXPECT_EQ(run_spec_to_json(t), j);
  EXPECT_EQ(t.train.seed, std::optional<std::uint64_t>(42));
  EXPECT_EQ(t.backend.remote.encoding, stylization::wire::Encoding::Raw);
  EXPECT_EQ(t.train.solver.kind, mechanics::SolverKind::Pcg);
  EXPECT_EQ(build_problem(t).volume_fraction, 0.3);
  EXPECT_EQ(build_problem(t).nelx, 32);
}

TEST(Png, ConstantStructureRoundTripsExactly) {
  const fs::path d = scratch("png");
  StructureGrid S(5, 7, 4);
  for (std::size_t p = 0; p < S.pixels(); ++p) {
    S.data[p * 4 + 0] = 0.6;
    S.data[p * 4 + 1] = 0.83;
    S.data[p * 4 + 2] = 0.69;
    S.data[p * 4 + 3] = 0.22;
  }
  export_png(S, d / "c.png");
  const Rgba8 img = read_png(d / "c.png");
  ASSERT_EQ(img.height, 5);
  ASSERT_EQ(img.width, 7);
  for (std::size_t p = 0; p < 35; ++p) {
    EXPECT_EQ(img.data[p * 4 + 0], quantize(0.83));
    EXPECT_EQ(img.data[p * 4 + 1], quantize(0.69));
    EXPECT_EQ(img.data[p * 4 + 2], quantize(0.22));
    EXPECT_EQ(img.data[p * 4 + 3], quantize(0.6));
  }
  EXPECT_EQ(quantize(0.6), 153);
  EXPECT_THROW(read_png(d / "missing.png"), IoError);
  EXPECT_THROW(write_png(img, "/nonexistent/dir/x.png"), IoError);
}

TEST(Png, UpsampledExportAveragesBackToTheBaseSamples) {
  const fs::path d = scratch("upsample");
  field::GridConfig g;
  g.levels = 4;
  g.table_size = 1u << 12;
  g.min_resolution = 2;
  g.max_resolution = 8;
  g.hidden_width = 16;
  field::HashField f(g, 4);
  trainer::initialize(f, {false, 0.5}, 4);
  const StructureGrid base = field::sample_structure(f, 16, 16);
  const StructureGrid up = export_upsampled(f, 16, 16, 4, d / "up.png");
  ASSERT_EQ(up.height, 64);
  const Rgba8 img = read_png(d / "up.png");
  EXPECT_EQ(img.width, 64);
  for (int c = 0; c < 4; ++c) {
    const ScalarField pooled = mechanics::average_pool(extract_channel(up, c), 4);
    for (std::size_t p = 0; p < pooled.data.size(); ++p) EXPECT_NEAR(pooled.data[p], base.data[p * 4 + c], 1e-2);
  }
}

TEST(Mesh, DiskContourLengthMatchesCircumference) {
  const double r = 40.0;
  const double len = contour_length(disk(128, r), 0.5);
  EXPECT_NEAR(len, 2 * std::numbers::pi * r, 0.02 * 2 * std::numbers::pi * r);
}

TEST(Mesh, ExtrusionIsWatertightAndNondegenerate) {
  ScalarField rho = disk(48, 14);
  // add a hole and a separate island
  for (int i = 20; i < 28; ++i) {
    for (int j = 20; j < 28; ++j) rho.at(i, j) = 0.0;
  }
  for (int i = 2; i < 6; ++i) {
    for (int j = 40; j < 45; ++j) rho.at(i, j) = 1.0;
  }
  const ColoredMesh m = extract_mesh(rho, 0.5, 6.0, flat_color());
  ASSERT_FALSE(m.triangles.empty());
  EXPECT_EQ(open_edge_count(m), 0u);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) EXPECT_GT(triangle_area(m, t), 1e-9) << t;
  for (const auto& v : m.vertices) {
    EXPECT_TRUE(v.z == 0.0f || v.z == 6.0f);
    EXPECT_GE(v.x, 0.0f);
    EXPECT_LE(v.x, 48.0f);
  }
}

TEST(Mesh, EmptyStructureIsAnError) {
  EXPECT_THROW(extract_mesh(ScalarField(8, 8, 1, 0.1), 0.5, 1.0, flat_color()), EmptyStructureError);
}

TEST(Mesh, PlyRoundTripIsExact) {
  const fs::path d = scratch("ply");
  StructureGrid S(24, 24, 4);
  const ScalarField rho = disk(24, 8);
  for (std::size_t p = 0; p < S.pixels(); ++p) {
    S.data[p * 4] = rho.data[p];
    S.data[p * 4 + 1] = 0.83;
    S.data[p * 4 + 2] = 0.5 * (p % 24) / 24.0;
    S.data[p * 4 + 3] = 0.22;
  }
  const ColoredMesh m = extract_mesh(S, 0.5, 3.0);
  write_ply(m, d / "m.ply");
  EXPECT_EQ(read_ply(d / "m.ply"), m);
  std::ifstream is(d / "m.ply", std::ios::binary);
  std::string first;
  std::getline(is, first);
  EXPECT_EQ(first, "ply");
  EXPECT_THROW(read_ply(d / "absent.ply"), IoError);
}

TEST(Cli, MissingCheckpointFailsWithAClearMessage) {
  const fs::path d = scratch("cli");
  const auto r = run_cli("export --checkpoint " + (d / "nope.ckpt").string() + " --out " + d.string(), d);
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("checkpoint not found"), std::string::npos) << r.err;
}

TEST(Cli, BadSpecReportsValidationError) {
  const fs::path d = scratch("cli_spec");
  {
    std::ofstream os(d / "spec.json");
    os << R"({"problem": {"preset": "mbb", "volume_fraction": 1.5}})";
  }
  const auto r = run_cli("run --spec " + (d / "spec.json").string() + " --out " + (d / "out").string(), d);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error: validation:"), std::string::npos) << r.err;
}

TEST(Cli, ShortRunThenExport) {
  const fs::path d = scratch("cli_run");
  {
    std::ofstream os(d / "spec.json");
    os << R"({"problem": {"preset": "mbb", "resolution": 8},
             "field": {"levels": 4, "table_size": 4096, "min_resolution": 4, "max_resolution": 32, "hidden_width": 16},
             "train": {"iterations": 3, "alpha": 2.0, "gamma": 50},
             "augment": {"batch": 2, "output_size": 16, "background_sigma": 2}})";
  }
  const fs::path out = d / "out";
  auto r = run_cli("run --quiet --seed 1 --spec " + (d / "spec.json").string() + " --out " + out.string(), d);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"spec.json", "metrics.jsonl", "field.ckpt", "structure.png"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  r = run_cli("export --mesh --iso 0.3 --height 32 --width 32 --checkpoint " + (out / "field.ckpt").string() +
                  " --out " + (d / "exp").string(),
              d);
  // a three-iteration field may be empty at this iso level; both outcomes are reported cleanly
  if (r.code == 0) {
    EXPECT_TRUE(fs::exists(d / "exp" / "structure.ply"));
  } else {
    EXPECT_NE(r.err.find("error: "), std::string::npos) << r.err;
  }
  EXPECT_TRUE(fs::exists(d / "exp" / "structure.png"));
}
