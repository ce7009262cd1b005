// Command-line front end: run, export, benchmark.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "styletopo/errors.hpp"
#include "styletopo/field/hash_field.hpp"
#include "styletopo/io/benchmark.hpp"
#include "styletopo/io/image_io.hpp"
#include "styletopo/io/mesh.hpp"
#include "styletopo/io/run_spec.hpp"
#include "styletopo/simd/kernels.hpp"
#include "styletopo/trainer/trainer.hpp"

namespace fs = std::filesystem;
using namespace styletopo;

namespace {

struct RunArgs {
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::string backend_url;
  std::string out;
  bool reproducible = false;
  bool quiet = false;
};

struct ExportArgs {
  std::string checkpoint;
  std::string out = ".";
  std::string spec;
  int height = 256;
  int width = 256;
  int scale = 1;
  bool mesh = false;
  double iso = 0.5;
  double depth = 8.0;
};

struct BenchArgs {
  std::vector<std::string> presets;
  int iterations = 100;
  int resolution = 64;
  std::uint64_t seed = 0;
  bool reproducible = false;
  bool strict = false;
};

void pin_reproducible() { simd::select_isa(simd::Isa::Scalar); }

int cmd_run(const RunArgs& a) {
  io::RunSpec spec = io::load_run_spec(a.spec);
  if (a.seed) spec.train.seed = a.seed;
  if (!a.backend.empty()) spec.backend.kind = a.backend;
  if (!a.backend_url.empty()) spec.backend.remote.url = a.backend_url;
  if (!a.out.empty()) spec.output_dir = a.out;
  if (a.reproducible) {
    if (!spec.train.seed) throw ValidationError("--reproducible needs a seed (--seed or train.seed)");
    spec.train.reproducible = true;
    pin_reproducible();
  }
  spec.validate();

  const auto problem = io::build_problem(spec);
  std::unique_ptr<stylization::StyleBackend> backend;
  if (spec.train.alpha > 0.0) backend = io::make_backend(spec.backend);

  fs::create_directories(spec.output_dir);
  {
    std::ofstream resolved(spec.output_dir / "spec.json");
    resolved << io::run_spec_to_json(spec) << '\n';
  }
  std::ofstream metrics(spec.output_dir / "metrics.jsonl", std::ios::binary);
  if (!metrics) throw IoError("cannot write " + (spec.output_dir / "metrics.jsonl").string());

  trainer::Trainer tr(problem, spec.train, backend.get());
  if (!a.quiet) {
    std::cerr << "seed " << tr.seed() << ", kernels " << simd::isa_name(simd::active_isa()) << ", "
              << tr.style_height() << "x" << tr.style_width() << " samples, " << problem.nely << "x" << problem.nelx
              << " elements\n";
  }
  const int every = std::max(1, spec.train.iterations / 20);
  tr.run(&metrics, [&](const trainer::IterationMetrics& m) {
    if (!a.quiet && (m.iteration % every == 0 || m.iteration + 1 == spec.train.iterations)) {
      std::cerr << "iter " << m.iteration << "  C " << m.compliance << "  V " << m.volume << "  L_sem " << m.l_sem
                << "  L_conn " << m.l_conn << "  total " << m.total << '\n';
    }
  });
  field::save_checkpoint(tr.field(), spec.output_dir / "field.ckpt");
  const StructureGrid S = field::sample_structure(tr.field(), tr.style_height(), tr.style_width());
  io::export_png(S, spec.output_dir / "structure.png");
  if (!a.quiet) std::cerr << "wrote " << spec.output_dir.string() << '\n';
  return 0;
}

int cmd_export(const ExportArgs& a) {
  const field::HashField f = field::load_checkpoint(a.checkpoint);
  int h = a.height;
  int w = a.width;
  if (!a.spec.empty()) {
    const io::RunSpec spec = io::load_run_spec(a.spec);
    h = w = spec.train.style_resolution;
  }
  fs::create_directories(a.out);
  const fs::path png = fs::path(a.out) / "structure.png";
  const StructureGrid S = io::export_upsampled(f, h, w, a.scale, png);
  std::cout << png.string() << '\n';
  if (a.mesh) {
    const auto mesh = io::extract_mesh(extract_channel(S, 0), a.iso, a.depth * a.scale, io::field_colors(f));
    const fs::path ply = fs::path(a.out) / "structure.ply";
    io::write_ply(mesh, ply);
    std::cout << ply.string() << " (" << mesh.vertices.size() << " vertices, " << mesh.triangles.size()
              << " triangles)\n";
  }
  return 0;
}

int cmd_benchmark(const BenchArgs& a) {
  if (a.reproducible) pin_reproducible();
  trainer::TrainConfig cfg = io::benchmark_config();
  cfg.iterations = a.iterations;
  cfg.fea_resolution = a.resolution;
  cfg.style_resolution = a.resolution * cfg.pooling;
  cfg.seed = a.seed;
  cfg.reproducible = a.reproducible;
  std::vector<io::BenchmarkRow> rows;
  const auto presets = a.presets.empty() ? mechanics::preset_names() : a.presets;
  for (const auto& p : presets) {
    rows.push_back(io::run_benchmark(p, cfg));
    std::cerr << "finished " << p << '\n';
  }
  std::cout << io::format_benchmark_table(rows);
  if (a.strict) {
    for (const auto& r : rows) {
      if (!r.compliance_ok || !r.volume_ok) return 1;
    }
  }
  return 0;
}

// One line on stderr, "error: <kind>: <message>", and a kind-specific exit code.
int report(const char* kind, int code, const std::string& what) {
  std::string msg = what;
  for (char& c : msg) {
    if (c == '\n') c = ' ';
  }
  std::cerr << "error: " << kind << ": " << msg << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stylized topology optimization with a hash-encoded neural field"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Optimize a structure and write checkpoint, metrics and image");
  run_cmd->add_option("--spec", run.spec, "Run specification (JSON)")->required();
  run_cmd->add_option("--seed", run.seed, "Random seed");
  run_cmd->add_option("--backend", run.backend, "Style backend")->check(CLI::IsMember({"stub", "remote"}));
  run_cmd->add_option("--backend-url", run.backend_url, "Style service address, e.g. http://127.0.0.1:8765");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_flag("--reproducible", run.reproducible, "Scalar kernels and zero timings for byte-identical logs");
  run_cmd->add_flag("--quiet", run.quiet, "No progress output");

  ExportArgs ex;
  auto* ex_cmd = app.add_subcommand("export", "Convert a checkpoint to PNG and optionally PLY");
  ex_cmd->add_option("--checkpoint", ex.checkpoint, "Field checkpoint")->required();
  ex_cmd->add_option("--out", ex.out, "Output directory");
  ex_cmd->add_option("--spec", ex.spec, "Run specification to take the resolution from");
  ex_cmd->add_option("--height", ex.height, "Base sample rows")->check(CLI::PositiveNumber);
  ex_cmd->add_option("--width", ex.width, "Base sample columns")->check(CLI::PositiveNumber);
  ex_cmd->add_option("--scale", ex.scale, "Resampling factor")->check(CLI::PositiveNumber);
  ex_cmd->add_flag("--mesh", ex.mesh, "Also write an extruded PLY mesh");
  ex_cmd->add_option("--iso", ex.iso, "Mesh iso level");
  ex_cmd->add_option("--depth", ex.depth, "Extrusion depth in base samples");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Pure compliance runs on the preset problems");
  bench_cmd->add_option("--preset", bench.presets, "Preset(s) to run (default: all)");
  bench_cmd->add_option("--iterations", bench.iterations, "Iterations per preset")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--resolution", bench.resolution, "FEA elements per side")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed, "Random seed");
  bench_cmd->add_flag("--reproducible", bench.reproducible, "Scalar kernels");
  bench_cmd->add_flag("--strict", bench.strict, "Exit 1 when a preset misses its reference window");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*ex_cmd) return cmd_export(ex);
    if (*bench_cmd) return cmd_benchmark(bench);
  } catch (const ParseError& e) {
    return report("parse", 2, e.what());
  } catch (const ValidationError& e) {
    return report("validation", 2, e.what());
  } catch (const DimensionError& e) {
    return report("dimension", 2, e.what());
  } catch (const IoError& e) {
    return report("io", 3, e.what());
  } catch (const BackendUnavailableError& e) {
    return report("backend", 4, e.what());
  } catch (const ShapeMismatchError& e) {
    return report("shape", 4, e.what());
  } catch (const NonFiniteGradientError& e) {
    return report("numeric", 5, e.what());
  } catch (const SingularSystemError& e) {
    return report("numeric", 5, e.what());
  } catch (const NonConvergenceError& e) {
    return report("numeric", 5, e.what());
  } catch (const EmptyStructureError& e) {
    return report("empty", 2, e.what());
  } catch (const fs::filesystem_error& e) {
    return report("io", 3, e.what());
  } catch (const std::exception& e) {
    return report("internal", 1, e.what());
  }
  return 1;
}
