#include "styletopo/io/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <fmt/format.h>

namespace styletopo::io {

trainer::TrainConfig benchmark_config() {
  trainer::TrainConfig cfg;
  cfg.iterations = 100;
  cfg.fea_resolution = 64;
  cfg.style_resolution = 256;
  cfg.seed = 0;
  return cfg;
}

BenchmarkRow run_benchmark(const std::string& preset, const trainer::TrainConfig& base) {
  trainer::TrainConfig cfg = base;
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  mechanics::FemProblem problem = mechanics::preset_problem(preset, cfg.fea_resolution);
  BenchmarkRow row;
  row.preset = preset;
  for (const auto& r : mechanics::preset_references()) {
    if (r.name == preset) row.reference = r;
  }
  const auto t0 = std::chrono::steady_clock::now();
  trainer::Trainer tr(problem, cfg, nullptr);
  const auto log = tr.run(nullptr);
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  row.compliance = log.back().compliance;
  row.volume = log.back().volume;
  row.compliance_ok = row.compliance >= row.reference.compliance_lo && row.compliance <= row.reference.compliance_hi;
  row.volume_ok = std::abs(row.volume - row.reference.volume) <= row.reference.volume_tol;
  return row;
}

std::string format_benchmark_table(const std::vector<BenchmarkRow>& rows) {
  std::string out = fmt::format("{:<10} {:>10} {:>8} {:>10} {:>8} {:>15} {:>8} {:>6}\n", "preset", "C", "V", "C_ref",
                                "V_ref", "C_window", "time_s", "ok");
  for (const auto& r : rows) {
    out += fmt::format("{:<10} {:>10.3f} {:>8.4f} {:>10.2f} {:>8.3f} {:>15} {:>8.1f} {:>6}\n", r.preset, r.compliance,
                       r.volume, r.reference.compliance, r.reference.volume,
                       fmt::format("[{:.0f}, {:.0f}]", r.reference.compliance_lo, r.reference.compliance_hi),
                       r.seconds, r.compliance_ok && r.volume_ok ? "yes" : "no");
  }
  return out;
}

}  // namespace styletopo::io
