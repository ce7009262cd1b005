#pragma once
// Pure compliance runs (no semantic or connectivity weight) on the presets.

#include <optional>
#include <string>
#include <vector>

#include "styletopo/mechanics/problem.hpp"
#include "styletopo/trainer/trainer.hpp"

namespace styletopo::io {

struct BenchmarkRow {
  std::string preset;
  double compliance = 0.0;
  double volume = 0.0;
  double seconds = 0.0;
  mechanics::PresetReference reference;
  bool compliance_ok = false;
  bool volume_ok = false;
};

// Runs one preset with alpha = beta = 0 using `base` for everything else.
BenchmarkRow run_benchmark(const std::string& preset, const trainer::TrainConfig& base);

std::string format_benchmark_table(const std::vector<BenchmarkRow>& rows);

// Benchmark defaults: 100 iterations at 64 x 64, seed 0.
trainer::TrainConfig benchmark_config();

}  // namespace styletopo::io
