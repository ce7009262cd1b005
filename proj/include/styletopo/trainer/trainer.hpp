#pragma once
// The optimization loop: one sample of the field per iteration feeds the
// mechanical, semantic and connectivity losses; their gradients are summed on
// the sampled structure and pushed through a single field backward pass.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "styletopo/field/hash_field.hpp"
#include "styletopo/mechanics/fem.hpp"
#include "styletopo/stylization/augment.hpp"
#include "styletopo/stylization/backend.hpp"
#include "styletopo/trainer/adam.hpp"

namespace styletopo::trainer {

struct InitOptions {
  bool uniform = false;     // zero table features
  double table_range = 1e-4;
};

// Table features uniform in [-range, range] (zero in uniform mode); decoder
// weights and biases uniform in +-1/sqrt(fan_in). Same seed, same bits.
void initialize(field::HashField& field, const InitOptions& opts, std::uint64_t seed);

struct TrainConfig {
  field::GridConfig grid;
  double alpha = 9e3;  // semantic weight
  double beta = 1.0;   // connectivity weight
  double gamma = 3e3;  // volume penalty
  int iterations = 500;
  double lr_initial = 3e-2;
  double lr_final = 1e-3;
  int pooling = 4;
  int fea_resolution = 64;
  int style_resolution = 256;
  std::string prompt = "golden, Baroque style";
  double alpha_penalty = 1.0;
  bool grayscale_only = false;
  int ccl_max_iters = 2000;
  double ccl_threshold = 0.1;
  std::optional<std::uint64_t> seed;
  InitOptions init;
  stylization::AugmentSpec augment;
  mechanics::SolverOptions solver;
  bool reproducible = false;

  // Throws ValidationError or DimensionError.
  void validate() const;
};

struct PhaseTimes {
  double sample_ms = 0.0;
  double mech_ms = 0.0;
  double sem_ms = 0.0;
  double conn_ms = 0.0;
  double backward_ms = 0.0;
  double step_ms = 0.0;
};

struct IterationMetrics {
  int iteration = 0;
  double compliance = 0.0;
  double volume = 0.0;
  double l_mech = 0.0;
  double l_sem = 0.0;
  double l_conn = 0.0;
  double total = 0.0;
  double lr = 0.0;
  std::size_t disconnected_components = 0;
  PhaseTimes times;
};

std::string to_json_line(const IterationMetrics& m);
IterationMetrics metrics_from_json_line(const std::string& line);

struct LossTerms {
  bool mech = true;
  bool sem = true;
  bool conn = true;
};

struct Evaluation {
  IterationMetrics metrics;
  StructureGrid S;   // sampled structure
  StructureGrid dS;  // d total / dS for the enabled terms
};

class Trainer {
 public:
  // backend may be null when alpha == 0; the semantic loss is then reported as 0.
  Trainer(mechanics::FemProblem problem, TrainConfig cfg, stylization::StyleBackend* backend);

  field::HashField& field() { return field_; }
  const field::HashField& field() const { return field_; }
  const TrainConfig& config() const { return cfg_; }
  const mechanics::FemProblem& problem() const { return problem_; }
  std::uint64_t seed() const { return seed_; }
  int style_height() const { return h_; }
  int style_width() const { return w_; }

  // Losses and dL/dS at the current parameters. Random draws for iteration k
  // depend only on (seed, k).
  Evaluation evaluate(int iteration, LossTerms terms = {});

  // evaluate + backward + Adam update for the next iteration.
  IterationMetrics step();
  int iterations_done() const { return done_; }

  // Runs the remaining iterations, appending one JSON line per iteration to
  // `metrics` (flushed each line) and calling `on_iteration` if set.
  std::vector<IterationMetrics> run(std::ostream* metrics,
                                    const std::function<void(const IterationMetrics&)>& on_iteration = {});

 private:
  mechanics::FemProblem problem_;
  TrainConfig cfg_;
  stylization::StyleBackend* backend_;
  std::uint64_t seed_;
  int h_, w_;
  field::HashField field_;
  field::FieldGradients grads_;
  std::unique_ptr<mechanics::EquilibriumSolver> solver_;
  std::unique_ptr<FieldAdam> adam_;
  std::vector<double> warm_start_;
  int done_ = 0;
};

// Stream for the per-iteration draws.
std::mt19937_64 iteration_rng(std::uint64_t seed, int iteration);

}  // namespace styletopo::trainer
