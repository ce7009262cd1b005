#include "styletopo/trainer/trainer.hpp"

#include <chrono>
#include <cmath>

#include "styletopo/connectivity/ccl.hpp"
#include "styletopo/json_util.hpp"
#include "styletopo/mechanics/pooling.hpp"
#include "styletopo/stylization/compose.hpp"

namespace styletopo::trainer {

void initialize(field::HashField& field, const InitOptions& opts, std::uint64_t seed) {
  if (!(opts.table_range >= 0.0)) throw ValidationError("init: table range must be >= 0");
  std::mt19937_64 rng(seed);
  auto tables = field.tables();
  if (opts.uniform || opts.table_range == 0.0) {
    std::fill(tables.begin(), tables.end(), 0.0);
  } else {
    std::uniform_real_distribution<double> u(-opts.table_range, opts.table_range);
    for (double& v : tables) v = u(rng);
  }
  auto& d = field.decoder();
  const auto& cfg = field.config();
  auto fill = [&rng](std::vector<double>& v, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& x : v) x = u(rng);
  };
  fill(d.w1, cfg.feature_width());
  fill(d.b1, cfg.feature_width());
  fill(d.w2, cfg.hidden_width);
  fill(d.b2, cfg.hidden_width);
}

void TrainConfig::validate() const {
  grid.validate();
  if (!(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0)) throw ValidationError("train: alpha, beta and gamma must be >= 0");
  if (iterations < 1) throw ValidationError("train: iterations must be >= 1");
  if (!(lr_initial > 0.0 && lr_final > 0.0)) throw ValidationError("train: learning rates must be positive");
  if (pooling < 1) throw ValidationError("train: pooling must be >= 1");
  if (fea_resolution < 1 || style_resolution < 1) throw ValidationError("train: resolutions must be >= 1");
  if (style_resolution % pooling != 0) {
    throw DimensionError("train: style resolution " + std::to_string(style_resolution) +
                         " is not divisible by pooling " + std::to_string(pooling));
  }
  if (style_resolution / pooling != fea_resolution) {
    throw DimensionError("train: style resolution / pooling = " + std::to_string(style_resolution / pooling) +
                         " does not match the FEA resolution " + std::to_string(fea_resolution));
  }
  if (!(alpha_penalty >= 1.0)) throw ValidationError("train: alpha penalty must be >= 1");
  if (ccl_max_iters < 1) throw ValidationError("train: ccl_max_iters must be >= 1");
  if (!(ccl_threshold > 0.0 && ccl_threshold < 1.0)) throw ValidationError("train: ccl_threshold must lie in (0, 1)");
  augment.validate();
}

std::string to_json_line(const IterationMetrics& m) {
  json_util::Json j;
  j["iter"] = m.iteration;
  j["C"] = m.compliance;
  j["V"] = m.volume;
  j["L_mech"] = m.l_mech;
  j["L_sem"] = m.l_sem;
  j["L_conn"] = m.l_conn;
  j["total"] = m.total;
  j["lr"] = m.lr;
  j["disconnected"] = m.disconnected_components;
  j["ms"] = {{"sample", m.times.sample_ms}, {"mech", m.times.mech_ms},         {"sem", m.times.sem_ms},
             {"conn", m.times.conn_ms},     {"backward", m.times.backward_ms}, {"step", m.times.step_ms}};
  return j.dump();
}

IterationMetrics metrics_from_json_line(const std::string& line) {
  const auto j = json_util::parse(line);
  IterationMetrics m;
  m.iteration = json_util::require<int>(j, "iter", "metrics");
  m.compliance = json_util::require<double>(j, "C", "metrics");
  m.volume = json_util::require<double>(j, "V", "metrics");
  m.l_mech = json_util::require<double>(j, "L_mech", "metrics");
  m.l_sem = json_util::require<double>(j, "L_sem", "metrics");
  m.l_conn = json_util::require<double>(j, "L_conn", "metrics");
  m.total = json_util::require<double>(j, "total", "metrics");
  m.lr = json_util::require<double>(j, "lr", "metrics");
  m.disconnected_components = json_util::get_or<std::size_t>(j, "disconnected", 0, "metrics");
  if (j.contains("ms")) {
    const auto& t = j["ms"];
    m.times = {t.value("sample", 0.0), t.value("mech", 0.0),     t.value("sem", 0.0),
               t.value("conn", 0.0),   t.value("backward", 0.0), t.value("step", 0.0)};
  }
  return m;
}

std::mt19937_64 iteration_rng(std::uint64_t seed, int iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration), 0x5eedu};
  return std::mt19937_64(seq);
}

namespace {

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
  if (seed) return *seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double lap() {
    if (!enabled_) return 0.0;
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return ms;
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

Trainer::Trainer(mechanics::FemProblem problem, TrainConfig cfg, stylization::StyleBackend* backend)
    : problem_(std::move(problem)),
      cfg_(std::move(cfg)),
      backend_(backend),
      seed_(resolve_seed(cfg_.seed)),
      h_(0),
      w_(0),
      field_(cfg_.grid, seed_) {
  cfg_.validate();
  problem_.volume_penalty = cfg_.gamma;
  problem_.validate();
  if (cfg_.alpha > 0.0 && backend_ == nullptr) throw ValidationError("train: alpha > 0 requires a style backend");
  if (problem_.nelx * cfg_.pooling != cfg_.style_resolution) {
    throw DimensionError("train: problem is " + std::to_string(problem_.nelx) + " elements wide, expected " +
                         std::to_string(cfg_.style_resolution / cfg_.pooling) + " for style resolution " +
                         std::to_string(cfg_.style_resolution) + " and pooling " + std::to_string(cfg_.pooling));
  }
  h_ = problem_.nely * cfg_.pooling;
  w_ = problem_.nelx * cfg_.pooling;
  initialize(field_, cfg_.init, seed_);
  grads_ = field_.make_gradients();
  solver_ = mechanics::make_solver(cfg_.solver, problem_);
  adam_ = std::make_unique<FieldAdam>(field_, active_table_rows(field_, h_, w_));
}

Evaluation Trainer::evaluate(int iteration, LossTerms terms) {
  Stopwatch clock(!cfg_.reproducible);
  Evaluation ev;
  IterationMetrics& m = ev.metrics;
  m.iteration = iteration;
  m.lr = exponential_lr(cfg_.lr_initial, cfg_.lr_final, iteration, cfg_.iterations);
  ev.S = field::sample_structure(field_, h_, w_);
  ev.dS = StructureGrid(h_, w_, 4);
  const ScalarField rho = extract_channel(ev.S, 0);
  m.times.sample_ms = clock.lap();

  // mechanics on the pooled density
  const ScalarField pooled = mechanics::average_pool(rho, cfg_.pooling);
  const auto mech = mechanics::evaluate_mechanics(problem_, pooled, *solver_, warm_start_);
  warm_start_ = mech.solution.displacement;
  m.compliance = mech.solution.compliance;
  m.volume = mech.solution.volume_fraction;
  m.l_mech = mech.loss.value;
  if (terms.mech) {
    const ScalarField d_rho = mechanics::average_pool_backward(mech.d_loss, cfg_.pooling);
    for (std::size_t p = 0; p < d_rho.data.size(); ++p) ev.dS.data[p * 4] += d_rho.data[p];
  }
  m.times.mech_ms = clock.lap();

  // semantic loss on the composed, augmented image
  if (backend_ != nullptr) {
    std::mt19937_64 rng = iteration_rng(seed_, iteration);
    const Image Z = stylization::sample_background(h_, w_, cfg_.augment.background_sigma, rng);
    const stylization::ComposeOptions copts{cfg_.alpha_penalty, cfg_.grayscale_only};
    const Image I = stylization::compose_image(ev.S, Z, copts);
    stylization::AugmentSpec spec = cfg_.augment;
    stylization::sample_augmentation(spec, h_, w_, rng);
    const auto sem = stylization::semantic_loss(I, spec, cfg_.prompt, *backend_);
    m.l_sem = sem.loss;
    if (terms.sem && cfg_.alpha > 0.0) {
      Image dI = sem.gradient;
      for (double& v : dI.data) v *= cfg_.alpha;
      const StructureGrid d = stylization::compose_backward(ev.S, Z, dI, copts);
      for (std::size_t k = 0; k < d.data.size(); ++k) ev.dS.data[k] += d.data[k];
    }
  }
  m.times.sem_ms = clock.lap();

  // connectivity of the thresholded density
  const auto mask = connectivity::binarize(rho, cfg_.ccl_threshold);
  auto labels = connectivity::ccl_labels(mask, cfg_.ccl_max_iters);
  const auto conn = connectivity::conn_loss(rho, labels, problem_.volume_fraction);
  m.l_conn = conn.value;
  m.disconnected_components = conn.flagged_components;
  if (terms.conn && cfg_.beta > 0.0) {
    for (std::size_t p = 0; p < conn.gradient.data.size(); ++p) ev.dS.data[p * 4] += cfg_.beta * conn.gradient.data[p];
  }
  m.times.conn_ms = clock.lap();

  m.total = m.l_mech + cfg_.alpha * m.l_sem + cfg_.beta * m.l_conn;
  if (!std::isfinite(m.l_mech)) throw NonFiniteGradientError("mechanical loss is not finite");
  if (!std::isfinite(m.l_sem)) throw NonFiniteGradientError("semantic loss is not finite");
  for (std::size_t k = 0; k < ev.dS.data.size(); ++k) {
    if (!std::isfinite(ev.dS.data[k])) {
      throw NonFiniteGradientError(k % 4 == 0 ? "non-finite gradient on the density channel (mechanical, semantic or "
                                                "connectivity term)"
                                              : "non-finite gradient on a colour channel (semantic term)");
    }
  }
  return ev;
}

IterationMetrics Trainer::step() {
  if (done_ >= cfg_.iterations) throw ValidationError("train: all iterations already ran");
  Evaluation ev = evaluate(done_);
  Stopwatch clock(!cfg_.reproducible);
  field::backward(field_, ev.dS, grads_);
  ev.metrics.times.backward_ms = clock.lap();
  adam_->step(field_, grads_, ev.metrics.lr);
  ev.metrics.times.step_ms = clock.lap();
  ++done_;
  return ev.metrics;
}

std::vector<IterationMetrics> Trainer::run(std::ostream* metrics,
                                           const std::function<void(const IterationMetrics&)>& on_iteration) {
  std::vector<IterationMetrics> log;
  while (done_ < cfg_.iterations) {
    const IterationMetrics m = step();
    if (metrics != nullptr) {
      *metrics << to_json_line(m) << '\n';
      metrics->flush();
    }
    if (on_iteration) on_iteration(m);
    log.push_back(m);
  }
  return log;
}

}  // namespace styletopo::trainer
