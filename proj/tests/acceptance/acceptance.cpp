// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit when any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>
#include <sys/wait.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "common/oracles.hpp"
#include "styletopo/connectivity/ccl.hpp"
#include "styletopo/field/hash_field.hpp"
#include "styletopo/io/benchmark.hpp"
#include "styletopo/mechanics/fem.hpp"
#include "styletopo/mechanics/problem.hpp"
#include "styletopo/stylization/backend.hpp"
#include "styletopo/stylization/compose.hpp"
#include "styletopo/trainer/trainer.hpp"

using namespace styletopo;
namespace fs = std::filesystem;
namespace oracle = styletopo::testing_oracles;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double rel_err(double g, double fd) {
  const double scale = std::max(std::abs(g), std::abs(fd));
  return scale == 0.0 ? 0.0 : std::abs(g - fd) / scale;
}

// Fourth-order central difference of loss() along one parameter.
template <class F>
double five_point(double& param, double eps, F&& loss) {
  const double keep = param;
  double f[4];
  const double steps[4] = {2 * eps, eps, -eps, -2 * eps};
  for (int k = 0; k < 4; ++k) {
    param = keep + steps[k];
    f[k] = loss();
  }
  param = keep;
  return (-f[0] + 8 * f[1] - 8 * f[2] + f[3]) / (12 * eps);
}

stylization::AnalyticStub gold_stub() { return stylization::AnalyticStub({0.83, 0.69, 0.22}); }

// Stub-backend MBB runs at full size, shared by the connectivity and
// penalty-factor checks.
struct StubRun {
  std::vector<trainer::IterationMetrics> log;
  double seconds = 0.0;
};

StubRun stub_mbb_run(double alpha, const fs::path& log_path) {
  auto stub = gold_stub();
  trainer::TrainConfig cfg;
  cfg.alpha = alpha;
  cfg.seed = 0;
  trainer::Trainer tr(mechanics::preset_problem("mbb", cfg.fea_resolution), cfg, &stub);
  std::ofstream os(log_path);
  const auto t0 = std::chrono::steady_clock::now();
  StubRun r;
  r.log = tr.run(&os);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Outcome benchmark_compliance() {
  std::vector<io::BenchmarkRow> rows;
  bool ok = true;
  for (const auto& name : mechanics::preset_names()) {
    rows.push_back(io::run_benchmark(name, io::benchmark_config()));
    const auto& r = rows.back();
    ok = ok && r.compliance_ok && r.volume_ok && r.seconds <= 600.0;
  }
  std::string d;
  for (const auto& r : rows) {
    d += fmt::format("{} C={:.2f} in [{:.0f},{:.0f}] V={:.4f} vs {:.3f}+-{:.3f} {:.0f}s; ", r.preset, r.compliance,
                     r.reference.compliance_lo, r.reference.compliance_hi, r.volume, r.reference.volume,
                     r.reference.volume_tol, r.seconds);
  }
  return {ok, d};
}

// (a) hash field backward on the full-size grid
double suite_hash_field() {
  field::HashField f(field::GridConfig{}, 21);
  trainer::initialize(f, {false, 0.1}, 21);
  const int h = 16, w = 16;
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  StructureGrid dS(h, w, 4);
  for (double& v : dS.data) v = u(rng);
  auto loss = [&]() {
    const StructureGrid s = field::sample_structure(f, h, w);
    double acc = 0.0;
    for (std::size_t k = 0; k < s.data.size(); ++k) acc += s.data[k] * dS.data[k];
    return acc;
  };
  const field::FieldGradients g = field::backward(f, dS);
  std::vector<std::size_t> touched;
  for (std::size_t k = 0; k < g.d_tables.size(); ++k) {
    if (std::abs(g.d_tables[k]) > 1e-6) touched.push_back(k);
  }
  std::shuffle(touched.begin(), touched.end(), rng);
  const double eps = 1e-4;
  double worst = 0.0;
  auto probe = [&](double& param, double grad) { worst = std::max(worst, rel_err(grad, five_point(param, eps, loss))); };
  for (std::size_t k = 0; k < 10 && k < touched.size(); ++k) probe(f.tables()[touched[k]], g.d_tables[touched[k]]);
  std::uniform_int_distribution<std::size_t> pick_w1(0, f.decoder().w1.size() - 1), pick_w2(0, f.decoder().w2.size() - 1);
  for (int k = 0; k < 4; ++k) {
    const std::size_t i = pick_w1(rng);
    probe(f.decoder().w1[i], g.d_decoder.w1[i]);
  }
  for (int k = 0; k < 4; ++k) {
    const std::size_t i = pick_w2(rng);
    probe(f.decoder().w2[i], g.d_decoder.w2[i]);
  }
  probe(f.decoder().b1[3], g.d_decoder.b1[3]);
  probe(f.decoder().b2[0], g.d_decoder.b2[0]);
  return worst;
}

// (b) compliance sensitivity against re-solved finite differences, 8 x 8
double suite_simp() {
  const mechanics::FemProblem p = mechanics::preset_problem("mbb", 8);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.2, 0.9);
  ScalarField rho(8, 8, 1);
  for (double& v : rho.data) v = u(rng);
  mechanics::BandedCholeskySolver solver;
  auto compliance = [&](const ScalarField& r) {
    return mechanics::compliance_and_sensitivity(p, r, mechanics::solve_equilibrium(p, r, solver)).compliance;
  };
  const auto sol = mechanics::compliance_and_sensitivity(p, rho, mechanics::solve_equilibrium(p, rho, solver));
  const double eps = 1e-4;
  double worst = 0.0;
  for (std::size_t e = 0; e < rho.data.size(); ++e) {
    ScalarField r = rho;
    const double fd = five_point(r.data[e], eps, [&] { return compliance(r); });
    worst = std::max(worst, rel_err(sol.sensitivity.data[e], fd));
  }
  return worst;
}

// (c) field parameters -> structure -> composite -> augmentation -> stub
double suite_stylization() {
  auto stub = gold_stub();
  trainer::TrainConfig cfg;
  cfg.fea_resolution = 4;
  cfg.style_resolution = 16;
  cfg.alpha = 1.0;
  cfg.alpha_penalty = 2.0;
  cfg.augment.batch = 4;
  cfg.augment.output_size = 12;
  cfg.augment.background_sigma = 2.0;
  cfg.seed = 24;
  cfg.init = {false, 0.1};
  trainer::Trainer tr(mechanics::preset_problem("mbb", 4), cfg, &stub);
  const trainer::LossTerms sem_only{false, true, false};
  const auto ev = tr.evaluate(5, sem_only);
  field::HashField& f = tr.field();
  const field::FieldGradients g = field::backward(f, ev.dS);
  auto loss = [&]() { return tr.evaluate(5, sem_only).metrics.l_sem; };
  std::mt19937_64 rng(25);
  std::vector<std::size_t> touched;
  for (std::size_t k = 0; k < g.d_tables.size(); ++k) {
    if (std::abs(g.d_tables[k]) > 1e-7) touched.push_back(k);
  }
  std::shuffle(touched.begin(), touched.end(), rng);
  const double eps = 1e-4;
  double worst = 0.0;
  auto probe = [&](double& param, double grad) { worst = std::max(worst, rel_err(grad, five_point(param, eps, loss))); };
  for (std::size_t k = 0; k < 10 && k < touched.size(); ++k) probe(f.tables()[touched[k]], g.d_tables[touched[k]]);
  for (std::size_t i : {0u, 7u, 33u}) probe(f.decoder().w2[i], g.d_decoder.w2[i]);
  for (std::size_t i : {0u, 1u, 2u, 3u}) probe(f.decoder().b2[i], g.d_decoder.b2[i]);
  return worst;
}

// (d) compositing gradients
double suite_compose() {
  std::mt19937_64 rng(26);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  double worst = 0.0;
  for (bool gray : {false, true}) {
    const stylization::ComposeOptions opts{3.0, gray};
    StructureGrid S(6, 5, 4);
    Image Z(6, 5, 3), G(6, 5, 3);
    for (double& v : S.data) v = u(rng);
    for (double& v : Z.data) v = u(rng);
    for (double& v : G.data) v = u(rng) - 0.5;
    const StructureGrid dS = stylization::compose_backward(S, Z, G, opts);
    auto loss = [&]() {
      const Image I = stylization::compose_image(S, Z, opts);
      double acc = 0.0;
      for (std::size_t k = 0; k < I.data.size(); ++k) acc += I.data[k] * G.data[k];
      return acc;
    };
    for (std::size_t k = 0; k < S.data.size(); ++k) {
      worst = std::max(worst, rel_err(dS.data[k], five_point(S.data[k], 1e-4, loss)));
    }
  }
  return worst;
}

Outcome gradient_suites() {
  const double a = suite_hash_field();
  const double b = suite_simp();
  const double c = suite_stylization();
  const double d = suite_compose();
  const bool ok = a < 1e-4 && b < 1e-3 && c < 1e-3 && d < 1e-6;
  return {ok, fmt::format("max rel err (a) field {:.2e} < 1e-4, (b) SIMP {:.2e} < 1e-3, (c) stylization {:.2e} < 1e-3, "
                          "(d) compositing {:.2e} < 1e-6",
                          a, b, c, d)};
}

Outcome ccl_oracle() {
  std::mt19937_64 rng(27);
  std::uniform_real_distribution<double> density(0.2, 0.8);
  int mismatches = 0, slow = 0, max_iters = 0;
  const int limit = 32 * 32 / 2;
  auto check = [&](const connectivity::Mask& m) {
    const auto lab = connectivity::ccl_labels(m, 2000);
    if (!lab.converged || !oracle::same_partition(oracle::flood_fill(m), lab.labels)) ++mismatches;
    if (lab.iterations >= limit) ++slow;
    max_iters = std::max(max_iters, lab.iterations);
  };
  for (int k = 0; k < 100; ++k) check(oracle::random_mask(32, 32, density(rng), rng));
  for (const auto& [name, m] : oracle::structured_masks()) check(m);
  return {mismatches == 0 && slow == 0,
          fmt::format("120 masks, {} partition mismatches, {} needing >= {} passes (max {})", mismatches, slow, limit,
                      max_iters)};
}

Outcome connectivity_outcome(const StubRun& run) {
  int violations = 0;
  int first = -1;
  for (const auto& m : run.log) {
    if (m.iteration > 200 && m.l_conn != 0.0) {
      ++violations;
      if (first < 0) first = m.iteration;
    }
  }
  return {violations == 0 && run.log.size() == 500,
          fmt::format("{} iterations, {} after iteration 200 with L_conn > 0{}", run.log.size(), violations,
                      first >= 0 ? fmt::format(" (first at {})", first) : std::string())};
}

struct CliRun {
  int code = -1;
  std::string metrics, checkpoint;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome determinism(const fs::path& work) {
  const fs::path spec = work / "determinism_spec.json";
  {
    std::ofstream os(spec);
    os << R"({"problem": {"preset": "mbb"}, "train": {"iterations": 40}})" << '\n';
  }
  std::vector<CliRun> runs;
  for (int k = 0; k < 2; ++k) {
    const fs::path out = work / ("determinism_" + std::to_string(k));
    fs::remove_all(out);
    const std::string cmd = std::string(STYLETOPO_CLI) + " run --quiet --seed 7 --reproducible --spec " + spec.string() +
                            " --out " + out.string();
    const int status = std::system(cmd.c_str());
    runs.push_back({WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out / "metrics.jsonl"), slurp(out / "field.ckpt")});
  }
  const bool ran = runs[0].code == 0 && runs[1].code == 0 && !runs[0].metrics.empty();
  const bool same_log = runs[0].metrics == runs[1].metrics;
  const bool same_ckpt = runs[0].checkpoint == runs[1].checkpoint;
  return {ran && same_log && same_ckpt,
          fmt::format("exit codes {}/{}, metrics {} ({} bytes), checkpoint {} ({} bytes)", runs[0].code, runs[1].code,
                      same_log ? "identical" : "differ", runs[0].metrics.size(), same_ckpt ? "identical" : "differ",
                      runs[0].checkpoint.size())};
}

Outcome penalty_monotonicity(const std::vector<std::pair<double, StubRun>>& runs) {
  // Inversions are counted over both sequences: L_sem should not rise and
  // C should not fall as alpha grows.
  int inversions = 0;
  std::string d;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& last = runs[k].second.log.back();
    d += fmt::format("alpha={:g}: L_sem={:.4f} C={:.2f} V={:.3f}; ", runs[k].first, last.l_sem, last.compliance,
                     last.volume);
    if (k > 0) {
      const auto& prev = runs[k - 1].second.log.back();
      inversions += last.l_sem > prev.l_sem ? 1 : 0;
      inversions += last.compliance < prev.compliance ? 1 : 0;
    }
  }
  d += fmt::format("{} inversion(s)", inversions);
  return {inversions <= 1, d};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string workdir = "acceptance_work";
  std::vector<std::string> only;
  app.add_option("--workdir", workdir, "Scratch directory for run outputs");
  app.add_option("--only", only, "Run only these checks")
      ->check(CLI::IsMember({"benchmark", "gradients", "ccl", "connectivity", "determinism", "monotonicity"}));
  CLI11_PARSE(app, argc, argv);
  const fs::path work = workdir;
  fs::create_directories(work);
  auto wanted = [&](const std::string& name) { return only.empty() || std::count(only.begin(), only.end(), name) > 0; };

  int failures = 0;
  auto report = [&](const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [&](const std::string& name, auto&& fn) {
    try {
      report(name, fn());
    } catch (const std::exception& e) {
      report(name, {false, std::string("exception: ") + e.what()});
    }
  };

  if (wanted("gradients")) guarded("gradient-suites", gradient_suites);
  if (wanted("ccl")) guarded("ccl-oracle", ccl_oracle);
  if (wanted("determinism")) guarded("determinism", [&] { return determinism(work); });
  if (wanted("benchmark")) guarded("benchmark-compliance", benchmark_compliance);

  if (wanted("connectivity") || wanted("monotonicity")) {
    std::vector<std::pair<double, StubRun>> runs;
    try {
      for (double alpha : {0.0, 9e2, 9e3}) {
        if (!wanted("monotonicity") && alpha != 9e3) continue;
        runs.push_back({alpha, stub_mbb_run(alpha, work / fmt::format("stub_mbb_alpha{:g}.jsonl", alpha))});
      }
      if (wanted("connectivity")) guarded("connectivity-outcome", [&] { return connectivity_outcome(runs.back().second); });
      if (wanted("monotonicity")) guarded("penalty-monotonicity", [&] { return penalty_monotonicity(runs); });
    } catch (const std::exception& e) {
      if (wanted("connectivity")) report("connectivity-outcome", {false, std::string("exception: ") + e.what()});
      if (wanted("monotonicity")) report("penalty-monotonicity", {false, std::string("exception: ") + e.what()});
    }
  }
  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criterion/criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
