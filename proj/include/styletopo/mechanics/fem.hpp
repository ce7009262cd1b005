#pragma once
// SIMP compliance analysis on a structured mesh of unit square bilinear
// elements (plane stress, unit thickness).
//
// Node numbering is column-major: node(x, y) = x * (nely + 1) + y with y
// counted downward from the top edge; DOF 2n is horizontal, 2n+1 vertical.
// Element densities are stored row-major (ey * nelx + ex), matching the
// pooled raster layout.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "styletopo/grid.hpp"

namespace styletopo::mechanics {

using ElementMatrix = std::array<double, 64>;

// 8x8 stiffness of a unit square bilinear element, row-major. DOF order:
// lower-left, lower-right, upper-right, upper-left corners, (u, v) each.
ElementMatrix element_stiffness(double youngs_modulus, double poisson);

struct PointLoad {
  int dof = 0;
  double magnitude = 0.0;
  bool operator==(const PointLoad&) const = default;
};

struct FemProblem {
  int nelx = 0;
  int nely = 0;
  std::vector<int> fixed_dofs;
  std::vector<PointLoad> loads;
  double youngs_modulus = 1.0;
  double poisson = 0.3;
  double density_floor = 1e-3;
  double simp_exponent = 2.0;
  double volume_fraction = 0.5;   // target delta
  double volume_penalty = 3e3;    // gamma
  std::vector<std::uint8_t> passive;  // optional, nely x nelx row-major, 1 = void

  int node_count() const { return (nelx + 1) * (nely + 1); }
  int dof_count() const { return 2 * node_count(); }
  int element_count() const { return nelx * nely; }
  int node(int x, int y) const { return x * (nely + 1) + y; }
  bool is_passive(int ey, int ex) const {
    return !passive.empty() && passive[static_cast<std::size_t>(ey) * nelx + ex] != 0;
  }

  // Throws ValidationError naming the violated constraint.
  void validate() const;

  std::vector<double> load_vector() const;
  std::array<int, 8> element_dofs(int ey, int ex) const;

  bool operator==(const FemProblem&) const = default;
};

enum class SolverKind { Auto, Direct, Pcg };

struct SolverOptions {
  SolverKind kind = SolverKind::Auto;
  double relative_tolerance = 1e-8;
  std::size_t max_iterations = 20000;
};

// K(stiffness) U = F with fixed DOFs eliminated. `element_scale` is the
// per-element multiplier of the base element matrix (rho^p * E0).
class EquilibriumSolver {
 public:
  virtual ~EquilibriumSolver() = default;
  virtual std::vector<double> solve(const FemProblem& problem,
                                    std::span<const double> element_scale,
                                    std::span<const double> warm_start) = 0;
  virtual std::string name() const = 0;
};

std::unique_ptr<EquilibriumSolver> make_solver(const SolverOptions& opts, const FemProblem& problem);

// Banded Cholesky on the reduced system.
class BandedCholeskySolver final : public EquilibriumSolver {
 public:
  explicit BandedCholeskySolver(double relative_tolerance = 1e-8) : tol_(relative_tolerance) {}
  std::vector<double> solve(const FemProblem& problem, std::span<const double> element_scale,
                            std::span<const double> warm_start) override;
  std::string name() const override { return "direct"; }

 private:
  double tol_;
};

// Jacobi-preconditioned conjugate gradients with matrix-free products.
class JacobiPcgSolver final : public EquilibriumSolver {
 public:
  JacobiPcgSolver(double relative_tolerance, std::size_t max_iterations)
      : tol_(relative_tolerance), max_iter_(max_iterations) {}
  std::vector<double> solve(const FemProblem& problem, std::span<const double> element_scale,
                            std::span<const double> warm_start) override;
  std::string name() const override { return "pcg"; }
  std::size_t last_iterations() const { return last_iterations_; }

 private:
  double tol_;
  std::size_t max_iter_;
  std::size_t last_iterations_ = 0;
};

// y = K x over the full DOF vector (fixed DOFs included).
void apply_stiffness(const FemProblem& problem, std::span<const double> element_scale,
                     std::span<const double> x, std::span<double> y);

// Clamps pooled densities into [floor, 1]; passive elements go to the floor.
std::vector<double> physical_densities(const FemProblem& problem, const ScalarField& rho_pooled);

// rho^p * E0 for each element.
std::vector<double> simp_scale(const FemProblem& problem, std::span<const double> physical);

std::vector<double> solve_equilibrium(const FemProblem& problem, const ScalarField& rho_pooled,
                                      EquilibriumSolver& solver,
                                      std::span<const double> warm_start = {});

struct FemSolution {
  std::vector<double> displacement;
  double compliance = 0.0;
  double volume_fraction = 0.0;  // mean pooled density (V / V0)
  ScalarField sensitivity;       // dC / d rho_pooled, zero where the floor clamp is active
};

FemSolution compliance_and_sensitivity(const FemProblem& problem, const ScalarField& rho_pooled,
                                       std::vector<double> displacement);

struct MechLoss {
  double value = 0.0;
  double volume_term = 0.0;
  // d value / d rho_pooled_e through the volume penalty (same for every element)
  double volume_gradient_per_element = 0.0;
};

MechLoss mech_loss(double compliance, double volume_fraction, double target, double penalty,
                   int element_count);

// Full analysis: solve, compliance, penalty; gradient w.r.t. the pooled field.
struct MechEvaluation {
  FemSolution solution;
  MechLoss loss;
  ScalarField d_loss;  // d L_mech / d rho_pooled
};

MechEvaluation evaluate_mechanics(const FemProblem& problem, const ScalarField& rho_pooled,
                                  EquilibriumSolver& solver, std::span<const double> warm_start = {});

}  // namespace styletopo::mechanics
