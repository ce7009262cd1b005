#include "styletopo/mechanics/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "styletopo/errors.hpp"
#include "styletopo/simd/kernels.hpp"

namespace styletopo::mechanics {

ElementMatrix element_stiffness(double e, double nu) {
  const std::array<double, 8> k = {
      0.5 - nu / 6.0,          0.125 + nu / 8.0,   -0.25 - nu / 12.0,       -0.125 + 3.0 * nu / 8.0,
      -0.25 + nu / 12.0,       -0.125 - nu / 8.0,  nu / 6.0,                0.125 - 3.0 * nu / 8.0};
  static constexpr int pattern[8][8] = {
      {0, 1, 2, 3, 4, 5, 6, 7}, {1, 0, 7, 6, 5, 4, 3, 2}, {2, 7, 0, 5, 6, 3, 4, 1},
      {3, 6, 5, 0, 7, 2, 1, 4}, {4, 5, 6, 7, 0, 1, 2, 3}, {5, 4, 3, 2, 1, 0, 7, 6},
      {6, 3, 4, 1, 2, 7, 0, 5}, {7, 2, 1, 4, 3, 6, 5, 0}};
  const double s = e / (1.0 - nu * nu);
  ElementMatrix ke{};
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) ke[static_cast<std::size_t>(r * 8 + c)] = s * k[static_cast<std::size_t>(pattern[r][c])];
  }
  return ke;
}

void FemProblem::validate() const {
  if (nelx < 1 || nely < 1) throw ValidationError("problem: mesh must have at least one element per side");
  if (!(youngs_modulus > 0.0)) throw ValidationError("problem: E0 must be positive");
  if (!(poisson >= 0.0 && poisson < 0.5)) throw ValidationError("problem: poisson ratio must lie in [0, 0.5)");
  if (!(simp_exponent >= 1.0)) throw ValidationError("problem: p_simp must be >= 1");
  if (!(volume_fraction > 0.0 && volume_fraction < 1.0)) {
    throw ValidationError("problem: volume fraction must lie in (0, 1)");
  }
  if (!(volume_penalty >= 0.0)) throw ValidationError("problem: volume penalty must be >= 0");
  if (!(density_floor > 0.0 && density_floor < 1.0)) throw ValidationError("problem: density floor must lie in (0, 1)");
  const std::set<int> fixed(fixed_dofs.begin(), fixed_dofs.end());
  if (fixed.size() < 3) throw ValidationError("problem: at least 3 independent fixed DOFs are required");
  for (int d : fixed) {
    if (d < 0 || d >= dof_count()) throw ValidationError("problem: fixed DOF out of range");
  }
  for (const auto& l : loads) {
    if (l.dof < 0 || l.dof >= dof_count()) throw ValidationError("problem: load DOF out of range");
    if (!std::isfinite(l.magnitude)) throw ValidationError("problem: load magnitude must be finite");
  }
  if (!passive.empty() && passive.size() != static_cast<std::size_t>(element_count())) {
    throw ValidationError("problem: passive mask size must equal nelx * nely");
  }
}

std::vector<double> FemProblem::load_vector() const {
  std::vector<double> f(static_cast<std::size_t>(dof_count()), 0.0);
  for (const auto& l : loads) f[static_cast<std::size_t>(l.dof)] += l.magnitude;
  return f;
}

std::array<int, 8> FemProblem::element_dofs(int ey, int ex) const {
  const int n1 = (nely + 1) * ex + ey;
  const int n2 = (nely + 1) * (ex + 1) + ey;
  return {2 * n1 + 2, 2 * n1 + 3, 2 * n2 + 2, 2 * n2 + 3, 2 * n2, 2 * n2 + 1, 2 * n1, 2 * n1 + 1};
}

namespace {

std::vector<std::uint8_t> fixed_flags(const FemProblem& p) {
  std::vector<std::uint8_t> fixed(static_cast<std::size_t>(p.dof_count()), 0);
  for (int d : p.fixed_dofs) fixed[static_cast<std::size_t>(d)] = 1;
  return fixed;
}

void check_scale(const FemProblem& p, std::span<const double> scale) {
  if (scale.size() != static_cast<std::size_t>(p.element_count())) {
    throw DimensionError("solver: element scale length != element count");
  }
}

double norm2(std::span<const double> v) {
  return std::sqrt(simd::kernels().dot(v.data(), v.data(), v.size()));
}

double relative_residual(const FemProblem& p, std::span<const double> scale,
                         std::span<const double> u, std::span<const double> f,
                         const std::vector<std::uint8_t>& fixed) {
  std::vector<double> ku(u.size());
  apply_stiffness(p, scale, u, ku);
  double r2 = 0.0, f2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (fixed[i]) continue;
    const double r = f[i] - ku[i];
    r2 += r * r;
    f2 += f[i] * f[i];
  }
  return f2 == 0.0 ? std::sqrt(r2) : std::sqrt(r2 / f2);
}

}  // namespace

void apply_stiffness(const FemProblem& p, std::span<const double> scale,
                     std::span<const double> x, std::span<double> y) {
  check_scale(p, scale);
  const ElementMatrix ke = element_stiffness(p.youngs_modulus, p.poisson);
  const auto& k = simd::kernels();
  std::fill(y.begin(), y.end(), 0.0);
  std::array<double, 8> ue{};
  std::array<double, 8> fe{};
  const std::array<double, 8> zero{};
  for (int ex = 0; ex < p.nelx; ++ex) {
    for (int ey = 0; ey < p.nely; ++ey) {
      const double s = scale[static_cast<std::size_t>(ey) * p.nelx + ex];
      if (s == 0.0) continue;
      const auto dofs = p.element_dofs(ey, ex);
      for (int a = 0; a < 8; ++a) ue[static_cast<std::size_t>(a)] = x[static_cast<std::size_t>(dofs[static_cast<std::size_t>(a)])];
      k.affine(ke.data(), zero.data(), ue.data(), fe.data(), 8, 8);
      for (int a = 0; a < 8; ++a) y[static_cast<std::size_t>(dofs[static_cast<std::size_t>(a)])] += s * fe[static_cast<std::size_t>(a)];
    }
  }
}

std::vector<double> BandedCholeskySolver::solve(const FemProblem& p, std::span<const double> scale,
                                                std::span<const double> /*warm_start*/) {
  check_scale(p, scale);
  const auto fixed = fixed_flags(p);
  const std::size_t ndof = fixed.size();
  std::vector<long> reduced(ndof, -1);
  std::size_t n = 0;
  for (std::size_t d = 0; d < ndof; ++d) {
    if (!fixed[d]) reduced[d] = static_cast<long>(n++);
  }
  const std::vector<double> f = p.load_vector();
  std::vector<double> u(ndof, 0.0);
  if (std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; })) return u;

  long bw = 0;
  for (int ex = 0; ex < p.nelx; ++ex) {
    for (int ey = 0; ey < p.nely; ++ey) {
      const auto dofs = p.element_dofs(ey, ex);
      long lo = static_cast<long>(n), hi = -1;
      for (int d : dofs) {
        const long r = reduced[static_cast<std::size_t>(d)];
        if (r < 0) continue;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
      if (hi >= 0) bw = std::max(bw, hi - lo);
    }
  }
  const std::size_t stride = static_cast<std::size_t>(bw) + 1;
  // band(i, j) for i - bw <= j <= i
  std::vector<double> band(n * stride, 0.0);
  auto at = [&](std::size_t i, std::size_t j) -> double& {
    return band[i * stride + (j + static_cast<std::size_t>(bw) - i)];
  };

  const ElementMatrix ke = element_stiffness(p.youngs_modulus, p.poisson);
  for (int ex = 0; ex < p.nelx; ++ex) {
    for (int ey = 0; ey < p.nely; ++ey) {
      const double s = scale[static_cast<std::size_t>(ey) * p.nelx + ex];
      const auto dofs = p.element_dofs(ey, ex);
      for (int a = 0; a < 8; ++a) {
        const long ra = reduced[static_cast<std::size_t>(dofs[static_cast<std::size_t>(a)])];
        if (ra < 0) continue;
        for (int b = 0; b < 8; ++b) {
          const long rb = reduced[static_cast<std::size_t>(dofs[static_cast<std::size_t>(b)])];
          if (rb < 0 || rb > ra) continue;
          at(static_cast<std::size_t>(ra), static_cast<std::size_t>(rb)) += s * ke[static_cast<std::size_t>(a * 8 + b)];
        }
      }
    }
  }

  const auto& k = simd::kernels();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k0 = i > static_cast<std::size_t>(bw) ? i - static_cast<std::size_t>(bw) : 0;
    for (std::size_t j = k0; j <= i; ++j) {
      const double* li = &at(i, k0);
      const double* lj = &at(j, k0);
      const double s = at(i, j) - k.dot(li, lj, j - k0);
      if (i == j) {
        const double diag = at(i, i);
        if (!(s > 1e-10 * std::abs(diag))) {
          throw SingularSystemError("stiffness matrix is singular: constraints leave a rigid-body mode (pivot " +
                                    std::to_string(i) + ")");
        }
        at(i, i) = std::sqrt(s);
      } else {
        at(i, j) = s / at(j, j);
      }
    }
  }

  std::vector<double> y(n);
  for (std::size_t d = 0; d < ndof; ++d) {
    if (reduced[d] >= 0) y[static_cast<std::size_t>(reduced[d])] = f[d];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k0 = i > static_cast<std::size_t>(bw) ? i - static_cast<std::size_t>(bw) : 0;
    y[i] = (y[i] - k.dot(&at(i, k0), y.data() + k0, i - k0)) / at(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    y[i] /= at(i, i);
    const std::size_t k0 = i > static_cast<std::size_t>(bw) ? i - static_cast<std::size_t>(bw) : 0;
    k.axpy(-y[i], &at(i, k0), y.data() + k0, i - k0);
  }
  for (std::size_t d = 0; d < ndof; ++d) {
    if (reduced[d] >= 0) u[d] = y[static_cast<std::size_t>(reduced[d])];
  }
  const double res = relative_residual(p, scale, u, f, fixed);
  if (!(res <= tol_)) {
    throw NonConvergenceError("direct solve residual " + std::to_string(res) + " exceeds tolerance", 1);
  }
  return u;
}

std::vector<double> JacobiPcgSolver::solve(const FemProblem& p, std::span<const double> scale,
                                           std::span<const double> warm_start) {
  check_scale(p, scale);
  const auto fixed = fixed_flags(p);
  const std::size_t ndof = fixed.size();
  const std::vector<double> f = p.load_vector();
  std::vector<double> u(ndof, 0.0);
  last_iterations_ = 0;
  const double fnorm = norm2(f);
  if (fnorm == 0.0) return u;
  if (warm_start.size() == ndof) {
    for (std::size_t i = 0; i < ndof; ++i) u[i] = fixed[i] ? 0.0 : warm_start[i];
  }

  const ElementMatrix ke = element_stiffness(p.youngs_modulus, p.poisson);
  std::vector<double> diag(ndof, 0.0);
  for (int ex = 0; ex < p.nelx; ++ex) {
    for (int ey = 0; ey < p.nely; ++ey) {
      const double s = scale[static_cast<std::size_t>(ey) * p.nelx + ex];
      const auto dofs = p.element_dofs(ey, ex);
      for (int a = 0; a < 8; ++a) diag[static_cast<std::size_t>(dofs[static_cast<std::size_t>(a)])] += s * ke[static_cast<std::size_t>(a * 9)];
    }
  }
  std::vector<double> inv_diag(ndof, 0.0);
  for (std::size_t i = 0; i < ndof; ++i) {
    if (fixed[i]) continue;
    if (!(diag[i] > 0.0)) throw SingularSystemError("stiffness matrix has a zero diagonal at DOF " + std::to_string(i));
    inv_diag[i] = 1.0 / diag[i];
  }

  const auto& k = simd::kernels();
  std::vector<double> r(ndof), z(ndof), d(ndof), q(ndof);
  apply_stiffness(p, scale, u, q);
  for (std::size_t i = 0; i < ndof; ++i) r[i] = fixed[i] ? 0.0 : f[i] - q[i];
  for (std::size_t i = 0; i < ndof; ++i) z[i] = r[i] * inv_diag[i];
  d = z;
  double rz = k.dot(r.data(), z.data(), ndof);
  for (std::size_t it = 0; it < max_iter_; ++it) {
    if (norm2(r) <= tol_ * fnorm) {
      last_iterations_ = it;
      return u;
    }
    apply_stiffness(p, scale, d, q);
    for (std::size_t i = 0; i < ndof; ++i) {
      if (fixed[i]) q[i] = 0.0;
    }
    const double dq = k.dot(d.data(), q.data(), ndof);
    if (!(dq > 0.0)) {
      throw SingularSystemError("stiffness matrix is not positive definite: constraints leave a rigid-body mode");
    }
    const double alpha = rz / dq;
    k.axpy(alpha, d.data(), u.data(), ndof);
    k.axpy(-alpha, q.data(), r.data(), ndof);
    for (std::size_t i = 0; i < ndof; ++i) z[i] = r[i] * inv_diag[i];
    const double rz_next = k.dot(r.data(), z.data(), ndof);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < ndof; ++i) d[i] = z[i] + beta * d[i];
  }
  last_iterations_ = max_iter_;
  if (norm2(r) <= tol_ * fnorm) return u;
  throw NonConvergenceError("PCG did not converge after " + std::to_string(max_iter_) + " iterations", max_iter_);
}

std::unique_ptr<EquilibriumSolver> make_solver(const SolverOptions& opts, const FemProblem& problem) {
  switch (opts.kind) {
    case SolverKind::Direct:
      return std::make_unique<BandedCholeskySolver>(opts.relative_tolerance);
    case SolverKind::Pcg:
      return std::make_unique<JacobiPcgSolver>(opts.relative_tolerance, opts.max_iterations);
    case SolverKind::Auto:
      break;
  }
  // The banded factorization costs O(n * bw^2) and stays well under a second
  // on the benchmark meshes, while PCG needs thousands of iterations at the
  // 1e-6 stiffness contrast of the density floor.
  (void)problem;
  return std::make_unique<BandedCholeskySolver>(opts.relative_tolerance);
}

std::vector<double> physical_densities(const FemProblem& p, const ScalarField& rho) {
  if (rho.height != p.nely || rho.width != p.nelx || rho.channels != 1) {
    throw DimensionError("pooled density shape does not match the FEM mesh");
  }
  std::vector<double> out(rho.data.size());
  for (int ey = 0; ey < p.nely; ++ey) {
    for (int ex = 0; ex < p.nelx; ++ex) {
      const std::size_t e = static_cast<std::size_t>(ey) * p.nelx + ex;
      out[e] = p.is_passive(ey, ex) ? p.density_floor : std::clamp(rho.data[e], p.density_floor, 1.0);
    }
  }
  return out;
}

std::vector<double> simp_scale(const FemProblem& p, std::span<const double> physical) {
  std::vector<double> s(physical.size());
  for (std::size_t e = 0; e < physical.size(); ++e) s[e] = std::pow(physical[e], p.simp_exponent);
  return s;
}

std::vector<double> solve_equilibrium(const FemProblem& p, const ScalarField& rho, EquilibriumSolver& solver,
                                      std::span<const double> warm_start) {
  const auto phys = physical_densities(p, rho);
  return solver.solve(p, simp_scale(p, phys), warm_start);
}

FemSolution compliance_and_sensitivity(const FemProblem& p, const ScalarField& rho,
                                       std::vector<double> displacement) {
  const auto phys = physical_densities(p, rho);
  const ElementMatrix ke = element_stiffness(p.youngs_modulus, p.poisson);
  const auto& k = simd::kernels();
  FemSolution sol;
  sol.sensitivity = ScalarField(p.nely, p.nelx, 1);
  std::array<double, 8> ue{}, ke_u{};
  const std::array<double, 8> zero{};
  double compliance = 0.0;
  double volume = 0.0;
  for (int ey = 0; ey < p.nely; ++ey) {
    for (int ex = 0; ex < p.nelx; ++ex) {
      const std::size_t e = static_cast<std::size_t>(ey) * p.nelx + ex;
      const auto dofs = p.element_dofs(ey, ex);
      for (int a = 0; a < 8; ++a) ue[static_cast<std::size_t>(a)] = displacement[static_cast<std::size_t>(dofs[static_cast<std::size_t>(a)])];
      k.affine(ke.data(), zero.data(), ue.data(), ke_u.data(), 8, 8);
      const double ce = k.dot(ue.data(), ke_u.data(), 8);
      const double x = phys[e];
      compliance += std::pow(x, p.simp_exponent) * ce;
      const bool active = !p.is_passive(ey, ex) && rho.data[e] >= p.density_floor && rho.data[e] <= 1.0;
      sol.sensitivity.data[e] = active ? -p.simp_exponent * std::pow(x, p.simp_exponent - 1.0) * ce : 0.0;
      if (!p.is_passive(ey, ex)) volume += rho.data[e];
    }
  }
  sol.compliance = compliance;
  sol.volume_fraction = volume / p.element_count();
  sol.displacement = std::move(displacement);
  return sol;
}

MechLoss mech_loss(double compliance, double volume_fraction, double target, double penalty, int element_count) {
  MechLoss l;
  const double gap = volume_fraction - target;
  l.volume_term = penalty * gap * gap;
  l.value = compliance + l.volume_term;
  l.volume_gradient_per_element = element_count > 0 ? 2.0 * penalty * gap / element_count : 0.0;
  return l;
}

MechEvaluation evaluate_mechanics(const FemProblem& p, const ScalarField& rho, EquilibriumSolver& solver,
                                  std::span<const double> warm_start) {
  MechEvaluation out;
  out.solution = compliance_and_sensitivity(p, rho, solve_equilibrium(p, rho, solver, warm_start));
  out.loss = mech_loss(out.solution.compliance, out.solution.volume_fraction, p.volume_fraction,
                       p.volume_penalty, p.element_count());
  out.d_loss = ScalarField(p.nely, p.nelx, 1);
  for (int ey = 0; ey < p.nely; ++ey) {
    for (int ex = 0; ex < p.nelx; ++ex) {
      const std::size_t e = static_cast<std::size_t>(ey) * p.nelx + ex;
      out.d_loss.data[e] = p.is_passive(ey, ex)
                               ? 0.0
                               : out.solution.sensitivity.data[e] + out.loss.volume_gradient_per_element;
    }
  }
  return out;
}

}  // namespace styletopo::mechanics
