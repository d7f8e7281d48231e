#pragma once

#include "spreco/fem.hpp"
#include "spreco/rng.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace spreco {

/// Uniform time grid on [0, T] with M steps of size k = T/M.
struct TimeGrid {
  double T = 1.0;
  int steps = 1;

  static TimeGrid uniform(double T, int steps);

  double k() const { return T / steps; }
  double time(int m) const { return T * m / steps; }

  /// k <= h^2 stability guideline; violations are reported, not fatal.
  bool satisfies_h2_rule(double h) const { return k() <= h * h + 1e-15; }
};

/// One realization of Brownian increments on a TimeGrid. increment(m) is
/// W(t_{m+1}) - W(t_m) ~ N(0, k), reproducible from the seed.
class BrownianPath {
public:
  static BrownianPath sample(const TimeGrid& grid, std::uint64_t seed);
  /// All increments zero; turns the stochastic stepper into its
  /// deterministic mean scheme.
  static BrownianPath zero(const TimeGrid& grid);

  const TimeGrid& grid() const { return grid_; }
  std::uint64_t seed() const { return seed_; }
  double increment(int m) const { return dw_[static_cast<std::size_t>(m)]; }
  const std::vector<double>& increments() const { return dw_; }

private:
  TimeGrid grid_;
  std::uint64_t seed_ = 0;
  std::vector<double> dw_;
};

/// Time-discrete solution on interior dofs, states U^0..U^M.
struct Trajectory {
  TimeGrid grid;
  std::vector<Vector> states;

  const Vector& terminal() const { return states.back(); }
  /// One row per step: t, dof values. For plotting.
  void dump_csv(const std::string& path) const;
};

/// Interior-dof operators of the semi-implicit scheme for one
/// (space, coefficients, grid) triple:
///   S = Mass + k Stiff            (implicit diffusion)
///   A = -k MD + k Mass_b2 + Mass  (explicit drift/reaction)
///   B = Mass - Mass_b2 + k Stiff + k MG   (adjoint stepping operator)
///   Mass_b3                        (noise pairing)
/// Factorizations of S and B are built once and shared.
class SpdeOperators {
public:
  SpdeOperators(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid);

  const FemSpace& space() const { return *space_; }
  const Coefficients& coeffs() const { return coeffs_; }
  const TimeGrid& grid() const { return grid_; }
  Index interior_count() const { return mass_.rows(); }

  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& stiff() const { return stiff_; }
  const SparseMatrix& system() const { return system_; }      // S
  const SparseMatrix& drift() const { return drift_; }        // A
  const SparseMatrix& backward() const { return backward_; }  // B
  const SparseMatrix& mass_b3() const { return mass_b3_; }
  bool stochastic() const { return has_b3_; }

  const Factorization& system_factor() const { return *system_factor_; }
  const Factorization& backward_factor() const { return *backward_factor_; }
  const SpdSolver& mass_factor() const { return *mass_factor_; }

  double mass_inner(const Vector& u, const Vector& v) const { return u.dot(spmv(mass_, v)); }
  double mass_norm(const Vector& u) const;

  /// Interior load vectors of f and g at time t (zero vectors when absent).
  Vector load_f(double t) const;
  Vector load_g(double t) const;
  bool has_loads() const { return coeffs_.has_f() || coeffs_.has_g(); }

private:
  const FemSpace* space_;  // not owned; must outlive the operators
  Coefficients coeffs_;
  TimeGrid grid_;
  bool has_b3_ = false;
  SparseMatrix mass_, stiff_, mg_, md_, mass_b2_, mass_b3_;
  SparseMatrix system_, drift_, backward_;
  std::shared_ptr<Factorization> system_factor_;
  std::shared_ptr<Factorization> backward_factor_;
  std::shared_ptr<SpdSolver> mass_factor_;
};

/// Semi-implicit Euler stepper:
///   S U^{m+1} = A U^m + Mass_b3 U^m dW_{m+1} + k load_f(t_m) + load_g(t_m) dW_{m+1}
/// Diffusion implicit, drift/reaction/noise explicit. Throws on blow-up.
Trajectory forward_solve(const SpdeOperators& ops, const Vector& y0_interior,
                         const BrownianPath& path);

/// Terminal state of forward_solve: the discrete forward map (affine in y0).
Vector apply_forward_map(const SpdeOperators& ops, const Vector& y0_interior,
                         const BrownianPath& path);

/// Homogeneous (f = g = 0) forward map on the same path: the linear part.
Vector apply_linear_map(const SpdeOperators& ops, const Vector& y0_interior,
                        const BrownianPath& path);

// Convenience wrappers that assemble operators on the fly.
Trajectory forward_solve(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid,
                         const Vector& y0_interior, const BrownianPath& path);
Vector apply_forward_map(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid,
                         const Vector& y0_interior, const BrownianPath& path);

}  // namespace spreco
