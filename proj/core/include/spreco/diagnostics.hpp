#pragma once

#include "spreco/tikhonov.hpp"

#include <optional>
#include <vector>

namespace spreco {

/// One-layer Carleman weight: psi = (t+1)^lambda, phi = e^psi.
struct CarlemanWeight {
  double lambda = 1.0;

  double psi(double t) const { return std::pow(t + 1.0, lambda); }
  double phi(double t) const { return std::exp(psi(t)); }
};

/// Both sides of the weighted energy inequality evaluated on homogeneous
/// solutions w (f = g = 0), with v = phi w:
///   lhs = E int_eps^T int_G [ lambda^2 (t+1)^(lambda-2) v^2
///                            + lambda (t+1)^{-1} |grad v|^2 ]
///   rhs = lambda (T+1)^(lambda-1) E||v(T)||^2 + E||v(eps)||^2   (+ zero sources)
/// The expectation is the sample mean over the supplied trajectories; spatial
/// gradients are exact P1 element gradients via the stiffness matrix.
struct CarlemanTerms {
  double lhs = 0;
  double rhs_terminal = 0;
  double rhs_epsilon = 0;
  double rhs_source = 0;  // zero for homogeneous solutions
  double eps_used = 0;    // epsilon snapped onto the time grid

  double rhs_total() const { return rhs_terminal + rhs_epsilon + rhs_source; }
};

CarlemanTerms carleman_lhs_rhs(const FemSpace& space, const TimeGrid& grid,
                               const std::vector<Trajectory>& w_paths, double lambda,
                               double eps_time);

/// Vertex-sample errors: RMSE = sqrt(mean squared difference) and the
/// relative form against the reference (absent when the reference is zero).
struct RmseResult {
  double rmse = 0;
  std::optional<double> rmse_rel;
};

RmseResult rmse(const Vector& u, const Vector& u_ref);
/// Relative form only; throws when the reference norm vanishes.
double rmse_rel(const Vector& u, const Vector& u_ref);

/// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& x, const std::vector<double>& y);
/// One-sided lower confidence bound of a correlation via the Fisher transform.
double correlation_lower_bound(double rho, std::size_t n, double z_quantile = 1.6448536269514722);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Empirical conditional-stability scan: for each noise level delta, runs
/// full reconstructions and measures the discrete L2(eps,T;H1) distance
/// between the evolutions of the true and the reconstructed initial state.
struct StabilityProblem {
  ScalarField u0;
  Coefficients coeffs;
  int n_cells = 20;
  int steps = 0;  // 0: choose ceil(T/h^2)
  double eps_time = 0.1;
  std::vector<double> deltas = {1e-3, 3.2e-3, 1e-2, 3.2e-2, 1e-1};
  int runs_per_delta = 100;
  std::uint64_t seed = 1;
  double tau_d = 1.01;
  double grad_tol = 1e-8;
  int max_iters = 200;
  double lambda0_hint = 1.0;  // admissibility warning threshold for delta
};

struct StabilityPoint {
  double delta = 0;
  double mean_error = 0;
  double ci_halfwidth = 0;  // 1.96 * standard error
};

struct StabilityCurve {
  std::vector<StabilityPoint> points;
  std::vector<double> per_run_delta;  // all (delta, error) pairs for rank tests
  std::vector<double> per_run_error;
  double c_exponent = 0;         // ln(eps+1)/ln(T+1)
  LinearFit log_error_fit;       // log(mean err) against -3^{-c} (ln 1/delta)^c
  double spearman_rho = 0;       // over all runs
  double spearman_lower95 = 0;   // one-sided lower bound
};

StabilityCurve stability_experiment(const StabilityProblem& prob);

}  // namespace spreco
