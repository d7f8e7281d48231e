#pragma once

#include "spreco/adjoint.hpp"

#include <optional>
#include <string>
#include <vector>

namespace spreco {

/// How the expectation in the data-misfit term is realized.
///
/// Expectation evaluates all CG quantities in closed form through the
/// A_{Y^m}/V^m recursion (valid for b1 = b2 = 0, f = g = 0, the setting of
/// the reconstruction experiments; the recursion eliminates the expectations
/// analytically). FixedPath evaluates the forward map on one Brownian
/// realization; MonteCarlo averages the misfit over a batch of paths. The
/// gradient always comes from the recursion and is path-independent.
enum class PathPolicy { Expectation, FixedPath, MonteCarlo };

struct StoppingRule {
  enum class Kind { Discrepancy, GradientNorm, MaxItersOnly };
  Kind kind = Kind::GradientNorm;
  double value = 1e-8;

  /// Stop when the Mass-norm residual drops to `level` (absolute).
  static StoppingRule discrepancy(double level) { return {Kind::Discrepancy, level}; }
  /// Stop when the gradient L2 norm falls below rel_tol times its initial value.
  static StoppingRule gradient_norm(double rel_tol) { return {Kind::GradientNorm, rel_tol}; }
  static StoppingRule max_iters_only() { return {Kind::MaxItersOnly, 0.0}; }
};

struct RegularizationConfig {
  enum class AlphaRule { Fixed, DeltaSquared };
  AlphaRule alpha_rule = AlphaRule::Fixed;
  double alpha = 0.0;      ///< used by AlphaRule::Fixed
  double delta_abs = 0.0;  ///< absolute L2 noise level; DeltaSquared sets alpha = delta_abs^2
  int max_iters = 200;
  StoppingRule stop;

  double resolved_alpha() const {
    return alpha_rule == AlphaRule::DeltaSquared ? delta_abs * delta_abs : alpha;
  }
};

struct CgIterate {
  int k = 0;
  double j_value = 0;
  double grad_norm = 0;
  double beta = 0;
  double gamma = 0;
  double discrepancy = 0;
};

struct CgResult {
  Vector y0;
  std::vector<CgIterate> log;
  bool converged = false;
  std::string stop_reason;
  double final_j = 0;
  double final_discrepancy = 0;

  void dump_csv(const std::string& path) const;
};

struct CertificateReport {
  double j_candidate = 0;
  double j_reference = 0;
  bool holds = false;
};

/// One reconstruction context: assembled operators, data, realization policy,
/// and the adjoint recursion (A sequence built once; V rebuilt per data).
class TikhonovProblem {
public:
  /// FixedPath realization on the given Brownian path. `recursion_template`
  /// (when supplied) donates its data-independent A sequence; only the V
  /// sequence is recomputed for the new data.
  TikhonovProblem(std::shared_ptr<const SpdeOperators> ops, Vector data_interior,
                  BrownianPath path,
                  std::shared_ptr<const DirichletPoisson> poisson = nullptr,
                  std::optional<AdjointRecursion> recursion_template = {});

  /// Closed-form expectation realization (requires b1 = b2 = 0, f = g = 0).
  static TikhonovProblem expectation(std::shared_ptr<const SpdeOperators> ops,
                                     Vector data_interior,
                                     std::shared_ptr<const DirichletPoisson> poisson = nullptr,
                                     std::optional<AdjointRecursion> recursion_template = {});

  /// Sample-average realization over a path batch.
  static TikhonovProblem monte_carlo(std::shared_ptr<const SpdeOperators> ops,
                                     Vector data_interior, std::vector<BrownianPath> paths,
                                     std::shared_ptr<const DirichletPoisson> poisson = nullptr,
                                     std::optional<AdjointRecursion> recursion_template = {});

  PathPolicy policy() const { return policy_; }
  const SpdeOperators& ops() const { return *ops_; }
  const DirichletPoisson& poisson() const { return *poisson_; }
  const Vector& data() const { return data_; }
  const AdjointRecursion& recursion() const { return *recursion_; }

  /// J_alpha(y0) = E || A y0 - u^delta ||^2_{L2} + alpha |L_h y0|^2_{L2},
  /// with E realized per the policy.
  double functional(const Vector& y0, double alpha) const;

  /// Gateaux gradient in the H^2 representation, normalized so that
  /// <grad, v>_{H^2} equals half the derivative of J at y0 in direction v:
  /// grad = invLap(invLap(Y^0(y0))) + alpha y0.
  Vector gradient(const Vector& y0, double alpha) const;

  /// Mass-norm data residual under the policy's realization.
  double residual_norm(const Vector& y0) const;

  CgResult minimize(const RegularizationConfig& cfg, const Vector& y0_init) const;

  /// Checks the minimizer property J(candidate) <= J(reference) + tol.
  CertificateReport certificate(const Vector& candidate, const Vector& reference, double alpha,
                                double tol = 1e-12) const;

private:
  TikhonovProblem(std::shared_ptr<const SpdeOperators> ops, Vector data_interior,
                  PathPolicy policy, std::optional<BrownianPath> path,
                  std::vector<BrownianPath> mc_paths,
                  std::shared_ptr<const DirichletPoisson> poisson,
                  std::optional<AdjointRecursion> recursion_template);

  double misfit(const Vector& y0) const;

  std::shared_ptr<const SpdeOperators> ops_;
  std::shared_ptr<const DirichletPoisson> poisson_;
  Vector data_;
  PathPolicy policy_;
  std::optional<BrownianPath> path_;
  std::vector<BrownianPath> mc_paths_;
  std::optional<AdjointRecursion> recursion_;
  double data_norm_sq_ = 0;  // ||u^delta||^2_Mass, reused by the closed form
};

// Free-function wrappers; each builds a FixedPath context on the given path.
double eval_functional(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid,
                       const BrownianPath& path, const Vector& y0, const Vector& data,
                       double alpha);
Vector eval_gradient(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid,
                     const BrownianPath& path, const Vector& y0, const Vector& data, double alpha);
CgResult cg_minimize(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid,
                     const BrownianPath& path, const Vector& data,
                     const RegularizationConfig& config, const Vector& y0_init);
CertificateReport minimizer_certificate(const FemSpace& space, const Coefficients& coeffs,
                                        const TimeGrid& grid, const BrownianPath& path,
                                        const Vector& y0_hat, const Vector& u0_reference,
                                        const Vector& data, double alpha, double tol = 1e-12);

}  // namespace spreco
