#include "spreco/tikhonov.hpp"

#include "spreco/csv.hpp"

#include <cmath>
#include <stdexcept>

namespace spreco {

void CgResult::dump_csv(const std::string& path) const {
  CsvWriter csv(path, {"k", "J", "grad_norm", "beta", "gamma", "discrepancy"});
  for (const auto& it : log)
    csv.row(std::vector<double>{double(it.k), it.j_value, it.grad_norm, it.beta, it.gamma,
                                it.discrepancy});
}

TikhonovProblem::TikhonovProblem(std::shared_ptr<const SpdeOperators> ops, Vector data_interior,
                                 BrownianPath path, std::shared_ptr<const DirichletPoisson> poisson,
                                 std::optional<AdjointRecursion> recursion_template)
    : TikhonovProblem(std::move(ops), std::move(data_interior), PathPolicy::FixedPath,
                      std::move(path), {}, std::move(poisson), std::move(recursion_template)) {}

TikhonovProblem TikhonovProblem::expectation(std::shared_ptr<const SpdeOperators> ops,
                                             Vector data_interior,
                                             std::shared_ptr<const DirichletPoisson> poisson,
                                             std::optional<AdjointRecursion> recursion_template) {
  return TikhonovProblem(std::move(ops), std::move(data_interior), PathPolicy::Expectation, {},
                         {}, std::move(poisson), std::move(recursion_template));
}

TikhonovProblem TikhonovProblem::monte_carlo(std::shared_ptr<const SpdeOperators> ops,
                                             Vector data_interior,
                                             std::vector<BrownianPath> paths,
                                             std::shared_ptr<const DirichletPoisson> poisson,
                                             std::optional<AdjointRecursion> recursion_template) {
  return TikhonovProblem(std::move(ops), std::move(data_interior), PathPolicy::MonteCarlo, {},
                         std::move(paths), std::move(poisson), std::move(recursion_template));
}

TikhonovProblem::TikhonovProblem(std::shared_ptr<const SpdeOperators> ops, Vector data_interior,
                                 PathPolicy policy, std::optional<BrownianPath> path,
                                 std::vector<BrownianPath> mc_paths,
                                 std::shared_ptr<const DirichletPoisson> poisson,
                                 std::optional<AdjointRecursion> recursion_template)
    : ops_(std::move(ops)),
      poisson_(std::move(poisson)),
      data_(std::move(data_interior)),
      policy_(policy),
      path_(std::move(path)),
      mc_paths_(std::move(mc_paths)) {
  if (data_.size() != ops_->interior_count())
    throw std::invalid_argument("TikhonovProblem: data dimension mismatch");
  const Coefficients& c = ops_->coeffs();
  if (policy_ == PathPolicy::Expectation &&
      (c.has_b1() || c.has_b2() || c.has_f() || c.has_g()))
    throw std::invalid_argument(
        "TikhonovProblem: the closed-form expectation realization requires b1 = b2 = 0 and "
        "f = g = 0; use the MonteCarlo policy instead");
  if (policy_ == PathPolicy::FixedPath && !path_)
    throw std::invalid_argument("TikhonovProblem: FixedPath policy needs a path");
  if (policy_ == PathPolicy::MonteCarlo && mc_paths_.empty())
    throw std::invalid_argument("TikhonovProblem: MonteCarlo policy needs at least one path");

  if (!poisson_) {
    if (ops_->coeffs().a) {
      // regularizer uses the plain Dirichlet Laplacian, not the a-weighted one
      poisson_ = std::make_shared<DirichletPoisson>(ops_->space());
    } else {
      poisson_ = std::make_shared<DirichletPoisson>(ops_->mass(), ops_->stiff());
    }
  }
  if (recursion_template) {
    if (recursion_template->steps() != ops_->grid().steps ||
        recursion_template->a_final().rows() != ops_->interior_count())
      throw std::invalid_argument("TikhonovProblem: recursion template does not match operators");
    recursion_ = std::move(recursion_template);
    recursion_->set_terminal_offset(-data_);
  } else {
    recursion_.emplace(ops_, Vector(-data_), AdjointRecursion::Storage::FinalOnly);
  }
  data_norm_sq_ = ops_->mass_inner(data_, data_);
}

double TikhonovProblem::misfit(const Vector& y0) const {
  switch (policy_) {
    case PathPolicy::Expectation: {
      const Vector a0y = recursion_->a_final() * y0;
      const double q =
          ops_->mass_inner(y0, a0y) + 2.0 * ops_->mass_inner(y0, recursion_->v_final()) +
          data_norm_sq_;
      return std::max(q, 0.0);
    }
    case PathPolicy::FixedPath: {
      const Vector r = apply_forward_map(*ops_, y0, *path_) - data_;
      return ops_->mass_inner(r, r);
    }
    case PathPolicy::MonteCarlo: {
      double acc = 0.0;
      for (const auto& p : mc_paths_) {
        const Vector r = apply_forward_map(*ops_, y0, p) - data_;
        acc += ops_->mass_inner(r, r);
      }
      return acc / static_cast<double>(mc_paths_.size());
    }
  }
  return 0.0;
}

double TikhonovProblem::functional(const Vector& y0, double alpha) const {
  return misfit(y0) + alpha * poisson_->h2_norm_sq(y0);
}

Vector TikhonovProblem::gradient(const Vector& y0, double alpha) const {
  const Vector adjoint_zero = recursion_->state_at_zero(y0);
  Vector g = poisson_->inv_laplacian(poisson_->inv_laplacian(adjoint_zero));
  if (alpha != 0.0) g += alpha * y0;
  return g;
}

double TikhonovProblem::residual_norm(const Vector& y0) const {
  return std::sqrt(std::max(misfit(y0), 0.0));
}

CgResult TikhonovProblem::minimize(const RegularizationConfig& cfg, const Vector& y0_init) const {
  const double alpha = cfg.resolved_alpha();
  Vector y = y0_init;
  if (y.size() != ops_->interior_count())
    throw std::invalid_argument("cg_minimize: initial guess dimension mismatch");

  // Pathwise residual state, updated incrementally through the affinity of
  // the forward map: A(y + beta d) = A(y) + beta B(d).
  std::vector<Vector> residuals;
  if (policy_ == PathPolicy::FixedPath)
    residuals.push_back(apply_forward_map(*ops_, y, *path_) - data_);
  else if (policy_ == PathPolicy::MonteCarlo)
    for (const auto& p : mc_paths_) residuals.push_back(apply_forward_map(*ops_, y, p) - data_);

  auto misfit_now = [&]() -> double {
    if (policy_ == PathPolicy::Expectation) {
      const Vector a0y = recursion_->a_final() * y;
      return std::max(ops_->mass_inner(y, a0y) +
                          2.0 * ops_->mass_inner(y, recursion_->v_final()) + data_norm_sq_,
                      0.0);
    }
    double acc = 0.0;
    for (const auto& r : residuals) acc += ops_->mass_inner(r, r);
    return acc / static_cast<double>(residuals.size());
  };

  CgResult result;
  Vector d, grad;
  double gn0 = 0.0, gn_prev = 0.0;
  bool stopped = false;

  int k = 0;
  for (; k < cfg.max_iters; ++k) {
    grad = gradient(y, alpha);
    const double gn = std::sqrt(std::max(ops_->mass_inner(grad, grad), 0.0));
    if (k == 0) gn0 = gn;
    const double mis = misfit_now();
    const double disc = std::sqrt(mis);
    const double jv = mis + alpha * poisson_->h2_norm_sq(y);

    if (cfg.stop.kind == StoppingRule::Kind::Discrepancy && disc <= cfg.stop.value) {
      result.converged = true;
      result.stop_reason = "discrepancy";
      stopped = true;
      break;
    }
    if (cfg.stop.kind == StoppingRule::Kind::GradientNorm && gn <= cfg.stop.value * gn0) {
      result.converged = true;
      result.stop_reason = "gradient_norm";
      stopped = true;
      break;
    }
    if (gn == 0.0) {
      result.converged = true;
      result.stop_reason = "gradient_zero";
      stopped = true;
      break;
    }

    double gamma = 0.0;
    if (k == 0) {
      d = -grad;
    } else {
      gamma = (gn * gn) / (gn_prev * gn_prev);
      d = -grad + gamma * d;
    }
    gn_prev = gn;

    std::vector<Vector> sensitivities;  // B d per path
    if (policy_ == PathPolicy::FixedPath) {
      sensitivities.push_back(apply_linear_map(*ops_, d, *path_));
    } else if (policy_ == PathPolicy::MonteCarlo) {
      for (const auto& p : mc_paths_) sensitivities.push_back(apply_linear_map(*ops_, d, p));
    }

    double pairing, curvature;
    if (policy_ == PathPolicy::Expectation) {
      // <Y^0(y), d>_Mass = E <A y - u, B d>_L2 and <d, A_{Y^0} d>_Mass = E |B d|^2
      pairing = ops_->mass_inner(recursion_->state_at_zero(y), d);
      curvature = ops_->mass_inner(d, recursion_->a_final() * d);
    } else {
      pairing = 0.0;
      curvature = 0.0;
      for (std::size_t p = 0; p < residuals.size(); ++p) {
        pairing += ops_->mass_inner(residuals[p], sensitivities[p]);
        curvature += ops_->mass_inner(sensitivities[p], sensitivities[p]);
      }
      pairing /= static_cast<double>(residuals.size());
      curvature /= static_cast<double>(residuals.size());
    }
    const double num = pairing + alpha * poisson_->h2_inner(y, d);
    const double den = curvature + alpha * poisson_->h2_norm_sq(d);
    if (!(den > 0.0) || !std::isfinite(den))
      throw std::runtime_error("cg_minimize: step-size denominator is not positive");
    const double beta = -num / den;
    if (!std::isfinite(beta)) throw std::runtime_error("cg_minimize: non-finite step size");

    result.log.push_back({k, jv, gn, beta, gamma, disc});

    y += beta * d;
    for (std::size_t p = 0; p < residuals.size(); ++p) residuals[p] += beta * sensitivities[p];
  }

  if (!stopped) {
    result.converged = false;
    result.stop_reason = "max_iters";
  }
  result.y0 = y;
  const double mis = misfit_now();
  result.final_discrepancy = std::sqrt(mis);
  result.final_j = mis + alpha * poisson_->h2_norm_sq(y);
  return result;
}

CertificateReport TikhonovProblem::certificate(const Vector& candidate, const Vector& reference,
                                               double alpha, double tol) const {
  CertificateReport rep;
  rep.j_candidate = functional(candidate, alpha);
  rep.j_reference = functional(reference, alpha);
  rep.holds = rep.j_candidate <= rep.j_reference + tol;
  return rep;
}

namespace {
TikhonovProblem fixed_path_problem(const FemSpace& space, const Coefficients& coeffs,
                                   const TimeGrid& grid, const BrownianPath& path,
                                   const Vector& data) {
  auto ops = std::make_shared<const SpdeOperators>(space, coeffs, grid);
  return TikhonovProblem(std::move(ops), data, path);
}
}  // namespace

double eval_functional(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid,
                       const BrownianPath& path, const Vector& y0, const Vector& data,
                       double alpha) {
  return fixed_path_problem(space, coeffs, grid, path, data).functional(y0, alpha);
}

Vector eval_gradient(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid,
                     const BrownianPath& path, const Vector& y0, const Vector& data,
                     double alpha) {
  return fixed_path_problem(space, coeffs, grid, path, data).gradient(y0, alpha);
}

CgResult cg_minimize(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid,
                     const BrownianPath& path, const Vector& data,
                     const RegularizationConfig& config, const Vector& y0_init) {
  return fixed_path_problem(space, coeffs, grid, path, data).minimize(config, y0_init);
}

CertificateReport minimizer_certificate(const FemSpace& space, const Coefficients& coeffs,
                                        const TimeGrid& grid, const BrownianPath& path,
                                        const Vector& y0_hat, const Vector& u0_reference,
                                        const Vector& data, double alpha, double tol) {
  return fixed_path_problem(space, coeffs, grid, path, data)
      .certificate(y0_hat, u0_reference, alpha, tol);
}

}  // namespace spreco
