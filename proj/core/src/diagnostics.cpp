#include "spreco/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace spreco {

CarlemanTerms carleman_lhs_rhs(const FemSpace& space, const TimeGrid& grid,
                               const std::vector<Trajectory>& w_paths, double lambda,
                               double eps_time) {
  if (lambda < 1.0) throw std::invalid_argument("carleman_lhs_rhs: lambda must be >= 1");
  if (w_paths.empty()) throw std::invalid_argument("carleman_lhs_rhs: no trajectories");
  if (eps_time < 0.0 || eps_time >= grid.T)
    throw std::invalid_argument("carleman_lhs_rhs: eps outside [0, T)");

  const double k = grid.k();
  const int m_eps = std::min(grid.steps - 1, static_cast<int>(std::ceil(eps_time / k - 1e-12)));
  const CarlemanWeight weight{lambda};

  const SparseMatrix mass0 = space.restrict_interior(assemble_mass(space));
  const SparseMatrix stiff0 = space.restrict_interior(assemble_stiffness(space));

  CarlemanTerms terms;
  terms.eps_used = grid.time(m_eps);
  const int M = grid.steps;

  double lhs_acc = 0, term_acc = 0, eps_acc = 0;
  for (const auto& traj : w_paths) {
    if (static_cast<int>(traj.states.size()) != M + 1)
      throw std::invalid_argument("carleman_lhs_rhs: trajectory length mismatch");
    double lhs = 0;
    for (int m = m_eps; m <= M; ++m) {
      const double t = grid.time(m);
      const double phi = weight.phi(t);
      const Vector v = phi * traj.states[static_cast<std::size_t>(m)];
      const double v2 = v.dot(spmv(mass0, v));
      const double grad2 = v.dot(spmv(stiff0, v));
      const double density = lambda * lambda * std::pow(t + 1.0, lambda - 2.0) * v2 +
                             lambda / (t + 1.0) * grad2;
      const double w_trap = (m == m_eps || m == M) ? 0.5 : 1.0;
      lhs += w_trap * k * density;
    }
    lhs_acc += lhs;

    const double phi_T = weight.phi(grid.T);
    const Vector vT = phi_T * traj.states.back();
    term_acc += lambda * std::pow(grid.T + 1.0, lambda - 1.0) * vT.dot(spmv(mass0, vT));
    const double phi_e = weight.phi(terms.eps_used);
    const Vector ve = phi_e * traj.states[static_cast<std::size_t>(m_eps)];
    eps_acc += ve.dot(spmv(mass0, ve));
  }
  const double n = static_cast<double>(w_paths.size());
  terms.lhs = lhs_acc / n;
  terms.rhs_terminal = term_acc / n;
  terms.rhs_epsilon = eps_acc / n;
  terms.rhs_source = 0.0;
  return terms;
}

RmseResult rmse(const Vector& u, const Vector& u_ref) {
  if (u.size() != u_ref.size()) throw std::invalid_argument("rmse: length mismatch");
  if (u.size() == 0) throw std::invalid_argument("rmse: empty vectors");
  const double n = static_cast<double>(u.size());
  const double diff_sq = (u - u_ref).squaredNorm();
  const double ref_sq = u_ref.squaredNorm();
  RmseResult out;
  out.rmse = std::sqrt(diff_sq / n);
  if (ref_sq > 0.0) out.rmse_rel = std::sqrt(diff_sq / ref_sq);
  return out;
}

double rmse_rel(const Vector& u, const Vector& u_ref) {
  const auto r = rmse(u, u_ref);
  if (!r.rmse_rel) throw std::invalid_argument("rmse_rel: reference norm is zero");
  return *r.rmse_rel;
}

namespace {
std::vector<double> ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}
}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("spearman: need two aligned samples");
  return pearson(ranks(x), ranks(y));
}

double correlation_lower_bound(double rho, std::size_t n, double z_quantile) {
  if (n < 4) return -1.0;
  const double clipped = std::clamp(rho, -0.999999, 0.999999);
  const double z = std::atanh(clipped) - z_quantile / std::sqrt(static_cast<double>(n - 3));
  return std::tanh(z);
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: bad sample");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

StabilityCurve stability_experiment(const StabilityProblem& prob) {
  const Mesh mesh = build_interval_mesh(prob.n_cells);
  const FemSpace space(mesh);
  const double T = prob.coeffs.T;
  const int steps =
      prob.steps > 0 ? prob.steps : static_cast<int>(std::ceil(T / (mesh.h * mesh.h) - 1e-12));
  const TimeGrid grid = TimeGrid::uniform(T, steps);
  auto ops = std::make_shared<const SpdeOperators>(space, prob.coeffs, grid);
  auto poisson = std::make_shared<const DirichletPoisson>(ops->mass(), ops->stiff());
  const AdjointRecursion recursion_base(ops, Vector(Vector::Zero(ops->interior_count())),
                                        AdjointRecursion::Storage::FinalOnly);
  const SparseMatrix energy =
      SparseMatrix::combine({{1.0, &ops->mass()}, {1.0, &ops->stiff()}}, true);  // H1 pairing

  const Vector u0_full = l2_project(space, prob.u0);
  const Vector u0 = space.restrict_interior(u0_full);
  const double domain = mesh.measure();

  // Admissibility guideline for the noise levels (existential lambda0).
  for (double d : prob.deltas) {
    if (d <= 0.0) continue;
    const double lam = std::log(std::pow(std::log(std::pow(d, -1.0 / 3.0)), 1.0 / std::log(T + 1.0)));
    if (!(lam >= prob.lambda0_hint))
      std::fprintf(stderr,
                   "[spreco] warning: delta %.3g outside the admissible range of the stability "
                   "estimate (lambda(delta) = %.3g < %.3g)\n",
                   d, lam, prob.lambda0_hint);
  }

  const double k = grid.k();
  const int m_eps =
      std::min(grid.steps - 1, static_cast<int>(std::ceil(prob.eps_time / k - 1e-12)));
  const double eps_used = grid.time(m_eps);

  StabilityCurve curve;
  curve.c_exponent = std::log(eps_used + 1.0) / std::log(T + 1.0);

  for (std::size_t di = 0; di < prob.deltas.size(); ++di) {
    const double delta = prob.deltas[di];
    double sum = 0, sum_sq = 0;
    for (int run = 0; run < prob.runs_per_delta; ++run) {
      const std::uint64_t run_seed =
          Rng::mix({prob.seed, 0x5741B17EULL, static_cast<std::uint64_t>(di),
                    static_cast<std::uint64_t>(run)});
      const BrownianPath data_path = BrownianPath::sample(grid, Rng::mix({run_seed, 1}));
      const Vector u_T = apply_forward_map(*ops, u0, data_path);

      Vector data = u_T;
      const double amp = delta * u_T.lpNorm<Eigen::Infinity>();
      if (amp > 0.0) {
        Rng noise(Rng::mix({run_seed, 2}));
        for (Index i = 0; i < data.size(); ++i) data[i] += amp * 2.0 * (noise.uniform() - 0.5);
      }

      RegularizationConfig cfg;
      cfg.alpha_rule = RegularizationConfig::AlphaRule::DeltaSquared;
      cfg.delta_abs = delta * data.lpNorm<Eigen::Infinity>() * std::sqrt(domain / 3.0);
      cfg.max_iters = prob.max_iters;
      const double level = prob.tau_d * delta * data.lpNorm<Eigen::Infinity>() * std::sqrt(domain);
      cfg.stop = delta > 0.0 ? StoppingRule::discrepancy(level)
                             : StoppingRule::gradient_norm(prob.grad_tol);

      const BrownianPath recon_path = BrownianPath::sample(grid, Rng::mix({run_seed, 3}));
      TikhonovProblem problem(ops, data, recon_path, poisson,
                              std::optional<AdjointRecursion>(recursion_base));
      const CgResult result = problem.minimize(cfg, Vector::Zero(u0.size()));

      // Evolutions of the true and reconstructed initial states share one
      // realization; their difference solves the homogeneous equation.
      const BrownianPath err_path = BrownianPath::sample(grid, Rng::mix({run_seed, 4}));
      const Trajectory w = forward_solve(*ops, Vector(u0 - result.y0), err_path);
      double norm_sq = 0;
      for (int m = m_eps; m <= grid.steps; ++m) {
        const double w_trap = (m == m_eps || m == grid.steps) ? 0.5 : 1.0;
        const Vector& wm = w.states[static_cast<std::size_t>(m)];
        norm_sq += w_trap * k * wm.dot(spmv(energy, wm));
      }
      const double err = std::sqrt(norm_sq);
      sum += err;
      sum_sq += err * err;
      curve.per_run_delta.push_back(delta);
      curve.per_run_error.push_back(err);
    }
    const double n = static_cast<double>(prob.runs_per_delta);
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    const double se = std::sqrt(var / n);
    curve.points.push_back({delta, mean, 1.96 * se});
  }

  curve.spearman_rho = spearman(curve.per_run_delta, curve.per_run_error);
  curve.spearman_lower95 = correlation_lower_bound(curve.spearman_rho, curve.per_run_error.size());

  std::vector<double> xs, ys;
  for (const auto& p : curve.points) {
    if (p.delta <= 0.0 || p.mean_error <= 0.0) continue;
    xs.push_back(-std::pow(3.0, -curve.c_exponent) *
                 std::pow(std::log(1.0 / p.delta), curve.c_exponent));
    ys.push_back(std::log(p.mean_error));
  }
  if (xs.size() >= 2) curve.log_error_fit = linear_fit(xs, ys);
  return curve;
}

}  // namespace spreco
