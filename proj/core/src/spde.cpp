#include "spreco/spde.hpp"

#include "spreco/csv.hpp"

#include <cmath>
#include <stdexcept>

namespace spreco {

TimeGrid TimeGrid::uniform(double T, int steps) {
  if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
  if (steps < 1) throw std::invalid_argument("TimeGrid: need at least one step");
  return TimeGrid{T, steps};
}

BrownianPath BrownianPath::sample(const TimeGrid& grid, std::uint64_t seed) {
  BrownianPath p;
  p.grid_ = grid;
  p.seed_ = seed;
  p.dw_.resize(static_cast<std::size_t>(grid.steps));
  Rng rng(seed);
  const double sd = std::sqrt(grid.k());
  for (auto& dw : p.dw_) dw = sd * rng.normal();
  return p;
}

BrownianPath BrownianPath::zero(const TimeGrid& grid) {
  BrownianPath p;
  p.grid_ = grid;
  p.dw_.assign(static_cast<std::size_t>(grid.steps), 0.0);
  return p;
}

void Trajectory::dump_csv(const std::string& path) const {
  std::vector<std::string> cols = {"t"};
  const Index n = states.empty() ? 0 : states.front().size();
  for (Index i = 0; i < n; ++i) cols.push_back("u" + std::to_string(i));
  CsvWriter csv(path, cols);
  for (std::size_t m = 0; m < states.size(); ++m) {
    std::vector<double> row = {grid.time(static_cast<int>(m))};
    for (Index i = 0; i < n; ++i) row.push_back(states[m][i]);
    csv.row(row);
  }
}

SpdeOperators::SpdeOperators(const FemSpace& space, const Coefficients& coeffs,
                             const TimeGrid& grid)
    : space_(&space), coeffs_(coeffs), grid_(grid), has_b3_(coeffs.has_b3()) {
  const double k = grid_.k();
  if (!grid_.satisfies_h2_rule(space.mesh().h))
    std::fprintf(stderr, "[spreco] warning: time step %.3g exceeds h^2 = %.3g\n", k,
                 space.mesh().h * space.mesh().h);

  mass_ = space.restrict_interior(assemble_mass(space));
  stiff_ = space.restrict_interior(assemble_stiffness(space, coeffs.a));
  mg_ = space.restrict_interior(assemble_mg(space, coeffs.b1));
  md_ = space.restrict_interior(assemble_md(space, coeffs.b1));
  mass_b2_ = space.restrict_interior(assemble_weighted_mass(space, coeffs.b2));
  mass_b3_ = space.restrict_interior(assemble_weighted_mass(space, coeffs.b3));

  system_ = SparseMatrix::combine({{1.0, &mass_}, {k, &stiff_}}, true);
  drift_ = SparseMatrix::combine({{-k, &md_}, {k, &mass_b2_}, {1.0, &mass_}});
  // B as printed: (1 - b2) Mass + k Stiff + k MG. Symmetric only when b1 = 0.
  const bool b_symmetric = !coeffs.has_b1();
  backward_ = SparseMatrix::combine({{1.0, &mass_}, {-1.0, &mass_b2_}, {k, &stiff_}, {k, &mg_}},
                                    b_symmetric);

  system_factor_ = std::make_shared<Factorization>(system_);
  backward_factor_ = std::make_shared<Factorization>(backward_);
  mass_factor_ = std::make_shared<SpdSolver>(mass_);
}

double SpdeOperators::mass_norm(const Vector& u) const { return std::sqrt(mass_inner(u, u)); }

Vector SpdeOperators::load_f(double t) const {
  if (!coeffs_.has_f()) return Vector::Zero(interior_count());
  return space_->restrict_interior(load_vector_at(*space_, coeffs_.f, t));
}

Vector SpdeOperators::load_g(double t) const {
  if (!coeffs_.has_g()) return Vector::Zero(interior_count());
  return space_->restrict_interior(load_vector_at(*space_, coeffs_.g, t));
}

namespace {

constexpr double kBlowUpThreshold = 1e12;

Trajectory run_forward(const SpdeOperators& ops, const Vector& y0, const BrownianPath& path,
                       bool with_loads) {
  if (y0.size() != ops.interior_count())
    throw std::invalid_argument("forward_solve: initial state dimension mismatch");
  if (path.grid().steps != ops.grid().steps || path.grid().T != ops.grid().T)
    throw std::invalid_argument("forward_solve: path grid does not match operator grid");

  const TimeGrid& grid = ops.grid();
  const double k = grid.k();
  Trajectory traj;
  traj.grid = grid;
  traj.states.reserve(static_cast<std::size_t>(grid.steps) + 1);
  traj.states.push_back(y0);

  Vector u = y0;
  for (int m = 0; m < grid.steps; ++m) {
    const double dw = path.increment(m);
    Vector rhs = spmv(ops.drift(), u);
    if (ops.stochastic() && dw != 0.0) rhs += dw * spmv(ops.mass_b3(), u);
    if (with_loads && ops.has_loads()) {
      const double t = grid.time(m);
      rhs += k * ops.load_f(t);
      if (dw != 0.0) rhs += dw * ops.load_g(t);
    }
    u = ops.system_factor().solve(rhs);
    if (!u.allFinite() || u.lpNorm<Eigen::Infinity>() > kBlowUpThreshold)
      throw std::runtime_error("forward_solve: state blew up at step " + std::to_string(m + 1));
    traj.states.push_back(u);
  }
  return traj;
}

}  // namespace

Trajectory forward_solve(const SpdeOperators& ops, const Vector& y0_interior,
                         const BrownianPath& path) {
  return run_forward(ops, y0_interior, path, true);
}

Vector apply_forward_map(const SpdeOperators& ops, const Vector& y0_interior,
                         const BrownianPath& path) {
  return run_forward(ops, y0_interior, path, true).states.back();
}

Vector apply_linear_map(const SpdeOperators& ops, const Vector& y0_interior,
                        const BrownianPath& path) {
  return run_forward(ops, y0_interior, path, false).states.back();
}

Trajectory forward_solve(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid,
                         const Vector& y0_interior, const BrownianPath& path) {
  return forward_solve(SpdeOperators(space, coeffs, grid), y0_interior, path);
}

Vector apply_forward_map(const FemSpace& space, const Coefficients& coeffs, const TimeGrid& grid,
                         const Vector& y0_interior, const BrownianPath& path) {
  return apply_forward_map(SpdeOperators(space, coeffs, grid), y0_interior, path);
}

}  // namespace spreco
