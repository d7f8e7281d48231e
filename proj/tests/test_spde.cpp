#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <spreco/spde.hpp>

#include <cmath>
#include <filesystem>

using namespace spreco;

namespace {
constexpr double kPi = 3.14159265358979323846;

Coefficients example_51(double T) {
  Coefficients c = Coefficients::heat(T);
  c.b3 = [](const Point&) { return 0.1; };
  return c;
}

Vector project_interior(const FemSpace& space, const ScalarField& f) {
  return space.restrict_interior(l2_project(space, f));
}
}  // namespace

TEST_CASE("time grid basics and h^2 guideline") {
  const TimeGrid g = TimeGrid::uniform(1.0, 800);
  CHECK(g.k() == doctest::Approx(1.0 / 800).epsilon(1e-15));
  CHECK(std::abs(g.k() * g.steps - g.T) <= 1e-14);
  CHECK(g.satisfies_h2_rule(0.05));        // k = 1/800 <= 1/400
  CHECK(!TimeGrid::uniform(1.0, 100).satisfies_h2_rule(0.05));
  CHECK_THROWS_AS(TimeGrid::uniform(-1.0, 10), std::invalid_argument);
}

TEST_CASE("brownian path: determinism, moments, scaling") {
  const TimeGrid g = TimeGrid::uniform(100.0, 100000);  // k = 0.001
  const BrownianPath a = BrownianPath::sample(g, 99);
  const BrownianPath b = BrownianPath::sample(g, 99);
  CHECK(a.increments() == b.increments());

  double mean = 0, var = 0;
  for (double dw : a.increments()) mean += dw;
  mean /= a.increments().size();
  for (double dw : a.increments()) var += (dw - mean) * (dw - mean);
  var /= a.increments().size();
  CHECK(std::abs(var - 0.001) <= 0.05 * 0.001);
  CHECK(std::abs(mean) <= 5.0 * std::sqrt(0.001 / 100000));

  // increments for 4k have twice the standard deviation, statistically
  const TimeGrid g4 = TimeGrid::uniform(400.0, 100000);
  const BrownianPath c = BrownianPath::sample(g4, 7);
  double var4 = 0;
  for (double dw : c.increments()) var4 += dw * dw;
  var4 /= c.increments().size();
  CHECK(std::sqrt(var4 / var) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("forward solve: zero initial data stays zero") {
  const FemSpace space(build_interval_mesh(10));
  const TimeGrid grid = TimeGrid::uniform(0.5, 64);
  const SpdeOperators ops(space, example_51(0.5), grid);
  const BrownianPath path = BrownianPath::sample(grid, 4);
  const Trajectory traj = forward_solve(ops, Vector::Zero(ops.interior_count()), path);
  REQUIRE(traj.states.size() == 65);
  for (const auto& s : traj.states) CHECK(s.norm() == 0.0);
}

TEST_CASE("forward solve: deterministic heat kernel oracle") {
  const FemSpace space(build_interval_mesh(20));
  const double T = 0.5;
  const TimeGrid grid = TimeGrid::uniform(T, 400);  // k = 1/800
  const SpdeOperators ops(space, Coefficients::heat(T), grid);
  const Vector y0 = project_interior(space, [](const Point& p) { return std::sin(kPi * p.x); });
  const Trajectory traj = forward_solve(ops, y0, BrownianPath::zero(grid));
  const double decay = std::exp(-kPi * kPi * T);
  for (Index i = 0; i < traj.terminal().size(); ++i) {
    const double x =
        space.mesh().vertices[static_cast<std::size_t>(space.interior_dofs()[static_cast<std::size_t>(i)])].x;
    CHECK(traj.terminal()[i] == doctest::Approx(decay * std::sin(kPi * x)).epsilon(0.04));
  }
}

TEST_CASE("forward solve: noise dissipates in sample mean (parabola benchmark)") {
  const FemSpace space(build_interval_mesh(20));
  const TimeGrid grid = TimeGrid::uniform(1.0, 800);
  const SpdeOperators ops(space, example_51(1.0), grid);
  const Vector y0 = project_interior(space, [](const Point& p) { return 4 * p.x * (1 - p.x); });
  const double initial_norm = ops.mass_norm(y0);
  double mean_terminal = 0;
  for (int run = 0; run < 100; ++run) {
    const Trajectory traj = forward_solve(ops, y0, BrownianPath::sample(grid, 1000 + run));
    CHECK(traj.terminal().allFinite());
    mean_terminal += ops.mass_norm(traj.terminal());
  }
  mean_terminal /= 100;
  CHECK(mean_terminal < initial_norm);
}

TEST_CASE("forward map affinity and linearity on a fixed path") {
  const FemSpace space(build_interval_mesh(12));
  const double T = 0.25;
  const TimeGrid grid = TimeGrid::uniform(T, 120);
  Coefficients c = example_51(T);
  c.f = [](double t, const Point& p) { return std::sin(3 * p.x) + t; };
  c.g = [](double, const Point& p) { return p.x * (1 - p.x); };
  const SpdeOperators ops(space, c, grid);
  const BrownianPath path = BrownianPath::sample(grid, 21);

  const Index n = ops.interior_count();
  Vector y0(n), d(n);
  for (Index i = 0; i < n; ++i) {
    y0[i] = std::sin(0.3 * static_cast<double>(i) + 0.2);
    d[i] = std::cos(0.7 * static_cast<double>(i));
  }
  const Vector a_shift = apply_forward_map(ops, y0 + d, path) - apply_forward_map(ops, y0, path);
  const Vector linear = apply_linear_map(ops, d, path);
  CHECK((a_shift - linear).lpNorm<Eigen::Infinity>() <=
        1e-10 * std::max(1.0, linear.lpNorm<Eigen::Infinity>()));

  CHECK(apply_linear_map(ops, Vector::Zero(n), path).norm() == 0.0);

  // with f = g = 0 the forward map is its own linear part
  const SpdeOperators hom(space, example_51(T), grid);
  const Vector full = apply_forward_map(hom, y0, path);
  const Vector lin = apply_linear_map(hom, y0, path);
  CHECK((full - lin).lpNorm<Eigen::Infinity>() == 0.0);

  const Vector combo = apply_linear_map(hom, 2.0 * y0 - 0.5 * d, path);
  const Vector parts = 2.0 * apply_linear_map(hom, y0, path) - 0.5 * apply_linear_map(hom, d, path);
  CHECK((combo - parts).lpNorm<Eigen::Infinity>() <=
        1e-10 * std::max(1.0, parts.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("deterministic energy dissipation") {
  const FemSpace space(build_interval_mesh(16));
  const TimeGrid grid = TimeGrid::uniform(0.2, 64);
  const SpdeOperators ops(space, Coefficients::heat(0.2), grid);
  Vector y0(ops.interior_count());
  for (Index i = 0; i < y0.size(); ++i) y0[i] = ((i % 3) == 0 ? 1.0 : -0.5);
  const Trajectory traj = forward_solve(ops, y0, BrownianPath::zero(grid));
  for (std::size_t m = 0; m + 1 < traj.states.size(); ++m)
    CHECK(ops.mass_norm(traj.states[m + 1]) <= ops.mass_norm(traj.states[m]) + 1e-14);
}

TEST_CASE("trajectories are deterministic given seed and config") {
  const FemSpace space(build_interval_mesh(10));
  const TimeGrid grid = TimeGrid::uniform(0.3, 96);
  const SpdeOperators ops(space, example_51(0.3), grid);
  Vector y0 = Vector::Ones(ops.interior_count());
  const Trajectory a = forward_solve(ops, y0, BrownianPath::sample(grid, 5));
  const Trajectory b = forward_solve(ops, y0, BrownianPath::sample(grid, 5));
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t m = 0; m < a.states.size(); ++m) CHECK(a.states[m] == b.states[m]);
}

TEST_CASE("blow-up raises an error naming the step") {
  const FemSpace space(build_interval_mesh(8));
  const TimeGrid grid = TimeGrid::uniform(1.0, 4);
  Coefficients c = Coefficients::heat(1.0);
  c.b3 = [](const Point&) { return 1e10; };  // explosive multiplicative noise
  const SpdeOperators ops(space, c, grid);
  CHECK_THROWS_WITH_AS(forward_solve(ops, Vector::Ones(ops.interior_count()),
                                     BrownianPath::sample(grid, 8)),
                       doctest::Contains("blew up"), std::runtime_error);
}

TEST_CASE("trajectory CSV dump") {
  const FemSpace space(build_interval_mesh(4));
  const TimeGrid grid = TimeGrid::uniform(0.1, 4);
  const SpdeOperators ops(space, Coefficients::heat(0.1), grid);
  const Trajectory traj =
      forward_solve(ops, Vector::Ones(ops.interior_count()), BrownianPath::zero(grid));
  const std::string path = "traj_dump_test.csv";
  traj.dump_csv(path);
  CHECK(std::filesystem::exists(path));
  CHECK(std::filesystem::file_size(path) > 0);
  std::filesystem::remove(path);
}

TEST_CASE("mismatched path grid is rejected") {
  const FemSpace space(build_interval_mesh(8));
  const TimeGrid grid = TimeGrid::uniform(0.5, 32);
  const SpdeOperators ops(space, Coefficients::heat(0.5), grid);
  const BrownianPath wrong = BrownianPath::sample(TimeGrid::uniform(0.5, 16), 1);
  CHECK_THROWS_AS(forward_solve(ops, Vector::Zero(ops.interior_count()), wrong),
                  std::invalid_argument);
}
