#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <spreco/adjoint.hpp>
#include <spreco/rng.hpp>

#include <cmath>

using namespace spreco;

namespace {

Coefficients with_b3(double T, double b3) {
  Coefficients c = Coefficients::heat(T);
  if (b3 != 0.0) c.b3 = [b3](const Point&) { return b3; };
  return c;
}

Vector random_vec(Index n, Rng& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

DenseMatrix dense(const SparseMatrix& m) { return DenseMatrix(m.raw()); }

// Backward substitution through the time-discrete backward equation with the
// Brownian increment replaced by the two-point law +-sqrt(k). The law matches
// the first two moments, which is all the conditional expectations use, so
// the enumeration reproduces {A_{Y^m}, V^m} exactly.
struct TwoPointOracle {
  const SpdeOperators& ops;
  Vector offset;

  struct Result {
    Vector y0, z0;
    std::vector<Vector> u1, y1, z1;  // per d1-branch (+, -)
    std::vector<Vector> u2;          // per (d1, d2) branch: index 2*i + j
  };

  Result run(const Vector& u0) const {
    const double k = ops.grid().k();
    const double s = std::sqrt(k);
    const auto& S = ops.system_factor();
    const auto& B = ops.backward_factor();
    const auto& M = ops.mass();
    const auto& A = ops.drift();
    const auto& M3 = ops.mass_b3();

    auto step_u = [&](const Vector& u, double dw) {
      return S.solve(Vector(spmv(A, u) + dw * spmv(M3, u)));
    };

    Result r;
    const double sign[2] = {+s, -s};
    r.u1.resize(2);
    r.u2.resize(4);
    r.y1.resize(2);
    r.z1.resize(2);
    for (int i = 0; i < 2; ++i) {
      r.u1[i] = step_u(u0, sign[i]);
      for (int j = 0; j < 2; ++j) r.u2[2 * i + j] = step_u(r.u1[i], sign[j]);
    }
    for (int i = 0; i < 2; ++i) {
      const Vector y2p = r.u2[2 * i + 0] + offset;
      const Vector y2m = r.u2[2 * i + 1] + offset;
      // Mass Z = (1/k) E[dW Mass Y^{m+1} | F]
      const Vector mz = (s * spmv(M, y2p) + (-s) * spmv(M, y2m)) / (2.0 * k);
      r.z1[i] = ops.mass_factor().solve(mz);
      // B Y^m = E[Mass Y^{m+1} | F] + k Mass_b3 Z^m
      const Vector rhs = 0.5 * (spmv(M, y2p) + spmv(M, y2m)) + k * spmv(M3, r.z1[i]);
      r.y1[i] = B.solve(rhs);
    }
    const Vector mz0 = (s * spmv(M, r.y1[0]) + (-s) * spmv(M, r.y1[1])) / (2.0 * k);
    r.z0 = ops.mass_factor().solve(mz0);
    const Vector rhs0 = 0.5 * (spmv(M, r.y1[0]) + spmv(M, r.y1[1])) + k * spmv(M3, r.z0);
    r.y0 = B.solve(rhs0);
    return r;
  }
};

}  // namespace

TEST_CASE("terminal conditions are exact") {
  const FemSpace space(build_interval_mesh(8));
  const TimeGrid grid = TimeGrid::uniform(0.5, 16);
  auto ops = std::make_shared<const SpdeOperators>(space, with_b3(0.5, 0.1), grid);
  Rng rng(1);
  const Vector data = random_vec(ops->interior_count(), rng);
  const AdjointRecursion rec(ops, Vector(-data));

  CHECK(rec.a_at(grid.steps).isApprox(DenseMatrix::Identity(7, 7)));
  CHECK(rec.v_at(grid.steps) == Vector(-data));

  // eval_Y at the terminal step returns the data residual
  const Vector uM = random_vec(ops->interior_count(), rng);
  CHECK((rec.eval_Y(grid.steps, uM) - (uM - data)).lpNorm<Eigen::Infinity>() <= 1e-15);
  CHECK(rec.eval_Y(grid.steps, Vector::Zero(7)) == Vector(-data));
}

TEST_CASE("single-step composite matches hand-chained dense computation") {
  const FemSpace space(build_interval_mesh(4));  // 3 interior dofs
  const TimeGrid grid = TimeGrid::uniform(0.1, 1);
  const double k = grid.k();

  for (double b3 : {0.0, 0.4}) {
    auto ops = std::make_shared<const SpdeOperators>(space, with_b3(0.1, b3), grid);
    const AdjointRecursion rec(ops, Vector(Vector::Zero(3)));

    const DenseMatrix Sinv = dense(ops->system()).inverse();
    const DenseMatrix Binv = dense(ops->backward()).inverse();
    DenseMatrix expected = Binv * dense(ops->mass()) * Sinv * dense(ops->drift());
    if (b3 != 0.0)
      expected += k * Binv * dense(ops->mass_b3()) * Sinv * dense(ops->mass_b3());
    CHECK((rec.a_final() - expected).cwiseAbs().maxCoeff() <= 1e-12);

    // same composite through the factor-chain evaluator
    const Factorization fs(ops->system());
    const Factorization fb(ops->backward());
    const DenseMatrix via_chain = dense_from_products(
        {LinearFactor::inverse(fb), LinearFactor::sparse(ops->mass()), LinearFactor::inverse(fs),
         LinearFactor::sparse(ops->drift())});
    if (b3 == 0.0) CHECK((rec.a_final() - via_chain).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("b3 = 0 drops the noise term of the recursion") {
  const FemSpace space(build_interval_mesh(6));
  const TimeGrid grid = TimeGrid::uniform(0.3, 5);
  auto ops0 = std::make_shared<const SpdeOperators>(space, with_b3(0.3, 0.0), grid);
  const AdjointRecursion rec(ops0, Vector(Vector::Zero(5)));

  // A_{Y^m} equals the pure product (B^{-1} Mass) A_{Y^{m+1}} (S^{-1} A)
  DenseMatrix expected = DenseMatrix::Identity(5, 5);
  const DenseMatrix Sinv = dense(ops0->system()).inverse();
  const DenseMatrix Binv = dense(ops0->backward()).inverse();
  for (int m = 0; m < grid.steps; ++m)
    expected = Binv * dense(ops0->mass()) * expected * Sinv * dense(ops0->drift());
  CHECK((rec.a_final() - expected).cwiseAbs().maxCoeff() <= 1e-11);
}

TEST_CASE("zero terminal offset gives identically zero V") {
  const FemSpace space(build_interval_mesh(6));
  const TimeGrid grid = TimeGrid::uniform(0.4, 8);
  auto ops = std::make_shared<const SpdeOperators>(space, with_b3(0.4, 0.1), grid);
  const AdjointRecursion rec(ops, Vector(Vector::Zero(5)));
  for (int m = 0; m <= grid.steps; ++m) CHECK(rec.v_at(m).norm() == 0.0);
}

TEST_CASE("eval_Z: trivial cases and terminal-step expectation identity") {
  const FemSpace space(build_interval_mesh(4));
  const TimeGrid grid = TimeGrid::uniform(0.2, 2);
  Rng rng(9);

  auto ops0 = std::make_shared<const SpdeOperators>(space, with_b3(0.2, 0.0), grid);
  const AdjointRecursion rec0(ops0, Vector(Vector::Zero(3)));
  CHECK(rec0.eval_Z(0, random_vec(3, rng)).norm() == 0.0);

  auto ops = std::make_shared<const SpdeOperators>(space, with_b3(0.2, 0.3), grid);
  Vector data = random_vec(3, rng);
  const AdjointRecursion rec(ops, Vector(-data));
  CHECK(rec.eval_Z(0, Vector::Zero(3)).norm() == 0.0);
  CHECK_THROWS_AS(rec.eval_Z(grid.steps, Vector::Zero(3)), std::out_of_range);

  // m = M-1: Z = (1/k) E[dW Y^M | F_{M-1}] expanded over the two-point law
  const Vector u = random_vec(3, rng);
  const double k = grid.k();
  const double s = std::sqrt(k);
  const auto step_u = [&](const Vector& v, double dw) {
    return ops->system_factor().solve(Vector(spmv(ops->drift(), v) + dw * spmv(ops->mass_b3(), v)));
  };
  const Vector yp = step_u(u, s) - data;
  const Vector ym = step_u(u, -s) - data;
  const Vector expected = ops->mass_factor().solve(
      Vector((s * spmv(ops->mass(), yp) - s * spmv(ops->mass(), ym)) / (2.0 * k)));
  CHECK((rec.eval_Z(grid.steps - 1, u) - expected).lpNorm<Eigen::Infinity>() <= 1e-11);
}

TEST_CASE("M=2 recursion matches the symbolic two-point enumeration") {
  const FemSpace space(build_interval_mesh(4));  // L = 3
  const TimeGrid grid = TimeGrid::uniform(0.08, 2);
  auto ops = std::make_shared<const SpdeOperators>(space, with_b3(0.08, 0.25), grid);
  Rng rng(33);
  const Vector data = random_vec(3, rng);
  const Vector u0 = random_vec(3, rng);

  const AdjointRecursion rec(ops, Vector(-data));
  const TwoPointOracle oracle{*ops, Vector(-data)};
  const auto truth = oracle.run(u0);

  CHECK((rec.eval_Y(0, u0) - truth.y0).lpNorm<Eigen::Infinity>() <= 1e-10);
  CHECK((rec.eval_Z(0, u0) - truth.z0).lpNorm<Eigen::Infinity>() <= 1e-10);
  for (int branch = 0; branch < 2; ++branch) {
    CHECK((rec.eval_Y(1, truth.u1[branch]) - truth.y1[branch]).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK((rec.eval_Z(1, truth.u1[branch]) - truth.z1[branch]).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("recursion is sample-independent and rebuild-identical") {
  const FemSpace space(build_interval_mesh(6));
  const TimeGrid grid = TimeGrid::uniform(0.25, 10);
  auto ops = std::make_shared<const SpdeOperators>(space, with_b3(0.25, 0.1), grid);
  Rng rng(12);
  const Vector data = random_vec(5, rng);
  const AdjointRecursion a(ops, Vector(-data));
  const AdjointRecursion b(ops, Vector(-data));
  for (int m = 0; m <= grid.steps; ++m) {
    CHECK(a.a_at(m) == b.a_at(m));
    CHECK(a.v_at(m) == b.v_at(m));
  }
}

TEST_CASE("b3 = 0 collapses to the classical discrete adjoint") {
  const FemSpace space(build_interval_mesh(7));
  const TimeGrid grid = TimeGrid::uniform(0.2, 6);
  auto ops = std::make_shared<const SpdeOperators>(space, Coefficients::heat(0.2), grid);
  const Index n = ops->interior_count();

  // dense forward operator column by column on the zero path
  DenseMatrix fwd(n, n);
  const BrownianPath zero = BrownianPath::zero(grid);
  for (Index j = 0; j < n; ++j)
    fwd.col(j) = apply_linear_map(*ops, Vector(Vector::Unit(n, j)), zero);

  const DenseMatrix mass = dense(ops->mass());
  const DenseMatrix classical = mass.inverse() * fwd.transpose() * mass;

  // A_{Y^0} composes the classical adjoint with the forward map (it carries
  // the whole normal operator of the least-squares problem); the bare
  // adjoint is realized by the V recursion, checked in the duality cases.
  const AdjointRecursion rec(ops, Vector(Vector::Zero(n)));
  CHECK((rec.a_final() - classical * fwd).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("discrete duality of the homogeneous maps (deterministic case)") {
  const FemSpace space(build_interval_mesh(9));
  const TimeGrid grid = TimeGrid::uniform(0.15, 12);
  auto ops = std::make_shared<const SpdeOperators>(space, Coefficients::heat(0.15), grid);
  const Index n = ops->interior_count();
  Rng rng(77);
  const BrownianPath zero = BrownianPath::zero(grid);

  for (int trial = 0; trial < 5; ++trial) {
    const Vector d = random_vec(n, rng);
    const Vector r = random_vec(n, rng);
    // B* r realized by the V recursion with terminal offset r (A part unused)
    const AdjointRecursion rec(ops, r);
    const Vector bstar_r = rec.v_at(0);
    const double lhs = ops->mass_inner(apply_linear_map(*ops, d, zero), r);
    const double rhs = ops->mass_inner(d, bstar_r);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
  }
}

TEST_CASE("stochastic duality holds in expectation (Monte Carlo)") {
  const FemSpace space(build_interval_mesh(6));  // 5 interior dofs
  const double T = 0.25;
  const TimeGrid grid = TimeGrid::uniform(T, 32);
  auto ops = std::make_shared<const SpdeOperators>(space, with_b3(T, 0.1), grid);
  const Index n = ops->interior_count();
  Rng rng(55);
  const Vector d = random_vec(n, rng);
  const Vector r = random_vec(n, rng);

  const AdjointRecursion rec(ops, r);
  const double expected = ops->mass_inner(d, rec.v_at(0));

  const int paths = 10000;
  double sum = 0, sum_sq = 0;
  for (int p = 0; p < paths; ++p) {
    const double v =
        ops->mass_inner(apply_linear_map(*ops, d, BrownianPath::sample(grid, 9000 + p)), r);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / paths;
  const double se = std::sqrt(std::max(0.0, sum_sq / paths - mean * mean) / paths);
  CHECK(std::abs(mean - expected) <= 3.0 * se + 1e-12);
}

TEST_CASE("adjoint state at zero: zero data and zero state give zero") {
  const FemSpace space(build_interval_mesh(5));
  const TimeGrid grid = TimeGrid::uniform(0.1, 4);
  auto ops = std::make_shared<const SpdeOperators>(space, with_b3(0.1, 0.1), grid);
  const AdjointRecursion rec(ops, Vector(Vector::Zero(4)));
  CHECK(rec.state_at_zero(Vector::Zero(4)).norm() == 0.0);
}

TEST_CASE("FinalOnly storage guards intermediate access") {
  const FemSpace space(build_interval_mesh(5));
  const TimeGrid grid = TimeGrid::uniform(0.1, 4);
  auto ops = std::make_shared<const SpdeOperators>(space, with_b3(0.1, 0.1), grid);
  const AdjointRecursion rec(ops, Vector(Vector::Zero(4)), AdjointRecursion::Storage::FinalOnly);
  CHECK_NOTHROW(rec.a_final());
  CHECK_NOTHROW(rec.a_at(grid.steps));
  CHECK_THROWS_AS(rec.a_at(1), std::logic_error);
  CHECK_NOTHROW(rec.v_at(2));
}
