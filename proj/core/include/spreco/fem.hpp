#pragma once

#include "spreco/linalg.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace spreco {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Scalar/vector/matrix data on the domain. An empty std::function means
/// "identically zero" (or "identity" for the diffusion matrix), which the
/// assembly and the solvers use to pick exact fast paths.
using ScalarField = std::function<double(const Point&)>;
using VectorField = std::function<Point(const Point&)>;
using MatrixField = std::function<Eigen::Matrix2d(const Point&)>;
using SpaceTimeField = std::function<double(double, const Point&)>;

/// Conforming simplicial mesh of an interval or an axis-aligned rectangle.
/// 1D cells store {a, b, -1}; 2D cells are vertex triples of triangles.
struct Mesh {
  int dim = 1;
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<int> boundary;  // sorted vertex ids on the geometric boundary
  double h = 0.0;             // max cell diameter

  double cell_measure(int cell) const;
  double measure() const;
  bool is_boundary(int v) const;

  std::string to_json() const;
  static Mesh from_json(const std::string& text);
};

/// Uniform partition of [0,1] into n_cells intervals.
Mesh build_interval_mesh(int n_cells);

struct Rect {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
};

/// Structured triangulation of a rectangle; each grid quad splits into two
/// right triangles.
Mesh build_rect_mesh(int nx, int ny, const Rect& bounds);

/// P1 Lagrange space on a Mesh with Dirichlet dofs identified with boundary
/// vertices. Vertex values are the dof coefficients.
class FemSpace {
public:
  explicit FemSpace(Mesh mesh);

  const Mesh& mesh() const { return mesh_; }
  Index dof_count() const { return static_cast<Index>(mesh_.vertices.size()); }
  Index interior_count() const { return static_cast<Index>(interior_.size()); }
  const std::vector<Index>& interior_dofs() const { return interior_; }
  bool is_boundary_dof(Index v) const { return boundary_mask_[static_cast<std::size_t>(v)]; }

  Vector restrict_interior(const Vector& full) const;
  Vector extend_with_zeros(const Vector& interior) const;
  SparseMatrix restrict_interior(const SparseMatrix& full) const;

private:
  Mesh mesh_;
  std::vector<Index> interior_;
  std::vector<char> boundary_mask_;
};

/// Problem data of the stochastic parabolic equation: diffusion a (identity
/// when empty), drift b1, reaction b2, noise intensity b3, sources f and g,
/// horizon T. Empty functions mean zero.
struct Coefficients {
  MatrixField a;
  VectorField b1;
  ScalarField b2;
  ScalarField b3;
  SpaceTimeField f;
  SpaceTimeField g;
  double T = 1.0;

  bool has_b1() const { return static_cast<bool>(b1); }
  bool has_b2() const { return static_cast<bool>(b2); }
  bool has_b3() const { return static_cast<bool>(b3); }
  bool has_f() const { return static_cast<bool>(f); }
  bool has_g() const { return static_cast<bool>(g); }

  static Coefficients heat(double T) {
    Coefficients c;
    c.T = T;
    return c;
  }
};

/// Mass matrix, entries \int phi_l phi_w dx; SPD.
SparseMatrix assemble_mass(const FemSpace& space);

/// Mass matrix weighted by a scalar field, entries \int w phi_l phi_w dx.
SparseMatrix assemble_weighted_mass(const FemSpace& space, const ScalarField& w);

/// Stiffness matrix, entries \int grad phi_l . a grad phi_w dx; PSD, and the
/// ellipticity of `a` is checked at every quadrature point.
SparseMatrix assemble_stiffness(const FemSpace& space, const MatrixField& a = {});

/// Advection pairing MG, entries \int phi_l (b1 . grad phi_w) dx.
SparseMatrix assemble_mg(const FemSpace& space, const VectorField& b1);

/// Weak divergence pairing MD with (MD u)_l = \int u div(b1 phi_l) dx,
/// realized by parts as -\int (b1 . grad u) phi_l dx.
SparseMatrix assemble_md(const FemSpace& space, const VectorField& b1);

/// Load vector \int func phi_l dx.
Vector load_vector(const FemSpace& space, const ScalarField& func);
Vector load_vector_at(const FemSpace& space, const SpaceTimeField& func, double t);

/// L2 projection onto the P1 space: solves Mass c = load(func).
Vector l2_project(const FemSpace& space, const ScalarField& func);

/// Interior-dof Poisson operator with homogeneous Dirichlet data. Caches the
/// factorizations of the interior stiffness and mass matrices; realizes the
/// discrete (-Laplace)^{-1}, the discrete Laplacian L_h, and the H^2 inner
/// product <L_h u, L_h v>_Mass used by the regularizer.
class DirichletPoisson {
public:
  explicit DirichletPoisson(const FemSpace& space);
  /// From pre-restricted interior matrices (plain Laplacian stiffness).
  DirichletPoisson(SparseMatrix mass0, SparseMatrix stiff0);

  /// x solving Stiff0 x = Mass0 v.
  Vector inv_laplacian(const Vector& v_interior) const;
  /// L_h v, i.e. x solving Mass0 x = Stiff0 v.
  Vector laplacian(const Vector& v_interior) const;
  double mass_inner(const Vector& u, const Vector& v) const;
  double h2_inner(const Vector& u, const Vector& v) const;
  double h2_norm_sq(const Vector& u) const { return h2_inner(u, u); }

  const SparseMatrix& mass0() const { return mass0_; }
  const SparseMatrix& stiff0() const { return stiff0_; }

private:
  SparseMatrix mass0_;
  SparseMatrix stiff0_;
  SpdSolver mass_solver_;
  SpdSolver stiff_solver_;
};

/// One application of the discrete inverse Dirichlet Laplacian (see
/// DirichletPoisson::inv_laplacian); applying it twice realizes (-Laplace)^{-2}.
Vector inv_dirichlet_laplacian(const FemSpace& space, const Vector& v_interior);

}  // namespace spreco
