#include "spreco/fem.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spreco {

namespace {

constexpr double kGauss3Pos = 0.7745966692414834;  // sqrt(3/5)
constexpr double kGauss3W0 = 0.5555555555555556;   // 5/9
constexpr double kGauss3W1 = 0.8888888888888888;   // 8/9

struct QuadPoint {
  Point p;
  double w;
};

// Degree-5 Gauss rule on a 1D cell.
void interval_quadrature(const Point& a, const Point& b, QuadPoint out[3]) {
  const double mid = 0.5 * (a.x + b.x);
  const double half = 0.5 * (b.x - a.x);
  out[0] = {{mid - kGauss3Pos * half, 0.0}, kGauss3W0 * half};
  out[1] = {{mid, 0.0}, kGauss3W1 * half};
  out[2] = {{mid + kGauss3Pos * half, 0.0}, kGauss3W0 * half};
}

// Degree-2 edge-midpoint rule on a triangle.
void triangle_quadrature(const Point& p0, const Point& p1, const Point& p2, double area,
                         QuadPoint out[3]) {
  out[0] = {{0.5 * (p0.x + p1.x), 0.5 * (p0.y + p1.y)}, area / 3.0};
  out[1] = {{0.5 * (p1.x + p2.x), 0.5 * (p1.y + p2.y)}, area / 3.0};
  out[2] = {{0.5 * (p2.x + p0.x), 0.5 * (p2.y + p0.y)}, area / 3.0};
}

double hat_value_1d(const Point& a, const Point& b, int local, double x) {
  const double h = b.x - a.x;
  const double t = (x - a.x) / h;
  return local == 0 ? 1.0 - t : t;
}

// Barycentric values of the three hats at a point inside the triangle.
void hat_values_2d(const Point& p0, const Point& p1, const Point& p2, double twice_area,
                   const Point& q, double lambda[3]) {
  lambda[0] = ((p1.x - q.x) * (p2.y - q.y) - (p2.x - q.x) * (p1.y - q.y)) / twice_area;
  lambda[1] = ((p2.x - q.x) * (p0.y - q.y) - (p0.x - q.x) * (p2.y - q.y)) / twice_area;
  lambda[2] = 1.0 - lambda[0] - lambda[1];
}

void hat_gradients_2d(const Point& p0, const Point& p1, const Point& p2, double twice_area,
                      Eigen::Vector2d grad[3]) {
  grad[0] = Eigen::Vector2d(p1.y - p2.y, p2.x - p1.x) / twice_area;
  grad[1] = Eigen::Vector2d(p2.y - p0.y, p0.x - p2.x) / twice_area;
  grad[2] = Eigen::Vector2d(p0.y - p1.y, p1.x - p0.x) / twice_area;
}

Eigen::Matrix2d eval_diffusion(const MatrixField& a, const Point& p) {
  if (!a) return Eigen::Matrix2d::Identity();
  return a(p);
}

void check_elliptic(const Eigen::Matrix2d& m, int dim, const Point& p) {
  bool ok;
  if (dim == 1) {
    ok = m(0, 0) > 0.0;
  } else {
    // symmetric 2x2: positive trace and determinant
    ok = m(0, 0) + m(1, 1) > 0.0 && m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) > 0.0;
  }
  if (!ok)
    throw std::runtime_error("assemble_stiffness: ellipticity violated at quadrature point (" +
                             std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
}

}  // namespace

double Mesh::cell_measure(int cell) const {
  const auto& c = cells[static_cast<std::size_t>(cell)];
  if (dim == 1) return std::abs(vertices[c[1]].x - vertices[c[0]].x);
  const Point& p0 = vertices[c[0]];
  const Point& p1 = vertices[c[1]];
  const Point& p2 = vertices[c[2]];
  return 0.5 * std::abs((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
}

double Mesh::measure() const {
  double total = 0.0;
  for (int c = 0; c < static_cast<int>(cells.size()); ++c) total += cell_measure(c);
  return total;
}

bool Mesh::is_boundary(int v) const {
  return std::binary_search(boundary.begin(), boundary.end(), v);
}

std::string Mesh::to_json() const {
  nlohmann::json j;
  j["dim"] = dim;
  j["h"] = h;
  auto& verts = j["vertices"] = nlohmann::json::array();
  for (const auto& p : vertices) verts.push_back({p.x, p.y});
  auto& cs = j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) cs.push_back({c[0], c[1], c[2]});
  j["boundary"] = boundary;
  return j.dump();
}

Mesh Mesh::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Mesh m;
  m.dim = j.at("dim").get<int>();
  m.h = j.at("h").get<double>();
  for (const auto& v : j.at("vertices")) m.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  for (const auto& c : j.at("cells"))
    m.cells.push_back({c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()});
  m.boundary = j.at("boundary").get<std::vector<int>>();
  return m;
}

Mesh build_interval_mesh(int n_cells) {
  if (n_cells < 2) throw std::invalid_argument("build_interval_mesh: need n_cells >= 2");
  Mesh m;
  m.dim = 1;
  m.vertices.resize(static_cast<std::size_t>(n_cells) + 1);
  for (int i = 0; i <= n_cells; ++i) m.vertices[static_cast<std::size_t>(i)] = {double(i) / n_cells, 0.0};
  for (int i = 0; i < n_cells; ++i) m.cells.push_back({i, i + 1, -1});
  m.boundary = {0, n_cells};
  m.h = 0.0;
  for (int c = 0; c < n_cells; ++c) m.h = std::max(m.h, m.cell_measure(c));
  return m;
}

Mesh build_rect_mesh(int nx, int ny, const Rect& bounds) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("build_rect_mesh: need nx, ny >= 2");
  if (!(bounds.x1 > bounds.x0) || !(bounds.y1 > bounds.y0))
    throw std::invalid_argument("build_rect_mesh: degenerate bounds");
  Mesh m;
  m.dim = 2;
  const double dx = (bounds.x1 - bounds.x0) / nx;
  const double dy = (bounds.y1 - bounds.y0) / ny;
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.vertices.push_back({bounds.x0 + i * dx, bounds.y0 + j * dy});
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      m.cells.push_back({v00, v10, v11});
      m.cells.push_back({v00, v11, v01});
    }
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      if (i == 0 || i == nx || j == 0 || j == ny) m.boundary.push_back(id(i, j));
  std::sort(m.boundary.begin(), m.boundary.end());
  const double diam = std::sqrt(dx * dx + dy * dy);
  m.h = diam;
  return m;
}

FemSpace::FemSpace(Mesh mesh) : mesh_(std::move(mesh)) {
  boundary_mask_.assign(mesh_.vertices.size(), 0);
  for (int v : mesh_.boundary) boundary_mask_[static_cast<std::size_t>(v)] = 1;
  for (Index v = 0; v < dof_count(); ++v)
    if (!boundary_mask_[static_cast<std::size_t>(v)]) interior_.push_back(v);
}

Vector FemSpace::restrict_interior(const Vector& full) const {
  if (full.size() != dof_count()) throw std::invalid_argument("restrict_interior: size mismatch");
  Vector out(interior_count());
  for (Index i = 0; i < interior_count(); ++i) out[i] = full[interior_[static_cast<std::size_t>(i)]];
  return out;
}

Vector FemSpace::extend_with_zeros(const Vector& interior) const {
  if (interior.size() != interior_count())
    throw std::invalid_argument("extend_with_zeros: size mismatch");
  Vector out = Vector::Zero(dof_count());
  for (Index i = 0; i < interior_count(); ++i) out[interior_[static_cast<std::size_t>(i)]] = interior[i];
  return out;
}

SparseMatrix FemSpace::restrict_interior(const SparseMatrix& full) const {
  if (full.rows() != dof_count() || full.cols() != dof_count())
    throw std::invalid_argument("restrict_interior: matrix size mismatch");
  std::vector<Index> global_to_interior(static_cast<std::size_t>(dof_count()), -1);
  for (Index i = 0; i < interior_count(); ++i)
    global_to_interior[static_cast<std::size_t>(interior_[static_cast<std::size_t>(i)])] = i;
  SparseMatrix out(interior_count(), interior_count());
  const auto& m = full.raw();
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
      const Index r = global_to_interior[static_cast<std::size_t>(it.row())];
      const Index c = global_to_interior[static_cast<std::size_t>(it.col())];
      if (r >= 0 && c >= 0) out.add(r, c, it.value());
    }
  out.finalize(full.symmetric());
  return out;
}

namespace {

template <typename CellKernel1D, typename CellKernel2D>
SparseMatrix assemble(const FemSpace& space, bool symmetric, CellKernel1D&& k1, CellKernel2D&& k2) {
  const Mesh& mesh = space.mesh();
  SparseMatrix out(space.dof_count(), space.dof_count());
  if (mesh.dim == 1) {
    for (const auto& cell : mesh.cells) {
      const Point& a = mesh.vertices[cell[0]];
      const Point& b = mesh.vertices[cell[1]];
      double local[2][2] = {{0, 0}, {0, 0}};
      k1(a, b, local);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out.add(cell[i], cell[j], local[i][j]);
    }
  } else {
    for (const auto& cell : mesh.cells) {
      const Point& p0 = mesh.vertices[cell[0]];
      const Point& p1 = mesh.vertices[cell[1]];
      const Point& p2 = mesh.vertices[cell[2]];
      double local[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
      k2(p0, p1, p2, local);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out.add(cell[i], cell[j], local[i][j]);
    }
  }
  out.finalize(symmetric);
  return out;
}

}  // namespace

SparseMatrix assemble_mass(const FemSpace& space) {
  return assemble(
      space, true,
      [](const Point& a, const Point& b, double local[2][2]) {
        const double h = b.x - a.x;
        local[0][0] = local[1][1] = h / 3.0;
        local[0][1] = local[1][0] = h / 6.0;
      },
      [](const Point& p0, const Point& p1, const Point& p2, double local[3][3]) {
        const double area =
            0.5 * std::abs((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) local[i][j] = (i == j) ? area / 6.0 : area / 12.0;
      });
}

SparseMatrix assemble_weighted_mass(const FemSpace& space, const ScalarField& w) {
  if (!w) {
    SparseMatrix zero(space.dof_count(), space.dof_count());
    zero.finalize(true);
    return zero;
  }
  return assemble(
      space, true,
      [&](const Point& a, const Point& b, double local[2][2]) {
        QuadPoint q[3];
        interval_quadrature(a, b, q);
        for (const auto& qp : q) {
          const double wv = w(qp.p);
          const double phi[2] = {hat_value_1d(a, b, 0, qp.p.x), hat_value_1d(a, b, 1, qp.p.x)};
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) local[i][j] += qp.w * wv * phi[i] * phi[j];
        }
      },
      [&](const Point& p0, const Point& p1, const Point& p2, double local[3][3]) {
        const double twice_area = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
        const double area = 0.5 * std::abs(twice_area);
        QuadPoint q[3];
        triangle_quadrature(p0, p1, p2, area, q);
        for (const auto& qp : q) {
          const double wv = w(qp.p);
          double lambda[3];
          hat_values_2d(p0, p1, p2, twice_area, qp.p, lambda);
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) local[i][j] += qp.w * wv * lambda[i] * lambda[j];
        }
      });
}

SparseMatrix assemble_stiffness(const FemSpace& space, const MatrixField& a) {
  const int dim = space.mesh().dim;
  return assemble(
      space, true,
      [&](const Point& pa, const Point& pb, double local[2][2]) {
        const double h = pb.x - pa.x;
        const double dphi[2] = {-1.0 / h, 1.0 / h};
        QuadPoint q[3];
        interval_quadrature(pa, pb, q);
        for (const auto& qp : q) {
          const Eigen::Matrix2d av = eval_diffusion(a, qp.p);
          check_elliptic(av, dim, qp.p);
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) local[i][j] += qp.w * av(0, 0) * dphi[i] * dphi[j];
        }
      },
      [&](const Point& p0, const Point& p1, const Point& p2, double local[3][3]) {
        const double twice_area = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
        const double area = 0.5 * std::abs(twice_area);
        Eigen::Vector2d grad[3];
        hat_gradients_2d(p0, p1, p2, twice_area, grad);
        QuadPoint q[3];
        triangle_quadrature(p0, p1, p2, area, q);
        for (const auto& qp : q) {
          const Eigen::Matrix2d av = eval_diffusion(a, qp.p);
          check_elliptic(av, dim, qp.p);
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) local[i][j] += qp.w * grad[i].dot(av * grad[j]);
        }
      });
}

SparseMatrix assemble_mg(const FemSpace& space, const VectorField& b1) {
  if (!b1) {
    SparseMatrix zero(space.dof_count(), space.dof_count());
    zero.finalize();
    return zero;
  }
  return assemble(
      space, false,
      [&](const Point& a, const Point& b, double local[2][2]) {
        const double h = b.x - a.x;
        const double dphi[2] = {-1.0 / h, 1.0 / h};
        QuadPoint q[3];
        interval_quadrature(a, b, q);
        for (const auto& qp : q) {
          const double bv = b1(qp.p).x;
          const double phi[2] = {hat_value_1d(a, b, 0, qp.p.x), hat_value_1d(a, b, 1, qp.p.x)};
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) local[i][j] += qp.w * phi[i] * bv * dphi[j];
        }
      },
      [&](const Point& p0, const Point& p1, const Point& p2, double local[3][3]) {
        const double twice_area = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
        const double area = 0.5 * std::abs(twice_area);
        Eigen::Vector2d grad[3];
        hat_gradients_2d(p0, p1, p2, twice_area, grad);
        QuadPoint q[3];
        triangle_quadrature(p0, p1, p2, area, q);
        for (const auto& qp : q) {
          const Point bp = b1(qp.p);
          const Eigen::Vector2d bv(bp.x, bp.y);
          double lambda[3];
          hat_values_2d(p0, p1, p2, twice_area, qp.p, lambda);
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) local[i][j] += qp.w * lambda[i] * bv.dot(grad[j]);
        }
      });
}

SparseMatrix assemble_md(const FemSpace& space, const VectorField& b1) {
  // Weak realization by parts on H^1_0: (MD u)_l = \int u div(b1 phi_l)
  //                                            = -\int (b1 . grad u) phi_l.
  if (!b1) {
    SparseMatrix zero(space.dof_count(), space.dof_count());
    zero.finalize();
    return zero;
  }
  const SparseMatrix mg = assemble_mg(space, b1);
  return SparseMatrix::combine({{-1.0, &mg}});
}

Vector load_vector(const FemSpace& space, const ScalarField& func) {
  const Mesh& mesh = space.mesh();
  Vector out = Vector::Zero(space.dof_count());
  if (!func) return out;
  if (mesh.dim == 1) {
    for (const auto& cell : mesh.cells) {
      const Point& a = mesh.vertices[cell[0]];
      const Point& b = mesh.vertices[cell[1]];
      QuadPoint q[3];
      interval_quadrature(a, b, q);
      for (const auto& qp : q) {
        const double fv = func(qp.p);
        out[cell[0]] += qp.w * fv * hat_value_1d(a, b, 0, qp.p.x);
        out[cell[1]] += qp.w * fv * hat_value_1d(a, b, 1, qp.p.x);
      }
    }
  } else {
    for (const auto& cell : mesh.cells) {
      const Point& p0 = mesh.vertices[cell[0]];
      const Point& p1 = mesh.vertices[cell[1]];
      const Point& p2 = mesh.vertices[cell[2]];
      const double twice_area = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
      const double area = 0.5 * std::abs(twice_area);
      QuadPoint q[3];
      triangle_quadrature(p0, p1, p2, area, q);
      for (const auto& qp : q) {
        const double fv = func(qp.p);
        double lambda[3];
        hat_values_2d(p0, p1, p2, twice_area, qp.p, lambda);
        for (int i = 0; i < 3; ++i) out[cell[i]] += qp.w * fv * lambda[i];
      }
    }
  }
  return out;
}

Vector load_vector_at(const FemSpace& space, const SpaceTimeField& func, double t) {
  if (!func) return Vector::Zero(space.dof_count());
  return load_vector(space, [&](const Point& p) { return func(t, p); });
}

Vector l2_project(const FemSpace& space, const ScalarField& func) {
  if (!func) return Vector::Zero(space.dof_count());
  const SparseMatrix mass = assemble_mass(space);
  return solve_spd(mass, load_vector(space, func));
}

DirichletPoisson::DirichletPoisson(const FemSpace& space)
    : mass0_(space.restrict_interior(assemble_mass(space))),
      stiff0_(space.restrict_interior(assemble_stiffness(space))),
      mass_solver_(mass0_),
      stiff_solver_(stiff0_) {}

DirichletPoisson::DirichletPoisson(SparseMatrix mass0, SparseMatrix stiff0)
    : mass0_(std::move(mass0)),
      stiff0_(std::move(stiff0)),
      mass_solver_(mass0_),
      stiff_solver_(stiff0_) {}

Vector DirichletPoisson::inv_laplacian(const Vector& v_interior) const {
  return stiff_solver_.solve(spmv(mass0_, v_interior));
}

Vector DirichletPoisson::laplacian(const Vector& v_interior) const {
  return mass_solver_.solve(spmv(stiff0_, v_interior));
}

double DirichletPoisson::mass_inner(const Vector& u, const Vector& v) const {
  return u.dot(spmv(mass0_, v));
}

double DirichletPoisson::h2_inner(const Vector& u, const Vector& v) const {
  return mass_inner(laplacian(u), laplacian(v));
}

Vector inv_dirichlet_laplacian(const FemSpace& space, const Vector& v_interior) {
  return DirichletPoisson(space).inv_laplacian(v_interior);
}

}  // namespace spreco
