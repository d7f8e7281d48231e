#include "spreco/linalg.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <stdexcept>
#include <string>

namespace spreco {

SparseMatrix::SparseMatrix(Index rows, Index cols) : rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("SparseMatrix: nonpositive dimension");
}

void SparseMatrix::add(Index row, Index col, double value) {
  if (finalized_) throw std::logic_error("SparseMatrix::add after finalize");
  if (row < 0 || row >= rows_ || col < 0 || col >= cols_)
    throw std::out_of_range("SparseMatrix::add index out of range");
  if (value != 0.0) triplets_.emplace_back(row, col, value);
}

void SparseMatrix::finalize(bool expect_symmetric) {
  if (finalized_) throw std::logic_error("SparseMatrix::finalize called twice");
  matrix_.resize(rows_, cols_);
  matrix_.setFromTriplets(triplets_.begin(), triplets_.end());  // sums duplicates
  matrix_.prune(0.0);
  matrix_.makeCompressed();
  triplets_.clear();
  triplets_.shrink_to_fit();
  finalized_ = true;
  if (expect_symmetric) {
    if (rows_ != cols_) throw std::invalid_argument("symmetric flag on non-square matrix");
    const double scale = max_abs();
    const Eigen::SparseMatrix<double> diff = Eigen::SparseMatrix<double>(matrix_.transpose()) - matrix_;
    double worst = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it)
        worst = std::max(worst, std::abs(it.value()));
    if (worst > 1e-12 * std::max(scale, 1e-300))
      throw std::runtime_error("SparseMatrix: symmetry violated, max asymmetry " + std::to_string(worst));
    symmetric_ = true;
  }
}

Index SparseMatrix::nonzeros() const {
  require_finalized();
  return matrix_.nonZeros();
}

double SparseMatrix::coeff(Index row, Index col) const {
  require_finalized();
  return matrix_.coeff(row, col);
}

double SparseMatrix::max_abs() const {
  require_finalized();
  double m = 0.0;
  for (int k = 0; k < matrix_.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, k); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

const Eigen::SparseMatrix<double>& SparseMatrix::raw() const {
  require_finalized();
  return matrix_;
}

void SparseMatrix::require_finalized() const {
  if (!finalized_) throw std::logic_error("SparseMatrix used before finalize");
}

SparseMatrix SparseMatrix::combine(const std::vector<std::pair<double, const SparseMatrix*>>& terms,
                                   bool expect_symmetric) {
  if (terms.empty()) throw std::invalid_argument("combine: empty term list");
  const Index r = terms.front().second->rows();
  const Index c = terms.front().second->cols();
  SparseMatrix out(r, c);
  for (const auto& [weight, part] : terms) {
    if (part->rows() != r || part->cols() != c)
      throw std::invalid_argument("combine: dimension mismatch");
    const auto& m = part->raw();
    for (int k = 0; k < m.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
        out.add(it.row(), it.col(), weight * it.value());
  }
  out.finalize(expect_symmetric);
  return out;
}

Vector spmv(const SparseMatrix& m, const Vector& x) {
  if (m.cols() != x.size())
    throw std::invalid_argument("spmv: dimension mismatch (" + std::to_string(m.cols()) + " vs " +
                                std::to_string(x.size()) + ")");
  return m.raw() * x;
}

SpdSolver::SpdSolver(const SparseMatrix& m, double rel_tol) : rel_tol_(rel_tol), n_(m.rows()) {
  if (m.rows() != m.cols()) throw std::invalid_argument("SpdSolver: matrix not square");
  matrix_ = m.raw();
  llt_.compute(matrix_);
  if (llt_.info() == Eigen::Success) {
    mode_ = Mode::Llt;
    return;
  }
  // Cholesky failed: distinguish indefiniteness from conditioning trouble.
  ldlt_.compute(matrix_);
  if (ldlt_.info() == Eigen::Success) {
    if (ldlt_.vectorD().minCoeff() <= 0.0)
      throw std::runtime_error("solve_spd: matrix is not positive definite");
    mode_ = Mode::Ldlt;
    return;
  }
  mode_ = Mode::Cg;
}

Vector SpdSolver::solve(const Vector& rhs) const {
  if (rhs.size() != n_) throw std::invalid_argument("SpdSolver::solve: rhs dimension mismatch");
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Vector::Zero(n_);
  Vector x;
  if (mode_ != Mode::Cg) {
    const auto direct = [&](const Vector& b) -> Vector {
      return mode_ == Mode::Llt ? Vector(llt_.solve(b)) : Vector(ldlt_.solve(b));
    };
    x = direct(rhs);
    double resid = (matrix_ * x - rhs).norm();
    if (resid <= rel_tol_ * rhs_norm) return x;
    // one step of iterative refinement before falling back
    x += direct(rhs - matrix_ * x);
    resid = (matrix_ * x - rhs).norm();
    if (resid <= rel_tol_ * rhs_norm) return x;
  }
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(rel_tol_);
  cg.setMaxIterations(10 * n_ + 200);
  cg.compute(matrix_);
  x = cg.solve(rhs);
  const double resid = (matrix_ * x - rhs).norm();
  if (resid > rel_tol_ * rhs_norm)
    throw std::runtime_error("solve_spd: no convergence, final relative residual " +
                             std::to_string(resid / rhs_norm));
  return x;
}

DenseMatrix SpdSolver::solve(const DenseMatrix& rhs) const {
  if (rhs.rows() != n_) throw std::invalid_argument("SpdSolver::solve: block dimension mismatch");
  DenseMatrix out(n_, rhs.cols());
  for (Index j = 0; j < rhs.cols(); ++j) out.col(j) = solve(Vector(rhs.col(j)));
  return out;
}

Vector solve_spd(const SparseMatrix& m, const Vector& rhs, double tol) {
  return SpdSolver(m, tol).solve(rhs);
}

Factorization::Factorization(const SparseMatrix& m) : n_(m.rows()) {
  if (m.rows() != m.cols()) throw std::invalid_argument("Factorization: matrix not square");
  if (m.symmetric()) {
    llt_ = std::make_shared<SpdSolver>(m);
  } else {
    lu_matrix_ = std::make_shared<Eigen::SparseMatrix<double>>(m.raw());
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu_->compute(*lu_matrix_);
    if (lu_->info() != Eigen::Success) throw std::runtime_error("Factorization: sparse LU failed");
  }
}

Vector Factorization::solve(const Vector& rhs) const {
  if (rhs.size() != n_) throw std::invalid_argument("Factorization::solve: dimension mismatch");
  if (llt_) return llt_->solve(rhs);
  return lu_->solve(rhs);
}

DenseMatrix Factorization::solve(const DenseMatrix& rhs) const {
  if (rhs.rows() != n_) throw std::invalid_argument("Factorization::solve: dimension mismatch");
  if (llt_) return llt_->solve(rhs);
  return lu_->solve(rhs);
}

Index LinearFactor::rows() const {
  if (sparse_) return sparse_->rows();
  if (dense_) return dense_->rows();
  return inverse_->size();
}

Index LinearFactor::cols() const {
  if (sparse_) return sparse_->cols();
  if (dense_) return dense_->cols();
  return inverse_->size();
}

DenseMatrix LinearFactor::apply(const DenseMatrix& x) const {
  if (cols() != x.rows()) throw std::invalid_argument("LinearFactor::apply: dimension mismatch");
  if (sparse_) return sparse_->raw() * x;
  if (dense_) return (*dense_) * x;
  return inverse_->solve(x);
}

DenseMatrix dense_from_products(const std::vector<LinearFactor>& chain) {
  if (chain.empty()) throw std::invalid_argument("dense_from_products: empty chain");
  for (std::size_t i = 0; i + 1 < chain.size(); ++i)
    if (chain[i].cols() != chain[i + 1].rows())
      throw std::invalid_argument("dense_from_products: chained dimension mismatch at factor " +
                                  std::to_string(i));
  // Right-to-left accumulation keeps every step a (factor) x (dense block)
  // product, so inverse factors reduce to columnwise solves.
  DenseMatrix acc = DenseMatrix::Identity(chain.back().cols(), chain.back().cols());
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) acc = it->apply(acc);
  return acc;
}

}  // namespace spreco
