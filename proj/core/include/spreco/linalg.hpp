#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace spreco {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Assembled sparse operator. Triplets accumulate until finalize(), which
/// sums duplicates and optionally verifies symmetry to 1e-12 * max|entry|.
class SparseMatrix {
public:
  SparseMatrix() = default;
  SparseMatrix(Index rows, Index cols);

  void add(Index row, Index col, double value);
  void finalize(bool expect_symmetric = false);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool finalized() const { return finalized_; }
  bool symmetric() const { return symmetric_; }
  Index nonzeros() const;
  double coeff(Index row, Index col) const;
  double max_abs() const;

  const Eigen::SparseMatrix<double>& raw() const;

  /// row/column scaling and linear combinations used to form the composites
  /// A and B from Mass/Stiff/MG parts.
  static SparseMatrix combine(const std::vector<std::pair<double, const SparseMatrix*>>& terms,
                              bool expect_symmetric = false);

private:
  void require_finalized() const;

  Index rows_ = 0, cols_ = 0;
  bool finalized_ = false;
  bool symmetric_ = false;
  std::vector<Eigen::Triplet<double>> triplets_;
  Eigen::SparseMatrix<double> matrix_;
};

/// Exact sparse matrix-vector product.
Vector spmv(const SparseMatrix& m, const Vector& x);

/// Direct sparse Cholesky for SPD systems, kept around so repeated solves
/// against the same operator reuse the factorization. Falls back to
/// conjugate gradient when the Cholesky factorization reports failure
/// without a clear indefiniteness signal.
class SpdSolver {
public:
  explicit SpdSolver(const SparseMatrix& m, double rel_tol = 1e-10);

  Vector solve(const Vector& rhs) const;
  /// Columnwise solves; realizes inverse factors without forming inverses.
  DenseMatrix solve(const DenseMatrix& rhs) const;

  double rel_tol() const { return rel_tol_; }
  Index size() const { return n_; }

private:
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  enum class Mode { Llt, Ldlt, Cg } mode_ = Mode::Llt;
  double rel_tol_;
  Index n_;
};

/// One-shot SPD solve with residual check `tol` (relative).
Vector solve_spd(const SparseMatrix& m, const Vector& rhs, double tol = 1e-10);

/// Factorization that picks sparse Cholesky for symmetric-tagged matrices and
/// sparse LU otherwise (the adjoint operator B is nonsymmetric when b1 != 0).
class Factorization {
public:
  explicit Factorization(const SparseMatrix& m);

  Vector solve(const Vector& rhs) const;
  DenseMatrix solve(const DenseMatrix& rhs) const;
  Index size() const { return n_; }

private:
  std::shared_ptr<SpdSolver> llt_;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
  std::shared_ptr<Eigen::SparseMatrix<double>> lu_matrix_;
  Index n_ = 0;
};

/// One multiplicand of a left-to-right matrix product chain. Inverse factors
/// are applied through factorized solves, never by forming the inverse.
class LinearFactor {
public:
  static LinearFactor sparse(const SparseMatrix& m) { return LinearFactor(&m, nullptr, nullptr); }
  static LinearFactor dense(const DenseMatrix& m) { return LinearFactor(nullptr, &m, nullptr); }
  static LinearFactor inverse(const Factorization& f) { return LinearFactor(nullptr, nullptr, &f); }

  Index rows() const;
  Index cols() const;
  /// y = Op * x applied columnwise to a dense block.
  DenseMatrix apply(const DenseMatrix& x) const;

private:
  LinearFactor(const SparseMatrix* s, const DenseMatrix* d, const Factorization* inv)
      : sparse_(s), dense_(d), inverse_(inv) {}

  const SparseMatrix* sparse_;
  const DenseMatrix* dense_;
  const Factorization* inverse_;
};

/// Evaluates factors left-to-right as a dense matrix.
DenseMatrix dense_from_products(const std::vector<LinearFactor>& chain);

}  // namespace spreco
