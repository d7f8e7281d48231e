#pragma once

#include "spreco/spde.hpp"

#include <vector>

namespace spreco {

/// Deterministic representation of the backward (adjoint) equation: the
/// sequence {A_{Y^m}, V^m} with Y^m = A_{Y^m} U^m + V^m, built by the
/// backward recursion
///   A_{Y^m} = B^{-1} [ Mass A_{Y^{m+1}} S^{-1} A + k Mass_b3 A_{Y^{m+1}} S^{-1} Mass_b3 ]
///   V^m     = B^{-1} Mass V^{m+1}
/// from A_{Y^M} = I and V^M = terminal offset. All conditional expectations
/// of the time-discrete backward equation are eliminated analytically, so
/// the sequence is independent of any Brownian sample.
///
/// Algorithm 1 passes offset = -u_T^delta, which makes the terminal value
/// Y^M = U^M - u_T^delta, the data residual.
class AdjointRecursion {
public:
  enum class Storage {
    FullSequence,  // keep every A_{Y^m} (eval_Y / eval_Z at any step)
    FinalOnly,     // keep A_{Y^0} only (enough for gradients)
  };

  AdjointRecursion(const SpdeOperators& ops, const Vector& terminal_offset,
                   Storage storage = Storage::FullSequence);
  /// Owning variant; keeps the operators alive for the recursion's lifetime.
  AdjointRecursion(std::shared_ptr<const SpdeOperators> ops, const Vector& terminal_offset,
                   Storage storage = Storage::FullSequence);

  /// Rebuilds only the V sequence for new terminal data; the A sequence is
  /// unchanged (it does not depend on the data).
  void set_terminal_offset(const Vector& terminal_offset);

  const SpdeOperators& ops() const { return *ops_; }
  int steps() const { return ops_->grid().steps; }
  Storage storage() const { return storage_; }

  /// A_{Y^m}; with FinalOnly storage only m == 0 and m == M are available.
  const DenseMatrix& a_at(int m) const;
  const DenseMatrix& a_final() const { return a_at(0); }
  const Vector& v_at(int m) const;
  const Vector& v_final() const { return v_at(0); }

  /// Y^m = A_{Y^m} U_m + V^m.
  Vector eval_Y(int m, const Vector& U_m) const;
  /// Z^m = A_{Y^{m+1}} S^{-1} Mass_b3 U_m, defined for 0 <= m <= M-1.
  Vector eval_Z(int m, const Vector& U_m) const;
  /// Y^0 for the initial iterate y0 (interior coefficients).
  Vector state_at_zero(const Vector& y0) const { return eval_Y(0, y0); }

  /// Max-norm of A_{Y^m} per step, for diagnostics dumps.
  std::vector<double> a_norms() const;

private:
  void build_a_sequence();

  std::shared_ptr<const SpdeOperators> owned_;  // set when constructed owning
  const SpdeOperators* ops_;
  Storage storage_;
  std::vector<DenseMatrix> a_seq_;  // FullSequence: size M+1; FinalOnly: {A_{Y^0}, I}
  std::vector<Vector> v_seq_;       // always size M+1
};

/// Convenience overload: assembles operators, then builds the recursion
/// with terminal offset V^M (pass -u_T^delta to realize Algorithm 1).
AdjointRecursion build_recursion(const FemSpace& space, const Coefficients& coeffs,
                                 const TimeGrid& grid, const Vector& terminal_offset);

}  // namespace spreco
