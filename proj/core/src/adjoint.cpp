#include "spreco/adjoint.hpp"

#include <stdexcept>
#include <string>

namespace spreco {

AdjointRecursion::AdjointRecursion(const SpdeOperators& ops, const Vector& terminal_offset,
                                   Storage storage)
    : ops_(&ops), storage_(storage) {
  build_a_sequence();
  set_terminal_offset(terminal_offset);
}

AdjointRecursion::AdjointRecursion(std::shared_ptr<const SpdeOperators> ops,
                                   const Vector& terminal_offset, Storage storage)
    : owned_(std::move(ops)), ops_(owned_.get()), storage_(storage) {
  build_a_sequence();
  set_terminal_offset(terminal_offset);
}

void AdjointRecursion::build_a_sequence() {
  const int M = steps();
  const Index L = ops_->interior_count();
  const double k = ops_->grid().k();
  const bool stochastic = ops_->stochastic();

  const auto& mass = ops_->mass().raw();
  const auto& drift = ops_->drift().raw();
  const auto& mass_b3 = ops_->mass_b3().raw();

  DenseMatrix current = DenseMatrix::Identity(L, L);
  const bool keep_all = storage_ == Storage::FullSequence;
  if (keep_all) {
    a_seq_.assign(static_cast<std::size_t>(M) + 1, DenseMatrix());
    a_seq_[static_cast<std::size_t>(M)] = current;
  }

  for (int m = M - 1; m >= 0; --m) {
    // C = A_{Y^{m+1}} S^{-1}, via columnwise solves against the symmetric S.
    const DenseMatrix c = ops_->system_factor().solve(DenseMatrix(current.transpose())).transpose();
    DenseMatrix inner = mass * (c * drift);
    if (stochastic) inner += k * (mass_b3 * (c * mass_b3));
    current = ops_->backward_factor().solve(inner);
    if (!current.allFinite())
      throw std::runtime_error("AdjointRecursion: non-finite A_{Y^m} at step " + std::to_string(m));
    if (keep_all) a_seq_[static_cast<std::size_t>(m)] = current;
  }

  if (!keep_all) {
    a_seq_.assign(2, DenseMatrix());
    a_seq_[0] = current;
    a_seq_[1] = DenseMatrix::Identity(L, L);  // stands for A_{Y^M}
  }
}

void AdjointRecursion::set_terminal_offset(const Vector& terminal_offset) {
  const int M = steps();
  if (terminal_offset.size() != ops_->interior_count())
    throw std::invalid_argument("AdjointRecursion: terminal offset dimension mismatch");
  v_seq_.assign(static_cast<std::size_t>(M) + 1, Vector());
  v_seq_[static_cast<std::size_t>(M)] = terminal_offset;
  Vector v = terminal_offset;
  for (int m = M - 1; m >= 0; --m) {
    v = ops_->backward_factor().solve(spmv(ops_->mass(), v));
    if (!v.allFinite())
      throw std::runtime_error("AdjointRecursion: non-finite V^m at step " + std::to_string(m));
    v_seq_[static_cast<std::size_t>(m)] = v;
  }
}

const DenseMatrix& AdjointRecursion::a_at(int m) const {
  const int M = steps();
  if (m < 0 || m > M) throw std::out_of_range("AdjointRecursion::a_at: step out of range");
  if (storage_ == Storage::FullSequence) return a_seq_[static_cast<std::size_t>(m)];
  if (m == 0) return a_seq_[0];
  if (m == M) return a_seq_[1];
  throw std::logic_error("AdjointRecursion: intermediate A_{Y^m} not stored (FinalOnly)");
}

const Vector& AdjointRecursion::v_at(int m) const {
  if (m < 0 || m > steps()) throw std::out_of_range("AdjointRecursion::v_at: step out of range");
  return v_seq_[static_cast<std::size_t>(m)];
}

Vector AdjointRecursion::eval_Y(int m, const Vector& U_m) const {
  if (U_m.size() != ops_->interior_count())
    throw std::invalid_argument("eval_Y: state dimension mismatch");
  return a_at(m) * U_m + v_at(m);
}

Vector AdjointRecursion::eval_Z(int m, const Vector& U_m) const {
  if (m < 0 || m >= steps()) throw std::out_of_range("eval_Z: step out of range");
  if (U_m.size() != ops_->interior_count())
    throw std::invalid_argument("eval_Z: state dimension mismatch");
  if (!ops_->stochastic()) return Vector::Zero(U_m.size());
  const Vector load = spmv(ops_->mass_b3(), U_m);
  return a_at(m + 1) * ops_->system_factor().solve(load);
}

std::vector<double> AdjointRecursion::a_norms() const {
  if (storage_ != Storage::FullSequence)
    throw std::logic_error("a_norms requires FullSequence storage");
  std::vector<double> norms;
  norms.reserve(a_seq_.size());
  for (const auto& a : a_seq_) norms.push_back(a.cwiseAbs().maxCoeff());
  return norms;
}

AdjointRecursion build_recursion(const FemSpace& space, const Coefficients& coeffs,
                                 const TimeGrid& grid, const Vector& terminal_offset) {
  auto ops = std::make_shared<const SpdeOperators>(space, coeffs, grid);
  return AdjointRecursion(std::move(ops), terminal_offset);
}

}  // namespace spreco
