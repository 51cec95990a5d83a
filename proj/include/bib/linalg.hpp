#pragma once

#include <span>
#include <vector>

#include "bib/matrix.hpp"

namespace bib {

// Cholesky factorization of a symmetric positive-definite matrix.
class CholeskyFactor {
 public:
  // throws std::runtime_error on a non-positive pivot
  static CholeskyFactor factor(const Matrix& spd);

  std::vector<double> solve(std::span<const double> rhs) const;
  const Matrix& lower() const { return l_; }

  // max |L L^T - a| / max |a|; used by the factorization self-checks
  double reconstruction_error(const Matrix& a) const;

 private:
  Matrix l_;
};

}  // namespace bib
