#include "bib/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include "bib/kernels.hpp"

namespace bib {

CholeskyFactor CholeskyFactor::factor(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("cholesky needs a square matrix");
  const std::size_t n = a.rows();
  CholeskyFactor f;
  f.l_ = Matrix(n, n);
  Matrix& l = f.l_;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double s = kern::dot(l.row(i), l.row(j), j);
      if (i == j) {
        const double d = a(i, i) - s;
        if (!(d > 0.0)) throw std::runtime_error("cholesky: matrix not positive definite");
        l(i, i) = std::sqrt(d);
      } else {
        l(i, j) = (a(i, j) - s) / l(j, j);
      }
    }
  }
  return f;
}

std::vector<double> CholeskyFactor::solve(std::span<const double> rhs) const {
  const std::size_t n = l_.rows();
  if (rhs.size() != n) throw std::invalid_argument("cholesky solve: rhs size mismatch");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = (rhs[i] - kern::dot(l_.row(i), y.data(), i)) / l_(i, i);
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= l_(j, i) * x[j];
    x[i] = s / l_(i, i);
  }
  return x;
}

double CholeskyFactor::reconstruction_error(const Matrix& a) const {
  const std::size_t n = l_.rows();
  double max_err = 0.0, max_a = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double r = kern::dot(l_.row(i), l_.row(j), j + 1);
      max_err = std::max(max_err, std::abs(r - a(i, j)));
      max_a = std::max(max_a, std::abs(a(i, j)));
    }
  }
  return max_a > 0.0 ? max_err / max_a : max_err;
}

}  // namespace bib
