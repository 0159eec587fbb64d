#pragma once

// Shared helpers for the test binaries: seeded random matrices and
// brute-force reference implementations.

#include <complex>
#include <cstdint>
#include <random>

#include "nvspin/linalg.hpp"

namespace nvspin::testing {

using linalg::ComplexMatrix;
using linalg::cplx;

inline ComplexMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = {n(rng), n(rng)};
  return m;
}

inline ComplexMatrix random_hermitian(std::size_t n, std::mt19937_64& rng) {
  const auto m = random_matrix(n, n, rng);
  return 0.5 * (m + m.adjoint());
}

// Unitary from the Q factor of a Gram-Schmidt pass over a random matrix.
inline ComplexMatrix random_unitary(std::size_t n, std::mt19937_64& rng) {
  auto m = random_matrix(n, n, rng);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      cplx dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += std::conj(m(i, k)) * m(i, j);
      for (std::size_t i = 0; i < n; ++i) m(i, j) -= dot * m(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += std::norm(m(i, j));
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) m(i, j) /= norm;
  }
  return m;
}

// Random density matrix: G G^dagger / tr.
inline ComplexMatrix random_density(std::size_t n, std::mt19937_64& rng) {
  const auto g = random_matrix(n, n, rng);
  auto rho = g * g.adjoint();
  rho *= 1.0 / rho.trace().real();
  return rho;
}

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) { return (a - b).max_abs(); }

}  // namespace nvspin::testing
