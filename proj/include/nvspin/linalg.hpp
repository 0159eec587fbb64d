#pragma once

// Small dense complex linear algebra: just enough for 6x6 spin problems.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace nvspin::linalg {

using cplx = std::complex<double>;

class ComplexMatrix {
 public:
  ComplexMatrix(std::size_t rows, std::size_t cols);
  // Row-major nested initializer, e.g. {{1, 0}, {0, -1}}.
  ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows);

  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
  static ComplexMatrix diagonal(std::span<const double> values);
  static ComplexMatrix diagonal(std::span<const cplx> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_square() const { return rows_ == cols_; }

  cplx& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const cplx> data() const { return data_; }

  ComplexMatrix adjoint() const;
  cplx trace() const;
  double max_abs() const;
  double frobenius_norm() const;
  std::vector<cplx> column(std::size_t j) const;

  ComplexMatrix& operator+=(const ComplexMatrix& other);
  ComplexMatrix& operator-=(const ComplexMatrix& other);
  ComplexMatrix& operator*=(cplx s);

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<cplx> data_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator*(cplx s, ComplexMatrix a);
ComplexMatrix operator*(ComplexMatrix a, cplx s);

// a*b - b*a
ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b);

// Kronecker product; entry (i*b.rows+k, j*b.cols+l) = a(i,j) * b(k,l).
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

// max |m - m^dagger| <= tol * max|m| (square matrices only).
bool is_hermitian(const ComplexMatrix& m, double rel_tol = 1e-12);

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // ascending
  ComplexMatrix eigenvectors;       // columns are eigenvectors
};

struct JacobiOptions {
  int max_sweeps = 100;
  double off_diagonal_tol = 1e-14;  // relative to ||H||_F
};

// Cyclic complex Jacobi. Throws NotHermitian or NoConvergence.
EigenDecomposition eigh(const ComplexMatrix& h, JacobiOptions opts = {});

// V * diag(values) * V^dagger
ComplexMatrix reconstruct(const EigenDecomposition& d);

// exp(-i h t) for Hermitian h, through eigh.
ComplexMatrix expm_hermitian_generator(const ComplexMatrix& h, double t);
// Same propagator from an existing decomposition.
ComplexMatrix propagator(const EigenDecomposition& d, double t);

}  // namespace nvspin::linalg
