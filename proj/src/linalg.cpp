#include "nvspin/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nvspin/errors.hpp"

namespace nvspin::linalg {

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols) {
  if (rows == 0 || cols == 0) throw InputError("matrix dimensions must be positive");
}

ComplexMatrix::ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows)
    : ComplexMatrix(rows.size(), rows.size() == 0 ? 0 : rows.begin()->size()) {
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != cols_) throw InputError("ragged matrix initializer");
    std::copy(row.begin(), row.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    ++i;
  }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const double> values) {
  ComplexMatrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const cplx> values) {
  ComplexMatrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix m(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) m(j, i) = std::conj((*this)(i, j));
  return m;
}

cplx ComplexMatrix::trace() const {
  cplx t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

double ComplexMatrix::max_abs() const {
  double m = 0.0;
  for (const auto& z : data_) m = std::max(m, std::abs(z));
  return m;
}

double ComplexMatrix::frobenius_norm() const {
  double s = 0.0;
  for (const auto& z : data_) s += std::norm(z);
  return std::sqrt(s);
}

std::vector<cplx> ComplexMatrix::column(std::size_t j) const {
  std::vector<cplx> c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
  return c;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw InputError("shape mismatch in +");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw InputError("shape mismatch in -");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cplx s) {
  for (auto& z : data_) z *= s;
  return *this;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }
ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) throw InputError("shape mismatch in *");
  ComplexMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      if (aik == cplx{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) { return a * b - b * a; }

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix c(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          c(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return c;
}

bool is_hermitian(const ComplexMatrix& m, double rel_tol) {
  if (!m.is_square()) return false;
  double dev = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j)
      dev = std::max(dev, std::abs(m(i, j) - std::conj(m(j, i))));
  return dev <= rel_tol * m.max_abs();
}

namespace {

double off_diagonal_norm(const ComplexMatrix& h) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j)
      if (i != j) s += std::norm(h(i, j));
  return std::sqrt(s);
}

// Applies G on columns p,q and G^dagger on rows p,q, where G is the unitary
// zeroing h(p,q).
void rotate(ComplexMatrix& h, ComplexMatrix& v, std::size_t p, std::size_t q) {
  const cplx hpq = h(p, q);
  const double g = std::abs(hpq);
  const cplx phase = hpq / g;
  const double theta = (h(q, q).real() - h(p, p).real()) / (2.0 * g);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;

  const cplx gpp = c;
  const cplx gpq = s;
  const cplx gqp = -std::conj(phase) * s;
  const cplx gqq = std::conj(phase) * c;

  const std::size_t n = h.rows();
  for (std::size_t k = 0; k < n; ++k) {
    const cplx hkp = h(k, p);
    const cplx hkq = h(k, q);
    h(k, p) = hkp * gpp + hkq * gqp;
    h(k, q) = hkp * gpq + hkq * gqq;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const cplx hpk = h(p, k);
    const cplx hqk = h(q, k);
    h(p, k) = std::conj(gpp) * hpk + std::conj(gqp) * hqk;
    h(q, k) = std::conj(gpq) * hpk + std::conj(gqq) * hqk;
  }
  h(p, q) = 0.0;
  h(q, p) = 0.0;
  h(p, p) = h(p, p).real();
  h(q, q) = h(q, q).real();

  for (std::size_t k = 0; k < n; ++k) {
    const cplx vkp = v(k, p);
    const cplx vkq = v(k, q);
    v(k, p) = vkp * gpp + vkq * gqp;
    v(k, q) = vkp * gpq + vkq * gqq;
  }
}

}  // namespace

EigenDecomposition eigh(const ComplexMatrix& input, JacobiOptions opts) {
  if (!input.is_square()) throw NotHermitian("eigh: matrix is not square");
  if (!is_hermitian(input)) throw NotHermitian("eigh: matrix is not Hermitian within tolerance");

  const std::size_t n = input.rows();
  ComplexMatrix h = 0.5 * (input + input.adjoint());
  ComplexMatrix v = ComplexMatrix::identity(n);
  const double scale = h.frobenius_norm();
  const double threshold = opts.off_diagonal_tol * scale;

  bool converged = off_diagonal_norm(h) <= threshold;
  for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        if (h(p, q) != cplx{}) rotate(h, v, p, q);
    converged = off_diagonal_norm(h) <= threshold;
  }
  if (!converged)
    throw NoConvergence("eigh: off-diagonal norm above threshold after " +
                        std::to_string(opts.max_sweeps) + " sweeps");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return h(a, a).real() < h(b, b).real(); });

  EigenDecomposition out{std::vector<double>(n), ComplexMatrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = h(order[k], order[k]).real();
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = v(i, order[k]);
  }
  return out;
}

ComplexMatrix reconstruct(const EigenDecomposition& d) {
  const auto& v = d.eigenvectors;
  return v * ComplexMatrix::diagonal(std::span<const double>(d.eigenvalues)) * v.adjoint();
}

ComplexMatrix propagator(const EigenDecomposition& d, double t) {
  const std::size_t n = d.eigenvalues.size();
  const auto& v = d.eigenvectors;
  ComplexMatrix u(n, n);
  std::vector<cplx> phases(n);
  for (std::size_t k = 0; k < n; ++k) phases[k] = std::polar(1.0, -d.eigenvalues[k] * t);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += v(i, k) * phases[k] * std::conj(v(j, k));
      u(i, j) = s;
    }
  return u;
}

ComplexMatrix expm_hermitian_generator(const ComplexMatrix& h, double t) {
  if (!std::isfinite(t)) throw InputError("expm: non-finite time");
  return propagator(eigh(h), t);
}

}  // namespace nvspin::linalg
