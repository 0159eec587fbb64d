#include "nvspin/spin_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nvspin/errors.hpp"

namespace nvspin {

using linalg::ComplexMatrix;
using linalg::cplx;

double HamiltonianParams::Bx() const { return B * std::sin(theta) * std::cos(phi); }
double HamiltonianParams::By() const { return B * std::sin(theta) * std::sin(phi); }
double HamiltonianParams::Bz() const { return B * std::cos(theta); }

void HamiltonianParams::validate() const {
  for (double v : {D, gamma_e, gamma_n, A_par, A_perp, B, theta, phi})
    if (!std::isfinite(v)) throw InvalidParams("Hamiltonian parameters must be finite");
  if (B < 0.0) throw InvalidParams("field magnitude B must be >= 0");
  if (theta < 0.0 || theta > std::numbers::pi) throw InvalidParams("theta must lie in [0, pi]");
}

HamiltonianParams with_field(HamiltonianParams p, double B_mT, double theta_rad) {
  p.B = B_mT;
  p.theta = theta_rad;
  return p;
}

SpinTriple spin_matrices(int two_j) {
  if (two_j != 1 && two_j != 2)
    throw UnsupportedSpin("spin_matrices: two_j must be 1 or 2, got " + std::to_string(two_j));
  const std::size_t dim = static_cast<std::size_t>(two_j) + 1;
  const double j = two_j / 2.0;
  ComplexMatrix jp(dim, dim);
  ComplexMatrix jz(dim, dim);
  for (std::size_t k = 0; k < dim; ++k) {
    const double m = j - static_cast<double>(k);
    jz(k, k) = m;
    if (k > 0) jp(k - 1, k) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
  }
  const ComplexMatrix jm = jp.adjoint();
  return {0.5 * (jp + jm), cplx(0.0, -0.5) * (jp - jm), jz};
}

const SpinOperators& spin_operators() {
  static const SpinOperators ops = [] {
    SpinOperators o{spin_matrices(2), spin_matrices(1), {ComplexMatrix(1, 1), ComplexMatrix(1, 1), ComplexMatrix(1, 1)},
                    {ComplexMatrix(1, 1), ComplexMatrix(1, 1), ComplexMatrix(1, 1)}};
    const auto id2 = ComplexMatrix::identity(2);
    const auto id3 = ComplexMatrix::identity(3);
    o.S_full = {linalg::kron(o.S.x, id2), linalg::kron(o.S.y, id2), linalg::kron(o.S.z, id2)};
    o.I_full = {linalg::kron(id3, o.I.x), linalg::kron(id3, o.I.y), linalg::kron(id3, o.I.z)};
    return o;
  }();
  return ops;
}

ComplexMatrix build_hamiltonian(const HamiltonianParams& p) {
  const auto& op = spin_operators();
  const auto& S = op.S_full;
  const auto& I = op.I_full;
  const double bx = p.Bx(), by = p.By(), bz = p.Bz();

  ComplexMatrix h = p.D * (S.z * S.z);
  h += p.gamma_e * (bx * S.x + by * S.y + bz * S.z);
  h -= p.gamma_n * (bx * I.x + by * I.y + bz * I.z);
  h += p.A_par * (S.z * I.z);
  h += p.A_perp * (S.x * I.x + S.y * I.y);
  return h;
}

linalg::EigenDecomposition canonicalize_degenerate(const linalg::EigenDecomposition& d) {
  const auto& op = spin_operators();
  // Distinct eigenvalue for every product state: m_I + m_S/8.
  const ComplexMatrix tiebreak = op.I_full.z + 0.125 * op.S_full.z;

  linalg::EigenDecomposition out = d;
  const std::size_t n = d.eigenvalues.size();
  double scale = 0.0;
  for (double e : d.eigenvalues) scale = std::max(scale, std::abs(e));
  const double tol = 1e-12 * std::max(scale, 1.0);

  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start + 1;
    while (end < n && d.eigenvalues[end] - d.eigenvalues[end - 1] <= tol) ++end;
    const std::size_t m = end - start;
    if (m > 1 && d.eigenvectors.rows() == tiebreak.rows()) {
      ComplexMatrix vc(d.eigenvectors.rows(), m);
      for (std::size_t i = 0; i < vc.rows(); ++i)
        for (std::size_t k = 0; k < m; ++k) vc(i, k) = d.eigenvectors(i, start + k);
      const auto sub = linalg::eigh(vc.adjoint() * tiebreak * vc);
      const ComplexMatrix rotated = vc * sub.eigenvectors;
      double mean = 0.0;
      for (std::size_t k = start; k < end; ++k) mean += d.eigenvalues[k];
      mean /= static_cast<double>(m);
      for (std::size_t k = 0; k < m; ++k) {
        out.eigenvalues[start + k] = mean;
        for (std::size_t i = 0; i < vc.rows(); ++i) out.eigenvectors(i, start + k) = rotated(i, k);
      }
    }
    start = end;
  }
  return out;
}

std::vector<LevelLabel> label_levels(const linalg::EigenDecomposition& input) {
  if (input.eigenvectors.rows() != kDim || input.eigenvalues.size() != kDim)
    throw InputError("label_levels expects a 6x6 decomposition");
  const auto d = canonicalize_degenerate(input);

  std::vector<LevelLabel> labels(kDim);
  std::array<bool, kDim> taken{};
  for (std::size_t k = 0; k < kDim; ++k) {
    std::size_t best = 0;
    double best_overlap = -1.0;
    for (std::size_t i = 0; i < kDim; ++i) {
      const double w = std::norm(d.eigenvectors(i, k));
      if (w > best_overlap) {
        best_overlap = w;
        best = i;
      }
    }
    if (best_overlap < kLabelThreshold)
      throw AmbiguousLabeling("eigenvector " + std::to_string(k) + " has maximal product-state overlap " +
                              std::to_string(best_overlap) + " below threshold");
    if (taken[best]) throw AmbiguousLabeling("two eigenvectors map onto the same product state");
    taken[best] = true;
    labels[k] = {1 - static_cast<int>(best / 2), best % 2 == 0 ? NuclearSpin::Up : NuclearSpin::Down, best_overlap};
  }
  return labels;
}

std::size_t LabeledSpectrum::index_of(int m_S, NuclearSpin m_I) const {
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k].m_S == m_S && labels[k].m_I == m_I) return k;
  throw AmbiguousLabeling("no level labelled with the requested quantum numbers");
}

LabeledSpectrum labeled_spectrum(const HamiltonianParams& p) {
  auto decomp = canonicalize_degenerate(linalg::eigh(build_hamiltonian(p)));
  auto labels = label_levels(decomp);
  return {std::move(decomp), std::move(labels)};
}

TransitionFrequencies transition_frequencies(const LabeledSpectrum& s) {
  using enum NuclearSpin;
  const auto hz = [](double w) { return std::abs(w) / two_pi; };
  return {hz(s.energy(-1, Up) - s.energy(0, Up)), hz(s.energy(-1, Down) - s.energy(0, Down)),
          hz(s.energy(-1, Up) - s.energy(-1, Down)), hz(s.energy(0, Up) - s.energy(0, Down))};
}

TransitionFrequencies transition_frequencies(const HamiltonianParams& p) {
  return transition_frequencies(labeled_spectrum(p));
}

}  // namespace nvspin
