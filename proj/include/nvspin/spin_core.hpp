#pragma once

// Ground-state 15NV spin Hamiltonian (electron S=1, nuclear I=1/2).
//
// Product basis ordering used everywhere: index = 2*e + n with
// e = 0,1,2 for m_S = +1,0,-1 and n = 0,1 for m_I = up,down.
// All frequencies inside the library are angular (rad/s); fields are in mT.

#include <array>
#include <numbers>
#include <vector>

#include "nvspin/linalg.hpp"

namespace nvspin {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct HamiltonianParams {
  double D = two_pi * 2.87e9;         // zero-field splitting
  double gamma_e = two_pi * 28.0e6;   // per mT
  double gamma_n = two_pi * -4.32e3;  // per mT
  double A_par = two_pi * 3.03e6;
  double A_perp = two_pi * 3.65e6;
  double B = 4.0;      // mT
  double theta = 0.0;  // rad, from the NV axis
  double phi = 0.0;    // rad, azimuth; 0 keeps the field in the x-z plane

  double Bx() const;
  double By() const;
  double Bz() const;

  // Throws InvalidParams unless B >= 0, 0 <= theta <= pi and all finite.
  void validate() const;
};

HamiltonianParams with_field(HamiltonianParams p, double B_mT, double theta_rad);

struct SpinTriple {
  linalg::ComplexMatrix x;
  linalg::ComplexMatrix y;
  linalg::ComplexMatrix z;
};

// Angular momentum matrices for spin two_j/2, in the |m> basis ordered
// from m = +j down to -j. Only two_j = 1 and 2 are supported.
SpinTriple spin_matrices(int two_j);

struct SpinOperators {
  SpinTriple S;       // 3x3
  SpinTriple I;       // 2x2
  SpinTriple S_full;  // S (x) 1_2
  SpinTriple I_full;  // 1_3 (x) I
};

const SpinOperators& spin_operators();

enum class NuclearSpin { Up, Down };

inline constexpr std::size_t kDim = 6;

constexpr std::size_t basis_index(int m_S, NuclearSpin m_I) {
  return static_cast<std::size_t>(2 * (1 - m_S) + (m_I == NuclearSpin::Up ? 0 : 1));
}

linalg::ComplexMatrix build_hamiltonian(const HamiltonianParams& p);

struct LevelLabel {
  int m_S = 0;
  NuclearSpin m_I = NuclearSpin::Up;
  double overlap = 0.0;
};

inline constexpr double kLabelThreshold = 0.6;

// Rotates eigenvectors inside (near-)degenerate eigenspaces so that they
// diagonalise I_z (ties broken by S_z). Eigenvalues are untouched.
linalg::EigenDecomposition canonicalize_degenerate(const linalg::EigenDecomposition& d);

// One label per eigenvector (same order as d.eigenvalues). Throws
// AmbiguousLabeling if an overlap is below kLabelThreshold or two
// eigenvectors claim the same product state.
std::vector<LevelLabel> label_levels(const linalg::EigenDecomposition& d);

// Eigensolve + canonicalisation + labels, kept together so that the
// labels refer to the returned eigenvectors.
struct LabeledSpectrum {
  linalg::EigenDecomposition decomp;
  std::vector<LevelLabel> labels;

  std::size_t index_of(int m_S, NuclearSpin m_I) const;
  double energy(int m_S, NuclearSpin m_I) const { return decomp.eigenvalues[index_of(m_S, m_I)]; }
};

LabeledSpectrum labeled_spectrum(const HamiltonianParams& p);

// All values in Hz.
struct TransitionFrequencies {
  double f_up = 0.0;    // |0,up> <-> |-1,up>
  double f_down = 0.0;  // |0,down> <-> |-1,down>
  double f_R = 0.0;     // |-1,up> <-> |-1,down>
  double f_larmor_ms0 = 0.0;
};

TransitionFrequencies transition_frequencies(const LabeledSpectrum& s);
TransitionFrequencies transition_frequencies(const HamiltonianParams& p);

}  // namespace nvspin
