#pragma once

// Closed-form perturbative description of the 15N nuclear spin in the
// x-z field plane. Fields in mT, frequencies in rad/s, phases in rad.
// Every returned frequency or phase is a magnitude (gamma_n < 0 signs are
// absorbed).

#include <array>

#include "nvspin/spin_core.hpp"

namespace nvspin::effective {

using Vec3 = std::array<double, 3>;

// gamma_e * A_perp / (gamma_n * D)
double hyperfine_ratio(const HamiltonianParams& p);
// 1 + 2 * hyperfine_ratio: transverse field amplification at m_S = 0.
double transverse_enhancement(const HamiltonianParams& p);

double beta_ind(const HamiltonianParams& p);

// Electron-conditioned field, components along (x', y', z') where z' is the
// direction of the electron-independent field. Throws DegenerateFrame when
// beta_ind == 0 and InputError for m_S outside {-1, 0, 1}.
Vec3 beta_ms(const HamiltonianParams& p, int m_S);

struct EffectiveField {
  double beta_ind = 0.0;
  Vec3 beta_ms{};
  int m_S = 0;

  // |beta_ind z' + beta(m_S)|
  double magnitude() const;
};

EffectiveField effective_field(const HamiltonianParams& p, int m_S);

// |gamma_n| * |beta_ind z' + beta(m_S)| built from the two field pieces.
double larmor_from_fields(const HamiltonianParams& p, int m_S);

// Closed form: |gamma_n| sqrt(Bx^2 (1 + 2r - 3 m_S^2 r)^2 + (m_S A_par/gamma_n - Bz)^2).
double effective_larmor(const HamiltonianParams& p, int m_S);

// m_S = 0 Larmor frequency times duration (duration >= 0).
double accumulated_phase(const HamiltonianParams& p, double duration);

// gamma_e B / D > 0.1: outside the regime the expansion was made for.
bool validity_warning(const HamiltonianParams& p);

inline constexpr double kPrintedTan2Coefficient = 52.4;

struct SensitivityReport {
  double theta = 0.0;
  double omega_nuclear = 0.0;   // rad/s, m_S = 0
  double phase_nuclear = 0.0;   // over T2n_star / 2
  double phase_electron = 0.0;  // gamma_e Bz T2_star / 2
  double gain = 0.0;
  double gain_printed_coefficient = 0.0;  // same ratio with 52.4 in place of the computed coefficient
  double T2n_star = 9e-3;
  double T2_star = 1e-6;
  double coefficient_printed = kPrintedTan2Coefficient;
  double coefficient_computed = 0.0;  // (1 + 2 gamma_e A_perp / (gamma_n D))^2, the closed-form value
  bool validity_warning = false;
};

SensitivityReport sensitivity_gain(const HamiltonianParams& p, double T2n_star = 9e-3, double T2_star = 1e-6);

}  // namespace nvspin::effective
