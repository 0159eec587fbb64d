#include "nvspin/effective_model.hpp"

#include <cmath>

#include "nvspin/errors.hpp"

namespace nvspin::effective {

namespace {

void check_ms(int m_S) {
  if (m_S < -1 || m_S > 1) throw InputError("m_S must be -1, 0 or +1");
}

// The closed forms are for a field in the x-z plane only.
void check_plane(const HamiltonianParams& p) {
  if (p.phi != 0.0) throw InvalidParams("effective model requires phi = 0 (field in the x-z plane)");
}

}  // namespace

double hyperfine_ratio(const HamiltonianParams& p) { return p.gamma_e * p.A_perp / (p.gamma_n * p.D); }

double transverse_enhancement(const HamiltonianParams& p) { return 1.0 + 2.0 * hyperfine_ratio(p); }

double beta_ind(const HamiltonianParams& p) {
  check_plane(p);
  const double k = transverse_enhancement(p);
  return std::hypot(p.Bz(), k * p.Bx());
}

Vec3 beta_ms(const HamiltonianParams& p, int m_S) {
  check_ms(m_S);
  const double b0 = beta_ind(p);
  if (b0 == 0.0) throw DegenerateFrame("beta_ind vanishes; the rotated frame is undefined");
  const double r = hyperfine_ratio(p);
  const double k = 1.0 + 2.0 * r;
  const double ms = m_S;
  const double a = p.A_par / p.gamma_n;  // mT
  const double bx = p.Bx();
  const double bz = p.Bz();
  const double x = bx * (ms * k * a - 3.0 * ms * ms * r * bz) / b0;
  const double z = (-ms * a * bz - 3.0 * ms * ms * r * k * bx * bx) / b0;
  return {x, 0.0, z};
}

double EffectiveField::magnitude() const {
  return std::sqrt(beta_ms[0] * beta_ms[0] + beta_ms[1] * beta_ms[1] +
                   (beta_ind + beta_ms[2]) * (beta_ind + beta_ms[2]));
}

EffectiveField effective_field(const HamiltonianParams& p, int m_S) { return {beta_ind(p), beta_ms(p, m_S), m_S}; }

double larmor_from_fields(const HamiltonianParams& p, int m_S) {
  return std::abs(p.gamma_n) * effective_field(p, m_S).magnitude();
}

double effective_larmor(const HamiltonianParams& p, int m_S) {
  check_ms(m_S);
  check_plane(p);
  const double r = hyperfine_ratio(p);
  const double ms = m_S;
  const double transverse = p.Bx() * (1.0 + 2.0 * r - 3.0 * ms * ms * r);
  const double longitudinal = ms * p.A_par / p.gamma_n - p.Bz();
  return std::abs(p.gamma_n) * std::hypot(transverse, longitudinal);
}

double accumulated_phase(const HamiltonianParams& p, double duration) {
  if (!(duration >= 0.0)) throw InputError("accumulated_phase: duration must be >= 0");
  return effective_larmor(p, 0) * duration;
}

bool validity_warning(const HamiltonianParams& p) { return std::abs(p.gamma_e * p.B / p.D) > 0.1; }

SensitivityReport sensitivity_gain(const HamiltonianParams& p, double T2n_star, double T2_star) {
  if (!(T2n_star > 0.0) || !(T2_star > 0.0)) throw InputError("coherence times must be > 0");
  check_plane(p);

  SensitivityReport rep;
  rep.theta = p.theta;
  rep.T2n_star = T2n_star;
  rep.T2_star = T2_star;
  const double k = transverse_enhancement(p);
  rep.coefficient_computed = k * k;
  rep.omega_nuclear = effective_larmor(p, 0);
  rep.phase_nuclear = rep.omega_nuclear * T2n_star / 2.0;
  rep.phase_electron = std::abs(p.gamma_e * p.Bz()) * T2_star / 2.0;

  const double tan2 = std::pow(std::tan(p.theta), 2);
  const double base = std::abs(p.gamma_n) * T2n_star / (std::abs(p.gamma_e) * T2_star);
  rep.gain = base * std::sqrt(1.0 + rep.coefficient_computed * tan2);
  rep.gain_printed_coefficient = base * std::sqrt(1.0 + rep.coefficient_printed * tan2);
  rep.validity_warning = validity_warning(p);
  return rep;
}

}  // namespace nvspin::effective
