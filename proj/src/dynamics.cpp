#include "nvspin/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "nvspin/errors.hpp"

namespace nvspin::dynamics {

namespace {

ComplexMatrix conjugate(const ComplexMatrix& u, const ComplexMatrix& rho) { return u * rho * u.adjoint(); }

// rho_ij *= exp(-i (e_i - e_j) t)
void apply_diagonal_phases(ComplexMatrix& rho, std::span<const double> energies, double t) {
  const std::size_t n = rho.rows();
  std::vector<cplx> ph(n);
  for (std::size_t i = 0; i < n; ++i) ph[i] = std::polar(1.0, -energies[i] * t);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) rho(i, j) *= ph[i] * std::conj(ph[j]);
}

ComplexMatrix matrix_power(ComplexMatrix base, std::uint64_t n) {
  ComplexMatrix result = ComplexMatrix::identity(base.rows());
  while (n > 0) {
    if (n & 1U) result = base * result;
    n >>= 1U;
    if (n > 0) base = base * base;
  }
  return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// DensityState

DensityState DensityState::maximally_mixed() {
  DensityState s;
  s.rho = (1.0 / static_cast<double>(kDim)) * ComplexMatrix::identity(kDim);
  return s;
}

DensityState DensityState::product(int m_S, NuclearSpin m_I) {
  DensityState s;
  const auto k = basis_index(m_S, m_I);
  s.rho(k, k) = 1.0;
  return s;
}

DensityState DensityState::pure(std::span<const cplx> psi) {
  if (psi.size() != kDim) throw InputError("pure state must have 6 amplitudes");
  double norm2 = 0.0;
  for (const auto& a : psi) norm2 += std::norm(a);
  if (!(norm2 > 0.0)) throw InputError("pure state has zero norm");
  DensityState s;
  for (std::size_t i = 0; i < kDim; ++i)
    for (std::size_t j = 0; j < kDim; ++j) s.rho(i, j) = psi[i] * std::conj(psi[j]) / norm2;
  return s;
}

double DensityState::purity() const { return (rho * rho).trace().real(); }

double DensityState::population(int m_S, NuclearSpin m_I) const {
  const auto k = basis_index(m_S, m_I);
  return rho(k, k).real();
}

double DensityState::population_ms(int m_S) const {
  return population(m_S, NuclearSpin::Up) + population(m_S, NuclearSpin::Down);
}

ComplexMatrix DensityState::nuclear_reduced() const {
  ComplexMatrix n(2, 2);
  for (std::size_t e = 0; e < 3; ++e)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) n(i, j) += rho(2 * e + i, 2 * e + j);
  return n;
}

ComplexMatrix DensityState::electron_reduced() const {
  ComplexMatrix m(3, 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t n = 0; n < 2; ++n) m(a, b) += rho(2 * a + n, 2 * b + n);
  return m;
}

bool satisfies_invariants(const DensityState& s, double tol) {
  const auto& r = s.rho;
  for (std::size_t i = 0; i < kDim; ++i)
    for (std::size_t j = 0; j < kDim; ++j)
      if (std::abs(r(i, j) - std::conj(r(j, i))) > tol) return false;
  if (std::abs(s.rho.trace() - cplx(1.0)) > tol) return false;
  const auto d = linalg::eigh(0.5 * (r + r.adjoint()));
  return d.eigenvalues.front() >= -tol;
}

double fidelity(const DensityState& a, const DensityState& b) {
  const auto sqrt_psd = [](const ComplexMatrix& m) {
    auto d = linalg::eigh(0.5 * (m + m.adjoint()));
    for (auto& e : d.eigenvalues) e = std::sqrt(std::max(e, 0.0));
    return linalg::reconstruct(d);
  };
  const ComplexMatrix ra = sqrt_psd(a.rho);
  const auto inner = linalg::eigh(0.5 * (ra * b.rho * ra + (ra * b.rho * ra).adjoint()));
  double tr = 0.0;
  for (double e : inner.eigenvalues) tr += std::sqrt(std::max(e, 0.0));
  return tr * tr;
}

DensityState laser_init(const DensityState& s, double fidelity) {
  if (fidelity < 0.0 || fidelity > 1.0) throw InputError("laser fidelity must lie in [0, 1]");
  ComplexMatrix electron(3, 3);
  for (std::size_t a = 0; a < 3; ++a) electron(a, a) = (1.0 - fidelity) / 3.0;
  electron(1, 1) += fidelity;
  DensityState out;
  out.rho = linalg::kron(electron, s.nuclear_reduced());
  return out;
}

// ---------------------------------------------------------------------------
// PulseSegment

PulseSegment PulseSegment::laser(double duration) { return {SegmentKind::LaserInit, duration, 0.0, 0.0, 0.0, Frame::RWA}; }

PulseSegment PulseSegment::mw(double duration, double frequency, double rabi_rate, double phase, Frame frame) {
  return {SegmentKind::MwPulse, duration, frequency, rabi_rate, phase, frame};
}

PulseSegment PulseSegment::rf(double duration, double frequency, double rabi_rate, double phase, Frame frame) {
  return {SegmentKind::RfPulse, duration, frequency, rabi_rate, phase, frame};
}

PulseSegment PulseSegment::free(double duration) { return {SegmentKind::FreeEvolve, duration, 0.0, 0.0, 0.0, Frame::RWA}; }

PulseSegment PulseSegment::readout() { return {SegmentKind::Readout, 0.0, 0.0, 0.0, 0.0, Frame::RWA}; }

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(const HamiltonianParams& p, EngineConfig cfg)
    : params_(p),
      cfg_(cfg),
      hamiltonian_(build_hamiltonian(p)),
      spectrum_(labeled_spectrum(p)),
      transitions_(transition_frequencies(spectrum_)),
      mw_{ComplexMatrix(kDim, kDim), {}, {}, 1.0},
      rf_{ComplexMatrix(kDim, kDim), {}, {}, 1.0} {
  if (cfg_.steps_per_period < 1 || cfg_.min_steps_per_period < 1) throw InputError("steps per period must be >= 1");
  if (cfg_.readouts < 1) throw InputError("readout count must be >= 1");
  if (cfg_.noise_sigma < 0.0) throw InputError("noise sigma must be >= 0");
  if (!(cfg_.mw_pi2_duration > 0.0)) throw InputError("MW pi/2 duration must be > 0");

  const auto& E = spectrum_.decomp.eigenvalues;
  const auto make = [&](ComplexMatrix op, std::vector<std::size_t> north, std::vector<std::size_t> south) {
    const auto mean = [&](const std::vector<std::size_t>& idx) {
      double m = 0.0;
      for (auto k : idx) m += E[k];
      return m / static_cast<double>(idx.size());
    };
    const bool south_upper = mean(south) >= mean(north);
    return Transition{std::move(op), south_upper ? south : north, south_upper ? north : south,
                      south_upper ? 1.0 : -1.0};
  };

  using enum NuclearSpin;
  ComplexMatrix e_flip(3, 3);
  e_flip(1, 2) = 1.0;
  e_flip(2, 1) = 1.0;
  mw_ = make(linalg::kron(e_flip, ComplexMatrix::identity(2)),
             {spectrum_.index_of(0, Up), spectrum_.index_of(0, Down)},
             {spectrum_.index_of(-1, Up), spectrum_.index_of(-1, Down)});
  rf_ = make(linalg::kron(ComplexMatrix::identity(3), ComplexMatrix{{0.0, 1.0}, {1.0, 0.0}}),
             {spectrum_.index_of(-1, Up)}, {spectrum_.index_of(-1, Down)});
}

double Engine::mw_rabi_rate() const { return (std::numbers::pi / 2.0) / cfg_.mw_pi2_duration; }

double Engine::ramsey_free_time() const {
  if (cfg_.ramsey_free_time) return *cfg_.ramsey_free_time;
  const double split = std::abs(transitions_.f_up - transitions_.f_down);
  // Without hyperfine splitting there is nothing to precess; use back-to-back pulses.
  return split > 1.0 ? 1.0 / (2.0 * split) : 0.0;
}

const Engine::Transition& Engine::transition_for(SegmentKind kind) const {
  return kind == SegmentKind::RfPulse ? rf_ : mw_;
}

ComplexMatrix Engine::to_eigen(const ComplexMatrix& rho) const {
  const auto& v = spectrum_.decomp.eigenvectors;
  return v.adjoint() * rho * v;
}

ComplexMatrix Engine::from_eigen(const ComplexMatrix& rho) const {
  const auto& v = spectrum_.decomp.eigenvectors;
  return v * rho * v.adjoint();
}

DensityState Engine::evolve_free(const DensityState& s, double t, std::optional<RotatingFrame> frame) const {
  if (!std::isfinite(t)) throw InputError("evolve_free: non-finite time");
  std::vector<double> energies = spectrum_.decomp.eigenvalues;
  if (frame) {
    const auto& tr = frame->target == DriveTarget::Radio ? rf_ : mw_;
    for (auto k : tr.upper) energies[k] -= two_pi * frame->frequency;
  }
  ComplexMatrix rho = to_eigen(s.rho);
  apply_diagonal_phases(rho, energies, t);
  return {from_eigen(rho)};
}

DensityState Engine::drive_rwa(const DensityState& s, const PulseSegment& seg, const Transition& tr,
                               double t_start) const {
  const double omega = two_pi * seg.frequency;
  const auto& E = spectrum_.decomp.eigenvalues;
  const ComplexMatrix xe = to_eigen(tr.op);

  std::vector<double> frame_weight(kDim, 0.0);
  for (auto u : tr.upper) frame_weight[u] = 1.0;

  ComplexMatrix h_rot(kDim, kDim);
  for (std::size_t k = 0; k < kDim; ++k) h_rot(k, k) = E[k] - omega * frame_weight[k];
  const cplx coupling = 0.5 * seg.rabi_rate * std::polar(1.0, tr.sign * seg.phase);
  for (auto u : tr.upper)
    for (auto l : tr.lower) {
      h_rot(u, l) += coupling * xe(u, l);
      h_rot(l, u) += std::conj(coupling * xe(u, l));
    }

  // rho_rot = R rho R^dagger with R = exp(i omega t P_upper), diagonal in the eigenbasis.
  const auto to_frame = [&](ComplexMatrix& rho, double t, double sgn) {
    for (std::size_t i = 0; i < kDim; ++i)
      for (std::size_t j = 0; j < kDim; ++j)
        if (frame_weight[i] != frame_weight[j])
          rho(i, j) *= std::polar(1.0, sgn * omega * t * (frame_weight[i] - frame_weight[j]));
  };

  ComplexMatrix rho = to_eigen(s.rho);
  to_frame(rho, t_start, 1.0);
  rho = conjugate(linalg::expm_hermitian_generator(h_rot, seg.duration), rho);
  to_frame(rho, t_start + seg.duration, -1.0);
  return {from_eigen(rho)};
}

DensityState Engine::drive_lab(const DensityState& s, const PulseSegment& seg, const Transition& tr,
                               double t_start) const {
  if (cfg_.steps_per_period < cfg_.min_steps_per_period)
    throw StepResolutionTooCoarse("lab-frame integration needs at least " + std::to_string(cfg_.min_steps_per_period) +
                                  " steps per drive period, got " + std::to_string(cfg_.steps_per_period));
  const double omega = two_pi * seg.frequency;
  const double period = 1.0 / seg.frequency;
  const double dt = period / cfg_.steps_per_period;

  const auto step = [&](double t_mid, double h) {
    const double amp = seg.rabi_rate * std::cos(omega * t_mid - tr.sign * seg.phase);
    return linalg::expm_hermitian_generator(hamiltonian_ + amp * tr.op, h);
  };
  const auto run_steps = [&](double t0, int n, double h) {
    ComplexMatrix u = ComplexMatrix::identity(kDim);
    for (int k = 0; k < n; ++k) u = step(t0 + (k + 0.5) * h, h) * u;
    return u;
  };

  // H(t) is periodic, so full periods reuse one propagator.
  const auto full_periods = static_cast<std::uint64_t>(std::floor(seg.duration / period));
  const double remainder = seg.duration - static_cast<double>(full_periods) * period;

  ComplexMatrix u = ComplexMatrix::identity(kDim);
  if (full_periods > 0) u = matrix_power(run_steps(t_start, cfg_.steps_per_period, dt), full_periods);
  if (remainder > 0.0) {
    const int n = std::max(1, static_cast<int>(std::ceil(remainder / dt - 1e-9)));
    u = run_steps(t_start + static_cast<double>(full_periods) * period, n, remainder / n) * u;
  }
  return {conjugate(u, s.rho)};
}

DensityState Engine::apply_drive(const DensityState& s, const PulseSegment& seg, double t_start) const {
  if (!seg.is_drive()) throw MalformedSequence("apply_drive called with a non-drive segment");
  if (!(seg.frequency > 0.0)) throw MalformedSequence("drive frequency must be > 0");
  if (!(seg.duration >= 0.0) || !(seg.rabi_rate >= 0.0))
    throw MalformedSequence("drive duration and Rabi rate must be >= 0");
  if (seg.duration == 0.0) return s;
  const auto& tr = transition_for(seg.kind);
  return seg.frame == Frame::RWA ? drive_rwa(s, seg, tr, t_start) : drive_lab(s, seg, tr, t_start);
}

DensityState Engine::ramsey_block(const DensityState& s, double f_M_hz, double axis2, double t_start) const {
  const double tp = cfg_.mw_pi2_duration;
  const double tau = ramsey_free_time();
  const double rabi = mw_rabi_rate();
  auto out = apply_drive(s, PulseSegment::mw(tp, f_M_hz, rabi, 0.0, cfg_.mw_frame), t_start);
  out = evolve_free(out, tau);
  return apply_drive(out, PulseSegment::mw(tp, f_M_hz, rabi, axis2, cfg_.mw_frame), t_start + tp + tau);
}

void Engine::dephase(DensityState& s, double duration) const {
  if (cfg_.dephasing_rate <= 0.0 || duration <= 0.0) return;
  const double f = std::exp(-cfg_.dephasing_rate * duration);
  for (std::size_t i = 0; i < kDim; ++i)
    for (std::size_t j = 0; j < kDim; ++j)
      if (i != j) s.rho(i, j) *= f;
}

double Engine::signal_from(const DensityState& s) const {
  return cfg_.contrast_low + (cfg_.contrast_high - cfg_.contrast_low) * s.population_ms(0);
}

SequenceResult Engine::run_sequence(std::span<const PulseSegment> seq) const {
  if (seq.size() < 2 || seq.front().kind != SegmentKind::LaserInit || seq.back().kind != SegmentKind::Readout)
    throw MalformedSequence("sequence must start with LaserInit and end with Readout");
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const auto& seg = seq[k];
    if (!(seg.duration >= 0.0) || !std::isfinite(seg.duration))
      throw MalformedSequence("segment " + std::to_string(k) + " has an invalid duration");
    if (seg.kind == SegmentKind::Readout && k + 1 != seq.size())
      throw MalformedSequence("Readout is only allowed as the final segment");
    if (seg.is_drive() && (!(seg.frequency > 0.0) || !(seg.rabi_rate >= 0.0)))
      throw MalformedSequence("segment " + std::to_string(k) + " has an invalid drive frequency or Rabi rate");
  }

  SequenceResult result;
  DensityState state = DensityState::maximally_mixed();
  double t = 0.0;
  for (const auto& seg : seq) {
    switch (seg.kind) {
      case SegmentKind::LaserInit:
        state = laser_init(state, cfg_.laser_fidelity);
        break;
      case SegmentKind::MwPulse:
      case SegmentKind::RfPulse:
        state = apply_drive(state, seg, t);
        break;
      case SegmentKind::FreeEvolve:
        state = evolve_free(state, seg.duration);
        break;
      case SegmentKind::Readout:
        result.signal = signal_from(state);
        break;
    }
    dephase(state, seg.duration);
    t += seg.duration;
    if (cfg_.record_states) result.per_segment_states.push_back(state);
  }
  result.final_state = std::move(state);
  return result;
}

std::vector<PulseSegment> Engine::rabi_larmor_sequence(double rf_rabi_rate, double rf_duration) const {
  const double tp = cfg_.mw_pi2_duration;
  const double tau = ramsey_free_time();
  const double rabi = mw_rabi_rate();
  const double fm = f_M();
  return {
      PulseSegment::laser(),
      PulseSegment::mw(tp, fm, rabi, 0.0, cfg_.mw_frame),
      PulseSegment::free(tau),
      PulseSegment::mw(tp, fm, rabi, cfg_.init_axis2, cfg_.mw_frame),
      PulseSegment::rf(rf_duration, transitions_.f_R, rf_rabi_rate, 0.0, cfg_.rf_frame),
      PulseSegment::laser(),
      PulseSegment::mw(tp, fm, rabi, 0.0, cfg_.mw_frame),
      PulseSegment::free(tau),
      PulseSegment::mw(tp, fm, rabi, cfg_.readout_axis2, cfg_.mw_frame),
      PulseSegment::readout(),
  };
}

TraceSeries Engine::simulate_rabi_larmor(double rf_rabi_rate, std::span<const double> durations,
                                         std::uint64_t trace_index) const {
  for (std::size_t k = 0; k < durations.size(); ++k) {
    if (!(durations[k] >= 0.0)) throw InputError("RF durations must be >= 0");
    if (k > 0 && !(durations[k] > durations[k - 1])) throw InputError("RF durations must be strictly increasing");
  }

  TraceSeries trace;
  trace.meta = {params_, cfg_.seed, trace_index};
  trace.samples.reserve(durations.size());

  std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32U),
                    static_cast<std::uint32_t>(trace_index), static_cast<std::uint32_t>(trace_index >> 32U)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, cfg_.noise_sigma / std::sqrt(static_cast<double>(cfg_.readouts)));

  for (double d : durations) {
    const auto segs = rabi_larmor_sequence(rf_rabi_rate, d);
    double signal = run_sequence(segs).signal;
    if (cfg_.noise_sigma > 0.0) signal += noise(rng);
    trace.samples.push_back({d, signal});
  }
  return trace;
}

std::vector<SpectrumPoint> Engine::simulate_odmr(std::span<const double> freq_grid, const PulseSegment& mw_pulse) const {
  if (mw_pulse.kind != SegmentKind::MwPulse) throw InputError("ODMR needs a MW pulse segment");
  std::vector<SpectrumPoint> out;
  out.reserve(freq_grid.size());
  for (double f : freq_grid) {
    PulseSegment pulse = mw_pulse;
    pulse.frequency = f;
    const std::vector<PulseSegment> seq{PulseSegment::laser(), pulse, PulseSegment::readout()};
    out.push_back({f, run_sequence(seq).signal});
  }
  return out;
}

std::vector<double> stroboscopic_durations(double f_R_hz, std::size_t count, std::size_t stride, double oversample) {
  if (!(f_R_hz > 0.0) || stride == 0 || !(oversample > 0.0)) throw InputError("invalid stroboscopic grid");
  std::vector<double> d(count);
  for (std::size_t k = 0; k < count; ++k)
    d[k] = static_cast<double>(k * stride) / (f_R_hz * oversample);
  return d;
}

}  // namespace nvspin::dynamics
