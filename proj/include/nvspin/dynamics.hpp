#pragma once

// Density-matrix engine for the Ramsey / RF / Ramsey readout protocol.
//
// Drives are applied either in the rotating-wave approximation (RWA) or by
// direct piecewise-constant integration of the lab-frame Hamiltonian; the
// two modes serve as oracles for each other. RWA is carried out in the
// eigenbasis of the static Hamiltonian, so all static mixing (including
// the transverse-field enhancement of the nuclear Larmor frequency) is kept
// exactly and only counter-rotating drive terms are dropped.
//
// Drive sources are phase-continuous: a drive segment starting at sequence
// time t0 uses the lab field rabi_rate * cos(2 pi f t -/+ phase) * G with t
// measured from the start of the sequence.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nvspin/linalg.hpp"
#include "nvspin/spin_core.hpp"
#include "nvspin/trace.hpp"

namespace nvspin::dynamics {

using linalg::ComplexMatrix;
using linalg::cplx;

struct DensityState {
  ComplexMatrix rho = ComplexMatrix(kDim, kDim);

  static DensityState maximally_mixed();
  static DensityState product(int m_S, NuclearSpin m_I);
  // |psi><psi| for a normalised 6-vector (normalisation is enforced).
  static DensityState pure(std::span<const cplx> psi);

  double trace() const { return rho.trace().real(); }
  double purity() const;
  // Sum of diagonal populations with the given m_S.
  double population_ms(int m_S) const;
  double population(int m_S, NuclearSpin m_I) const;
  ComplexMatrix nuclear_reduced() const;   // 2x2, trace over electron
  ComplexMatrix electron_reduced() const;  // 3x3, trace over nucleus
};

// Hermitian, unit trace, PSD, each within tol.
bool satisfies_invariants(const DensityState& s, double tol = 1e-10);

// Uhlmann fidelity (tr sqrt(sqrt(a) b sqrt(a)))^2.
double fidelity(const DensityState& a, const DensityState& b);

// rho -> (f |0><0| + (1-f) 1/3) (x) Tr_e(rho).
DensityState laser_init(const DensityState& s, double fidelity = 1.0);

enum class SegmentKind { LaserInit, MwPulse, FreeEvolve, RfPulse, Readout };
enum class Frame { RWA, LabFrame };

struct PulseSegment {
  SegmentKind kind = SegmentKind::FreeEvolve;
  double duration = 0.0;   // s
  double frequency = 0.0;  // Hz, drive segments
  double rabi_rate = 0.0;  // rad/s, drive segments
  double phase = 0.0;      // rad; 0 rotates about x, pi/2 about y
  Frame frame = Frame::RWA;

  static PulseSegment laser(double duration = 0.0);
  static PulseSegment mw(double duration, double frequency, double rabi_rate, double phase, Frame frame = Frame::RWA);
  static PulseSegment rf(double duration, double frequency, double rabi_rate, double phase, Frame frame = Frame::RWA);
  static PulseSegment free(double duration);
  static PulseSegment readout();

  bool is_drive() const { return kind == SegmentKind::MwPulse || kind == SegmentKind::RfPulse; }
};

enum class DriveTarget {
  Microwave,  // electron 0 <-> -1, both nuclear states
  Radio,      // nuclear up <-> down inside m_S = -1
};

struct RotatingFrame {
  double frequency = 0.0;  // Hz
  DriveTarget target = DriveTarget::Microwave;
};

struct EngineConfig {
  double mw_pi2_duration = 10e-9;  // s; sets the MW Rabi rate to (pi/2)/duration
  Frame mw_frame = Frame::RWA;
  Frame rf_frame = Frame::RWA;
  int steps_per_period = 100;  // lab-frame integrator
  int min_steps_per_period = 20;
  double contrast_low = 0.7;   // signal at P(m_S=0) = 0
  double contrast_high = 1.0;  // signal at P(m_S=0) = 1
  int readouts = 4;            // averaging count for the noise model
  double noise_sigma = 0.0;    // per single readout
  std::uint64_t seed = 0;
  double laser_fidelity = 1.0;
  double dephasing_rate = 0.0;  // 1/s, coherence damping between segments
  std::optional<double> ramsey_free_time;  // s; default 1/(2|f_up - f_down|)
  double init_axis2 = 1.5707963267948966;     // second Ramsey pulse axis (y)
  double readout_axis2 = 1.5707963267948966;  // same for the readout block
  bool record_states = false;
};

struct SequenceResult {
  double signal = 0.0;
  DensityState final_state;
  std::vector<DensityState> per_segment_states;  // filled when record_states
};

struct SpectrumPoint {
  double frequency = 0.0;  // Hz
  double signal = 0.0;
};

class Engine {
 public:
  explicit Engine(const HamiltonianParams& p, EngineConfig cfg = {});

  const HamiltonianParams& params() const { return params_; }
  const EngineConfig& config() const { return cfg_; }
  const LabeledSpectrum& spectrum() const { return spectrum_; }
  const TransitionFrequencies& transitions() const { return transitions_; }
  const ComplexMatrix& hamiltonian() const { return hamiltonian_; }

  double f_M() const { return 0.5 * (transitions_.f_up + transitions_.f_down); }
  double mw_rabi_rate() const;
  double ramsey_free_time() const;

  DensityState evolve_free(const DensityState& s, double t, std::optional<RotatingFrame> frame = {}) const;
  DensityState apply_drive(const DensityState& s, const PulseSegment& seg, double t_start = 0.0) const;
  DensityState ramsey_block(const DensityState& s, double f_M_hz, double axis2, double t_start = 0.0) const;

  SequenceResult run_sequence(std::span<const PulseSegment> seq) const;

  // Laser, Ramsey, RF(duration) at f_R, laser, Ramsey, readout.
  std::vector<PulseSegment> rabi_larmor_sequence(double rf_rabi_rate, double rf_duration) const;

  double signal_from(const DensityState& s) const;

  TraceSeries simulate_rabi_larmor(double rf_rabi_rate, std::span<const double> durations,
                                   std::uint64_t trace_index = 0) const;

  // LaserInit, mw_pulse retuned to each grid frequency, readout.
  std::vector<SpectrumPoint> simulate_odmr(std::span<const double> freq_grid, const PulseSegment& mw_pulse) const;

 private:
  struct Transition {
    ComplexMatrix op;                // lab drive operator, product basis
    std::vector<std::size_t> upper;  // eigen indices of the higher-energy side
    std::vector<std::size_t> lower;
    double sign = 1.0;  // +1 when the upper side is the "south" state
  };

  const Transition& transition_for(SegmentKind kind) const;
  ComplexMatrix to_eigen(const ComplexMatrix& rho) const;
  ComplexMatrix from_eigen(const ComplexMatrix& rho) const;
  DensityState drive_rwa(const DensityState& s, const PulseSegment& seg, const Transition& tr, double t_start) const;
  DensityState drive_lab(const DensityState& s, const PulseSegment& seg, const Transition& tr, double t_start) const;
  void dephase(DensityState& s, double duration) const;

  HamiltonianParams params_;
  EngineConfig cfg_;
  ComplexMatrix hamiltonian_;
  LabeledSpectrum spectrum_;
  TransitionFrequencies transitions_;
  Transition mw_;
  Transition rf_;
};

// k * stride / (f_R * oversample) for k = 0..count-1.
std::vector<double> stroboscopic_durations(double f_R_hz, std::size_t count, std::size_t stride, double oversample = 1.0);

}  // namespace nvspin::dynamics
