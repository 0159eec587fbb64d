#pragma once

// Frequency extraction and least-squares fitting of Rabi / Larmor traces to
//   f(t) = A exp(-B t) (1 - C cos(wR t) - D cos(wL t)) + E.

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "nvspin/dynamics.hpp"
#include "nvspin/trace.hpp"

namespace nvspin::analysis {

struct FitParams {
  double amplitude = 0.0;      // A
  double decay_rate = 0.0;     // B, 1/s
  double rabi_weight = 0.0;    // C
  double larmor_weight = 0.0;  // D
  double offset = 0.0;         // E
  double omega_R = 0.0;        // rad/s
  double omega_L = 0.0;        // rad/s

  static constexpr std::size_t kCount = 7;
  std::array<double, kCount> to_array() const;
  static FitParams from_array(const std::array<double, kCount>& a);
};

double model_eq7(double t, const FitParams& q);
// d model / d q_i in FitParams field order.
std::array<double, FitParams::kCount> model_gradient(double t, const FitParams& q);

// k strongest periodogram peaks (Hz, strongest first). Non-uniform traces are
// resampled linearly; the trace is detrended and Hann windowed first.
// Returns an empty list for a flat trace; throws TooFewSamples below 8 samples.
std::vector<double> dominant_frequencies(const TraceSeries& trace, std::size_t k);

struct FitOptions {
  std::optional<double> rabi_hint;  // rad/s; picks which component is "Rabi"
  int max_iterations = 500;
  double cost_tol = 1e-10;      // relative change of the cost
  double gradient_tol = 1e-8;   // scaled gradient norm
  bool multi_start = true;
};

struct FitResult {
  FitParams params;
  double residual_rms = 0.0;
  std::array<double, FitParams::kCount> covariance_diag{};
  int iterations = 0;
  bool converged = false;
  double cost = 0.0;           // 0.5 * sum r^2
  double gradient_norm = 0.0;  // scaled, at the returned point

  // |D| / |C|
  double larmor_to_rabi_weight() const;
};

// 0.5 * sum (model - signal)^2 and its gradient, exposed for checking.
double fit_cost(const TraceSeries& trace, const FitParams& q);
std::array<double, FitParams::kCount> fit_cost_gradient(const TraceSeries& trace, const FitParams& q);

// Damped Gauss-Newton. Throws TooFewSamples (< 8) or DegenerateTrace (flat).
// Never throws on non-convergence: converged is false and the best point is returned.
FitResult fit_rabi_larmor(const TraceSeries& trace, std::optional<FitParams> init = {}, const FitOptions& opts = {});

// Amplitude of the best sinusoid at freq_hz in (trace - fitted model).
// On a grid where that frequency aliases to DC the sinusoid degenerates into
// a constant; only the part not explained by the fit offset is counted.
double residual_tone_amplitude(const TraceSeries& trace, const FitParams& fit, double freq_hz);

struct SweepOptions {
  double rf_rabi_rate = two_pi * 4.30e3;  // rad/s
  std::size_t samples = 400;
  std::size_t stride = 6;    // sampling step in units of 1/f_R
  double oversample = 1.0;   // >1 gives an incommensurate, denser grid
  unsigned threads = 1;
};

struct SweepRow {
  double theta = 0.0;           // rad
  double omega_L_fit = 0.0;     // rad/s
  double omega_R_fit = 0.0;     // rad/s
  double omega_L_theory = 0.0;  // closed-form m_S = 0 value, rad/s
  double omega_L_exact = 0.0;   // eigensolve, rad/s
  double larmor_to_rabi_weight = 0.0;
  bool converged = false;
};

// Rows are returned in the order of angles regardless of thread count.
std::vector<SweepRow> angle_sweep(const HamiltonianParams& base, std::span<const double> angles,
                                  const dynamics::EngineConfig& engine, const SweepOptions& opts = {});

// Frequencies of the `count` deepest local minima, ascending in frequency.
std::vector<double> find_dips(std::span<const dynamics::SpectrumPoint> spectrum, std::size_t count);

}  // namespace nvspin::analysis
