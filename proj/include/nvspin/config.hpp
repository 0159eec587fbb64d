#pragma once

// Run configuration in boundary units (GHz/MHz/kHz, mT, degrees, ns/us/ms).
// Conversion to the internal rad/s convention happens only here.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvspin/analysis.hpp"
#include "nvspin/dynamics.hpp"
#include "nvspin/spin_core.hpp"

namespace nvspin::config {

struct PhysicsConfig {
  double D_GHz = 2.87;
  double gamma_e_MHz_per_mT = 28.0;
  double gamma_n_kHz_per_mT = -4.32;
  double A_par_MHz = 3.03;
  double A_perp_MHz = 3.65;
  double B_mT = 4.0;
  double theta_deg = 0.0;
  double phi_deg = 0.0;

  HamiltonianParams to_params() const;
};

struct SequenceConfig {
  double mw_pi2_ns = 10.0;
  std::string mw_frame = "rwa";
  std::string rf_frame = "rwa";
  int steps_per_period = 100;
  double contrast_low = 0.7;
  double contrast_high = 1.0;
  int readouts = 4;
  double noise_sigma = 0.0;
  double laser_fidelity = 1.0;
  double dephasing_rate = 0.0;  // 1/s
  std::optional<double> ramsey_free_ns;
  double init_axis2_deg = 90.0;
  double readout_axis2_deg = 90.0;
  double rf_rabi_kHz = 4.30;
};

struct SweepConfig {
  std::vector<double> angles_deg{0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
  std::vector<double> durations_us;  // explicit trace grid; empty means stroboscopic
  std::size_t samples = 400;
  std::size_t stride = 6;
  double oversample = 1.0;
};

struct OdmrConfig {
  bool enabled = false;
  std::optional<double> start_MHz;  // default: around the two 0 <-> -1 lines
  std::optional<double> stop_MHz;
  double step_MHz = 0.05;
  double rabi_MHz = 0.5;
};

struct SensitivityConfig {
  double T2n_ms = 9.0;
  double T2_us = 1.0;
  std::vector<double> angles_deg{0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0, 22.5, 25.0, 27.5, 30.0};
};

struct FitConfig {
  std::optional<double> rabi_hint_kHz;  // default: sequence.rf_rabi_kHz
  bool curve = true;
};

struct OutputConfig {
  std::string dir = ".";
  std::string format = "json";
  bool plot_script = false;
};

struct RunConfig {
  PhysicsConfig physics;
  SequenceConfig sequence;
  SweepConfig sweep;
  OdmrConfig odmr;
  SensitivityConfig sensitivity;
  FitConfig fit;
  OutputConfig output;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  dynamics::EngineConfig engine_config() const;
  analysis::SweepOptions sweep_options() const;
  // Throws InputError on out-of-range values.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
// Missing keys keep their defaults. Accepts either a bare config object or an
// output snapshot carrying it under "config".
RunConfig from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_file(const std::string& path);

dynamics::Frame parse_frame(const std::string& s);

double deg_to_rad(double deg);
double rad_to_deg(double rad);

}  // namespace nvspin::config
