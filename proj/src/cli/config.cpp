#include "nvspin/config.hpp"

#include <fstream>
#include <numbers>

#include "nvspin/errors.hpp"

namespace nvspin::config {

using nlohmann::json;

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

HamiltonianParams PhysicsConfig::to_params() const {
  HamiltonianParams p;
  p.D = two_pi * D_GHz * 1e9;
  p.gamma_e = two_pi * gamma_e_MHz_per_mT * 1e6;
  p.gamma_n = two_pi * gamma_n_kHz_per_mT * 1e3;
  p.A_par = two_pi * A_par_MHz * 1e6;
  p.A_perp = two_pi * A_perp_MHz * 1e6;
  p.B = B_mT;
  p.theta = deg_to_rad(theta_deg);
  p.phi = deg_to_rad(phi_deg);
  return p;
}

dynamics::Frame parse_frame(const std::string& s) {
  if (s == "rwa") return dynamics::Frame::RWA;
  if (s == "lab") return dynamics::Frame::LabFrame;
  throw InputError("unknown frame '" + s + "' (expected rwa or lab)");
}

dynamics::EngineConfig RunConfig::engine_config() const {
  dynamics::EngineConfig e;
  e.mw_pi2_duration = sequence.mw_pi2_ns * 1e-9;
  e.mw_frame = parse_frame(sequence.mw_frame);
  e.rf_frame = parse_frame(sequence.rf_frame);
  e.steps_per_period = sequence.steps_per_period;
  e.contrast_low = sequence.contrast_low;
  e.contrast_high = sequence.contrast_high;
  e.readouts = sequence.readouts;
  e.noise_sigma = sequence.noise_sigma;
  e.seed = seed;
  e.laser_fidelity = sequence.laser_fidelity;
  e.dephasing_rate = sequence.dephasing_rate;
  if (sequence.ramsey_free_ns) e.ramsey_free_time = *sequence.ramsey_free_ns * 1e-9;
  e.init_axis2 = deg_to_rad(sequence.init_axis2_deg);
  e.readout_axis2 = deg_to_rad(sequence.readout_axis2_deg);
  return e;
}

analysis::SweepOptions RunConfig::sweep_options() const {
  analysis::SweepOptions o;
  o.rf_rabi_rate = two_pi * sequence.rf_rabi_kHz * 1e3;
  o.samples = sweep.samples;
  o.stride = sweep.stride;
  o.oversample = sweep.oversample;
  o.threads = threads;
  return o;
}

void RunConfig::validate() const {
  physics.to_params().validate();
  parse_frame(sequence.mw_frame);
  parse_frame(sequence.rf_frame);
  if (!(sequence.mw_pi2_ns > 0.0)) throw InputError("sequence.mw_pi2_ns must be > 0");
  if (sequence.steps_per_period < 1) throw InputError("sequence.steps_per_period must be >= 1");
  if (sequence.readouts < 1) throw InputError("sequence.readouts must be >= 1");
  if (sequence.noise_sigma < 0.0) throw InputError("sequence.noise_sigma must be >= 0");
  if (sequence.laser_fidelity < 0.0 || sequence.laser_fidelity > 1.0)
    throw InputError("sequence.laser_fidelity must lie in [0, 1]");
  if (sequence.dephasing_rate < 0.0) throw InputError("sequence.dephasing_rate must be >= 0");
  if (!(sequence.rf_rabi_kHz >= 0.0)) throw InputError("sequence.rf_rabi_kHz must be >= 0");
  if (sweep.stride == 0) throw InputError("sweep.stride must be >= 1");
  if (!(sweep.oversample > 0.0)) throw InputError("sweep.oversample must be > 0");
  if (!(odmr.step_MHz > 0.0) || !(odmr.rabi_MHz > 0.0)) throw InputError("odmr step and Rabi frequency must be > 0");
  if (!(sensitivity.T2n_ms > 0.0) || !(sensitivity.T2_us > 0.0)) throw InputError("coherence times must be > 0");
  if (output.format != "csv" && output.format != "json") throw InputError("format must be csv or json");
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& field) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    field.reset();
    return;
  }
  T v{};
  read(j, key, v);
  field = v;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw InputError(std::string("config section '") + key + "' must be an object");
  return j.at(key);
}

}  // namespace

json to_json(const RunConfig& c) {
  return {
      {"physics",
       {{"D_GHz", c.physics.D_GHz},
        {"gamma_e_MHz_per_mT", c.physics.gamma_e_MHz_per_mT},
        {"gamma_n_kHz_per_mT", c.physics.gamma_n_kHz_per_mT},
        {"A_par_MHz", c.physics.A_par_MHz},
        {"A_perp_MHz", c.physics.A_perp_MHz},
        {"B_mT", c.physics.B_mT},
        {"theta_deg", c.physics.theta_deg},
        {"phi_deg", c.physics.phi_deg}}},
      {"sequence",
       {{"mw_pi2_ns", c.sequence.mw_pi2_ns},
        {"mw_frame", c.sequence.mw_frame},
        {"rf_frame", c.sequence.rf_frame},
        {"steps_per_period", c.sequence.steps_per_period},
        {"contrast_low", c.sequence.contrast_low},
        {"contrast_high", c.sequence.contrast_high},
        {"readouts", c.sequence.readouts},
        {"noise_sigma", c.sequence.noise_sigma},
        {"laser_fidelity", c.sequence.laser_fidelity},
        {"dephasing_rate", c.sequence.dephasing_rate},
        {"ramsey_free_ns", optional_json(c.sequence.ramsey_free_ns)},
        {"init_axis2_deg", c.sequence.init_axis2_deg},
        {"readout_axis2_deg", c.sequence.readout_axis2_deg},
        {"rf_rabi_kHz", c.sequence.rf_rabi_kHz}}},
      {"sweep",
       {{"angles_deg", c.sweep.angles_deg},
        {"durations_us", c.sweep.durations_us},
        {"samples", c.sweep.samples},
        {"stride", c.sweep.stride},
        {"oversample", c.sweep.oversample}}},
      {"odmr",
       {{"enabled", c.odmr.enabled},
        {"start_MHz", optional_json(c.odmr.start_MHz)},
        {"stop_MHz", optional_json(c.odmr.stop_MHz)},
        {"step_MHz", c.odmr.step_MHz},
        {"rabi_MHz", c.odmr.rabi_MHz}}},
      {"sensitivity",
       {{"T2n_ms", c.sensitivity.T2n_ms}, {"T2_us", c.sensitivity.T2_us}, {"angles_deg", c.sensitivity.angles_deg}}},
      {"fit", {{"rabi_hint_kHz", optional_json(c.fit.rabi_hint_kHz)}, {"curve", c.fit.curve}}},
      {"output", {{"dir", c.output.dir}, {"format", c.output.format}, {"plot_script", c.output.plot_script}}},
      {"seed", c.seed},
      {"threads", c.threads},
  };
}

RunConfig from_json(const json& root, RunConfig c) {
  if (!root.is_object()) throw InputError("config must be a JSON object");
  const json& j = root.contains("config") && root.at("config").is_object() ? root.at("config") : root;

  const auto& ph = section(j, "physics");
  read(ph, "D_GHz", c.physics.D_GHz);
  read(ph, "gamma_e_MHz_per_mT", c.physics.gamma_e_MHz_per_mT);
  read(ph, "gamma_n_kHz_per_mT", c.physics.gamma_n_kHz_per_mT);
  read(ph, "A_par_MHz", c.physics.A_par_MHz);
  read(ph, "A_perp_MHz", c.physics.A_perp_MHz);
  read(ph, "B_mT", c.physics.B_mT);
  read(ph, "theta_deg", c.physics.theta_deg);
  read(ph, "phi_deg", c.physics.phi_deg);

  const auto& sq = section(j, "sequence");
  read(sq, "mw_pi2_ns", c.sequence.mw_pi2_ns);
  read(sq, "mw_frame", c.sequence.mw_frame);
  read(sq, "rf_frame", c.sequence.rf_frame);
  read(sq, "steps_per_period", c.sequence.steps_per_period);
  read(sq, "contrast_low", c.sequence.contrast_low);
  read(sq, "contrast_high", c.sequence.contrast_high);
  read(sq, "readouts", c.sequence.readouts);
  read(sq, "noise_sigma", c.sequence.noise_sigma);
  read(sq, "laser_fidelity", c.sequence.laser_fidelity);
  read(sq, "dephasing_rate", c.sequence.dephasing_rate);
  read(sq, "ramsey_free_ns", c.sequence.ramsey_free_ns);
  read(sq, "init_axis2_deg", c.sequence.init_axis2_deg);
  read(sq, "readout_axis2_deg", c.sequence.readout_axis2_deg);
  read(sq, "rf_rabi_kHz", c.sequence.rf_rabi_kHz);

  const auto& sw = section(j, "sweep");
  read(sw, "angles_deg", c.sweep.angles_deg);
  read(sw, "durations_us", c.sweep.durations_us);
  read(sw, "samples", c.sweep.samples);
  read(sw, "stride", c.sweep.stride);
  read(sw, "oversample", c.sweep.oversample);

  const auto& od = section(j, "odmr");
  read(od, "enabled", c.odmr.enabled);
  read(od, "start_MHz", c.odmr.start_MHz);
  read(od, "stop_MHz", c.odmr.stop_MHz);
  read(od, "step_MHz", c.odmr.step_MHz);
  read(od, "rabi_MHz", c.odmr.rabi_MHz);

  const auto& se = section(j, "sensitivity");
  read(se, "T2n_ms", c.sensitivity.T2n_ms);
  read(se, "T2_us", c.sensitivity.T2_us);
  read(se, "angles_deg", c.sensitivity.angles_deg);

  const auto& fi = section(j, "fit");
  read(fi, "rabi_hint_kHz", c.fit.rabi_hint_kHz);
  read(fi, "curve", c.fit.curve);

  const auto& out = section(j, "output");
  read(out, "dir", c.output.dir);
  read(out, "format", c.output.format);
  read(out, "plot_script", c.output.plot_script);

  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  return c;
}

RunConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config file '" + path + "': " + e.what());
  }
  return from_json(j);
}

}  // namespace nvspin::config
