#include "nvspin/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "nvspin/analysis.hpp"
#include "nvspin/dynamics.hpp"
#include "nvspin/effective_model.hpp"
#include "nvspin/errors.hpp"

#ifndef NVSPIN_VERSION
#define NVSPIN_VERSION "0.0.0"
#endif

namespace nvspin::cli {

using nlohmann::json;
namespace fs = std::filesystem;

const char* version() { return NVSPIN_VERSION; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

constexpr double kHz = 1e3;
constexpr double kMHz = 1e6;

double to_kHz(double omega) { return omega / two_pi / kHz; }

json header(const config::RunConfig& cfg, const char* command) {
  return {{"command", command}, {"version", version()}, {"config", config::to_json(cfg)}};
}

fs::path out_path(const config::RunConfig& cfg, const std::string& name) {
  const fs::path dir(cfg.output.dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error("write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Every CSV gets a sidecar carrying the config snapshot and version.
void write_csv(const config::RunConfig& cfg, const std::string& name, const std::string& body, const char* command) {
  write_text(out_path(cfg, name), body);
  json meta = header(cfg, command);
  meta["file"] = name;
  write_json(out_path(cfg, name + ".meta.json"), meta);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<std::string> cols) {
    bool first = true;
    for (const auto& c : cols) {
      if (!first) s_ << ',';
      s_ << c;
      first = false;
    }
    s_ << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... vals) {
    bool first = true;
    ((s_ << (first ? "" : ",") << cell(vals), first = false), ...);
    s_ << '\n';
  }
  std::string str() const { return s_.str(); }

 private:
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  std::ostringstream s_;
};

void write_plot_script(const config::RunConfig& cfg, const std::string& name, const std::string& body) {
  if (cfg.output.plot_script) write_text(out_path(cfg, name), body);
}

const char* nuclear_name(NuclearSpin m) { return m == NuclearSpin::Up ? "up" : "down"; }

json transitions_json(const TransitionFrequencies& t) {
  return {{"f_up_Hz", t.f_up}, {"f_down_Hz", t.f_down}, {"f_R_Hz", t.f_R}, {"f_larmor_ms0_Hz", t.f_larmor_ms0}};
}

}  // namespace

json cmd_spectrum(const config::RunConfig& cfg) {
  cfg.validate();
  const auto p = cfg.physics.to_params();
  const dynamics::Engine eng(p, cfg.engine_config());
  const auto& spec = eng.spectrum();
  const auto& tr = eng.transitions();

  json doc = header(cfg, "spectrum");
  json levels = json::array();
  const double scale = std::max(1.0, std::abs(spec.decomp.eigenvalues.back()));
  for (std::size_t i = 0; i < kDim; ++i) {
    const auto& l = spec.labels[i];
    levels.push_back({{"index", i},
                      {"m_S", l.m_S},
                      {"m_I", nuclear_name(l.m_I)},
                      {"energy_MHz", spec.decomp.eigenvalues[i] / two_pi / kMHz},
                      {"overlap", l.overlap}});
  }
  doc["levels"] = levels;

  // Pairs of levels whose splitting vanishes at double precision.
  json degenerate = json::array();
  for (std::size_t i = 0; i + 1 < kDim; ++i) {
    const double gap = spec.decomp.eigenvalues[i + 1] - spec.decomp.eigenvalues[i];
    if (gap <= 1e-12 * scale) {
      const auto& a = spec.labels[i];
      const auto& b = spec.labels[i + 1];
      degenerate.push_back({{"m_S", {a.m_S, b.m_S}}, {"m_I", {nuclear_name(a.m_I), nuclear_name(b.m_I)}}});
    }
  }
  doc["degenerate_pairs"] = degenerate;
  doc["ms0_doublet_degenerate"] = std::abs(tr.f_larmor_ms0) * two_pi <= 1e-12 * scale;
  doc["transitions"] = transitions_json(tr);

  json closed = json::object();
  if (std::abs(p.phi) == 0.0) {
    closed["larmor_ms0_Hz"] = effective::effective_larmor(p, 0) / two_pi;
    closed["larmor_msm1_Hz"] = effective::effective_larmor(p, -1) / two_pi;
    closed["larmor_msp1_Hz"] = effective::effective_larmor(p, 1) / two_pi;
    closed["validity_warning"] = effective::validity_warning(p);
  } else {
    closed = nullptr;  // closed form assumes the field in the x-z plane
  }
  doc["closed_form"] = closed;

  if (cfg.odmr.enabled) {
    const double lo_line = std::min(tr.f_up, tr.f_down);
    const double hi_line = std::max(tr.f_up, tr.f_down);
    const double start = cfg.odmr.start_MHz ? *cfg.odmr.start_MHz * kMHz : lo_line - 3.0 * kMHz;
    const double stop = cfg.odmr.stop_MHz ? *cfg.odmr.stop_MHz * kMHz : hi_line + 3.0 * kMHz;
    if (!(stop > start)) throw InputError("odmr stop must exceed start");
    const double step = cfg.odmr.step_MHz * kMHz;
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    if (n > 1000000) throw InputError("odmr grid too large");
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) grid[i] = start + static_cast<double>(i) * step;
    const double rabi = two_pi * cfg.odmr.rabi_MHz * kMHz;
    const auto pulse =
        dynamics::PulseSegment::mw(std::numbers::pi / rabi, grid.front(), rabi, 0.0, config::parse_frame(cfg.sequence.mw_frame));
    const auto points = eng.simulate_odmr(grid, pulse);

    CsvWriter csv({"frequency_MHz", "signal"});
    for (const auto& pt : points) csv.row(pt.frequency / kMHz, pt.signal);
    write_csv(cfg, "odmr.csv", csv.str(), "spectrum");
    json dips = json::array();
    for (double f : analysis::find_dips(points, 2)) dips.push_back(f);
    doc["odmr"] = {{"file", "odmr.csv"}, {"points", points.size()}, {"dips_Hz", dips}};
    write_plot_script(cfg, "odmr.gp",
                      "set datafile separator ','\nset key autotitle columnhead\n"
                      "set xlabel 'frequency (MHz)'\nset ylabel 'signal'\n"
                      "plot 'odmr.csv' using 1:2 with linespoints\n");
  }

  if (cfg.output.format == "csv") {
    CsvWriter lv({"index", "m_S", "m_I", "energy_MHz", "overlap"});
    for (std::size_t i = 0; i < kDim; ++i)
      lv.row(static_cast<int>(i), spec.labels[i].m_S, std::string(nuclear_name(spec.labels[i].m_I)),
             spec.decomp.eigenvalues[i] / two_pi / kMHz, spec.labels[i].overlap);
    write_csv(cfg, "levels.csv", lv.str(), "spectrum");
  }
  write_json(out_path(cfg, "spectrum.json"), doc);
  return doc;
}

namespace {

std::vector<double> trace_durations(const config::RunConfig& cfg, const dynamics::Engine& eng) {
  if (!cfg.sweep.durations_us.empty()) {
    std::vector<double> d;
    d.reserve(cfg.sweep.durations_us.size());
    for (double us : cfg.sweep.durations_us) d.push_back(us * 1e-6);
    return d;
  }
  if (cfg.sweep.samples == 0) throw InputError("sweep.samples must be >= 1");
  if (!(eng.transitions().f_R > 0.0)) throw InputError("f_R vanishes; give explicit durations");
  return dynamics::stroboscopic_durations(eng.transitions().f_R, cfg.sweep.samples, cfg.sweep.stride,
                                          cfg.sweep.oversample);
}

}  // namespace

json cmd_trace(const config::RunConfig& cfg) {
  cfg.validate();
  const auto p = cfg.physics.to_params();
  const dynamics::Engine eng(p, cfg.engine_config());
  const auto durations = trace_durations(cfg, eng);
  const auto trace = eng.simulate_rabi_larmor(two_pi * cfg.sequence.rf_rabi_kHz * kHz, durations, 0);

  CsvWriter csv({"duration_us", "signal"});
  for (const auto& s : trace.samples) csv.row(s.duration * 1e6, s.signal);
  write_text(out_path(cfg, "trace.csv"), csv.str());

  json doc = header(cfg, "trace");
  doc["file"] = "trace.csv";
  doc["samples"] = trace.size();
  doc["transitions"] = transitions_json(eng.transitions());
  doc["f_M_Hz"] = eng.f_M();
  doc["ramsey_free_time_ns"] = eng.ramsey_free_time() * 1e9;
  doc["mw_rabi_rate_rad_per_s"] = eng.mw_rabi_rate();
  write_json(out_path(cfg, "trace.json"), doc);
  write_plot_script(cfg, "trace.gp",
                    "set datafile separator ','\nset key autotitle columnhead\n"
                    "set xlabel 'RF duration (us)'\nset ylabel 'signal'\n"
                    "plot 'trace.csv' using 1:2 with linespoints\n");
  return doc;
}

TraceSeries parse_trace_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  TraceSeries trace;
  const auto fail = [&](const std::string& msg) {
    throw InputError(source + ":" + std::to_string(lineno) + ": " + msg);
  };
  const auto parse_cell = [&](std::string_view cell, const char* what) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
      fail(std::string("invalid ") + what + " '" + std::string(cell) + "'");
    return v;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen_header) {
      if (line.rfind("duration_us,signal", 0) != 0) fail("expected header 'duration_us,signal'");
      seen_header = true;
      continue;
    }
    const std::string_view sv(line);
    const auto c1 = sv.find(',');
    if (c1 == std::string_view::npos) fail("expected at least two columns");
    const auto c2 = sv.find(',', c1 + 1);
    const double t = parse_cell(sv.substr(0, c1), "duration");
    const double s = parse_cell(sv.substr(c1 + 1, c2 == std::string_view::npos ? sv.npos : c2 - c1 - 1), "signal");
    if (t < 0.0) fail("negative duration");
    if (!trace.samples.empty() && !(t * 1e-6 > trace.samples.back().duration)) fail("durations must increase strictly");
    trace.samples.push_back({t * 1e-6, s});
  }
  if (!seen_header) {
    lineno = 1;
    fail("empty file");
  }
  return trace;
}

TraceSeries read_trace_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open trace file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_trace_csv(ss.str(), path);
}

json cmd_fit(const config::RunConfig& cfg, const std::string& trace_file) {
  cfg.validate();
  const auto trace = read_trace_csv(trace_file);
  analysis::FitOptions fo;
  fo.rabi_hint = two_pi * kHz * (cfg.fit.rabi_hint_kHz ? *cfg.fit.rabi_hint_kHz : cfg.sequence.rf_rabi_kHz);
  const auto fit = analysis::fit_rabi_larmor(trace, {}, fo);
  const auto& q = fit.params;

  json doc = header(cfg, "fit");
  doc["input"] = trace_file;
  doc["samples"] = trace.size();
  doc["params"] = {{"A", q.amplitude},       {"B_per_s", q.decay_rate}, {"C", q.rabi_weight},
                   {"D", q.larmor_weight},   {"E", q.offset},           {"omega_R_rad_per_s", q.omega_R},
                   {"omega_L_rad_per_s", q.omega_L}};
  doc["omega_R_kHz"] = to_kHz(q.omega_R);
  doc["omega_L_kHz"] = to_kHz(q.omega_L);
  doc["larmor_to_rabi_weight"] = fit.larmor_to_rabi_weight();
  doc["residual_rms"] = fit.residual_rms;
  doc["covariance_diag"] = fit.covariance_diag;
  doc["iterations"] = fit.iterations;
  doc["converged"] = fit.converged;

  if (cfg.fit.curve) {
    CsvWriter csv({"duration_us", "signal", "model"});
    for (const auto& s : trace.samples) csv.row(s.duration * 1e6, s.signal, analysis::model_eq7(s.duration, q));
    write_csv(cfg, "fit_curve.csv", csv.str(), "fit");
    doc["curve_file"] = "fit_curve.csv";
    write_plot_script(cfg, "fit.gp",
                      "set datafile separator ','\nset key autotitle columnhead\n"
                      "set xlabel 'RF duration (us)'\nset ylabel 'signal'\n"
                      "plot 'fit_curve.csv' using 1:2 with points, '' using 1:3 with lines\n");
  }
  write_json(out_path(cfg, "fit.json"), doc);
  return doc;
}

json cmd_sweep(const config::RunConfig& cfg) {
  cfg.validate();
  if (cfg.sweep.angles_deg.empty()) throw InputError("empty angle grid");
  std::vector<double> angles;
  for (double a : cfg.sweep.angles_deg) angles.push_back(config::deg_to_rad(a));
  const auto rows = analysis::angle_sweep(cfg.physics.to_params(), angles, cfg.engine_config(), cfg.sweep_options());

  CsvWriter csv({"theta_deg", "omega_L_fit_kHz", "omega_L_eq6_kHz", "omega_L_exact_kHz", "omega_R_fit_kHz",
                 "larmor_to_rabi_weight", "converged"});
  json jrows = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv.row(cfg.sweep.angles_deg[i], to_kHz(r.omega_L_fit), to_kHz(r.omega_L_theory), to_kHz(r.omega_L_exact),
            to_kHz(r.omega_R_fit), r.larmor_to_rabi_weight, r.converged);
    jrows.push_back({{"theta_deg", cfg.sweep.angles_deg[i]},
                     {"omega_L_fit_kHz", to_kHz(r.omega_L_fit)},
                     {"omega_L_eq6_kHz", to_kHz(r.omega_L_theory)},
                     {"omega_L_exact_kHz", to_kHz(r.omega_L_exact)},
                     {"omega_R_fit_kHz", to_kHz(r.omega_R_fit)},
                     {"larmor_to_rabi_weight", r.larmor_to_rabi_weight},
                     {"converged", r.converged}});
  }
  write_csv(cfg, "sweep.csv", csv.str(), "sweep");
  json doc = header(cfg, "sweep");
  doc["file"] = "sweep.csv";
  doc["rows"] = jrows;
  if (cfg.output.format == "json") write_json(out_path(cfg, "sweep.json"), doc);
  write_plot_script(cfg, "sweep.gp",
                    "set datafile separator ','\nset key autotitle columnhead\n"
                    "set xlabel 'theta (deg)'\nset ylabel 'Larmor frequency (kHz)'\n"
                    "plot 'sweep.csv' using 1:2 with points, '' using 1:3 with lines, '' using 1:4 with lines\n");
  return doc;
}

json cmd_sensitivity(const config::RunConfig& cfg) {
  cfg.validate();
  if (cfg.sensitivity.angles_deg.empty()) throw InputError("empty angle grid");
  const double T2n = cfg.sensitivity.T2n_ms * 1e-3;
  const double T2 = cfg.sensitivity.T2_us * 1e-6;
  json rows = json::array();
  CsvWriter csv({"theta_deg", "larmor_ms0_kHz", "phase_nuclear_rad", "phase_electron_rad", "gain",
                 "gain_printed_coefficient", "validity_warning"});
  double coeff = 0.0;
  for (double deg : cfg.sensitivity.angles_deg) {
    auto p = cfg.physics.to_params();
    p.theta = config::deg_to_rad(deg);
    const auto r = effective::sensitivity_gain(p, T2n, T2);
    coeff = r.coefficient_computed;
    rows.push_back({{"theta_deg", deg},
                    {"larmor_ms0_kHz", to_kHz(r.omega_nuclear)},
                    {"phase_nuclear_rad", r.phase_nuclear},
                    {"phase_electron_rad", r.phase_electron},
                    {"gain", r.gain},
                    {"gain_printed_coefficient", r.gain_printed_coefficient},
                    {"validity_warning", r.validity_warning}});
    csv.row(deg, to_kHz(r.omega_nuclear), r.phase_nuclear, r.phase_electron, r.gain, r.gain_printed_coefficient,
            r.validity_warning);
  }
  json doc = header(cfg, "sensitivity");
  doc["coefficient_printed"] = effective::kPrintedTan2Coefficient;
  doc["coefficient_computed"] = coeff;
  doc["T2n_star_s"] = T2n;
  doc["T2_star_s"] = T2;
  doc["rows"] = rows;
  write_json(out_path(cfg, "sensitivity.json"), doc);
  if (cfg.output.format == "csv") write_csv(cfg, "sensitivity.csv", csv.str(), "sensitivity");
  return doc;
}

namespace {

// Flags bound to optionals so that only flags actually given override the config.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> format;
  std::optional<bool> plot_script;

  std::optional<double> b, theta, phi, d_ghz, gamma_e_mhz, gamma_n_khz, a_par_mhz, a_perp_mhz;

  std::optional<double> rf_rabi_khz, mw_pi2_ns, contrast_low, contrast_high, noise, ramsey_free_ns;
  std::optional<double> laser_fidelity, dephasing_rate;
  std::optional<int> readouts, steps_per_period;
  std::optional<std::string> mw_frame, rf_frame;

  std::optional<std::vector<double>> durations, angles;
  std::optional<std::size_t> samples, stride;
  std::optional<double> oversample;

  std::optional<bool> odmr;
  std::optional<double> odmr_start, odmr_stop, odmr_step, odmr_rabi;

  std::optional<double> rabi_hint_khz;
  std::optional<bool> no_curve;

  std::optional<double> t2n_ms, t2_us;
};

template <typename T>
void apply(const std::optional<T>& src, T& dst) {
  if (src) dst = *src;
}
template <typename T>
void apply(const std::optional<T>& src, std::optional<T>& dst) {
  if (src) dst = *src;
}

config::RunConfig resolve(const Overrides& o, const std::string& command) {
  config::RunConfig c = o.config_path ? config::load_file(*o.config_path) : config::RunConfig{};
  if (!o.threads) {
    if (const char* env = std::getenv("NVSPIN_THREADS"); env && *env) {
      unsigned n = 0;
      const std::string_view sv(env);
      const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), n);
      if (res.ec != std::errc() || res.ptr != sv.data() + sv.size() || n == 0)
        throw InputError("NVSPIN_THREADS must be a positive integer");
      c.threads = n;
    }
  }
  apply(o.out, c.output.dir);
  apply(o.seed, c.seed);
  apply(o.threads, c.threads);
  apply(o.format, c.output.format);
  apply(o.plot_script, c.output.plot_script);

  apply(o.b, c.physics.B_mT);
  apply(o.theta, c.physics.theta_deg);
  apply(o.phi, c.physics.phi_deg);
  apply(o.d_ghz, c.physics.D_GHz);
  apply(o.gamma_e_mhz, c.physics.gamma_e_MHz_per_mT);
  apply(o.gamma_n_khz, c.physics.gamma_n_kHz_per_mT);
  apply(o.a_par_mhz, c.physics.A_par_MHz);
  apply(o.a_perp_mhz, c.physics.A_perp_MHz);

  apply(o.rf_rabi_khz, c.sequence.rf_rabi_kHz);
  apply(o.mw_pi2_ns, c.sequence.mw_pi2_ns);
  apply(o.contrast_low, c.sequence.contrast_low);
  apply(o.contrast_high, c.sequence.contrast_high);
  apply(o.noise, c.sequence.noise_sigma);
  apply(o.ramsey_free_ns, c.sequence.ramsey_free_ns);
  apply(o.laser_fidelity, c.sequence.laser_fidelity);
  apply(o.dephasing_rate, c.sequence.dephasing_rate);
  apply(o.readouts, c.sequence.readouts);
  apply(o.steps_per_period, c.sequence.steps_per_period);
  apply(o.mw_frame, c.sequence.mw_frame);
  apply(o.rf_frame, c.sequence.rf_frame);

  apply(o.durations, c.sweep.durations_us);
  if (o.angles) {
    if (command == "sensitivity")
      c.sensitivity.angles_deg = *o.angles;
    else
      c.sweep.angles_deg = *o.angles;
  }
  apply(o.samples, c.sweep.samples);
  apply(o.stride, c.sweep.stride);
  apply(o.oversample, c.sweep.oversample);

  apply(o.odmr, c.odmr.enabled);
  apply(o.odmr_start, c.odmr.start_MHz);
  apply(o.odmr_stop, c.odmr.stop_MHz);
  apply(o.odmr_step, c.odmr.step_MHz);
  apply(o.odmr_rabi, c.odmr.rabi_MHz);

  apply(o.rabi_hint_khz, c.fit.rabi_hint_kHz);
  if (o.no_curve && *o.no_curve) c.fit.curve = false;

  apply(o.t2n_ms, c.sensitivity.T2n_ms);
  apply(o.t2_us, c.sensitivity.T2_us);
  return c;
}

// Accepts "1,2,3" as well as space-separated values; "" yields an empty list.
std::vector<double> parse_list(const std::vector<std::string>& items, const char* flag) {
  std::vector<double> out;
  for (const auto& item : items) {
    std::string_view rest(item);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      std::string_view cell = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
      while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
      if (cell.empty()) continue;
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw InputError(std::string(flag) + ": invalid number '" + std::string(cell) + "'");
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation and analysis toolkit for the 15N nuclear spin of an NV center", "nvspin"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  Overrides o;
  std::vector<std::string> durations_raw, angles_raw;
  std::string trace_file;

  app.add_option("--config", o.config_path, "JSON config file (flags win)");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--seed", o.seed, "Noise RNG seed");
  app.add_option("--threads", o.threads, "Worker threads (fallback: NVSPIN_THREADS)");
  app.add_option("--format", o.format, "Primary output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--plot-script", o.plot_script, "Also write a gnuplot script");

  app.add_option("--b", o.b, "Field magnitude (mT)");
  app.add_option("--theta", o.theta, "Field angle from the NV axis (deg)");
  app.add_option("--phi", o.phi, "Field azimuth (deg)");
  app.add_option("--d-ghz", o.d_ghz, "Zero-field splitting (GHz)");
  app.add_option("--gamma-e-mhz", o.gamma_e_mhz, "Electron gyromagnetic ratio (MHz/mT)");
  app.add_option("--gamma-n-khz", o.gamma_n_khz, "Nuclear gyromagnetic ratio (kHz/mT)");
  app.add_option("--a-par-mhz", o.a_par_mhz, "Parallel hyperfine (MHz)");
  app.add_option("--a-perp-mhz", o.a_perp_mhz, "Perpendicular hyperfine (MHz)");

  app.add_option("--rf-rabi-khz", o.rf_rabi_khz, "RF Rabi frequency (kHz)");
  app.add_option("--mw-pi2-ns", o.mw_pi2_ns, "MW pi/2 pulse length (ns)");
  app.add_option("--contrast-low", o.contrast_low, "Signal at P(m_S=0)=0");
  app.add_option("--contrast-high", o.contrast_high, "Signal at P(m_S=0)=1");
  app.add_option("--noise", o.noise, "Per-readout noise sigma");
  app.add_option("--readouts", o.readouts, "Readouts averaged per point");
  app.add_option("--mw-frame", o.mw_frame, "MW drive frame")->check(CLI::IsMember({"rwa", "lab"}));
  app.add_option("--rf-frame", o.rf_frame, "RF drive frame")->check(CLI::IsMember({"rwa", "lab"}));
  app.add_option("--steps-per-period", o.steps_per_period, "Lab-frame integrator steps per drive period");
  app.add_option("--ramsey-free-ns", o.ramsey_free_ns, "Ramsey free evolution (ns)");
  app.add_option("--laser-fidelity", o.laser_fidelity, "Optical polarisation fidelity");
  app.add_option("--dephasing-rate", o.dephasing_rate, "Coherence damping rate (1/s)");

  auto* spectrum = app.add_subcommand("spectrum", "Level table, transitions and optional ODMR");
  spectrum->add_flag("--odmr", o.odmr, "Simulate a pulsed ODMR spectrum");
  spectrum->add_option("--odmr-start-mhz", o.odmr_start, "ODMR start (MHz)");
  spectrum->add_option("--odmr-stop-mhz", o.odmr_stop, "ODMR stop (MHz)");
  spectrum->add_option("--odmr-step-mhz", o.odmr_step, "ODMR step (MHz)");
  spectrum->add_option("--odmr-rabi-mhz", o.odmr_rabi, "ODMR pi-pulse Rabi frequency (MHz)");

  auto* trace = app.add_subcommand("trace", "Simulate a Rabi/Larmor trace");
  trace->add_option("--durations", durations_raw, "RF durations (us), comma separated")->expected(1, -1);
  trace->add_option("--samples", o.samples, "Points on the default grid");
  trace->add_option("--stride", o.stride, "Grid step in units of 1/f_R");
  trace->add_option("--oversample", o.oversample, "Grid densification factor");

  auto* fit = app.add_subcommand("fit", "Fit a trace CSV");
  fit->add_option("trace_file", trace_file, "CSV with duration_us,signal")->required();
  fit->add_option("--rabi-hint-khz", o.rabi_hint_khz, "Expected RF Rabi frequency (kHz)");
  fit->add_flag("--no-curve", o.no_curve, "Skip the fitted-curve CSV");

  auto* sweep = app.add_subcommand("sweep", "Fit traces over an angle grid");
  sweep->add_option("--angles", angles_raw, "Angles (deg), comma separated")->expected(1, -1);
  sweep->add_option("--samples", o.samples, "Points per trace");
  sweep->add_option("--stride", o.stride, "Grid step in units of 1/f_R");
  sweep->add_option("--oversample", o.oversample, "Grid densification factor");

  auto* sens = app.add_subcommand("sensitivity", "Sensitivity gain over an angle grid");
  sens->add_option("--angles", angles_raw, "Angles (deg), comma separated")->expected(1, -1);
  sens->add_option("--t2n-ms", o.t2n_ms, "Nuclear T2* (ms)");
  sens->add_option("--t2-us", o.t2_us, "Electron T2* (us)");

  for (auto* sub : {spectrum, trace, fit, sweep, sens}) sub->fallthrough();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << version() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (trace->parsed() && !durations_raw.empty()) o.durations = parse_list(durations_raw, "--durations");
    if (!angles_raw.empty()) o.angles = parse_list(angles_raw, "--angles");

    const std::string name = app.get_subcommands().front()->get_name();
    const auto cfg = resolve(o, name);
    json doc;
    if (name == "spectrum") {
      doc = cmd_spectrum(cfg);
      const auto& t = doc["transitions"];
      out << "f_up " << format_number(t["f_up_Hz"].get<double>()) << " Hz\n"
          << "f_down " << format_number(t["f_down_Hz"].get<double>()) << " Hz\n"
          << "f_R " << format_number(t["f_R_Hz"].get<double>()) << " Hz\n"
          << "f_larmor_ms0 " << format_number(t["f_larmor_ms0_Hz"].get<double>()) << " Hz\n";
    } else if (name == "trace") {
      doc = cmd_trace(cfg);
      out << "wrote " << doc["samples"].get<std::size_t>() << " samples to trace.csv\n";
    } else if (name == "fit") {
      doc = cmd_fit(cfg, trace_file);
      out << "omega_R " << format_number(doc["omega_R_kHz"].get<double>()) << " kHz\n"
          << "omega_L " << format_number(doc["omega_L_kHz"].get<double>()) << " kHz\n"
          << "converged " << (doc["converged"].get<bool>() ? "yes" : "no") << '\n';
    } else if (name == "sweep") {
      doc = cmd_sweep(cfg);
      out << "wrote " << doc["rows"].size() << " rows to sweep.csv\n";
    } else {
      doc = cmd_sensitivity(cfg);
      out << "wrote " << doc["rows"].size() << " rows to sensitivity.json\n";
    }
    return kOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kComputationError;
  }
}

}  // namespace nvspin::cli
