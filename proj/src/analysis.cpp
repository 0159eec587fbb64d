#include "nvspin/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "nvspin/effective_model.hpp"
#include "nvspin/errors.hpp"

namespace nvspin::analysis {

namespace {

constexpr std::size_t kMinSamples = 8;
constexpr std::size_t N = FitParams::kCount;

using Vec = std::array<double, N>;
using Mat = std::array<std::array<double, N>, N>;

// Cholesky solve of a x = b; false if a is not positive definite.
bool cholesky_solve(Mat a, Vec b, Vec& x) {
  for (std::size_t j = 0; j < N; ++j) {
    double d = a[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j][k] * a[j][k];
    if (!(d > 0.0)) return false;
    a[j][j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < N; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
      a[i][j] = s / a[j][j];
    }
  }
  for (std::size_t i = 0; i < N; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i][k] * b[k];
    b[i] = s / a[i][i];
  }
  for (std::size_t i = N; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < N; ++k) s -= a[k][i] * b[k];
    b[i] = s / a[i][i];
  }
  x = b;
  return true;
}

struct Normal {
  Mat jtj{};
  Vec jtr{};
  double cost = 0.0;
};

Normal normal_equations(const TraceSeries& trace, const FitParams& q) {
  Normal ne;
  for (const auto& s : trace.samples) {
    const double r = model_eq7(s.duration, q) - s.signal;
    const auto g = model_gradient(s.duration, q);
    ne.cost += 0.5 * r * r;
    for (std::size_t i = 0; i < N; ++i) {
      ne.jtr[i] += g[i] * r;
      for (std::size_t j = 0; j <= i; ++j) ne.jtj[i][j] += g[i] * g[j];
    }
  }
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) ne.jtj[i][j] = ne.jtj[j][i];
  return ne;
}

// Gradient with each parameter measured in units of its Jacobian column norm.
double scaled_gradient_norm(const Normal& ne) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double col = std::sqrt(ne.jtj[i][i]);
    if (col > 0.0) s += std::pow(ne.jtr[i] / col, 2);
  }
  return std::sqrt(s);
}

std::array<double, N> covariance_diagonal(const Normal& ne, double sigma2) {
  Vec scale{};
  for (std::size_t i = 0; i < N; ++i) scale[i] = ne.jtj[i][i] > 0.0 ? 1.0 / std::sqrt(ne.jtj[i][i]) : 0.0;
  linalg::ComplexMatrix m(N, N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) m(i, j) = ne.jtj[i][j] * scale[i] * scale[j];
  const auto d = linalg::eigh(m);
  const double cutoff = 1e-12 * std::max(d.eigenvalues.back(), 0.0);
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < N; ++k)
      if (d.eigenvalues[k] > cutoff) s += std::norm(d.eigenvectors(i, k)) / d.eigenvalues[k];
    out[i] = sigma2 * s * scale[i] * scale[i];
  }
  return out;
}

struct Resampled {
  std::vector<double> t;
  std::vector<double> y;
};

Resampled uniform(const TraceSeries& trace) {
  Resampled r{trace.durations(), trace.signals()};
  const std::size_t n = r.t.size();
  const double step = (r.t.back() - r.t.front()) / static_cast<double>(n - 1);
  bool is_uniform = step > 0.0;
  for (std::size_t k = 1; k < n && is_uniform; ++k)
    is_uniform = std::abs((r.t[k] - r.t[k - 1]) - step) <= 1e-6 * step;
  if (is_uniform) return r;
  if (!trace.strictly_increasing()) throw InputError("trace durations must be strictly increasing");

  Resampled u{std::vector<double>(n), std::vector<double>(n)};
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = r.t.front() + step * static_cast<double>(k);
    while (seg + 2 < n && r.t[seg + 1] < t) ++seg;
    const double w = (t - r.t[seg]) / (r.t[seg + 1] - r.t[seg]);
    u.t[k] = t;
    u.y[k] = r.y[seg] + std::clamp(w, 0.0, 1.0) * (r.y[seg + 1] - r.y[seg]);
  }
  return u;
}

// Least-squares fit of [1, cos(wR t), cos(wL t)] at fixed frequencies,
// mapped onto the model with B = 0.
FitParams linear_seed(const TraceSeries& trace, double wR, double wL, double decay, double half_range) {
  std::array<std::array<double, 3>, 3> m{};
  std::array<double, 3> b{};
  for (const auto& s : trace.samples) {
    const std::array<double, 3> row{1.0, std::cos(wR * s.duration), std::cos(wL * s.duration)};
    for (std::size_t i = 0; i < 3; ++i) {
      b[i] += row[i] * s.signal;
      for (std::size_t j = 0; j < 3; ++j) m[i][j] += row[i] * row[j];
    }
  }
  // Small ridge keeps the solve defined when a column is degenerate.
  const double ridge = 1e-9 * static_cast<double>(trace.size());
  for (std::size_t i = 0; i < 3; ++i) m[i][i] += ridge;
  // Gaussian elimination, 3x3.
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < 3; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    std::swap(m[c], m[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < 3; ++r) {
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < 3; ++k) m[r][k] -= f * m[c][k];
      b[r] -= f * b[c];
    }
  }
  std::array<double, 3> x{};
  for (std::size_t i = 3; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < 3; ++k) s -= m[i][k] * x[k];
    x[i] = s / m[i][i];
  }
  FitParams q;
  q.amplitude = half_range;
  q.decay_rate = decay;
  q.rabi_weight = -x[1] / half_range;
  q.larmor_weight = -x[2] / half_range;
  q.offset = x[0] - half_range;
  q.omega_R = wR;
  q.omega_L = wL;
  return q;
}

FitResult levenberg_marquardt(const TraceSeries& trace, FitParams start, const FitOptions& opts) {
  FitResult res;
  FitParams q = start;
  Normal ne = normal_equations(trace, q);
  double lambda = 1e-3;
  const double perfect = 1e-30 * static_cast<double>(trace.size());

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (scaled_gradient_norm(ne) < opts.gradient_tol || ne.cost <= perfect) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    while (!accepted && lambda < 1e20) {
      Mat a = ne.jtj;
      double max_diag = 0.0;
      for (std::size_t i = 0; i < N; ++i) max_diag = std::max(max_diag, a[i][i]);
      for (std::size_t i = 0; i < N; ++i) a[i][i] += lambda * std::max(a[i][i], 1e-15 * max_diag);
      Vec rhs{};
      for (std::size_t i = 0; i < N; ++i) rhs[i] = -ne.jtr[i];
      Vec delta{};
      if (!cholesky_solve(a, rhs, delta)) {
        lambda *= 10.0;
        continue;
      }
      auto arr = q.to_array();
      for (std::size_t i = 0; i < N; ++i) arr[i] += delta[i];
      FitParams trial = FitParams::from_array(arr);
      trial.decay_rate = std::max(trial.decay_rate, 0.0);
      Normal tne = normal_equations(trace, trial);
      if (std::isfinite(tne.cost) && tne.cost < ne.cost) {
        const double rel = (ne.cost - tne.cost) / std::max(ne.cost, 1e-300);
        q = trial;
        ne = tne;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel < opts.cost_tol) res.converged = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) {
      // No downhill step left at any damping: a stationary point up to rounding.
      res.converged = scaled_gradient_norm(ne) < 1e-6 * std::sqrt(2.0 * ne.cost + 1e-300) ||
                      scaled_gradient_norm(ne) < opts.gradient_tol;
      break;
    }
    if (res.converged) {
      ++it;
      break;
    }
  }

  q.omega_R = std::abs(q.omega_R);
  q.omega_L = std::abs(q.omega_L);
  res.params = q;
  res.iterations = it;
  res.cost = ne.cost;
  res.gradient_norm = scaled_gradient_norm(ne);
  res.residual_rms = std::sqrt(2.0 * ne.cost / static_cast<double>(trace.size()));
  const double dof = static_cast<double>(trace.size()) - static_cast<double>(N);
  res.covariance_diag = covariance_diagonal(ne, dof > 0.0 ? 2.0 * ne.cost / dof : 0.0);
  return res;
}

// The component closer to the hint is the Rabi one.
void assign_labels(FitResult& r, std::optional<double> rabi_hint) {
  auto& q = r.params;
  if (!rabi_hint || std::abs(q.omega_L - *rabi_hint) >= std::abs(q.omega_R - *rabi_hint)) return;
  std::swap(q.omega_R, q.omega_L);
  std::swap(q.rabi_weight, q.larmor_weight);
  std::swap(r.covariance_diag[2], r.covariance_diag[3]);
  std::swap(r.covariance_diag[5], r.covariance_diag[6]);
}

}  // namespace

std::array<double, FitParams::kCount> FitParams::to_array() const {
  return {amplitude, decay_rate, rabi_weight, larmor_weight, offset, omega_R, omega_L};
}

FitParams FitParams::from_array(const std::array<double, kCount>& a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
}

double model_eq7(double t, const FitParams& q) {
  return q.amplitude * std::exp(-q.decay_rate * t) *
             (1.0 - q.rabi_weight * std::cos(q.omega_R * t) - q.larmor_weight * std::cos(q.omega_L * t)) +
         q.offset;
}

std::array<double, FitParams::kCount> model_gradient(double t, const FitParams& q) {
  const double e = std::exp(-q.decay_rate * t);
  const double cr = std::cos(q.omega_R * t);
  const double cl = std::cos(q.omega_L * t);
  const double g = 1.0 - q.rabi_weight * cr - q.larmor_weight * cl;
  const double ae = q.amplitude * e;
  return {e * g,
          -t * ae * g,
          -ae * cr,
          -ae * cl,
          1.0,
          ae * q.rabi_weight * t * std::sin(q.omega_R * t),
          ae * q.larmor_weight * t * std::sin(q.omega_L * t)};
}

double FitResult::larmor_to_rabi_weight() const {
  return std::abs(params.larmor_weight) / std::max(std::abs(params.rabi_weight), 1e-300);
}

double fit_cost(const TraceSeries& trace, const FitParams& q) {
  double c = 0.0;
  for (const auto& s : trace.samples) c += 0.5 * std::pow(model_eq7(s.duration, q) - s.signal, 2);
  return c;
}

std::array<double, FitParams::kCount> fit_cost_gradient(const TraceSeries& trace, const FitParams& q) {
  return normal_equations(trace, q).jtr;
}

std::vector<double> dominant_frequencies(const TraceSeries& trace, std::size_t k) {
  if (trace.size() < kMinSamples) throw TooFewSamples("need at least 8 samples for a periodogram");
  const auto [t, y0] = uniform(trace);
  const std::size_t n = t.size();
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw InputError("trace durations must be strictly increasing");

  // Remove mean and linear trend.
  const double tm = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(n);
  const double ym = std::accumulate(y0.begin(), y0.end(), 0.0) / static_cast<double>(n);
  double stt = 0.0, sty = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    stt += (t[i] - tm) * (t[i] - tm);
    sty += (t[i] - tm) * (y0[i] - ym);
    scale = std::max(scale, std::abs(y0[i]));
  }
  const double slope = sty / stt;
  std::vector<double> y(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = y0[i] - ym - slope * (t[i] - tm);
    ss += y[i] * y[i];
  }
  if (std::sqrt(ss / static_cast<double>(n)) <= 1e-12 * std::max(scale, 1e-300)) return {};

  for (std::size_t i = 0; i < n; ++i)
    y[i] *= 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n - 1)));

  constexpr std::size_t pad = 8;
  const std::size_t grid = pad * n / 2;
  const double df = 1.0 / (dt * static_cast<double>(pad * n));
  std::vector<double> power(grid + 1);
  for (std::size_t j = 0; j <= grid; ++j) {
    const std::complex<double> step = std::polar(1.0, -two_pi * df * static_cast<double>(j) * dt);
    std::complex<double> ph = 1.0, acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += y[i] * ph;
      ph *= step;
    }
    power[j] = std::norm(acc);
  }

  const double pmax = *std::max_element(power.begin(), power.end());
  struct Peak {
    double f;
    double p;
  };
  std::vector<Peak> peaks;
  for (std::size_t j = std::max<std::size_t>(pad, 1); j + 1 <= grid; ++j) {
    if (!(power[j] > power[j - 1] && power[j] >= power[j + 1])) continue;
    if (power[j] < 1e-10 * pmax) continue;
    const double den = power[j - 1] - 2.0 * power[j] + power[j + 1];
    const double shift = den != 0.0 ? 0.5 * (power[j - 1] - power[j + 1]) / den : 0.0;
    peaks.push_back({(static_cast<double>(j) + shift) * df, power[j]});
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.p > b.p; });
  std::vector<double> out;
  for (std::size_t i = 0; i < std::min(k, peaks.size()); ++i) out.push_back(peaks[i].f);
  return out;
}

FitResult fit_rabi_larmor(const TraceSeries& trace, std::optional<FitParams> init, const FitOptions& opts) {
  if (trace.size() < kMinSamples) throw TooFewSamples("need at least 8 samples to fit");
  if (!trace.strictly_increasing()) throw InputError("trace durations must be strictly increasing");
  const auto sig = trace.signals();
  const auto [lo, hi] = std::minmax_element(sig.begin(), sig.end());
  const double half_range = 0.5 * (*hi - *lo);
  if (!(half_range > 1e-14 * std::max(std::abs(*hi), 1e-300))) throw DegenerateTrace("trace has zero variance");

  const double span = trace.samples.back().duration - trace.samples.front().duration;
  FitParams seed;
  if (init) {
    seed = *init;
  } else {
    auto freqs = dominant_frequencies(trace, 2);
    double wR = freqs.empty() ? two_pi / span : two_pi * freqs[0];
    double wL = freqs.size() > 1 ? two_pi * freqs[1] : 2.7 * wR;
    if (opts.rabi_hint && std::abs(wL - *opts.rabi_hint) < std::abs(wR - *opts.rabi_hint)) std::swap(wR, wL);

    // Decay from the envelope: spread of the first half vs the second half.
    const std::size_t mid = sig.size() / 2;
    const auto spread = [&](std::size_t a, std::size_t b) {
      const auto [l, h] = std::minmax_element(sig.begin() + static_cast<std::ptrdiff_t>(a),
                                              sig.begin() + static_cast<std::ptrdiff_t>(b));
      return *h - *l;
    };
    const double s1 = spread(0, mid), s2 = spread(mid, sig.size());
    const double decay = (s1 > 0.0 && s2 > 0.0 && s1 > s2) ? std::log(s1 / s2) / (0.5 * span) : 0.0;
    seed = linear_seed(trace, wR, wL, decay, half_range);
  }

  FitResult best = levenberg_marquardt(trace, seed, opts);
  if (opts.multi_start && (!best.converged || best.residual_rms > 0.05 * half_range)) {
    const std::array<std::array<double, 2>, 4> factors{{{0.5, 1.0}, {2.0, 1.0}, {1.0, 0.5}, {1.0, 2.0}}};
    for (const auto& f : factors) {
      const FitParams alt = linear_seed(trace, seed.omega_R * f[0], seed.omega_L * f[1], seed.decay_rate, half_range);
      FitResult r = levenberg_marquardt(trace, alt, opts);
      if (r.cost < best.cost) best = r;
    }
  }
  assign_labels(best, opts.rabi_hint);
  return best;
}

double residual_tone_amplitude(const TraceSeries& trace, const FitParams& fit, double freq_hz) {
  const std::size_t n = trace.size();
  std::vector<double> r(n), c(n), s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = trace.samples[i].duration;
    r[i] = trace.samples[i].signal - model_eq7(t, fit);
    c[i] = std::cos(two_pi * freq_hz * t);
    s[i] = std::sin(two_pi * freq_hz * t);
  }
  const auto center = [&](std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    for (auto& x : v) x -= m;
  };
  center(r);
  center(c);
  center(s);
  double cc = 0, ss = 0, cs = 0, rc = 0, rs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cc += c[i] * c[i];
    ss += s[i] * s[i];
    cs += c[i] * s[i];
    rc += r[i] * c[i];
    rs += r[i] * s[i];
  }
  // Pseudo-inverse of the 2x2 normal matrix; columns that alias to DC vanish.
  linalg::ComplexMatrix m{{cc, cs}, {cs, ss}};
  const auto d = linalg::eigh(m);
  const double cutoff = 1e-8 * static_cast<double>(n);
  double a = 0.0, b = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    if (d.eigenvalues[k] <= cutoff) continue;
    const double v0 = d.eigenvectors(0, k).real(), v1 = d.eigenvectors(1, k).real();
    const double proj = (v0 * rc + v1 * rs) / d.eigenvalues[k];
    a += v0 * proj;
    b += v1 * proj;
  }
  return std::hypot(a, b);
}

std::vector<SweepRow> angle_sweep(const HamiltonianParams& base, std::span<const double> angles,
                                  const dynamics::EngineConfig& engine, const SweepOptions& opts) {
  if (angles.empty()) throw InputError("angle sweep needs at least one angle");
  std::vector<SweepRow> rows(angles.size());
  std::vector<std::exception_ptr> errors(angles.size());
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    for (std::size_t i = next++; i < angles.size(); i = next++) {
      try {
        HamiltonianParams p = base;
        p.theta = angles[i];
        p.validate();
        const dynamics::Engine eng(p, engine);
        const auto durations = dynamics::stroboscopic_durations(eng.transitions().f_R, opts.samples, opts.stride,
                                                                opts.oversample);
        const auto trace = eng.simulate_rabi_larmor(opts.rf_rabi_rate, durations, i);
        FitOptions fo;
        fo.rabi_hint = opts.rf_rabi_rate;
        const auto fit = fit_rabi_larmor(trace, {}, fo);
        rows[i] = {angles[i],
                   fit.params.omega_L,
                   fit.params.omega_R,
                   effective::effective_larmor(p, 0),
                   two_pi * eng.transitions().f_larmor_ms0,
                   fit.larmor_to_rabi_weight(),
                   fit.converged};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const unsigned nthreads = std::max(1U, std::min<unsigned>(opts.threads, static_cast<unsigned>(angles.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < nthreads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

std::vector<double> find_dips(std::span<const dynamics::SpectrumPoint> spectrum, std::size_t count) {
  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i + 1 < spectrum.size(); ++i)
    if (spectrum[i].signal < spectrum[i - 1].signal && spectrum[i].signal <= spectrum[i + 1].signal)
      minima.push_back(i);
  std::sort(minima.begin(), minima.end(),
            [&](std::size_t a, std::size_t b) { return spectrum[a].signal < spectrum[b].signal; });
  if (minima.size() > count) minima.resize(count);
  std::vector<double> out;
  for (auto i : minima) out.push_back(spectrum[i].frequency);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace nvspin::analysis
