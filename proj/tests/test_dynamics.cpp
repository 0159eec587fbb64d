#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nvspin/analysis.hpp"
#include "nvspin/dynamics.hpp"
#include "nvspin/errors.hpp"
#include "support.hpp"

using namespace nvspin;
using namespace nvspin::dynamics;
using linalg::ComplexMatrix;
using linalg::cplx;

namespace {

constexpr double kPi = std::numbers::pi;
double deg(double d) { return d * kPi / 180.0; }

DensityState random_state(std::mt19937_64& rng) { return {nvspin::testing::random_density(kDim, rng)}; }

DensityState initialized() { return laser_init(DensityState::maximally_mixed()); }

// Tr(rho O) for a 6x6 observable.
double expect(const DensityState& s, const ComplexMatrix& op) { return (s.rho * op).trace().real(); }

// Conditional probability of m_S = 0 given the nuclear label, from the product-basis diagonal.
double p0_given(const DensityState& s, NuclearSpin m) {
  double tot = 0.0;
  for (int ms : {1, 0, -1}) tot += s.population(ms, m);
  return s.population(0, m) / tot;
}

}  // namespace

TEST_CASE("density state factories") {
  const auto mixed = DensityState::maximally_mixed();
  CHECK(satisfies_invariants(mixed));
  CHECK(mixed.purity() == doctest::Approx(1.0 / 6.0));

  const auto p = DensityState::product(-1, NuclearSpin::Down);
  CHECK(p.population(-1, NuclearSpin::Down) == 1.0);
  CHECK(p.purity() == doctest::Approx(1.0));

  std::vector<cplx> psi(6, 0.0);
  psi[0] = 3.0;
  psi[3] = cplx(0.0, 4.0);
  const auto pure = DensityState::pure(psi);
  CHECK(satisfies_invariants(pure));
  CHECK(pure.population(1, NuclearSpin::Up) == doctest::Approx(9.0 / 25.0));
  CHECK(pure.population_ms(0) == doctest::Approx(16.0 / 25.0));

  CHECK_THROWS_AS(DensityState::pure(std::vector<cplx>(5, 1.0)), InputError);
  CHECK_THROWS_AS(DensityState::pure(std::vector<cplx>(6, 0.0)), InputError);

  DensityState bad;
  bad.rho(0, 0) = 2.0;
  CHECK_FALSE(satisfies_invariants(bad));
  bad.rho(0, 0) = 1.5;
  bad.rho(1, 1) = -0.5;
  CHECK_FALSE(satisfies_invariants(bad));
}

TEST_CASE("reduced states match a brute-force partial trace") {
  std::mt19937_64 rng(4);
  const auto& op = spin_operators();
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_state(rng);
    const auto n = s.nuclear_reduced();
    // <I_a> on the full space equals tr(rho_n I_a).
    CHECK(std::abs((n * op.I.x).trace().real() - expect(s, op.I_full.x)) <= 1e-14);
    CHECK(std::abs((n * op.I.y).trace().real() - expect(s, op.I_full.y)) <= 1e-14);
    CHECK(std::abs((n * op.I.z).trace().real() - expect(s, op.I_full.z)) <= 1e-14);
    const auto e = s.electron_reduced();
    CHECK(std::abs((e * op.S.x).trace().real() - expect(s, op.S_full.x)) <= 1e-14);
    CHECK(std::abs((e * op.S.z).trace().real() - expect(s, op.S_full.z)) <= 1e-14);
    CHECK(std::abs(n.trace() - cplx(1.0)) <= 1e-14);
  }
}

TEST_CASE("fidelity") {
  std::mt19937_64 rng(9);
  const auto a = random_state(rng);
  CHECK(fidelity(a, a) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fidelity(DensityState::product(0, NuclearSpin::Up), DensityState::product(-1, NuclearSpin::Up)) ==
        doctest::Approx(0.0));
  // Pure vs mixed: <psi|rho|psi>
  const auto pure = DensityState::product(0, NuclearSpin::Down);
  CHECK(fidelity(pure, a) == doctest::Approx(a.rho(3, 3).real()).epsilon(1e-10));
  const auto b = random_state(rng);
  CHECK(fidelity(a, b) == doctest::Approx(fidelity(b, a)).epsilon(1e-9));
}

TEST_CASE("laser initialisation") {
  const auto& op = spin_operators();
  SUBCASE("mixed input") {
    const auto s = initialized();
    CHECK(s.population_ms(0) == doctest::Approx(1.0));
    const auto n = s.nuclear_reduced();
    CHECK((n - 0.5 * ComplexMatrix::identity(2)).max_abs() <= 1e-15);
  }
  SUBCASE("idempotent on a polarised product state") {
    const auto s = DensityState::product(0, NuclearSpin::Up);
    CHECK((laser_init(s).rho - s.rho).max_abs() == 0.0);
    const auto once = laser_init(initialized());
    CHECK((laser_init(once).rho - once.rho).max_abs() <= 1e-15);
  }
  SUBCASE("nuclear Bloch vector preserved") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = random_state(rng);
      const auto out = laser_init(s);
      CHECK(satisfies_invariants(out));
      for (const auto* i : {&op.I_full.x, &op.I_full.y, &op.I_full.z}) CHECK(std::abs(expect(out, *i) - expect(s, *i)) <= 1e-10);
      CHECK(out.electron_reduced()(1, 1).real() == doctest::Approx(1.0));
    }
  }
  SUBCASE("partial fidelity") {
    std::mt19937_64 rng(22);
    const auto s = random_state(rng);
    const auto out = laser_init(s, 0.7);
    CHECK(satisfies_invariants(out));
    CHECK(out.population_ms(0) == doctest::Approx(0.7 + 0.1));
    CHECK(out.population_ms(1) == doctest::Approx(0.1));
    // Electron purity can only go up towards the polarised state.
    const auto pe = [](const DensityState& d) {
      const auto e = d.electron_reduced();
      return (e * e).trace().real();
    };
    CHECK(pe(out) >= pe(s) - 1e-12);
    CHECK_THROWS_AS(laser_init(s, 1.5), InputError);
  }
}

TEST_CASE("free evolution") {
  const Engine eng{HamiltonianParams{}};
  std::mt19937_64 rng(3);
  const auto s = random_state(rng);
  CHECK((eng.evolve_free(s, 0.0).rho - s.rho).max_abs() <= 1e-15);
  const auto out = eng.evolve_free(s, 3.7e-6);
  CHECK(satisfies_invariants(out, 1e-10));
  CHECK(out.purity() == doctest::Approx(s.purity()).epsilon(1e-10));
  CHECK_THROWS_AS(eng.evolve_free(s, std::nan("")), InputError);

  SUBCASE("electron coherence precesses at f_up") {
    std::vector<cplx> psi(6, 0.0);
    psi[basis_index(0, NuclearSpin::Up)] = 1.0;
    psi[basis_index(-1, NuclearSpin::Up)] = 1.0;
    const auto start = DensityState::pure(psi);
    const double f_up = eng.transitions().f_up;
    const auto a = basis_index(0, NuclearSpin::Up), b = basis_index(-1, NuclearSpin::Up);
    for (double t : {1.3e-10, 2.9e-9, 4.1e-7, 1.7e-6}) {
      const auto r = eng.evolve_free(start, t);
      const cplx expected = 0.5 * std::polar(1.0, two_pi * f_up * t);
      CHECK(std::abs(r.rho(a, b) - expected) <= 2e-6);
      // In a frame rotating at f_up the coherence stands still.
      const auto rf = eng.evolve_free(start, t, RotatingFrame{f_up, DriveTarget::Microwave});
      CHECK(std::abs(rf.rho(a, b) - 0.5) <= 2e-6);
    }
  }
}

TEST_CASE("drive segments") {
  const HamiltonianParams p;
  EngineConfig cfg;
  const Engine eng(p, cfg);
  const auto& tr = eng.transitions();

  SUBCASE("resonant MW pi/2 pulse, RWA") {
    const double rabi = eng.mw_rabi_rate();
    const auto seg = PulseSegment::mw(kPi / 2 / rabi, tr.f_up, rabi, 0.0);
    const auto out = eng.apply_drive(DensityState::product(0, NuclearSpin::Up), seg);
    CHECK(satisfies_invariants(out));
    CHECK(out.population(0, NuclearSpin::Up) == doctest::Approx(0.5).epsilon(2e-6));
    CHECK(out.population(-1, NuclearSpin::Up) == doctest::Approx(0.5).epsilon(2e-6));
    CHECK(out.purity() == doctest::Approx(1.0).epsilon(1e-10));

  }

  SUBCASE("lab frame reproduces RWA for a weak MW drive") {
    // Counter-rotating corrections scale as rabi / (2 omega), about 1e-4 here.
    const double rabi = two_pi * 1e6;
    EngineConfig lab_cfg;
    lab_cfg.steps_per_period = 200;
    const Engine lab(p, lab_cfg);
    const auto seg = PulseSegment::mw(kPi / 2 / rabi, tr.f_up, rabi, 0.0);
    auto lab_seg = seg;
    lab_seg.frame = Frame::LabFrame;
    const auto a = eng.apply_drive(DensityState::product(0, NuclearSpin::Up), seg);
    const auto b = lab.apply_drive(DensityState::product(0, NuclearSpin::Up), lab_seg);
    CHECK(std::abs(a.population(-1, NuclearSpin::Up) - b.population(-1, NuclearSpin::Up)) <= 1e-3);
    CHECK(fidelity(a, b) >= 0.9999);
  }

  SUBCASE("resonant RF pi pulse") {
    const double rabi = two_pi * 4.3e3;
    const auto seg = PulseSegment::rf(kPi / rabi, tr.f_R, rabi, 0.0);
    const auto out = eng.apply_drive(DensityState::product(-1, NuclearSpin::Up), seg);
    CHECK(out.population(-1, NuclearSpin::Down) > 0.99);
    CHECK(satisfies_invariants(out));
  }

  SUBCASE("RF drive barely touches the m_S = 0 manifold") {
    // ~3 MHz off resonance there; transverse enhancement ~15.5 raises the coupling.
    const double rabi = two_pi * 4.3e3;
    // RWA keeps only the resonant pair, so this needs the full lab-frame drive.
    const auto out = eng.apply_drive(DensityState::product(0, NuclearSpin::Up),
                                     PulseSegment::rf(kPi / rabi, tr.f_R, rabi, 0.0, Frame::LabFrame));
    CHECK(out.population(0, NuclearSpin::Down) > 0.0);
    const double bound = std::pow(15.5 * 4.3e3 / std::abs(tr.f_R - tr.f_larmor_ms0), 2);
    CHECK(out.population(0, NuclearSpin::Down) <= bound);
    CHECK(out.population(0, NuclearSpin::Up) > 1.0 - bound);
  }

  SUBCASE("RF Rabi oscillation follows the two-level formula") {
    const double rabi = two_pi * 4.3e3;
    for (double t : {10e-6, 37e-6, 91e-6}) {
      const auto out = eng.apply_drive(DensityState::product(-1, NuclearSpin::Up), PulseSegment::rf(t, tr.f_R, rabi, 0.0));
      CHECK(out.population(-1, NuclearSpin::Down) == doctest::Approx(std::pow(std::sin(rabi * t / 2), 2)).epsilon(1e-3));
    }
  }

  SUBCASE("zero-duration drive is the identity") {
    std::mt19937_64 rng(1);
    const auto s = random_state(rng);
    CHECK((eng.apply_drive(s, PulseSegment::mw(0.0, tr.f_up, 1e8, 0.0)).rho - s.rho).max_abs() == 0.0);
  }

  SUBCASE("errors") {
    const auto s = initialized();
    CHECK_THROWS_AS(eng.apply_drive(s, PulseSegment::free(1e-9)), MalformedSequence);
    CHECK_THROWS_AS(eng.apply_drive(s, PulseSegment::mw(1e-9, 0.0, 1e8, 0.0)), MalformedSequence);
    CHECK_THROWS_AS(eng.apply_drive(s, PulseSegment::mw(-1e-9, tr.f_up, 1e8, 0.0)), MalformedSequence);
    EngineConfig coarse;
    coarse.steps_per_period = 10;
    const Engine bad(p, coarse);
    CHECK_THROWS_AS(bad.apply_drive(s, PulseSegment::mw(1e-9, tr.f_up, 1e8, 0.0, Frame::LabFrame)), StepResolutionTooCoarse);
    CHECK_NOTHROW(bad.apply_drive(s, PulseSegment::mw(1e-9, tr.f_up, 1e8, 0.0, Frame::RWA)));
  }
}

TEST_CASE("RWA and lab frame agree for the 10 ns pi/2 pulse") {
  const HamiltonianParams p;
  const auto run = [&](Frame frame, int steps) {
    EngineConfig cfg;
    cfg.steps_per_period = steps;
    const Engine eng(p, cfg);
    return eng.apply_drive(initialized(), PulseSegment::mw(cfg.mw_pi2_duration, eng.f_M(), eng.mw_rabi_rate(), 0.0, frame));
  };
  const auto rwa = run(Frame::RWA, 100);
  const auto lab = run(Frame::LabFrame, 100);
  const auto lab_fine = run(Frame::LabFrame, 200);
  CHECK(fidelity(rwa, lab) >= 0.999);
  CHECK(std::abs(fidelity(rwa, lab) - fidelity(rwa, lab_fine)) < 1e-4);
  CHECK(satisfies_invariants(lab, 1e-9));
}

TEST_CASE("Ramsey block") {
  SUBCASE("maps the nuclear state onto the electron") {
    const Engine eng{HamiltonianParams{}};
    const auto out = eng.ramsey_block(initialized(), eng.f_M(), kPi / 2);
    CHECK(satisfies_invariants(out));
    CHECK(std::abs(p0_given(out, NuclearSpin::Up) - p0_given(out, NuclearSpin::Down)) > 0.9);
    CHECK(eng.ramsey_free_time() == doctest::Approx(1.0 / (2.0 * std::abs(eng.transitions().f_up - eng.transitions().f_down))));
  }
  SUBCASE("acts identically on both nuclear states without hyperfine coupling") {
    HamiltonianParams p;
    p.A_par = 0.0;
    p.A_perp = 0.0;
    const Engine eng(p);
    CHECK(eng.transitions().f_up == doctest::Approx(eng.transitions().f_down));
    const auto out = eng.ramsey_block(initialized(), eng.f_M(), kPi / 2);
    CHECK(p0_given(out, NuclearSpin::Up) == doctest::Approx(p0_given(out, NuclearSpin::Down)).epsilon(1e-9));
  }
  SUBCASE("a pulse pair about +x then -x leaves only free precession") {
    HamiltonianParams p;
    p.A_par = 0.0;
    p.A_perp = 0.0;
    EngineConfig cfg;
    cfg.ramsey_free_time = 0.0;
    const Engine eng(p, cfg);
    std::mt19937_64 rng(6);
    const auto s = random_state(rng);
    const auto out = eng.ramsey_block(s, eng.f_M(), kPi);
    const auto expected = eng.evolve_free(s, 2 * cfg.mw_pi2_duration);
    CHECK((out.rho - expected.rho).max_abs() <= 1e-9);
    CHECK(fidelity(out, s) < 0.99);
  }
  SUBCASE("unitary") {
    const Engine eng{HamiltonianParams{}};
    std::mt19937_64 rng(8);
    const auto s = random_state(rng);
    CHECK(eng.ramsey_block(s, eng.f_M(), kPi / 2).purity() == doctest::Approx(s.purity()).epsilon(1e-9));
  }
}

TEST_CASE("sequence execution") {
  const HamiltonianParams p;
  EngineConfig cfg;
  cfg.record_states = true;
  const Engine eng(p, cfg);

  SUBCASE("laser then readout gives the bright level") {
    const std::vector<PulseSegment> seq{PulseSegment::laser(), PulseSegment::readout()};
    CHECK(eng.run_sequence(seq).signal == doctest::Approx(cfg.contrast_high));
  }
  SUBCASE("every intermediate state is a valid density matrix") {
    const auto seq = eng.rabi_larmor_sequence(two_pi * 4.3e3, 50e-6);
    const auto res = eng.run_sequence(seq);
    REQUIRE(res.per_segment_states.size() == seq.size());
    for (const auto& s : res.per_segment_states) CHECK(satisfies_invariants(s, 1e-9));
    CHECK(res.signal >= cfg.contrast_low);
    CHECK(res.signal <= cfg.contrast_high);
  }
  SUBCASE("zero RF duration equals the sequence without the RF segment") {
    auto seq = eng.rabi_larmor_sequence(two_pi * 4.3e3, 0.0);
    const double with_zero = eng.run_sequence(seq).signal;
    seq.erase(seq.begin() + 4);
    CHECK(eng.run_sequence(seq).signal == doctest::Approx(with_zero).epsilon(1e-14));
  }
  SUBCASE("half a Rabi period gives the extremal signal at theta = 0") {
    const double rabi = two_pi * 4.3e3;
    const double base = eng.run_sequence(eng.rabi_larmor_sequence(rabi, 0.0)).signal;
    const double at_pi = eng.run_sequence(eng.rabi_larmor_sequence(rabi, kPi / rabi)).signal;
    for (int k = 1; k < 24; ++k) {
      const double t = k * (2 * kPi / rabi) / 24;
      const double s = eng.run_sequence(eng.rabi_larmor_sequence(rabi, t)).signal;
      CHECK(std::abs(s - base) <= std::abs(at_pi - base) + 1e-9);
    }
    CHECK(std::abs(at_pi - base) > 0.1);
  }
  SUBCASE("malformed sequences") {
    using S = PulseSegment;
    CHECK_THROWS_AS(eng.run_sequence(std::vector<S>{}), MalformedSequence);
    CHECK_THROWS_AS(eng.run_sequence(std::vector<S>{S::readout()}), MalformedSequence);
    CHECK_THROWS_AS(eng.run_sequence(std::vector<S>{S::free(1e-9), S::readout()}), MalformedSequence);
    CHECK_THROWS_AS(eng.run_sequence(std::vector<S>{S::laser(), S::free(1e-9)}), MalformedSequence);
    CHECK_THROWS_AS(eng.run_sequence(std::vector<S>{S::laser(), S::readout(), S::free(1e-9), S::readout()}),
                    MalformedSequence);
    CHECK_THROWS_AS(eng.run_sequence(std::vector<S>{S::laser(), S::free(-1.0), S::readout()}), MalformedSequence);
    CHECK_THROWS_AS(eng.run_sequence(std::vector<S>{S::laser(), S::mw(1e-9, 0.0, 1.0, 0.0), S::readout()}),
                    MalformedSequence);
  }
  SUBCASE("imperfect laser and dephasing keep states physical") {
    EngineConfig lossy;
    lossy.laser_fidelity = 0.8;
    lossy.dephasing_rate = 1e5;
    lossy.record_states = true;
    const Engine e2(p, lossy);
    const auto res = e2.run_sequence(e2.rabi_larmor_sequence(two_pi * 4.3e3, 20e-6));
    for (const auto& s : res.per_segment_states) CHECK(satisfies_invariants(s, 1e-9));
    const std::vector<PulseSegment> seq{PulseSegment::laser(), PulseSegment::readout()};
    CHECK(e2.run_sequence(seq).signal < cfg.contrast_high);
  }
}

TEST_CASE("engine configuration errors") {
  const HamiltonianParams p;
  EngineConfig c;
  c.readouts = 0;
  CHECK_THROWS_AS(Engine(p, c).f_M(), InputError);
  c = {};
  c.noise_sigma = -1.0;
  CHECK_THROWS_AS(Engine(p, c).f_M(), InputError);
  c = {};
  c.mw_pi2_duration = 0.0;
  CHECK_THROWS_AS(Engine(p, c).f_M(), InputError);
  HamiltonianParams strong;
  strong.B = 100.0;
  strong.theta = kPi / 2;
  CHECK_THROWS_AS(Engine{strong}.f_M(), AmbiguousLabeling);
}

TEST_CASE("Rabi/Larmor traces") {
  const Engine eng{HamiltonianParams{}};
  const double rabi = two_pi * 4.3e3;
  CHECK(eng.simulate_rabi_larmor(rabi, std::vector<double>{}).empty());

  const auto one = eng.simulate_rabi_larmor(rabi, std::vector<double>{0.0});
  REQUIRE(one.size() == 1);
  CHECK(one.samples[0].signal == doctest::Approx(eng.run_sequence(eng.rabi_larmor_sequence(rabi, 0.0)).signal));

  CHECK_THROWS_AS(eng.simulate_rabi_larmor(rabi, std::vector<double>{1e-6, 1e-6}), InputError);
  CHECK_THROWS_AS(eng.simulate_rabi_larmor(rabi, std::vector<double>{-1e-6}), InputError);

  const auto grid = stroboscopic_durations(eng.transitions().f_R, 5, 6);
  CHECK(grid[0] == 0.0);
  CHECK(grid[3] == doctest::Approx(18.0 / eng.transitions().f_R));
  CHECK(stroboscopic_durations(1e6, 3, 1, 2.0)[1] == doctest::Approx(0.5e-6));
  CHECK_THROWS_AS(stroboscopic_durations(0.0, 3, 1), InputError);
  CHECK_THROWS_AS(stroboscopic_durations(1e6, 3, 0), InputError);
}

TEST_CASE("noise model is seeded and scaled by the readout count") {
  const HamiltonianParams p;
  EngineConfig quiet;
  EngineConfig noisy;
  noisy.noise_sigma = 0.02;
  noisy.seed = 77;
  const Engine clean(p, quiet), eng(p, noisy);
  const auto grid = stroboscopic_durations(clean.transitions().f_R, 1500, 6);
  const auto ref = clean.simulate_rabi_larmor(two_pi * 4.3e3, grid);
  const auto a = eng.simulate_rabi_larmor(two_pi * 4.3e3, grid, 3);
  const auto b = eng.simulate_rabi_larmor(two_pi * 4.3e3, grid, 3);
  const auto c = eng.simulate_rabi_larmor(two_pi * 4.3e3, grid, 4);
  CHECK(a.signals() == b.signals());
  CHECK(a.signals() != c.signals());
  CHECK(a.meta.trace_index == 3);
  CHECK(a.meta.seed == 77);
  double ss = 0.0, mean = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) mean += a.samples[k].signal - ref.samples[k].signal;
  mean /= static_cast<double>(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) ss += std::pow(a.samples[k].signal - ref.samples[k].signal - mean, 2);
  const double sd = std::sqrt(ss / static_cast<double>(grid.size() - 1));
  CHECK(sd == doctest::Approx(0.02 / 2.0).epsilon(0.08));
  CHECK(std::abs(mean) < 5 * 0.01 / std::sqrt(1500.0));
}

TEST_CASE("trace at theta = 5 deg carries the Rabi and Larmor tones") {
  const Engine eng{with_field(HamiltonianParams{}, 4.0, deg(5.0))};
  const auto grid = stroboscopic_durations(eng.transitions().f_R, 400, 6);
  const auto trace = eng.simulate_rabi_larmor(two_pi * 4.3e3, grid);
  const auto f = analysis::dominant_frequencies(trace, 2);
  REQUIRE(f.size() == 2);
  const double lo = std::min(f[0], f[1]), hi = std::max(f[0], f[1]);
  CHECK(lo == doctest::Approx(4.3e3).epsilon(0.05));
  CHECK(hi == doctest::Approx(eng.transitions().f_larmor_ms0).epsilon(0.05));
}

TEST_CASE("stroboscopic sampling suppresses the fast m_S = -1 precession") {
  HamiltonianParams p = with_field(HamiltonianParams{}, 4.0, deg(5.0));
  EngineConfig cfg;
  cfg.rf_frame = Frame::LabFrame;
  const Engine eng(p, cfg);
  const double fR = eng.transitions().f_R;
  const double rabi = two_pi * 4.3e3;

  const auto fast_weight = [&](double oversample) {
    const auto grid = stroboscopic_durations(fR, 240, 6, oversample);
    const auto trace = eng.simulate_rabi_larmor(rabi, grid);
    const auto fit = analysis::fit_rabi_larmor(trace, {}, {.rabi_hint = rabi});
    return analysis::residual_tone_amplitude(trace, fit.params, fR);
  };
  const double commensurate = fast_weight(1.0);
  const double incommensurate = fast_weight(6.0 / 5.3);
  MESSAGE("fast tone: commensurate " << commensurate << ", incommensurate " << incommensurate);
  CHECK(incommensurate > 1e-5);
  CHECK(commensurate < 0.1 * incommensurate);
}

TEST_CASE("pulsed ODMR") {
  SUBCASE("two hyperfine lines at 4 mT") {
    const Engine eng{HamiltonianParams{}};
    const auto& t = eng.transitions();
    std::vector<double> grid;
    for (double f = 2752e6; f <= 2762e6; f += 0.05e6) grid.push_back(f);
    const double rabi = two_pi * 0.5e6;
    const auto spec = eng.simulate_odmr(grid, PulseSegment::mw(kPi / rabi, grid.front(), rabi, 0.0));
    const auto dips = analysis::find_dips(spec, 2);
    REQUIRE(dips.size() == 2);
    CHECK(std::abs(dips[0] - std::min(t.f_up, t.f_down)) <= 0.05e6);
    CHECK(std::abs(dips[1] - std::max(t.f_up, t.f_down)) <= 0.05e6);
    CHECK(dips[1] - dips[0] == doctest::Approx(3.03e6).epsilon(0.03));
    for (const auto& pt : spec) CHECK(pt.signal <= 1.0 + 1e-12);
  }
  SUBCASE("single line without field or hyperfine coupling") {
    HamiltonianParams p;
    p.B = 0.0;
    p.A_par = 0.0;
    p.A_perp = 0.0;
    const Engine eng(p);
    std::vector<double> grid;
    for (double f = 2865e6; f <= 2875e6; f += 0.05e6) grid.push_back(f);
    const double rabi = two_pi * 0.5e6;
    const auto spec = eng.simulate_odmr(grid, PulseSegment::mw(kPi / rabi, grid.front(), rabi, 0.0));
    const auto dips = analysis::find_dips(spec, 1);
    REQUIRE(dips.size() == 1);
    CHECK(std::abs(dips[0] - 2870e6) <= 0.05e6);
    const auto deepest = std::min_element(spec.begin(), spec.end(), [](auto& a, auto& b) { return a.signal < b.signal; });
    CHECK(deepest->signal == doctest::Approx(0.7).epsilon(1e-6));
  }
  SUBCASE("needs a MW segment") {
    const Engine eng{HamiltonianParams{}};
    CHECK_THROWS_AS(eng.simulate_odmr(std::vector<double>{1e9}, PulseSegment::free(1e-6)), InputError);
  }
}
