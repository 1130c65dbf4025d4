#pragma once

// Synthetic "human-like" solo recordings used as training fixtures: a
// quasi-periodic oscillation whose frequency and amplitude wander slowly,
// with an optional second harmonic that skews the velocity profile.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mirror/random.hpp"
#include "mirror/signal/trajectory.hpp"

namespace mirror::testing {

struct SyntheticPlayer {
  double f0 = 0.4;          // Hz
  double amp = 0.3;
  double harmonic = 0.0;    // relative 2nd-harmonic amplitude
  double freq_jitter = 0.15;
  double amp_jitter = 0.15;
};

namespace detail {

struct SlowNoise {
  double f[3];
  double ph[3];

  explicit SlowNoise(Rng& rng) {
    for (int i = 0; i < 3; ++i) {
      f[i] = 0.02 + 0.13 * uniform01(rng);
      ph[i] = 2.0 * std::numbers::pi * uniform01(rng);
    }
  }

  double operator()(double t) const {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += std::sin(2.0 * std::numbers::pi * f[i] * t + ph[i]);
    return s / 3.0;
  }
};

}  // namespace detail

inline Trajectory quasi_periodic_trial(const SyntheticPlayer& p, double duration_s, double rate_hz,
                                       std::uint64_t seed) {
  Rng rng(seed);
  const detail::SlowNoise fn(rng), an(rng);
  const double psi = 2.0 * std::numbers::pi * uniform01(rng);
  double phase = 2.0 * std::numbers::pi * uniform01(rng);
  const auto n = static_cast<std::size_t>(std::llround(duration_s * rate_hz)) + 1;
  Trajectory tr{std::vector<double>(n), rate_hz, 0.0};
  const double dt = 1.0 / rate_hz;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double a = p.amp * (1.0 + p.amp_jitter * an(t));
    const double x = 0.5 + a * (std::sin(phase) + p.harmonic * std::sin(2.0 * phase + psi));
    tr.samples[k] = std::clamp(x, 0.02, 0.98);
    phase += 2.0 * std::numbers::pi * p.f0 * (1.0 + p.freq_jitter * fn(t)) * dt;
  }
  return tr;
}

inline std::vector<Trajectory> solo_corpus(const SyntheticPlayer& p, int n_trials, double duration_s,
                                           double rate_hz, std::uint64_t seed) {
  std::vector<Trajectory> out;
  for (int i = 0; i < n_trials; ++i)
    out.push_back(quasi_periodic_trial(p, duration_s, rate_hz, derive_seed(seed, i)));
  return out;
}

// Six distinguishable players used for the VT panel.
inline SyntheticPlayer panel_player(int i) {
  static const SyntheticPlayer panel[] = {
      {0.30, 0.30, 0.00, 0.15, 0.15}, {0.45, 0.25, 0.15, 0.15, 0.10},
      {0.35, 0.35, 0.10, 0.20, 0.15}, {0.50, 0.22, 0.00, 0.10, 0.20},
      {0.40, 0.30, 0.05, 0.15, 0.15}, {0.38, 0.28, 0.12, 0.12, 0.12},
  };
  return panel[(i - 1) % 6];
}

}  // namespace mirror::testing
