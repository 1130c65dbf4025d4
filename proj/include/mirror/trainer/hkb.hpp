#pragma once

#include <cmath>

#include "mirror/error.hpp"

namespace mirror {

// Controlled HKB oscillator:
//   x'' + (alpha x^2 + beta x'^2 - gamma) x' + omega^2 x = u
struct HkbParams {
  double alpha = 1.0;
  double beta = 2.0;
  double gamma = -1.0;
  double omega = 0.1;  // rad/s
};

struct HkbState {
  double x = 0.0;
  double v = 0.0;
};

inline double hkb_accel(double x, double v, const HkbParams& p, double u) {
  return u - (p.alpha * x * x + p.beta * v * v - p.gamma) * v - p.omega * p.omega * x;
}

inline constexpr double kMaxHkbStep = 0.05;

// One classical RK4 step with u held constant.
inline HkbState hkb_step(const HkbState& s, const HkbParams& p, double u, double dt) {
  if (!(dt > 0.0) || dt > kMaxHkbStep)
    throw Error(ErrorKind::degenerate_input, "hkb_step needs 0 < dt <= 0.05 s");
  const double k1x = s.v;
  const double k1v = hkb_accel(s.x, s.v, p, u);
  const double x2 = s.x + 0.5 * dt * k1x, v2 = s.v + 0.5 * dt * k1v;
  const double k2x = v2;
  const double k2v = hkb_accel(x2, v2, p, u);
  const double x3 = s.x + 0.5 * dt * k2x, v3 = s.v + 0.5 * dt * k2v;
  const double k3x = v3;
  const double k3v = hkb_accel(x3, v3, p, u);
  const double x4 = s.x + dt * k3x, v4 = s.v + dt * k3v;
  const double k4x = v4;
  const double k4v = hkb_accel(x4, v4, p, u);
  HkbState out{s.x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
               s.v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
  if (!std::isfinite(out.x) || !std::isfinite(out.v))
    throw Error(ErrorKind::numeric_blowup, "HKB state became non-finite");
  return out;
}

}  // namespace mirror
