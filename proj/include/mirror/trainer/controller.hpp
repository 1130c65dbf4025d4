#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mirror/error.hpp"
#include "mirror/trainer/hkb.hpp"

namespace mirror {

// Weights and horizon of the receding-horizon cost. Positions here are in the
// oscillator's own (centred) coordinates.
struct ControlCost {
  HkbParams hkb{};
  double theta_p = 0.9;    // weight on tracking the partner position
  double eta = 1e-4;       // control-energy weight
  double horizon_s = 0.03;
  int substeps = 3;        // RK4 steps across the horizon
  double u_max = 10.0;

  double substep_dt() const { return horizon_s / substeps; }
};

// J(u) = 1/2 theta (x(T) - r_p)^2
//      + 1/2 int_0^T [(1 - theta)(x' - r_sigma')^2 + eta u^2] dtau
// with u constant over the horizon. `sigma_vel` holds the reference velocity
// at the substeps+1 rollout nodes; the integral is trapezoidal over them.
inline double cost_J(double u, const HkbState& s, const ControlCost& c, double r_p_pred,
                     std::span<const double> sigma_vel) {
  if (sigma_vel.size() < static_cast<std::size_t>(c.substeps) + 1)
    throw Error(ErrorKind::shape, "reference velocity does not cover the horizon");
  const double dt = c.substep_dt();
  auto integrand = [&](double v, double ref) {
    const double e = v - ref;
    return (1.0 - c.theta_p) * e * e + c.eta * u * u;
  };
  HkbState st = s;
  double prev = integrand(st.v, sigma_vel[0]);
  double integral = 0.0;
  for (int k = 1; k <= c.substeps; ++k) {
    st = hkb_step(st, c.hkb, u, dt);
    const double cur = integrand(st.v, sigma_vel[static_cast<std::size_t>(k)]);
    integral += 0.5 * dt * (prev + cur);
    prev = cur;
  }
  const double e = st.x - r_p_pred;
  return 0.5 * c.theta_p * e * e + 0.5 * integral;
}

struct ScalarMinimizerOptions {
  int grid_points = 33;
  double rel_tolerance = 1e-3;  // final bracket width relative to (hi - lo) / 2
};

// Uniform grid scan followed by golden-section refinement of the bracket
// around the best grid point. Returns the best abscissa evaluated.
template <typename CostFn>
double minimize_scalar(CostFn&& f, double lo, double hi, const ScalarMinimizerOptions& opt = {}) {
  const int n = std::max(opt.grid_points, 3);
  const double step = (hi - lo) / (n - 1);
  int best_i = 0;
  double best_u = lo;
  double best_f = f(lo);
  for (int i = 1; i < n; ++i) {
    const double u = (i == n - 1) ? hi : lo + step * i;
    const double fu = f(u);
    if (fu < best_f) {
      best_f = fu;
      best_u = u;
      best_i = i;
    }
  }
  double a = best_i == 0 ? lo : lo + step * (best_i - 1);
  double b = best_i == n - 1 ? hi : lo + step * (best_i + 1);
  const double tol = opt.rel_tolerance * 0.5 * (hi - lo);
  constexpr double inv_phi = 0.6180339887498949;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double mid = 0.5 * (a + b);
  const double fm = f(mid);
  double u = best_u, fu = best_f;
  if (fc < fu) { u = c; fu = fc; }
  if (fd < fu) { u = d; fu = fd; }
  if (fm < fu) { u = mid; fu = fm; }
  return u;
}

inline double choose_control(const HkbState& s, const ControlCost& c, double r_p_pred,
                             std::span<const double> sigma_vel) {
  return minimize_scalar([&](double u) { return cost_J(u, s, c, r_p_pred, sigma_vel); }, -c.u_max,
                         c.u_max);
}

}  // namespace mirror
