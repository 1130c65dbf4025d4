#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "mirror/error.hpp"
#include "mirror/signal/fft.hpp"
#include "mirror/signal/trajectory.hpp"

namespace mirror {

struct PhaseSeries {
  std::vector<double> phi;
  double rate_hz = 100.0;
};

struct RelativePhase {
  PhaseSeries dphi;     // full length
  std::size_t trim = 0; // samples excluded at each end from summaries
  double mean = 0.0;
  double stddev = 0.0;

  std::span<const double> trimmed() const {
    return std::span<const double>(dphi.phi).subspan(trim, dphi.phi.size() - 2 * trim);
  }
};

// Analytic signal by the frequency-domain method: zero the negative
// frequencies, double the positive ones.
inline std::vector<std::complex<double>> analytic_signal(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> xc(x.begin(), x.end());
  auto X = fft::fft(xc);
  for (std::size_t k = 1; k < n; ++k) {
    if (2 * k < n)
      X[k] *= 2.0;
    else if (2 * k > n)
      X[k] = 0.0;
  }
  return fft::ifft(X);
}

inline double wrap_to_pi(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

inline void unwrap_in_place(std::vector<double>& p) {
  for (std::size_t k = 1; k < p.size(); ++k) {
    const double d = wrap_to_pi(p[k] - p[k - 1]);
    p[k] = p[k - 1] + d;
  }
}

// Unwrapped instantaneous phase of a mean-removed signal.
inline PhaseSeries hilbert_phase(const Trajectory& tr) {
  if (tr.size() < 4) throw Error(ErrorKind::degenerate_input, "trajectory too short for a phase estimate");
  double mean = 0.0;
  for (double v : tr.samples) mean += v;
  mean /= static_cast<double>(tr.size());
  std::vector<double> x(tr.samples);
  for (double& v : x) v -= mean;
  const auto z = analytic_signal(x);
  double env = 0.0;
  for (const auto& c : z) env = std::max(env, std::abs(c));
  if (env < 1e-6) throw Error(ErrorKind::undefined_phase, "amplitude envelope is ~0");
  PhaseSeries ps;
  ps.rate_hz = tr.rate_hz;
  ps.phi.resize(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) ps.phi[k] = std::arg(z[k]);
  unwrap_in_place(ps.phi);
  return ps;
}

// dPhi = Phi_a - Phi_b, positive when `a` leads. Each sample is wrapped into
// the 2 pi interval centred on the circular mean of the trimmed series, so
// isolated cycle slips of either phase do not offset the summary statistics.
inline RelativePhase relative_phase(const Trajectory& a, const Trajectory& b, double trim_fraction = 0.05) {
  if (a.size() != b.size()) throw Error(ErrorKind::shape, "relative phase needs equal lengths");
  const auto pa = hilbert_phase(a);
  const auto pb = hilbert_phase(b);
  RelativePhase rp;
  rp.dphi.rate_hz = a.rate_hz;
  rp.dphi.phi.resize(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) rp.dphi.phi[k] = wrap_to_pi(pa.phi[k] - pb.phi[k]);
  rp.trim = static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(a.size())));
  if (2 * rp.trim >= a.size()) rp.trim = 0;

  double c = 0.0, s = 0.0;
  for (double v : rp.trimmed()) {
    c += std::cos(v);
    s += std::sin(v);
  }
  const double centre = (c == 0.0 && s == 0.0) ? 0.0 : std::atan2(s, c);
  for (double& v : rp.dphi.phi) v = centre + wrap_to_pi(v - centre);

  const auto t = rp.trimmed();
  double m = 0.0;
  for (double v : t) m += v;
  m /= static_cast<double>(t.size());
  double var = 0.0;
  for (double v : t) var += (v - m) * (v - m);
  rp.mean = m;
  rp.stddev = t.size() > 1 ? std::sqrt(var / static_cast<double>(t.size() - 1)) : 0.0;
  return rp;
}

// Modulus of the mean unit phasor: 1 is perfect phase locking.
inline double circular_variance(std::span<const double> dphi) {
  if (dphi.empty()) throw Error(ErrorKind::degenerate_input, "empty phase series");
  double c = 0.0, s = 0.0;
  for (double p : dphi) {
    c += std::cos(p);
    s += std::sin(p);
  }
  const double n = static_cast<double>(dphi.size());
  return std::hypot(c / n, s / n);
}

inline double circular_variance(const RelativePhase& rp) { return circular_variance(rp.trimmed()); }

}  // namespace mirror
