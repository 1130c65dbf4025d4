#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mirror/error.hpp"

namespace mirror {

// Uniformly sampled 1-D position signal. Positions are in normalized
// play-area units; sample k sits at t0 + k / rate_hz.
struct Trajectory {
  std::vector<double> samples;
  double rate_hz = 100.0;
  double t0 = 0.0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double dt() const { return 1.0 / rate_hz; }
  double time_at(std::size_t k) const { return t0 + static_cast<double>(k) / rate_hz; }
  double duration() const {
    return samples.empty() ? 0.0 : static_cast<double>(samples.size() - 1) / rate_hz;
  }
};

namespace detail {

inline void require_rate(double rate_hz) {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz))
    throw Error(ErrorKind::degenerate_input, "sample rate must be positive");
}

// Second derivatives of the natural cubic spline through uniformly spaced
// samples (unit spacing). Thomas algorithm on the standard tridiagonal system.
inline std::vector<double> natural_spline_moments(const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  const std::size_t k = n - 2;
  std::vector<double> c(k), d(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
    if (i == 0) {
      c[i] = 1.0 / 4.0;
      d[i] = rhs / 4.0;
    } else {
      const double denom = 4.0 - c[i - 1];
      c[i] = 1.0 / denom;
      d[i] = (rhs - d[i - 1]) / denom;
    }
  }
  m[k] = d[k - 1];
  for (std::size_t i = k - 1; i-- > 0;) m[i + 1] = d[i] - c[i] * m[i + 2];
  return m;
}

}  // namespace detail

// Cubic-spline resampling over the same time span. Sample instants shared by
// both grids reproduce the original values exactly.
inline Trajectory resample(const Trajectory& tr, double new_rate_hz) {
  detail::require_rate(new_rate_hz);
  detail::require_rate(tr.rate_hz);
  if (tr.size() < 2) throw Error(ErrorKind::degenerate_input, "resample needs at least 2 samples");

  const auto& y = tr.samples;
  const std::size_t n = y.size();
  const double span = static_cast<double>(n - 1) / tr.rate_hz;
  const auto out_n = static_cast<std::size_t>(std::floor(span * new_rate_hz + 1e-9)) + 1;
  const auto m = detail::natural_spline_moments(y);

  Trajectory out{std::vector<double>(out_n), new_rate_hz, tr.t0};
  for (std::size_t k = 0; k < out_n; ++k) {
    // Position in units of original sample index.
    const double u = static_cast<double>(k) * tr.rate_hz / new_rate_hz;
    auto i = static_cast<std::size_t>(std::floor(u));
    if (i >= n - 1) i = n - 2;
    const double a = u - static_cast<double>(i);
    if (a == 0.0) {
      out.samples[k] = y[i];
      continue;
    }
    if (a == 1.0) {
      out.samples[k] = y[i + 1];
      continue;
    }
    const double b = 1.0 - a;
    out.samples[k] = b * y[i] + a * y[i + 1] +
                     ((b * b * b - b) * m[i] + (a * a * a - a) * m[i + 1]) / 6.0;
  }
  return out;
}

// Central differences in the interior, one-sided at the ends.
inline std::vector<double> velocity(const Trajectory& tr) {
  const auto& x = tr.samples;
  const std::size_t n = x.size();
  if (n < 2) throw Error(ErrorKind::degenerate_input, "velocity needs at least 2 samples");
  std::vector<double> v(n);
  const double r = tr.rate_hz;
  v[0] = (x[1] - x[0]) * r;
  v[n - 1] = (x[n - 1] - x[n - 2]) * r;
  for (std::size_t k = 1; k + 1 < n; ++k) v[k] = (x[k + 1] - x[k - 1]) * r * 0.5;
  return v;
}

// ---- CSV persistence: header `t,x`, one row per sample. ----

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,x\n";
  char buf[96];
  for (std::size_t k = 0; k < tr.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.6f,%.17g\n", tr.time_at(k), tr.samples[k]);
    os << buf;
  }
}

inline void save_trajectory_csv(const std::string& path, const Trajectory& tr) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path);
  write_trajectory_csv(os, tr);
}

// Parses `t,x` CSV; the rate is inferred from the mean time step.
inline Trajectory read_trajectory_csv(std::istream& is, const std::string& name = "<stream>") {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::io, name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,x") throw Error(ErrorKind::io, name + ": expected header 't,x'");
  std::vector<double> ts, xs;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(ErrorKind::io, name + ": malformed row " + std::to_string(row));
    try {
      std::size_t used = 0;
      const double t = std::stod(line.substr(0, comma), &used);
      const double x = std::stod(line.substr(comma + 1));
      ts.push_back(t);
      xs.push_back(x);
    } catch (const std::exception&) {
      throw Error(ErrorKind::io, name + ": malformed row " + std::to_string(row));
    }
  }
  if (xs.empty()) throw Error(ErrorKind::io, name + ": no samples");
  Trajectory tr;
  tr.samples = std::move(xs);
  tr.t0 = ts.front();
  if (ts.size() >= 2) {
    const double step = (ts.back() - ts.front()) / static_cast<double>(ts.size() - 1);
    if (!(step > 0.0)) throw Error(ErrorKind::io, name + ": timestamps not increasing");
    // Timestamps carry limited decimals; snap the rate to 1e-6 Hz.
    tr.rate_hz = std::round(1.0 / step * 1e6) / 1e6;
  }
  return tr;
}

inline Trajectory load_trajectory_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot read " + path);
  return read_trajectory_csv(is, path);
}

}  // namespace mirror
