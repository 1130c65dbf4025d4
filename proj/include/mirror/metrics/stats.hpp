#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mirror/error.hpp"
#include "mirror/signal/trajectory.hpp"

namespace mirror {

inline double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::shape, "rmse needs equal lengths");
  if (a.empty()) throw Error(ErrorKind::degenerate_input, "rmse of empty series");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

inline double rmse(const Trajectory& a, const Trajectory& b) {
  if (std::abs(a.rate_hz - b.rate_hz) > 1e-12) throw Error(ErrorKind::shape, "rmse needs equal rates");
  return rmse(a.samples, b.samples);
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1); 0 for a single value
};

inline MeanSd mean_sd(std::span<const double> xs) {
  MeanSd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return r;
  double v = 0.0;
  for (double x : xs) v += (x - r.mean) * (x - r.mean);
  r.sd = std::sqrt(v / static_cast<double>(xs.size() - 1));
  return r;
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  int dof = 0;
};

// Two-sided p-value of a t statistic with `dof` degrees of freedom.
inline double t_two_sided_p(double t, int dof) {
  boost::math::students_t dist(static_cast<double>(dof));
  return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::shape, "paired t-test needs equal lengths");
  if (a.size() < 2) throw Error(ErrorKind::insufficient_data, "paired t-test needs at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const auto ms = mean_sd(d);
  if (!(ms.sd > 0.0)) throw Error(ErrorKind::undefined_statistic, "differences have zero variance");
  TTestResult r;
  r.dof = static_cast<int>(d.size()) - 1;
  r.t = ms.mean / (ms.sd / std::sqrt(static_cast<double>(d.size())));
  r.p = t_two_sided_p(r.t, r.dof);
  return r;
}

}  // namespace mirror
