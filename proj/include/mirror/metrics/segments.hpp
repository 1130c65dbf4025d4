#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mirror/signal/trajectory.hpp"

namespace mirror {

enum class Direction { left_to_right, right_to_left };

struct SegmentStats {
  double skewness = 0.0;
  double kurtosis = 0.0;
  int n_samples = 0;
  Direction direction = Direction::left_to_right;
};

inline constexpr int kMinSegmentSamples = 20;

// Shape statistics of a non-negative curve on [0,1] treated as a density
// (trapezoid rule). Skewness is m3 / var^1.5 and kurtosis m4 / var^2.
inline SegmentStats shape_moments(std::span<const double> f_in) {
  const std::size_t m = f_in.size();
  SegmentStats st;
  st.n_samples = static_cast<int>(m);
  if (m < 2) return st;
  const double h = 1.0 / static_cast<double>(m - 1);
  auto trap = [&](auto&& g) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double w = (j == 0 || j + 1 == m) ? 0.5 : 1.0;
      s += w * g(j);
    }
    return s * h;
  };
  auto t = [&](std::size_t j) { return static_cast<double>(j) * h; };
  const double area = trap([&](std::size_t j) { return f_in[j]; });
  if (!(area > 0.0)) return st;
  const double mu = trap([&](std::size_t j) { return t(j) * f_in[j]; }) / area;
  auto central = [&](int p) {
    return trap([&](std::size_t j) { return std::pow(t(j) - mu, p) * f_in[j]; }) / area;
  };
  const double var = central(2);
  if (!(var > 0.0)) return st;
  st.skewness = central(3) / std::pow(var, 1.5);
  st.kurtosis = central(4) / (var * var);
  return st;
}

// Split the velocity into unidirectional runs (sign changes or exact zeros
// end a run), drop runs shorter than 20 samples, and compute the shape
// statistics of |v| on each rescaled run.
inline std::vector<SegmentStats> segment_stats(std::span<const double> vel) {
  std::vector<SegmentStats> out;
  std::size_t k = 0;
  const std::size_t n = vel.size();
  while (k < n) {
    if (vel[k] == 0.0) {
      ++k;
      continue;
    }
    const bool positive = vel[k] > 0.0;
    std::size_t end = k;
    while (end < n && vel[end] != 0.0 && (vel[end] > 0.0) == positive) ++end;
    if (end - k >= static_cast<std::size_t>(kMinSegmentSamples)) {
      std::vector<double> f(end - k);
      for (std::size_t j = k; j < end; ++j) f[j - k] = std::abs(vel[j]);
      auto st = shape_moments(f);
      st.direction = positive ? Direction::left_to_right : Direction::right_to_left;
      out.push_back(st);
    }
    k = end;
  }
  return out;
}

inline std::vector<SegmentStats> segment_stats(const Trajectory& tr) {
  if (tr.size() < 2) return {};
  const auto v = velocity(tr);
  return segment_stats(std::span<const double>(v));
}

}  // namespace mirror
