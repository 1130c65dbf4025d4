#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mirror/error.hpp"
#include "mirror/signal/trajectory.hpp"

namespace mirror {

// Histogram density of velocity on a fixed grid.
struct VelocityPdf {
  std::vector<double> bin_edges;
  std::vector<double> density;

  std::size_t n_bins() const { return density.size(); }
  double vmin() const { return bin_edges.front(); }
  double vmax() const { return bin_edges.back(); }
  double width(std::size_t i) const { return bin_edges[i + 1] - bin_edges[i]; }
  double centre(std::size_t i) const { return 0.5 * (bin_edges[i] + bin_edges[i + 1]); }

  std::vector<double> cdf() const {
    std::vector<double> c(density.size());
    double run = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) {
      run += density[i] * width(i);
      c[i] = run;
    }
    return c;
  }
};

struct PdfGrid {
  int n_bins = 101;
  double vmin = -2.0;
  double vmax = 2.0;
};

// Velocities beyond the grid are counted in the edge bins so mass is conserved.
inline VelocityPdf velocity_pdf_from_samples(std::span<const double> vel, const PdfGrid& grid = {}) {
  if (grid.n_bins < 2) throw Error(ErrorKind::degenerate_input, "n_bins must be >= 2");
  if (!(grid.vmax > grid.vmin)) throw Error(ErrorKind::degenerate_input, "empty velocity range");
  if (vel.empty()) throw Error(ErrorKind::degenerate_input, "no velocity samples");
  VelocityPdf pdf;
  const auto nb = static_cast<std::size_t>(grid.n_bins);
  pdf.bin_edges.resize(nb + 1);
  const double w = (grid.vmax - grid.vmin) / grid.n_bins;
  for (std::size_t i = 0; i <= nb; ++i) pdf.bin_edges[i] = grid.vmin + w * static_cast<double>(i);
  pdf.bin_edges.back() = grid.vmax;
  std::vector<double> counts(nb, 0.0);
  for (double v : vel) {
    const double pos = std::floor((v - grid.vmin) / w);
    const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(nb - 1)));
    counts[b] += 1.0;
  }
  pdf.density.resize(nb);
  const double total = static_cast<double>(vel.size());
  for (std::size_t i = 0; i < nb; ++i) pdf.density[i] = counts[i] / (total * pdf.width(i));
  return pdf;
}

inline VelocityPdf velocity_pdf(const Trajectory& tr, const PdfGrid& grid = {}) {
  if (tr.size() < 2) throw Error(ErrorKind::degenerate_input, "trajectory too short for velocity");
  const auto v = velocity(tr);
  return velocity_pdf_from_samples(v, grid);
}

// Pooled PDF over several trajectories.
inline VelocityPdf velocity_pdf(std::span<const Trajectory> trs, const PdfGrid& grid = {}) {
  std::vector<double> all;
  for (const auto& tr : trs) {
    if (tr.size() < 2) continue;
    const auto v = velocity(tr);
    all.insert(all.end(), v.begin(), v.end());
  }
  return velocity_pdf_from_samples(all, grid);
}

// Area between the two CDFs divided by the support width.
inline double emd(const VelocityPdf& p, const VelocityPdf& q) {
  if (p.bin_edges.size() != q.bin_edges.size() || p.density.size() != q.density.size())
    throw Error(ErrorKind::shape, "EMD needs identical bin grids");
  for (std::size_t i = 0; i < p.bin_edges.size(); ++i)
    if (std::abs(p.bin_edges[i] - q.bin_edges[i]) > 1e-12)
      throw Error(ErrorKind::shape, "EMD needs identical bin grids");
  const auto cp = p.cdf();
  const auto cq = q.cdf();
  double area = 0.0;
  for (std::size_t i = 0; i < cp.size(); ++i) area += std::abs(cp[i] - cq[i]) * p.width(i);
  return area / (p.vmax() - p.vmin());
}

}  // namespace mirror
