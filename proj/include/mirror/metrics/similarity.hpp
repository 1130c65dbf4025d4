#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mirror/error.hpp"
#include "mirror/metrics/velocity_pdf.hpp"

namespace mirror {

using Point2 = std::array<double, 2>;

// Region {p : (p - c)^T cov^{-1} (p - c) <= scale^2}.
struct Ellipse {
  Point2 centre{0.0, 0.0};
  std::array<double, 4> cov{1.0, 0.0, 0.0, 1.0};  // row-major 2x2
  double scale = 2.0;

  double det() const { return cov[0] * cov[3] - cov[1] * cov[2]; }

  bool contains(double x, double y, const std::array<double, 4>& inv) const {
    const double dx = x - centre[0], dy = y - centre[1];
    const double q = inv[0] * dx * dx + (inv[1] + inv[2]) * dx * dy + inv[3] * dy * dy;
    return q <= scale * scale;
  }

  std::array<double, 4> inverse() const {
    const double d = det();
    return {cov[3] / d, -cov[1] / d, -cov[2] / d, cov[0] / d};
  }

  // Axis-aligned half extents.
  Point2 half_extent() const { return {scale * std::sqrt(cov[0]), scale * std::sqrt(cov[3])}; }
};

struct SimilarityMap {
  std::vector<Point2> points;
  std::vector<std::string> labels;
  std::map<std::string, Ellipse> ellipses;
  Eigen::MatrixXd distances;  // the EMD matrix that was embedded
};

inline Eigen::MatrixXd emd_matrix(std::span<const VelocityPdf> pdfs) {
  const auto n = static_cast<Eigen::Index>(pdfs.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = emd(pdfs[static_cast<std::size_t>(i)], pdfs[static_cast<std::size_t>(j)]);
  return d;
}

// Classical (Torgerson) MDS to two dimensions. Axis signs are fixed so that
// the first point with a non-negligible coordinate on each axis is positive.
inline std::vector<Point2> classical_mds(const Eigen::MatrixXd& d) {
  const Eigen::Index n = d.rows();
  if (n < 3) throw Error(ErrorKind::insufficient_data, "MDS needs at least 3 points");
  if (d.cols() != n) throw Error(ErrorKind::shape, "distance matrix must be square");
  const Eigen::MatrixXd d2 = d.array().square().matrix();
  const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd b = -0.5 * j * d2 * j;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  // Eigenvalues ascend; take the two largest.
  std::vector<Point2> pts(static_cast<std::size_t>(n), Point2{0.0, 0.0});
  for (int axis = 0; axis < 2; ++axis) {
    const Eigen::Index col = n - 1 - axis;
    const double lambda = std::max(es.eigenvalues()(col), 0.0);
    Eigen::VectorXd v = es.eigenvectors().col(col) * std::sqrt(lambda);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(v(i)) > 1e-12) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(axis)] = v(i);
  }
  return pts;
}

// Mean and sample covariance of a point cloud, as a `scale`-sigma ellipse.
inline Ellipse covariance_ellipse(std::span<const Point2> pts, double scale = 2.0) {
  Ellipse e;
  e.scale = scale;
  const double n = static_cast<double>(pts.size());
  for (const auto& p : pts) {
    e.centre[0] += p[0] / n;
    e.centre[1] += p[1] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : pts) {
    const double dx = p[0] - e.centre[0], dy = p[1] - e.centre[1];
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double denom = pts.size() > 1 ? n - 1.0 : 1.0;
  e.cov = {sxx / denom, sxy / denom, sxy / denom, syy / denom};
  return e;
}

inline SimilarityMap similarity_space(std::span<const VelocityPdf> pdfs, std::span<const std::string> labels,
                                      double ellipse_scale = 2.0) {
  if (pdfs.size() < 3) throw Error(ErrorKind::insufficient_data, "similarity space needs at least 3 PDFs");
  if (labels.size() != pdfs.size()) throw Error(ErrorKind::shape, "one label per PDF required");
  SimilarityMap m;
  m.distances = emd_matrix(pdfs);
  m.points = classical_mds(m.distances);
  m.labels.assign(labels.begin(), labels.end());
  std::map<std::string, std::vector<Point2>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(m.points[i]);
  for (const auto& [label, pts] : groups) m.ellipses[label] = covariance_ellipse(pts, ellipse_scale);
  return m;
}

// Intersection area over union area by midpoint sampling of a uniform grid
// on the joint bounding box.
inline double ellipse_overlap(const Ellipse& e1, const Ellipse& e2, int resolution = 1000) {
  resolution = std::max(resolution, 400);
  auto check = [](const Ellipse& e) {
    const double tr = std::abs(e.cov[0]) + std::abs(e.cov[3]);
    if (!(e.cov[0] > 0.0) || !(e.cov[3] > 0.0) || !(e.det() > 1e-12 * tr * tr))
      throw Error(ErrorKind::degenerate_input, "ellipse covariance is singular");
  };
  check(e1);
  check(e2);
  const auto h1 = e1.half_extent(), h2 = e2.half_extent();
  const double x0 = std::min(e1.centre[0] - h1[0], e2.centre[0] - h2[0]);
  const double x1 = std::max(e1.centre[0] + h1[0], e2.centre[0] + h2[0]);
  const double y0 = std::min(e1.centre[1] - h1[1], e2.centre[1] - h2[1]);
  const double y1 = std::max(e1.centre[1] + h1[1], e2.centre[1] + h2[1]);
  const auto i1 = e1.inverse(), i2 = e2.inverse();
  const double dx = (x1 - x0) / resolution, dy = (y1 - y0) / resolution;
  std::size_t both = 0, either = 0;
  for (int i = 0; i < resolution; ++i) {
    const double x = x0 + (i + 0.5) * dx;
    for (int j = 0; j < resolution; ++j) {
      const double y = y0 + (j + 0.5) * dy;
      const bool a = e1.contains(x, y, i1), b = e2.contains(x, y, i2);
      both += (a && b);
      either += (a || b);
    }
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

}  // namespace mirror
