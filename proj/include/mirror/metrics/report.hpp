#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "mirror/metrics/similarity.hpp"
#include "mirror/session/record.hpp"

namespace mirror {

inline nlohmann::json session_report(const TrialRecord& r) {
  nlohmann::json j;
  j["session_id"] = r.config.session_id;
  j["players"] = nlohmann::json::array();
  for (const auto& p : r.players) j["players"].push_back(p.handle.id);
  j["incomplete"] = r.incomplete;
  j["metrics"] = r.metrics ? to_json(*r.metrics) : nlohmann::json(nullptr);
  return j;
}

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  return colours[i % 8];
}

}  // namespace detail

// Scatter of the similarity space with one ellipse per label.
inline void write_similarity_svg(std::ostream& os, const SimilarityMap& m, int size_px = 480) {
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  bool first = true;
  auto grow = [&](double x, double y) {
    if (first) {
      x0 = x1 = x;
      y0 = y1 = y;
      first = false;
    }
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  };
  for (const auto& p : m.points) grow(p[0], p[1]);
  for (const auto& [label, e] : m.ellipses) {
    const auto h = e.half_extent();
    if (std::isfinite(h[0]) && std::isfinite(h[1])) {
      grow(e.centre[0] - h[0], e.centre[1] - h[1]);
      grow(e.centre[0] + h[0], e.centre[1] + h[1]);
    }
  }
  const double span = std::max({x1 - x0, y1 - y0, 1e-9}) * 1.1;
  const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
  const double s = size_px / span;
  auto px = [&](double x) { return size_px / 2.0 + (x - cx) * s; };
  auto py = [&](double y) { return size_px / 2.0 - (y - cy) * s; };

  std::map<std::string, std::size_t> colour;
  for (const auto& l : m.labels) colour.emplace(l, colour.size());

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                size_px, size_px, size_px, size_px);
  os << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& [label, e] : m.ellipses) {
    Eigen::Matrix2d c;
    c << e.cov[0], e.cov[1], e.cov[2], e.cov[3];
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c);
    const double l0 = std::max(es.eigenvalues()(0), 0.0), l1 = std::max(es.eigenvalues()(1), 0.0);
    const Eigen::Vector2d major = es.eigenvectors().col(1);
    const double angle = -std::atan2(major(1), major(0)) * 180.0 / std::numbers::pi;
    std::snprintf(buf, sizeof buf,
                  "<ellipse cx=\"%.3f\" cy=\"%.3f\" rx=\"%.3f\" ry=\"%.3f\" transform=\"rotate(%.3f %.3f %.3f)\" "
                  "fill=\"none\" stroke=\"%s\"/>\n",
                  px(e.centre[0]), py(e.centre[1]), e.scale * std::sqrt(l1) * s, e.scale * std::sqrt(l0) * s, angle,
                  px(e.centre[0]), py(e.centre[1]), detail::palette(colour[label]));
    os << buf;
  }
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"3\" fill=\"%s\"><title>%s</title></circle>\n",
                  px(m.points[i][0]), py(m.points[i][1]), detail::palette(colour[m.labels[i]]), m.labels[i].c_str());
    os << buf;
  }
  os << "</svg>\n";
}

}  // namespace mirror
