#pragma once

// Minimal SVG 1.1 rendering of planar linkages and traced curves.

#include <Eigen/Dense>
#include <cstdio>
#include <string>
#include <vector>

#include "linkage/model.hpp"

namespace linkage::svg {

struct Polyline {
  std::vector<Eigen::Vector2d> points;
  std::string stroke = "black";
  bool closed = false;
};

struct Dot {
  Eigen::Vector2d at;
  std::string fill = "black";
};

struct Canvas {
  std::vector<Polyline> lines;
  std::vector<Dot> dots;
};

namespace detail {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace detail

/// Scales the drawing into a 400-unit square with y pointing up.
inline std::string render(const Canvas& c, double size = 400.0) {
  Eigen::Vector2d lo(1e300, 1e300), hi(-1e300, -1e300);
  auto grow = [&](const Eigen::Vector2d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const auto& l : c.lines)
    for (const auto& p : l.points) grow(p);
  for (const auto& d : c.dots) grow(d.at);
  if (lo.x() > hi.x()) lo = hi = Eigen::Vector2d::Zero();
  const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-9});
  const double margin = 20.0, scale = (size - 2 * margin) / span;
  auto map = [&](const Eigen::Vector2d& p) {
    return detail::num(margin + (p.x() - lo.x()) * scale) + "," + detail::num(size - margin - (p.y() - lo.y()) * scale);
  };
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + detail::num(size) + "\" height=\"" +
         detail::num(size) + "\">\n";
  for (const auto& l : c.lines) {
    out += std::string(l.closed ? "<polygon" : "<polyline") + " fill=\"none\" stroke=\"" + l.stroke +
           "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < l.points.size(); ++i) out += (i ? " " : "") + map(l.points[i]);
    out += "\"/>\n";
  }
  for (const auto& d : c.dots) {
    const std::string xy = map(d.at);
    const auto comma = xy.find(',');
    out += "<circle cx=\"" + xy.substr(0, comma) + "\" cy=\"" + xy.substr(comma + 1) + "\" r=\"3\" fill=\"" + d.fill +
           "\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

/// Links as segments, joints as dots; the base vertex is drawn red.
inline void add_linkage(Canvas& c, const Linkage& l, const Configuration& v, const std::string& stroke = "black") {
  for (const Edge& e : l.graph.edges())
    c.lines.push_back({{v.point(e.u).head<2>(), v.point(e.v).head<2>()}, stroke, false});
  for (int i = 0; i < v.size(); ++i) c.dots.push_back({v.point(i).head<2>(), i == l.base_vertex ? "red" : "black"});
}

}  // namespace linkage::svg
