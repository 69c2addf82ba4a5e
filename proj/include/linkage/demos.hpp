#pragma once

// Named demo mechanisms with their distinguished configurations.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "linkage/errors.hpp"
#include "linkage/model.hpp"

namespace linkage::demos {

struct Demo {
  std::string name;
  Linkage linkage;
  Configuration config;
};

/// Lengths are read off the points, so the configuration lies on C(Γ).
inline Linkage linkage_through(const Eigen::MatrixXd& pts, const std::vector<std::pair<int, int>>& edges, int base = 0,
                               std::optional<int> base_link = std::nullopt, std::optional<int> effector = std::nullopt) {
  LinkageSpec s;
  s.dim = static_cast<int>(pts.cols());
  s.vertices = static_cast<int>(pts.rows());
  for (auto [a, b] : edges) {
    s.edges.push_back({a, b});
    s.lengths.push_back((pts.row(a) - pts.row(b)).norm());
  }
  s.base = base;
  s.base_link = base_link;
  s.effector = effector;
  return build_linkage(s);
}

/// Intersection of circles |x - a| = ra and |x - b| = rb; `left` picks the
/// solution to the left of a -> b.
inline Eigen::Vector2d circle_meet(const Eigen::Vector2d& a, double ra, const Eigen::Vector2d& b, double rb, bool left) {
  const Eigen::Vector2d dv = b - a;
  const double dist = dv.norm();
  if (dist > ra + rb || dist < std::abs(ra - rb) || dist == 0.0)
    throw Error(Errc::NoFeasiblePoint, "circles do not meet");
  const double t = (ra * ra - rb * rb + dist * dist) / (2 * dist);
  const double h = std::sqrt(std::max(0.0, ra * ra - t * t));
  const Eigen::Vector2d perp(-dv.y() / dist, dv.x() / dist);
  return a + t * dv / dist + (left ? h : -h) * perp;
}

inline Demo four_bar_singular() {
  Eigen::MatrixXd p(4, 2);
  p << 0, 0, 3, 0, 0.5, 0, 2, 0;
  return {"four-bar-singular", linkage_through(p, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}, 0, 0, 2), Configuration(p)};
}

inline Demo four_bar_regular() {
  const double l1 = 2.0, l2 = 1.2, l3 = 1.7, l4 = 0.9, alpha = 1.3;
  Eigen::MatrixXd p(4, 2);
  const Eigen::Vector2d x1(l1, 0), x3(l4 * std::cos(alpha), l4 * std::sin(alpha));
  p.row(0) << 0, 0;
  p.row(1) = x1.transpose();
  p.row(2) = circle_meet(x1, l2, x3, l3, true).transpose();
  p.row(3) = x3.transpose();
  Demo d{"four-bar-regular", linkage_through(p, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}, 0, 0, 2), Configuration(p)};
  d.linkage.lengths = {l1, l2, l3, l4};
  return d;
}

/// Closed 5-chain x0..x4 with base link x4x0 and effector x2.
inline Demo five_bar() {
  const Eigen::Vector2d x0(0, 0), x4(2.5, 0), x2(1.25, 2.4);
  Eigen::MatrixXd p(5, 2);
  p.row(0) = x0.transpose();
  p.row(1) = circle_meet(x0, 2.0, x2, 1.5, false).transpose();
  p.row(2) = x2.transpose();
  p.row(3) = circle_meet(x2, 1.5, x4, 2.0, false).transpose();
  p.row(4) = x4.transpose();
  return {"five-bar", linkage_through(p, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}}, 0, 4, 2), Configuration(p)};
}

/// The node four-bar with a rigid triangle x0x3x4 and a straight 2-chain
/// x4-x5-x1.
inline Demo egsing() {
  Eigen::MatrixXd p(6, 2);
  p << 0, 0, 3, 0, 0.5, 0, 2, 0, 0.8, 1.4, 0, 0;
  p.row(5) = p.row(4) + 0.4 * (p.row(1) - p.row(4));
  return {"egsing", linkage_through(p, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}, {3, 4}, {4, 5}, {5, 1}}, 0, 0),
          Configuration(p)};
}

/// Triangular platform: A_i = vertex i, C_i = 3 + i, B_i = 6 + i. Edges: fixed
/// triangle, branches A_i-C_i-B_i, moving triangle.
inline Linkage platform_through(const Eigen::MatrixXd& p) {
  const std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}, {2, 0}, {0, 3}, {3, 6}, {1, 4},
                                               {4, 7}, {2, 5}, {5, 8}, {6, 7}, {7, 8}, {8, 6}};
  Linkage l = linkage_through(p, edges, 0, 0);
  l.platform = PlatformSpec{{{3, 4}, {5, 6}, {7, 8}}, {0, 1, 2}, {6, 7, 8}};
  return l;
}

/// Branches 1 and 2 lie along the x-axis (branch 1 folded); branch 3 is bent.
inline Demo tri_platform_a() {
  Eigen::MatrixXd p(9, 2);
  p << 0, 0, 4, 0, 1.5, -2.5,   // A
      2.8, 0, 3.6, 0, 3.5, -0.8,  // C
      2.2, 0, 3.2, 0, 2.9, 1.1;   // B
  return {"tri-platform-a", platform_through(p), Configuration(p)};
}

/// All three branches aligned along lines through P. `t` places B_i at
/// A_i + t_i (P - A_i); t_3 = 1 puts the coupler point on P.
inline Configuration tri_platform_b_pose(double t3 = 0.55) {
  const Eigen::Vector2d P(2, 3);
  const Eigen::Vector2d A[3] = {{0, 0}, {5, 0}, {2.5, -1.5}};
  const double t[3] = {0.6, 0.8, t3};
  const double s[3] = {0.3, 1.1, 0.25};
  Eigen::MatrixXd p(9, 2);
  for (int i = 0; i < 3; ++i) {
    p.row(i) = A[i].transpose();
    p.row(3 + i) = (A[i] + s[i] * (P - A[i])).transpose();
    p.row(6 + i) = (A[i] + t[i] * (P - A[i])).transpose();
  }
  return Configuration(p);
}

inline Demo tri_platform_b() {
  const Configuration c = tri_platform_b_pose();
  return {"tri-platform-b", platform_through(c.points), c};
}

/// Random planar platform pose with every vertex drawn independently.
inline Demo random_platform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Eigen::MatrixXd p(9, 2);
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = u(rng);
  return {"random-platform", platform_through(p), Configuration(p)};
}

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> n{"four-bar-singular", "four-bar-regular", "five-bar",
                                          "egsing",            "tri-platform-a",   "tri-platform-b"};
  return n;
}

inline Demo by_name(const std::string& name) {
  if (name == "four-bar-singular") return four_bar_singular();
  if (name == "four-bar-regular") return four_bar_regular();
  if (name == "five-bar") return five_bar();
  if (name == "egsing") return egsing();
  if (name == "tri-platform-a") return tri_platform_a();
  if (name == "tri-platform-b") return tri_platform_b();
  throw Error(Errc::UnknownDemo, "no demo named '" + name + "'");
}

}  // namespace linkage::demos
