#pragma once

// Linkages, configurations, the squared-length map and its Jacobian, and the
// pointed / reduced gauge normalizations.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "linkage/errors.hpp"

namespace linkage {

struct Edge {
  int u = 0;
  int v = 0;

  bool touches(int x) const { return u == x || v == x; }
  int other(int x) const { return x == u ? v : u; }
  bool operator==(const Edge&) const = default;
};

/// Abstract graph of a mechanism. The edge order fixes the coordinate order of
/// the squared-length map.
class MechanismType {
 public:
  MechanismType() = default;

  MechanismType(int vertex_count, std::vector<Edge> edges)
      : vertex_count_(vertex_count), edges_(std::move(edges)) {
    if (vertex_count_ <= 0) throw Error(Errc::InvalidSpec, "vertex count must be positive");
    std::set<std::pair<int, int>> seen;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const Edge& e = edges_[i];
      if (e.u < 0 || e.u >= vertex_count_ || e.v < 0 || e.v >= vertex_count_)
        throw Error(Errc::InvalidSpec, "edge " + std::to_string(i) + " has a vertex out of range");
      if (e.u == e.v) throw Error(Errc::InvalidSpec, "edge " + std::to_string(i) + " is a self-loop");
      if (!seen.insert(std::minmax(e.u, e.v)).second)
        throw Error(Errc::InvalidSpec, "edge " + std::to_string(i) + " duplicates an earlier edge");
    }
  }

  int vertex_count() const { return vertex_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int i) const { return edges_.at(static_cast<std::size_t>(i)); }

  int degree(int x) const {
    return static_cast<int>(std::count_if(edges_.begin(), edges_.end(),
                                          [x](const Edge& e) { return e.touches(x); }));
  }

  std::vector<int> incident_edges(int x) const {
    std::vector<int> out;
    for (int i = 0; i < edge_count(); ++i)
      if (edges_[static_cast<std::size_t>(i)].touches(x)) out.push_back(i);
    return out;
  }

  bool connected() const {
    std::vector<int> parent(static_cast<std::size_t>(vertex_count_));
    for (int i = 0; i < vertex_count_; ++i) parent[static_cast<std::size_t>(i)] = i;
    auto find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
      return x;
    };
    int components = vertex_count_;
    for (const Edge& e : edges_) {
      const int a = find(e.u), b = find(e.v);
      if (a != b) {
        parent[static_cast<std::size_t>(a)] = b;
        --components;
      }
    }
    return components == 1;
  }

 private:
  int vertex_count_ = 0;
  std::vector<Edge> edges_;
};

struct LengthRange {
  double min = 0.0;
  double max = 0.0;
};

/// Parallel polygonal platform tag: branches are open chains (edge lists)
/// running from a fixed-platform vertex to a moving-platform vertex.
struct PlatformSpec {
  std::vector<std::vector<int>> branches;
  std::vector<int> fixed;
  std::vector<int> moving;
};

/// Plain, unvalidated description of a linkage (what a document parses into).
struct LinkageSpec {
  int dim = 2;
  int vertices = 0;
  std::vector<Edge> edges;
  std::vector<double> lengths;
  std::vector<std::optional<LengthRange>> prismatic;
  int base = 0;
  std::optional<int> base_link;
  std::optional<int> effector;
  std::optional<PlatformSpec> platform;
};

struct Linkage {
  MechanismType graph;
  std::vector<double> lengths;
  int dim = 2;
  int base_vertex = 0;
  std::optional<int> base_link;
  std::optional<int> end_effector;
  std::vector<std::optional<LengthRange>> prismatic;
  std::optional<PlatformSpec> platform;

  int vertex_count() const { return graph.vertex_count(); }
  int edge_count() const { return graph.edge_count(); }
  double total_length() const {
    double s = 0.0;
    for (double l : lengths) s += l;
    return s;
  }

  /// The explicit base link, or the lowest-index edge at the base vertex.
  std::optional<int> effective_base_link() const {
    if (base_link) return base_link;
    const auto inc = graph.incident_edges(base_vertex);
    if (inc.empty()) return std::nullopt;
    return inc.front();
  }
};

inline Linkage build_linkage(const LinkageSpec& spec) {
  if (spec.dim != 2 && spec.dim != 3) throw Error(Errc::InvalidSpec, "dim must be 2 or 3");
  if (spec.lengths.size() != spec.edges.size())
    throw Error(Errc::InvalidSpec, "one length per edge is required");
  Linkage l;
  l.graph = MechanismType(spec.vertices, spec.edges);
  for (std::size_t i = 0; i < spec.lengths.size(); ++i) {
    const double len = spec.lengths[i];
    if (!(len > 0.0) || !std::isfinite(len))
      throw Error(Errc::InvalidSpec, "edge " + std::to_string(i) + " needs a positive length");
  }
  l.lengths = spec.lengths;
  l.dim = spec.dim;
  if (spec.base < 0 || spec.base >= spec.vertices) throw Error(Errc::InvalidSpec, "base out of range");
  l.base_vertex = spec.base;
  if (spec.base_link) {
    if (*spec.base_link < 0 || *spec.base_link >= l.edge_count())
      throw Error(Errc::InvalidSpec, "base_link out of range");
    if (!l.graph.edge(*spec.base_link).touches(spec.base))
      throw Error(Errc::InvalidSpec, "base_link must be incident to the base vertex");
  }
  l.base_link = spec.base_link;
  if (spec.effector) {
    if (*spec.effector < 0 || *spec.effector >= spec.vertices)
      throw Error(Errc::InvalidSpec, "effector out of range");
    if (*spec.effector == spec.base) throw Error(Errc::InvalidSpec, "effector must differ from base");
  }
  l.end_effector = spec.effector;
  l.prismatic = spec.prismatic;
  l.prismatic.resize(spec.edges.size());
  for (const auto& r : l.prismatic)
    if (r && !(r->min > 0.0 && r->min <= r->max))
      throw Error(Errc::InvalidSpec, "prismatic range needs 0 < min <= max");
  if (spec.platform) {
    for (const auto& br : spec.platform->branches)
      for (int e : br)
        if (e < 0 || e >= l.edge_count()) throw Error(Errc::InvalidSpec, "platform branch edge out of range");
    for (int v : spec.platform->fixed)
      if (v < 0 || v >= spec.vertices) throw Error(Errc::InvalidSpec, "platform vertex out of range");
    for (int v : spec.platform->moving)
      if (v < 0 || v >= spec.vertices) throw Error(Errc::InvalidSpec, "platform vertex out of range");
  }
  l.platform = spec.platform;
  return l;
}

/// Vertex positions, one row per vertex.
struct Configuration {
  Eigen::MatrixXd points;

  Configuration() = default;
  explicit Configuration(Eigen::MatrixXd p) : points(std::move(p)) {}
  Configuration(int n, int d) : points(Eigen::MatrixXd::Zero(n, d)) {}

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  Eigen::VectorXd point(int i) const { return points.row(i).transpose(); }

  /// Vertex-major flattening: vertex 0's coordinates first.
  Eigen::VectorXd flat() const {
    Eigen::VectorXd v(points.size());
    for (int i = 0; i < size(); ++i)
      for (int c = 0; c < dim(); ++c) v(i * dim() + c) = points(i, c);
    return v;
  }

  static Configuration from_flat(const Eigen::VectorXd& v, int d) {
    const int n = static_cast<int>(v.size()) / d;
    Configuration out(n, d);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c) out.points(i, c) = v(i * d + c);
    return out;
  }

  double max_abs() const { return points.size() ? points.cwiseAbs().maxCoeff() : 0.0; }
};

inline void check_matches(const Linkage& l, const Configuration& v) {
  if (v.size() != l.vertex_count() || v.dim() != l.dim)
    throw Error(Errc::DimensionMismatch, "configuration shape " + std::to_string(v.size()) + "x" +
                                             std::to_string(v.dim()) + " does not match linkage " +
                                             std::to_string(l.vertex_count()) + "x" + std::to_string(l.dim));
  if (!v.points.allFinite()) throw Error(Errc::DimensionMismatch, "configuration has non-finite coordinates");
}

/// Orthonormal vectors (columns) spanning a subspace of R^ambient_dim.
struct SubspaceBasis {
  int ambient_dim = 0;
  Eigen::MatrixXd vectors;

  int dimension() const { return static_cast<int>(vectors.cols()); }
};

inline Eigen::VectorXd squared_length_map(const Linkage& l, const Configuration& v) {
  check_matches(l, v);
  Eigen::VectorXd out(l.edge_count());
  for (int i = 0; i < l.edge_count(); ++i) {
    const Edge& e = l.graph.edge(i);
    out(i) = (v.points.row(e.u) - v.points.row(e.v)).squaredNorm();
  }
  return out;
}

inline Eigen::VectorXd squared_lengths(const Linkage& l) {
  Eigen::VectorXd out(l.edge_count());
  for (int i = 0; i < l.edge_count(); ++i) out(i) = l.lengths[static_cast<std::size_t>(i)] * l.lengths[static_cast<std::size_t>(i)];
  return out;
}

inline Eigen::VectorXd constraint_residual(const Linkage& l, const Configuration& v) {
  return squared_length_map(l, v) - squared_lengths(l);
}

inline Eigen::MatrixXd constraint_jacobian(const Linkage& l, const Configuration& v) {
  check_matches(l, v);
  const int d = l.dim;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(l.edge_count(), l.vertex_count() * d);
  for (int i = 0; i < l.edge_count(); ++i) {
    const Edge& e = l.graph.edge(i);
    const Eigen::RowVectorXd diff = 2.0 * (v.points.row(e.u) - v.points.row(e.v));
    j.block(i, e.u * d, 1, d) = diff;
    j.block(i, e.v * d, 1, d) = -diff;
  }
  return j;
}

inline Configuration pointed_normalize(const Configuration& v, int base_vertex) {
  Configuration out = v;
  const Eigen::RowVectorXd p = v.points.row(base_vertex);
  out.points.rowwise() -= p;
  return out;
}

/// Rotation matrix taking unit vector `from` onto unit vector `to` (d = 2 or 3).
/// In 3D this is the minimal rotation about from x to.
inline Eigen::MatrixXd rotation_between(const Eigen::VectorXd& from, const Eigen::VectorXd& to) {
  const Eigen::Index d = from.size();
  if (d == 2) {
    const double a = std::atan2(to(1), to(0)) - std::atan2(from(1), from(0));
    Eigen::Matrix2d r;
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return r;
  }
  const Eigen::Vector3d f = from.head<3>(), t = to.head<3>();
  const double c = f.dot(t);
  Eigen::Vector3d axis = f.cross(t);
  const double s = axis.norm();
  if (s < 1e-15) {
    if (c > 0) return Eigen::Matrix3d::Identity();
    // Antipodal: half turn about any axis perpendicular to f.
    Eigen::Vector3d perp = std::abs(f(0)) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    perp = (perp - perp.dot(f) * f).normalized();
    return Eigen::AngleAxisd(M_PI, perp).toRotationMatrix();
  }
  return Eigen::AngleAxisd(std::atan2(s, c), axis / s).toRotationMatrix();
}

inline constexpr double kDegenerateTol = 1e-12;

/// Base vertex to the origin, base-link direction onto e1. In 3D a rotation
/// about e1 is left free.
inline Configuration reduced_normalize(const Configuration& v, int base_vertex, const Edge& base_link) {
  Configuration out = pointed_normalize(v, base_vertex);
  const int other = base_link.other(base_vertex);
  const Eigen::VectorXd dir = out.point(other);
  const double n = dir.norm();
  if (n <= kDegenerateTol * (1.0 + v.max_abs()))
    throw Error(Errc::DegenerateDirection, "base link endpoints coincide");
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(v.dim());
  e1(0) = 1.0;
  const Eigen::MatrixXd r = rotation_between(dir / n, e1);
  out.points = out.points * r.transpose();
  out.points.row(base_vertex).setZero();
  return out;
}

inline Configuration reduced_normalize(const Linkage& l, const Configuration& v) {
  const auto bl = l.effective_base_link();
  if (!bl) throw Error(Errc::InvalidSpec, "linkage has no link at the base vertex");
  return reduced_normalize(v, l.base_vertex, l.graph.edge(*bl));
}

/// A sub-mechanism with compact vertex numbering. `vertex_map[i]` is the
/// original index of local vertex i; `edge_map[j]` the original edge index.
struct SubLinkage {
  Linkage linkage;
  std::vector<int> vertex_map;
  std::vector<int> edge_map;

  int local_vertex(int original) const {
    const auto it = std::find(vertex_map.begin(), vertex_map.end(), original);
    return it == vertex_map.end() ? -1 : static_cast<int>(it - vertex_map.begin());
  }

  Configuration restrict(const Configuration& v) const {
    Configuration out(static_cast<int>(vertex_map.size()), v.dim());
    for (std::size_t i = 0; i < vertex_map.size(); ++i) out.points.row(static_cast<Eigen::Index>(i)) = v.points.row(vertex_map[i]);
    return out;
  }
};

/// Restrict `l` to the given original edge indices (sorted). Vertices touched by
/// those edges are kept in increasing original order.
inline SubLinkage sub_linkage(const Linkage& l, std::vector<int> edge_ids, int base, std::optional<int> effector) {
  std::sort(edge_ids.begin(), edge_ids.end());
  std::set<int> verts;
  for (int e : edge_ids) {
    verts.insert(l.graph.edge(e).u);
    verts.insert(l.graph.edge(e).v);
  }
  verts.insert(base);
  if (effector) verts.insert(*effector);
  SubLinkage s;
  s.vertex_map.assign(verts.begin(), verts.end());
  s.edge_map = edge_ids;
  std::vector<Edge> edges;
  LinkageSpec spec;
  spec.dim = l.dim;
  spec.vertices = static_cast<int>(s.vertex_map.size());
  for (int e : edge_ids) {
    const Edge& oe = l.graph.edge(e);
    spec.edges.push_back({s.local_vertex(oe.u), s.local_vertex(oe.v)});
    spec.lengths.push_back(l.lengths[static_cast<std::size_t>(e)]);
  }
  spec.base = s.local_vertex(base);
  if (effector) spec.effector = s.local_vertex(*effector);
  s.linkage = build_linkage(spec);
  return s;
}

}  // namespace linkage
