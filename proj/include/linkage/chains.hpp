#pragma once

// Open, closed and prismatic closed chains: reach intervals, alignment, work
// map images, spherical coordinates and the Morse index at aligned closures.
//
// A chain configuration is a Configuration whose rows are the chain vertices
// x_0, ..., x_k in order. For a closed chain the last link runs from x_k back
// to x_0.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "linkage/errors.hpp"
#include "linkage/linalg.hpp"
#include "linkage/model.hpp"

namespace linkage::chains {

enum class ChainKind { Open, Closed, PrismaticClosed };

inline constexpr double kDefaultTolAlign = 1e-6;

struct Interval {
  double m = 0.0;
  double M = 0.0;
};

inline Interval workspace_interval(std::span<const double> lengths) {
  if (lengths.empty()) throw Error(Errc::EmptyChain, "chain has no links");
  const double total = std::accumulate(lengths.begin(), lengths.end(), 0.0);
  const double longest = *std::max_element(lengths.begin(), lengths.end());
  return {std::max(0.0, 2.0 * longest - total), total};
}

/// Open, closed or prismatic closed chain. For PrismaticClosed, `lengths` are
/// the k fixed links and `range` bounds the variable closing link.
class ChainSpec {
 public:
  ChainSpec(ChainKind kind, std::vector<double> lengths, int dim,
            std::optional<LengthRange> range = std::nullopt)
      : kind_(kind), lengths_(std::move(lengths)), dim_(dim), range_(range) {
    if (lengths_.empty()) throw Error(Errc::EmptyChain, "chain has no links");
    if (dim_ != 2 && dim_ != 3) throw Error(Errc::InvalidSpec, "dim must be 2 or 3");
    for (double l : lengths_)
      if (!(l > 0.0)) throw Error(Errc::InvalidSpec, "chain lengths must be positive");
    if (kind_ == ChainKind::Closed) {
      const double total = std::accumulate(lengths_.begin(), lengths_.end(), 0.0);
      const double longest = *std::max_element(lengths_.begin(), lengths_.end());
      if (2.0 * longest > total * (1.0 + 1e-12))
        throw Error(Errc::InvalidSpec, "closed chain cannot close: longest link exceeds the rest");
    }
    if (kind_ == ChainKind::PrismaticClosed) {
      if (!range_) range_ = LengthRange{workspace_interval(lengths_).m, workspace_interval(lengths_).M};
      if (!(range_->min >= 0.0 && range_->min <= range_->max))
        throw Error(Errc::InvalidSpec, "prismatic range needs 0 <= m <= M");
    }
  }

  ChainKind kind() const { return kind_; }
  const std::vector<double>& lengths() const { return lengths_; }
  int dim() const { return dim_; }
  int link_count() const { return static_cast<int>(lengths_.size()); }
  const std::optional<LengthRange>& range() const { return range_; }

  /// Graph form: path x_0..x_k (Open) or cycle (Closed). Base x_0, base link 0.
  Linkage to_linkage() const {
    LinkageSpec s;
    s.dim = dim_;
    const int k = link_count();
    if (kind_ == ChainKind::Closed) {
      s.vertices = k;
      for (int i = 0; i < k; ++i) s.edges.push_back({i, (i + 1) % k});
    } else {
      s.vertices = k + 1;
      for (int i = 0; i < k; ++i) s.edges.push_back({i, i + 1});
      s.effector = k;
    }
    s.lengths = lengths_;
    s.base = 0;
    s.base_link = 0;
    return build_linkage(s);
  }

 private:
  ChainKind kind_;
  std::vector<double> lengths_;
  int dim_;
  std::optional<LengthRange> range_;
};

/// Link vectors x_{i+1} - x_i of an open chain configuration.
inline std::vector<Eigen::VectorXd> link_vectors(const Configuration& v) {
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i + 1 < v.size(); ++i) out.push_back(v.point(i + 1) - v.point(i));
  return out;
}

/// Common direction (of link 1) if every link is parallel or antiparallel to it.
inline std::optional<Eigen::VectorXd> is_aligned(const Configuration& v, double tol_align = kDefaultTolAlign) {
  const auto links = link_vectors(v);
  const double scale = 1.0 + v.max_abs();
  for (const auto& l : links)
    if (l.norm() <= kDegenerateTol * scale) throw Error(Errc::DegenerateDirection, "chain has a zero-length link");
  if (links.empty()) return std::nullopt;
  const Eigen::VectorXd w = links.front().normalized();
  for (const auto& l : links) {
    const Eigen::VectorXd u = l.normalized();
    // Angle between the lines, insensitive to orientation.
    const double s = (u - u.dot(w) * w).norm();
    if (std::asin(std::min(1.0, s)) > tol_align) return std::nullopt;
  }
  return w;
}

inline int forward_count(const Configuration& v, const Eigen::VectorXd& w, double tol_align = kDefaultTolAlign) {
  int count = 0;
  const Eigen::VectorXd wn = w.normalized();
  for (const auto& l : link_vectors(v)) {
    const Eigen::VectorXd u = l.normalized();
    if ((u - u.dot(wn) * wn).norm() > std::sin(tol_align) + 1e-15)
      throw Error(Errc::NotAligned, "link not parallel to the given direction");
    if (u.dot(wn) > 0) ++count;
  }
  return count;
}

/// Morse index of the closing-link length at an aligned closed chain.
///
/// `v` holds the vertices x_0..x_n of a closed (n+1)-chain; the closing link
/// x_n -> x_0 is the variable one. Counting every link of the closed chain
/// (closing link included) that points along the closing link's direction as
/// forward, the index in the plane is n minus that count; each further ambient
/// dimension contributes another copy, so the general value is
/// (d - 1) * (n - forward).
inline int aligned_morse_index(const ChainSpec& closed, const Configuration& v,
                               double tol_align = kDefaultTolAlign) {
  const int n = v.size() - 1;
  if (closed.link_count() != n + 1)
    throw Error(Errc::DimensionMismatch, "closed chain link count does not match configuration");
  const auto w = is_aligned(v, tol_align);
  if (!w) throw Error(Errc::NotAligned, "closed chain configuration is not aligned");
  const Eigen::VectorXd closing = v.point(0) - v.point(n);
  if (closing.norm() <= kDegenerateTol * (1.0 + v.max_abs()))
    throw Error(Errc::NotAligned, "closing link has zero length");
  const Eigen::VectorXd wc = closing.normalized();
  const int forward = forward_count(v, wc, tol_align) + 1;  // closing link points along itself
  return (v.dim() - 1) * (n - forward);
}

inline Eigen::VectorXd chain_work_map(const Configuration& v) { return v.point(v.size() - 1) - v.point(0); }

/// Image of the differential of x_k - x_0 over the pointed configuration space:
/// the sum of the orthogonal complements of the link directions.
inline SubspaceBasis chain_work_image(const Configuration& v, double tol_rank = kDefaultTolRank) {
  const int d = v.dim();
  const auto links = link_vectors(v);
  Eigen::MatrixXd stacked(d, d * static_cast<Eigen::Index>(links.size()));
  for (std::size_t i = 0; i < links.size(); ++i) {
    const double n = links[i].norm();
    Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(d, d);
    if (n > 0) proj -= (links[i] / n) * (links[i] / n).transpose();
    stacked.block(0, d * static_cast<Eigen::Index>(i), d, d) = proj;
  }
  return {d, range_basis(stacked, tol_rank)};
}

/// Local coordinates of an open chain: theta is the direction of x_k - x_0 (or
/// the alignment direction when x_k = x_0); joint data relate consecutive links.
/// In 2D `angles[i]` is the signed turn from link i+1 to link i+2. In 3D
/// `relative_dirs[i]` is link i+2's direction in a frame carried along the chain.
struct SphericalParams {
  Eigen::VectorXd theta;
  std::vector<double> angles;
  std::vector<Eigen::Vector3d> relative_dirs;
  double rho = 0.0;
};

inline Eigen::Matrix3d frame_step(const Eigen::Vector3d& dir) {
  return rotation_between(Eigen::Vector3d::UnitX(), dir);
}

inline SphericalParams to_spherical(const Configuration& v, double tol_align = kDefaultTolAlign) {
  const int d = v.dim();
  const auto links = link_vectors(v);
  if (links.empty()) throw Error(Errc::EmptyChain, "chain has no links");
  SphericalParams p;
  const Eigen::VectorXd r = chain_work_map(v);
  p.rho = r.norm();
  if (p.rho <= 1e-12 * (1.0 + v.max_abs())) {
    const auto w = is_aligned(v, tol_align);
    if (!w) throw Error(Errc::UndefinedTheta, "x_k = x_0 at a non-aligned configuration");
    p.theta = *w;
  } else {
    p.theta = r / p.rho;
  }
  if (d == 2) {
    for (std::size_t i = 0; i + 1 < links.size(); ++i) {
      const Eigen::VectorXd& a = links[i];
      const Eigen::VectorXd& b = links[i + 1];
      p.angles.push_back(std::atan2(a(0) * b(1) - a(1) * b(0), a.dot(b)));
    }
  } else {
    Eigen::Matrix3d frame = frame_step(links[0].head<3>().normalized());
    for (std::size_t i = 0; i + 1 < links.size(); ++i) {
      const Eigen::Vector3d rel = frame.transpose() * links[i + 1].head<3>().normalized();
      p.relative_dirs.push_back(rel);
      frame = frame * frame_step(rel);
    }
  }
  return p;
}

/// Rebuilds the pointed chain (x_0 at the origin). In 3D the result agrees with
/// the source configuration up to a rotation about theta.
inline Configuration from_spherical(const ChainSpec& chain, const SphericalParams& p) {
  const int d = chain.dim();
  const int k = chain.link_count();
  std::vector<Eigen::VectorXd> dirs;
  if (d == 2) {
    if (static_cast<int>(p.angles.size()) != k - 1)
      throw Error(Errc::DimensionMismatch, "wrong number of joint angles");
    double a = 0.0;
    dirs.push_back(Eigen::Vector2d(1.0, 0.0));
    for (double t : p.angles) {
      a += t;
      dirs.push_back(Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
  } else {
    if (static_cast<int>(p.relative_dirs.size()) != k - 1)
      throw Error(Errc::DimensionMismatch, "wrong number of joint directions");
    Eigen::Matrix3d frame = Eigen::Matrix3d::Identity();
    dirs.push_back(Eigen::Vector3d::UnitX());
    for (const auto& rel : p.relative_dirs) {
      const Eigen::Vector3d u = (frame * rel).normalized();
      dirs.push_back(u);
      frame = frame * frame_step(rel.normalized());
    }
  }
  Configuration out(k + 1, d);
  for (int i = 0; i < k; ++i)
    out.points.row(i + 1) = out.points.row(i) + chain.lengths()[static_cast<std::size_t>(i)] * dirs[static_cast<std::size_t>(i)].transpose();
  const Eigen::VectorXd r = chain_work_map(out);
  const Eigen::VectorXd from = r.norm() > 1e-12 * (1.0 + out.max_abs()) ? Eigen::VectorXd(r.normalized()) : dirs.front();
  const Eigen::MatrixXd rot = rotation_between(from, p.theta.normalized());
  out.points = out.points * rot.transpose();
  return out;
}

/// Fixing the variable link at length `length` yields a closed chain.
inline ChainSpec prismatic_fiber(const ChainSpec& pc, double length) {
  if (pc.kind() != ChainKind::PrismaticClosed)
    throw Error(Errc::InvalidSpec, "prismatic_fiber needs a prismatic closed chain");
  const auto& r = *pc.range();
  if (length < r.min || length > r.max || !(length > 0.0))
    throw Error(Errc::OutOfRange, "length outside the prismatic range");
  std::vector<double> ls = pc.lengths();
  ls.push_back(length);
  return ChainSpec(ChainKind::Closed, std::move(ls), pc.dim());
}

}  // namespace linkage::chains
