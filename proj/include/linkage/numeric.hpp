#pragma once

// Numerical engine: projection onto the configuration space, sampling, gauge
// fixed tangent frames, curve continuation, finite-difference derivatives on the
// constraint manifold, reduced work data and local branch counting.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "linkage/errors.hpp"
#include "linkage/linalg.hpp"
#include "linkage/model.hpp"

namespace linkage {

enum class GaugeKind { Full, Pointed, Reduced };

inline const char* to_string(GaugeKind g) {
  switch (g) {
    case GaugeKind::Full: return "Full";
    case GaugeKind::Pointed: return "Pointed";
    case GaugeKind::Reduced: return "Reduced";
  }
  return "?";
}

/// Residual below which a configuration counts as lying on C(Γ).
inline double on_constraint_tol(const Linkage& l) {
  double m = 1.0;
  for (double x : l.lengths) m = std::max(m, x * x);
  return 1e-8 * m;
}

inline void require_on_constraint(const Linkage& l, const Configuration& v) {
  const double r = constraint_residual(l, v).lpNorm<Eigen::Infinity>();
  if (r >= on_constraint_tol(l))
    throw Error(Errc::OffConstraint, "configuration residual " + std::to_string(r) + " is too large");
}

// ---------------------------------------------------------------------------
// Gauss-Newton

struct GnOptions {
  double tol = 1e-10;
  int max_iter = 100;
  double tol_rank = kDefaultTolRank;
  int polish = 3;
};

struct GnResult {
  Eigen::VectorXd x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Minimum-norm Gauss-Newton with Armijo backtracking (factor 0.5, c = 1e-4).
/// `eval(x, r, J)` fills the residual and its Jacobian.
template <class Eval>
GnResult gauss_newton(Eval&& eval, Eigen::VectorXd x, const GnOptions& opt) {
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  eval(x, r, j);
  double inf = r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
  GnResult res{x, inf, 0, inf < opt.tol};
  if (res.converged) return res;
  int polish_left = opt.polish;
  for (int it = 0; it < opt.max_iter; ++it) {
    const Eigen::VectorXd step = pinv_solve(j, r, opt.tol_rank);
    const double f0 = r.squaredNorm();
    double alpha = 1.0;
    Eigen::VectorXd xn, rn;
    Eigen::MatrixXd jn;
    bool accepted = false;
    while (alpha > 1e-10) {
      xn = x - alpha * step;
      eval(xn, rn, jn);
      if (rn.squaredNorm() <= (1.0 - 2e-4 * alpha) * f0) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++res.iterations;
    if (!accepted) break;
    x = xn;
    r = rn;
    j = jn;
    inf = r.lpNorm<Eigen::Infinity>();
    if (inf < opt.tol) {
      res.converged = true;
      if (polish_left-- <= 0 || inf == 0.0) break;
    }
  }
  res.x = x;
  res.residual = inf;
  res.converged = res.converged || inf < opt.tol;
  return res;
}

// ---------------------------------------------------------------------------
// Gauge-fixed coordinate systems

/// Free coordinates of a configuration once the gauge is fixed: pinned vertices
/// keep their reference positions. In 3D the reduced gauge also adds a linear
/// slice transverse to the rotation about the base link.
struct GaugeSystem {
  const Linkage* linkage = nullptr;
  GaugeKind gauge = GaugeKind::Full;
  Eigen::VectorXd reference;          // full flat coordinates
  std::vector<int> pinned_vertices;
  std::vector<int> free_coords;       // indices into the flat vector
  std::vector<int> rows;              // edges with at least one free endpoint
  std::optional<Eigen::VectorXd> slice;  // over free coordinates

  int free_dim() const { return static_cast<int>(free_coords.size()); }

  Eigen::VectorXd free_part(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(free_dim());
    for (int i = 0; i < free_dim(); ++i) out(i) = full(free_coords[static_cast<std::size_t>(i)]);
    return out;
  }

  Eigen::VectorXd full_from(const Eigen::VectorXd& free) const {
    Eigen::VectorXd out = reference;
    for (int i = 0; i < free_dim(); ++i) out(free_coords[static_cast<std::size_t>(i)]) = free(i);
    return out;
  }

  /// Embeds a free-coordinate direction into the full flat space.
  Eigen::VectorXd lift(const Eigen::VectorXd& free_dir) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(reference.size());
    for (int i = 0; i < free_dim(); ++i) out(free_coords[static_cast<std::size_t>(i)]) = free_dir(i);
    return out;
  }

  Configuration config(const Eigen::VectorXd& free) const {
    return Configuration::from_flat(full_from(free), linkage->dim);
  }

  /// Constraint rows (edges touching a free vertex) restricted to free columns.
  void constraints(const Eigen::VectorXd& free, Eigen::VectorXd& r, Eigen::MatrixXd& j) const {
    const Configuration c = config(free);
    const Eigen::VectorXd res = constraint_residual(*linkage, c);
    const Eigen::MatrixXd jac = constraint_jacobian(*linkage, c);
    r.resize(static_cast<Eigen::Index>(rows.size()));
    j.resize(static_cast<Eigen::Index>(rows.size()), free_dim());
    for (std::size_t a = 0; a < rows.size(); ++a) {
      r(static_cast<Eigen::Index>(a)) = res(rows[a]);
      for (int b = 0; b < free_dim(); ++b) j(static_cast<Eigen::Index>(a), b) = jac(rows[a], free_coords[static_cast<std::size_t>(b)]);
    }
  }

  /// Constraint rows plus the slice row (if any), evaluated at `free`.
  void constraints_with_slice(const Eigen::VectorXd& free, Eigen::VectorXd& r, Eigen::MatrixXd& j) const {
    Eigen::VectorXd r0;
    Eigen::MatrixXd j0;
    constraints(free, r0, j0);
    if (!slice) {
      r = r0;
      j = j0;
      return;
    }
    r.resize(r0.size() + 1);
    j.resize(j0.rows() + 1, free_dim());
    r << r0, slice->dot(free - free_part(reference));
    j << j0, slice->transpose();
  }
};

inline GaugeSystem make_gauge_system(const Linkage& l, const Configuration& v, GaugeKind gauge) {
  check_matches(l, v);
  GaugeSystem s;
  s.linkage = &l;
  s.gauge = gauge;
  s.reference = v.flat();
  const int d = l.dim;
  if (gauge != GaugeKind::Full) s.pinned_vertices.push_back(l.base_vertex);
  std::optional<Eigen::VectorXd> axis;
  if (gauge == GaugeKind::Reduced) {
    const auto bl = l.effective_base_link();
    if (!bl) throw Error(Errc::InvalidSpec, "reduced gauge needs a link at the base vertex");
    const int other = l.graph.edge(*bl).other(l.base_vertex);
    s.pinned_vertices.push_back(other);
    const Eigen::VectorXd dir = v.point(other) - v.point(l.base_vertex);
    if (dir.norm() <= kDegenerateTol * (1.0 + v.max_abs()))
      throw Error(Errc::DegenerateDirection, "base link endpoints coincide");
    axis = dir.normalized();
  }
  for (int i = 0; i < l.vertex_count(); ++i) {
    if (std::find(s.pinned_vertices.begin(), s.pinned_vertices.end(), i) != s.pinned_vertices.end()) continue;
    for (int c = 0; c < d; ++c) s.free_coords.push_back(i * d + c);
  }
  for (int e = 0; e < l.edge_count(); ++e) {
    const Edge& ed = l.graph.edge(e);
    const bool pu = std::find(s.pinned_vertices.begin(), s.pinned_vertices.end(), ed.u) != s.pinned_vertices.end();
    const bool pv = std::find(s.pinned_vertices.begin(), s.pinned_vertices.end(), ed.v) != s.pinned_vertices.end();
    if (!(pu && pv)) s.rows.push_back(e);
  }
  if (axis && d == 3) {
    // Generator of rotation about the base-link axis.
    const Eigen::Vector3d a = axis->head<3>();
    const Eigen::Vector3d base = v.point(l.base_vertex).head<3>();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(v.size() * 3);
    for (int i = 0; i < v.size(); ++i) g.segment<3>(3 * i) = a.cross(v.point(i).head<3>() - base);
    Eigen::VectorXd gf = s.free_part(g);
    if (gf.norm() > 1e-9 * (1.0 + v.max_abs())) s.slice = gf.normalized();
  }
  return s;
}

// ---------------------------------------------------------------------------
// Projection and sampling

struct ProjectOptions {
  double tol = 1e-10;
  int max_iter = 100;
  double tol_rank = kDefaultTolRank;
  /// Vertices held fixed during projection. When unset, the base vertex is held
  /// fixed if it already sits at the origin.
  std::optional<std::vector<int>> pinned;
};

inline Configuration project_to_cspace(const Linkage& l, const Configuration& guess,
                                       const ProjectOptions& opt = {}) {
  check_matches(l, guess);
  std::vector<int> pinned;
  if (opt.pinned) {
    pinned = *opt.pinned;
  } else if (guess.point(l.base_vertex).norm() == 0.0) {
    pinned.push_back(l.base_vertex);
  }
  GaugeSystem s;
  s.linkage = &l;
  s.reference = guess.flat();
  s.pinned_vertices = pinned;
  for (int i = 0; i < l.vertex_count(); ++i) {
    if (std::find(pinned.begin(), pinned.end(), i) != pinned.end()) continue;
    for (int c = 0; c < l.dim; ++c) s.free_coords.push_back(i * l.dim + c);
  }
  for (int e = 0; e < l.edge_count(); ++e) s.rows.push_back(e);
  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& j) { s.constraints(x, r, j); };
  GnOptions g;
  g.tol = opt.tol;
  g.max_iter = opt.max_iter;
  g.tol_rank = opt.tol_rank;
  const GnResult res = gauss_newton(eval, s.free_part(s.reference), g);
  if (!res.converged)
    throw Error(Errc::NoConvergence, "projection stalled at residual " + std::to_string(res.residual));
  return s.config(res.x);
}

/// Per-sample random stream keyed by (seed, index).
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline std::vector<Configuration> sample_cspace(const Linkage& l, int n, std::uint64_t seed) {
  if (n < 1) throw Error(Errc::InvalidSpec, "sample count must be at least 1");
  const double box = l.total_length();
  std::vector<Configuration> out;
  for (int i = 0; i < n; ++i) {
    auto rng = substream(seed, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> u(-box, box);
    Configuration c(l.vertex_count(), l.dim);
    for (int a = 0; a < c.size(); ++a)
      for (int b = 0; b < c.dim(); ++b) c.points(a, b) = u(rng);
    ProjectOptions po;
    po.pinned = std::vector<int>{};
    try {
      out.push_back(project_to_cspace(l, c, po));
    } catch (const Error&) {
    }
  }
  if (out.empty()) throw Error(Errc::NoFeasiblePoint, "no sample could be projected onto the configuration space");
  return out;
}

// ---------------------------------------------------------------------------
// Tangent frames

struct TangentFrame {
  Configuration base_config;
  GaugeKind gauge = GaugeKind::Full;
  Eigen::MatrixXd basis;  // columns, flat coordinates
  std::vector<int> pinned_vertices;

  int dimension() const { return static_cast<int>(basis.cols()); }
};

inline TangentFrame tangent_frame(const Linkage& l, const Configuration& v, GaugeKind gauge,
                                  double tol_rank = kDefaultTolRank) {
  require_on_constraint(l, v);
  const GaugeSystem s = make_gauge_system(l, v, gauge);
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  s.constraints_with_slice(s.free_part(s.reference), r, j);
  const Eigen::MatrixXd nb = null_basis(j, s.free_dim(), tol_rank);
  TangentFrame f;
  f.base_config = v;
  f.gauge = gauge;
  f.pinned_vertices = s.pinned_vertices;
  f.basis.resize(s.reference.size(), nb.cols());
  for (Eigen::Index c = 0; c < nb.cols(); ++c) f.basis.col(c) = s.lift(nb.col(c));
  return f;
}

// ---------------------------------------------------------------------------
// Finite differences on the constraint manifold

using ConfigFunction = std::function<double(const Configuration&)>;

inline double default_fd_step(const Configuration& v) { return 1e-4 * (1.0 + v.max_abs()); }

namespace detail {

/// Move along `dir` (flat) from the frame base point and retract onto C(Γ),
/// holding the frame's pinned vertices.
inline Configuration retract(const Linkage& l, const TangentFrame& f, const Eigen::VectorXd& dir) {
  const Configuration moved = Configuration::from_flat(f.base_config.flat() + dir, l.dim);
  ProjectOptions po;
  po.pinned = f.pinned_vertices;
  po.tol = 1e-13 * std::max(1.0, on_constraint_tol(l) * 1e8);
  return project_to_cspace(l, moved, po);
}

}  // namespace detail

inline Eigen::VectorXd fd_gradient(const Linkage& l, const ConfigFunction& f, const TangentFrame& frame,
                                   std::optional<double> step = std::nullopt) {
  const double h = step.value_or(default_fd_step(frame.base_config));
  Eigen::VectorXd g(frame.dimension());
  for (int i = 0; i < frame.dimension(); ++i) {
    const Eigen::VectorXd b = frame.basis.col(i);
    g(i) = (f(detail::retract(l, frame, h * b)) - f(detail::retract(l, frame, -h * b))) / (2.0 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_hessian(const Linkage& l, const ConfigFunction& f, const TangentFrame& frame,
                                  std::optional<double> step = std::nullopt) {
  const double h = step.value_or(default_fd_step(frame.base_config));
  const int n = frame.dimension();
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
  const double f0 = f(frame.base_config);
  auto at = [&](const Eigen::VectorXd& dir) { return f(detail::retract(l, frame, dir)); };
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd bi = frame.basis.col(i);
    hess(i, i) = (at(h * bi) - 2.0 * f0 + at(-h * bi)) / (h * h);
    for (int j = i + 1; j < n; ++j) {
      const Eigen::VectorXd bj = frame.basis.col(j);
      const double v = (at(h * (bi + bj)) - at(h * (bi - bj)) - at(h * (bj - bi)) + at(-h * (bi + bj))) / (4.0 * h * h);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return 0.5 * (hess + hess.transpose());
}

// ---------------------------------------------------------------------------
// Reduced work function

struct ReducedWorkData {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  TangentFrame frame;

  /// Counts of positive and negative Hessian eigenvalues beyond `tol_eig`
  /// relative to the spectral norm, plus the near-zero count.
  struct Inertia {
    int positive = 0;
    int negative = 0;
    int zero = 0;
  };

  Inertia inertia(double rel_tol = 1e-6) const {
    Inertia in;
    if (hessian.size() == 0) return in;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double thr = rel_tol * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev(i) > thr) ++in.positive;
      else if (ev(i) < -thr) ++in.negative;
      else ++in.zero;
    }
    return in;
  }
};

/// Gradient and Hessian of |x_e - x_base| on the reduced tangent frame.
inline ReducedWorkData reduced_work_data(const Linkage& l, const Configuration& v, int effector,
                                         double tol_rank = kDefaultTolRank) {
  require_on_constraint(l, v);
  if (effector == l.base_vertex) throw Error(Errc::InvalidSpec, "effector must differ from base");
  const int base = l.base_vertex;
  const double dist = (v.point(effector) - v.point(base)).norm();
  if (dist <= 1e-9 * (1.0 + v.max_abs()))
    throw Error(Errc::CoincidentEndpoints, "effector coincides with base");
  ReducedWorkData out;
  out.value = dist;
  out.frame = tangent_frame(l, v, GaugeKind::Reduced, tol_rank);
  ConfigFunction f = [base, effector](const Configuration& c) { return (c.point(effector) - c.point(base)).norm(); };
  out.gradient = fd_gradient(l, f, out.frame);
  out.hessian = fd_hessian(l, f, out.frame);
  return out;
}

// ---------------------------------------------------------------------------
// Continuation

enum class TraceStop { MaxSteps, LoopClosed, TangentDimChange, BranchPoint, StalledAtSingularity };

inline const char* to_string(TraceStop s) {
  switch (s) {
    case TraceStop::MaxSteps: return "MaxSteps";
    case TraceStop::LoopClosed: return "LoopClosed";
    case TraceStop::TangentDimChange: return "TangentDimChange";
    case TraceStop::BranchPoint: return "BranchPoint";
    case TraceStop::StalledAtSingularity: return "StalledAtSingularity";
  }
  return "?";
}

inline bool is_singular_stop(TraceStop s) {
  return s == TraceStop::TangentDimChange || s == TraceStop::BranchPoint || s == TraceStop::StalledAtSingularity;
}

struct TraceResult {
  std::vector<Configuration> points;
  std::vector<Eigen::VectorXd> tangents;  // flat, unit
  TraceStop stop = TraceStop::MaxSteps;
  bool closed_loop = false;
  /// Localized branch points passed through (record mode only).
  std::vector<Configuration> branch_points;
};

enum class BranchPointPolicy { Stop, Record };

struct TraceOptions {
  double tol_rank = kDefaultTolRank;
  /// Initial travel direction (flat); the start tangent is oriented along it.
  std::optional<Eigen::VectorXd> direction;
  int max_halvings = 4;
  BranchPointPolicy branch_points = BranchPointPolicy::Stop;
};

namespace detail {

struct CurveState {
  Eigen::VectorXd x;  // free coordinates
  Eigen::VectorXd t;  // unit tangent, free coordinates
  double det = 0.0;   // augmented Jacobian determinant (0 when not square)
};

inline std::optional<Eigen::VectorXd> curve_tangent(const GaugeSystem& s, const Eigen::VectorXd& x, double tol_rank,
                                                    int& dim) {
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  s.constraints_with_slice(x, r, j);
  const Eigen::MatrixXd nb = null_basis(j, s.free_dim(), tol_rank);
  dim = static_cast<int>(nb.cols());
  if (dim != 1) return std::nullopt;
  return Eigen::VectorXd(nb.col(0));
}

inline double augmented_det(const GaugeSystem& s, const Eigen::VectorXd& x, const Eigen::VectorXd& t) {
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  s.constraints_with_slice(x, r, j);
  if (j.rows() + 1 != s.free_dim()) return 0.0;
  Eigen::MatrixXd a(j.rows() + 1, j.cols());
  a << j, t.transpose();
  return a.determinant();
}

/// Predictor-corrector step of arclength `h` from (x, t).
inline std::optional<Eigen::VectorXd> corrector(const GaugeSystem& s, const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& t, double h, double tol_rank) {
  const Eigen::VectorXd pred = x + h * t;
  auto eval = [&](const Eigen::VectorXd& y, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    Eigen::VectorXd rc;
    Eigen::MatrixXd jc;
    s.constraints_with_slice(y, rc, jc);
    r.resize(rc.size() + 1);
    j.resize(jc.rows() + 1, jc.cols());
    r << rc, t.dot(y - pred);
    j << jc, t.transpose();
  };
  GnOptions g;
  g.tol = 1e-11;
  g.max_iter = 30;
  g.tol_rank = tol_rank;
  const GnResult res = gauss_newton(eval, pred, g);
  if (!res.converged) return std::nullopt;
  // Reject jumps to a distant sheet.
  if ((res.x - pred).norm() > 0.5 * std::abs(h)) return std::nullopt;
  return res.x;
}

}  // namespace detail

/// Pseudo-arclength continuation of a one-dimensional reduced configuration
/// space. Stops at max_steps, on loop closure, when the tangent dimension
/// changes, at a detected branch point (sign change of the augmented Jacobian
/// determinant, localized by bisection), or when the corrector fails.
inline TraceResult trace_curve(const Linkage& l, const Configuration& v0, double step, int max_steps,
                               const TraceOptions& opt = {}) {
  require_on_constraint(l, v0);
  const GaugeSystem s = make_gauge_system(l, v0, GaugeKind::Reduced);
  int dim = 0;
  const Eigen::VectorXd x0 = s.free_part(s.reference);
  auto t0 = detail::curve_tangent(s, x0, opt.tol_rank, dim);
  if (!t0) throw Error(Errc::NotACurve, "reduced tangent dimension is " + std::to_string(dim) + ", not 1");
  Eigen::VectorXd t = *t0;
  if (opt.direction) {
    if (t.dot(s.free_part(*opt.direction)) < 0) t = -t;
  } else {
    // Deterministic orientation: first significant component positive.
    for (Eigen::Index i = 0; i < t.size(); ++i)
      if (std::abs(t(i)) > 1e-8) {
        if (t(i) < 0) t = -t;
        break;
      }
  }
  TraceResult out;
  auto push = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& tt) {
    out.points.push_back(s.config(x));
    out.tangents.push_back(s.lift(tt));
  };
  detail::CurveState cur{x0, t, detail::augmented_det(s, x0, t)};
  push(cur.x, cur.t);

  // Next state after arclength h from `from`, or nullopt.
  auto advance = [&](const detail::CurveState& from, double h, TraceStop& why) -> std::optional<detail::CurveState> {
    const auto xn = detail::corrector(s, from.x, from.t, h, opt.tol_rank);
    if (!xn) {
      why = TraceStop::StalledAtSingularity;
      return std::nullopt;
    }
    int dn = 0;
    auto tn = detail::curve_tangent(s, *xn, opt.tol_rank, dn);
    if (!tn) {
      why = TraceStop::TangentDimChange;
      return detail::CurveState{*xn, from.t, 0.0};
    }
    if (tn->dot(from.t) < 0) *tn = -*tn;
    return detail::CurveState{*xn, *tn, detail::augmented_det(s, *xn, *tn)};
  };

  for (int k = 0; k < max_steps; ++k) {
    TraceStop why = TraceStop::MaxSteps;
    std::optional<detail::CurveState> next;
    double h = step;
    for (int attempt = 0; attempt <= opt.max_halvings; ++attempt, h *= 0.5) {
      why = TraceStop::MaxSteps;
      next = advance(cur, h, why);
      if (next) break;
    }
    if (!next) {
      out.stop = why;
      return out;
    }
    if (why == TraceStop::TangentDimChange) {
      push(next->x, next->t);
      out.stop = why;
      return out;
    }
    if (cur.det != 0.0 && next->det != 0.0 && std::signbit(cur.det) != std::signbit(next->det)) {
      // Bisect the arclength of the step to localize the branch point.
      double lo = 0.0, hi = h;
      detail::CurveState best = *next;
      while (hi - lo > 1e-9 * (1.0 + std::abs(step))) {
        const double mid = 0.5 * (lo + hi);
        TraceStop w2 = TraceStop::MaxSteps;
        auto m = advance(cur, mid, w2);
        if (!m || w2 == TraceStop::TangentDimChange) {
          if (m) best = *m;
          break;
        }
        if (std::signbit(m->det) == std::signbit(cur.det)) {
          lo = mid;
        } else {
          hi = mid;
          best = *m;
        }
      }
      if (opt.branch_points == BranchPointPolicy::Stop) {
        push(best.x, best.t);
        out.stop = TraceStop::BranchPoint;
        return out;
      }
      out.branch_points.push_back(s.config(best.x));
    }
    cur = *next;
    push(cur.x, cur.t);
    if (k + 1 >= 10 && (cur.x - x0).norm() < 0.5 * step) {
      out.stop = TraceStop::LoopClosed;
      out.closed_loop = true;
      return out;
    }
  }
  out.stop = TraceStop::MaxSteps;
  return out;
}

// ---------------------------------------------------------------------------
// Local branch counting

struct BranchReport {
  double radius = 0.0;
  int sample_count = 0;
  int retained = 0;
  int branch_count = 0;
  std::vector<int> cluster_sizes;
  int half_radius_count = 0;
  bool stable = false;
};

struct BranchOptions {
  double cluster_factor = 0.25;
  double tol_rank = kDefaultTolRank;
};

inline double default_branch_radius(const Linkage& l) {
  return 1e-2 * *std::min_element(l.lengths.begin(), l.lengths.end());
}

namespace detail {

struct SphereSection {
  int retained = 0;
  std::vector<int> cluster_sizes;
};

inline SphereSection sphere_section(const Linkage& l, const Configuration& v, double radius, int n_samples,
                                    std::uint64_t seed, const BranchOptions& opt) {
  const GaugeSystem s = make_gauge_system(l, v, GaugeKind::Reduced);
  const Eigen::VectorXd center = s.free_part(s.reference);
  const TangentFrame frame = tangent_frame(l, v, GaugeKind::Reduced, opt.tol_rank);
  const Eigen::MatrixXd tb = [&] {
    Eigen::MatrixXd m(s.free_dim(), frame.dimension());
    for (int c = 0; c < frame.dimension(); ++c) m.col(c) = s.free_part(frame.basis.col(c));
    return m;
  }();
  auto eval = [&](const Eigen::VectorXd& y, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    Eigen::VectorXd rc;
    Eigen::MatrixXd jc;
    s.constraints_with_slice(y, rc, jc);
    const Eigen::VectorXd off = y - center;
    r.resize(rc.size() + 1);
    j.resize(jc.rows() + 1, jc.cols());
    r << rc, off.squaredNorm() - radius * radius;
    j << jc, 2.0 * off.transpose();
  };
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < n_samples; ++i) {
    auto rng = substream(seed, static_cast<std::uint64_t>(i));
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd dir(s.free_dim());
    if (tb.cols() > 0) {
      Eigen::VectorXd c(tb.cols());
      for (Eigen::Index a = 0; a < c.size(); ++a) c(a) = nd(rng);
      dir = tb * c;
    } else {
      for (Eigen::Index a = 0; a < dir.size(); ++a) dir(a) = nd(rng);
    }
    if (dir.norm() == 0.0) continue;
    GnOptions g;
    g.tol = 1e-11 * std::max(1.0, on_constraint_tol(l) * 1e8);
    g.max_iter = 60;
    g.tol_rank = opt.tol_rank;
    const GnResult res = gauss_newton(eval, Eigen::VectorXd(center + radius * dir.normalized()), g);
    if (!res.converged) continue;
    if (std::abs((res.x - center).norm() - radius) > 1e-6 * radius) continue;
    pts.push_back(res.x);
  }
  SphereSection out;
  out.retained = static_cast<int>(pts.size());
  // Single-linkage clustering via union-find, in sample order.
  std::vector<int> parent(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) {
    return parent[static_cast<std::size_t>(x)] == x ? x : parent[static_cast<std::size_t>(x)] = find(parent[static_cast<std::size_t>(x)]);
  };
  const double thr = opt.cluster_factor * radius;
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b)
      if ((pts[a] - pts[b]).norm() < thr) {
        const int ra = find(static_cast<int>(a)), rb = find(static_cast<int>(b));
        if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
      }
  std::vector<int> roots;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int r = find(static_cast<int>(i));
    auto it = std::find(roots.begin(), roots.end(), r);
    if (it == roots.end()) {
      roots.push_back(r);
      out.cluster_sizes.push_back(1);
    } else {
      ++out.cluster_sizes[static_cast<std::size_t>(it - roots.begin())];
    }
  }
  return out;
}

}  // namespace detail

/// Number of arcs of C(Γ) leaving `v` (reduced gauge), estimated from the
/// intersection with small spheres of radius r and r/2.
inline BranchReport local_branch_count(const Linkage& l, const Configuration& v, std::optional<double> radius,
                                       int n_samples, std::uint64_t seed, const BranchOptions& opt = {}) {
  require_on_constraint(l, v);
  const double r = radius.value_or(default_branch_radius(l));
  const auto full = detail::sphere_section(l, v, r, n_samples, seed, opt);
  const auto half = detail::sphere_section(l, v, 0.5 * r, n_samples, seed, opt);
  BranchReport rep;
  rep.radius = r;
  rep.sample_count = n_samples;
  rep.retained = full.retained;
  rep.cluster_sizes = full.cluster_sizes;
  rep.branch_count = static_cast<int>(full.cluster_sizes.size());
  rep.half_radius_count = static_cast<int>(half.cluster_sizes.size());
  rep.stable = rep.branch_count == rep.half_radius_count;
  return rep;
}

}  // namespace linkage
