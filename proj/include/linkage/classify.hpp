#pragma once

// Smooth / singular verdicts with local cone models, and the singularity
// conditions for triangular parallel platforms.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "linkage/chains.hpp"
#include "linkage/decomp.hpp"
#include "linkage/errors.hpp"
#include "linkage/model.hpp"
#include "linkage/numeric.hpp"

namespace linkage {

enum class Verdict { Smooth, GenericSingular, Indeterminate, Conflict };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Smooth: return "Smooth";
    case Verdict::GenericSingular: return "GenericSingular";
    case Verdict::Indeterminate: return "Indeterminate";
    case Verdict::Conflict: return "Conflict";
  }
  return "Unknown";
}

/// Local model: cone on {t_1^2 + .. + t_j^2 = t_{j+1}^2 + .. + t_{j+q}^2}
/// times R^e.
struct Witness {
  decomp::Decomposition decomposition;
  int stage = 0;
  int j = 0;
  int q = 0;
  int euclidean_factor = 0;
};

struct ClassificationReport {
  Verdict verdict = Verdict::Indeterminate;
  int rank = 0;
  int edge_count = 0;
  std::optional<Witness> witness;
  std::optional<decomp::Decomposition> certificate;
  std::optional<std::string> conjunction;
  std::optional<BranchReport> branch_report;
  std::vector<std::string> notes;
};

struct ClassifyOptions {
  double tol_rank = kDefaultTolRank;
  std::optional<double> tol_grad;
  double tol_align = chains::kDefaultTolAlign;
  double tol_eig = 1e-6;
  int depth = decomp::kDefaultDepth;
  bool branches = false;
  int branch_samples = 120;
  std::uint64_t seed = 0;

  decomp::Tolerances tolerances() const { return {tol_rank, tol_grad, tol_eig, tol_align}; }
};

namespace detail {

inline std::string join(const std::vector<int>& xs, const char* sep) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? sep : "") << xs[i];
  return os.str();
}

inline std::string vec_text(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << (std::abs(v(i)) < 1e-12 ? 0.0 : v(i));
  os << ")";
  return os.str();
}

inline Witness make_witness(const decomp::Decomposition& d, int dim) {
  Witness w;
  w.decomposition = d;
  const auto& v = d.stages.front().verdict;
  w.j = v.remainder_inertia.positive + v.chain_inertia.negative;
  w.q = v.remainder_inertia.negative + v.chain_inertia.positive;
  for (std::size_t n = 1; n < d.stages.size(); ++n) {
    const int k = static_cast<int>(d.stages[n].chain_edges.size());
    w.euclidean_factor += k * (dim - 1) - dim;
  }
  return w;
}

inline std::string conjunction_text(const decomp::Stage& s) {
  std::ostringstream os;
  os << "sub-mechanism on links {" << join(s.remainder_edges, ",") << "} has a critical distance from x"
     << s.chain_vertices.front() << " to x" << s.chain_vertices.back() << ", co-aligned with open chain x"
     << join(s.chain_vertices, "-x");
  if (s.verdict.aligned_direction) os << " along " << vec_text(*s.verdict.aligned_direction);
  return os.str();
}

}  // namespace detail

inline ClassificationReport classify_configuration(const Linkage& l, const Configuration& v,
                                                   const ClassifyOptions& opt = {}) {
  check_matches(l, v);
  require_on_constraint(l, v);
  ClassificationReport r;
  r.edge_count = l.edge_count();
  r.rank = numerical_rank(constraint_jacobian(l, v), opt.tol_rank);
  const decomp::Tolerances tol = opt.tolerances();
  if (r.rank == r.edge_count) {
    r.verdict = Verdict::Smooth;
    r.certificate = decomp::Decomposition{decomp::detail::all_edges(l), {}};
  } else {
    r.certificate = decomp::find_smoothness_certificate(l, v, opt.depth, tol);
    if (auto w = decomp::find_nontransversive_witness(l, v, opt.depth, tol)) {
      r.witness = detail::make_witness(*w, l.dim);
      r.conjunction = detail::conjunction_text(w->stages.front());
    }
    if (r.certificate && r.witness) {
      r.verdict = Verdict::Conflict;
      r.notes.push_back("both a transversality certificate and a non-transversive witness were found");
    } else if (r.certificate) {
      r.verdict = Verdict::Smooth;
    } else if (r.witness) {
      r.verdict = Verdict::GenericSingular;
    } else {
      r.verdict = Verdict::Indeterminate;
      r.notes.push_back("rank deficient; no certificate or witness within depth " + std::to_string(opt.depth));
    }
  }
  if (opt.branches) r.branch_report = local_branch_count(l, v, std::nullopt, opt.branch_samples, opt.seed);
  return r;
}

// ---------------------------------------------------------------------------
// Triangular parallel platforms

struct Line2 {
  Eigen::Vector2d point;
  Eigen::Vector2d direction;
};

inline std::optional<Eigen::Vector2d> intersect(const Line2& a, const Line2& b, double tol_angle = 1e-12) {
  const Eigen::Vector2d da = a.direction.normalized(), db = b.direction.normalized();
  const double cross = da.x() * db.y() - da.y() * db.x();
  if (std::abs(cross) <= tol_angle) return std::nullopt;
  const Eigen::Vector2d w = b.point - a.point;
  const double t = (w.x() * db.y() - w.y() * db.x()) / cross;
  return a.point + t * da;
}

inline bool lines_coincide(const Line2& a, const Line2& b, double tol_angle, double tol_offset) {
  const Eigen::Vector2d da = a.direction.normalized(), db = b.direction.normalized();
  if (std::asin(std::min(1.0, std::abs(da.x() * db.y() - da.y() * db.x()))) > tol_angle) return false;
  const Eigen::Vector2d w = b.point - a.point;
  return std::abs(w.x() * da.y() - w.y() * da.x()) <= tol_offset;
}

/// True when the three lines pass through one point (or are one line).
inline bool lines_concurrent(const std::array<Line2, 3>& lines, double tol) {
  std::vector<Eigen::Vector2d> hits;
  for (int i = 0; i < 3; ++i)
    for (int k = i + 1; k < 3; ++k) {
      const auto p = intersect(lines[static_cast<std::size_t>(i)], lines[static_cast<std::size_t>(k)]);
      if (!p) {
        return lines_coincide(lines[0], lines[1], 1e-12, tol) && lines_coincide(lines[0], lines[2], 1e-12, tol);
      }
      hits.push_back(*p);
    }
  for (std::size_t i = 0; i < hits.size(); ++i)
    for (std::size_t k = i + 1; k < hits.size(); ++k)
      if ((hits[i] - hits[k]).norm() > tol) return false;
  return true;
}

enum class PlatformKind { None, TypeA, TypeB };

inline const char* to_string(PlatformKind k) {
  switch (k) {
    case PlatformKind::None: return "None";
    case PlatformKind::TypeA: return "TypeA";
    case PlatformKind::TypeB: return "TypeB";
  }
  return "Unknown";
}

struct PlatformCondition {
  PlatformKind kind = PlatformKind::None;
  std::vector<std::pair<int, int>> coinciding_pairs;  // branch indices, type (a)
  bool concurrent = false;                             // type (b)
  std::optional<Eigen::Vector2d> meeting_point;
  std::vector<bool> aligned;
};

struct PlatformTolerances {
  double tol_align = chains::kDefaultTolAlign;
  double tol_angle = 1e-6;
  std::optional<double> tol_offset;  // default 1e-8 * total length
};

/// Vertex sequence of each branch, from its fixed end to its moving end.
inline std::vector<std::vector<int>> platform_branch_vertices(const Linkage& l) {
  if (!l.platform || l.platform->branches.size() != 3 || l.dim != 2)
    throw Error(Errc::NotAPlatform, "expected a planar platform with three branches");
  const auto& fixed = l.platform->fixed;
  std::vector<std::vector<int>> out;
  for (const auto& br : l.platform->branches) {
    if (br.empty()) throw Error(Errc::NotAPlatform, "empty branch");
    const Edge& first = l.graph.edge(br.front());
    int cur = std::find(fixed.begin(), fixed.end(), first.u) != fixed.end() ? first.u : first.v;
    if (std::find(fixed.begin(), fixed.end(), cur) == fixed.end())
      throw Error(Errc::NotAPlatform, "branch does not start on the fixed platform");
    std::vector<int> verts{cur};
    for (int e : br) {
      const Edge& ed = l.graph.edge(e);
      if (!ed.touches(cur)) throw Error(Errc::NotAPlatform, "branch edges do not form a path");
      cur = ed.other(cur);
      verts.push_back(cur);
    }
    if (std::find(l.platform->moving.begin(), l.platform->moving.end(), cur) == l.platform->moving.end())
      throw Error(Errc::NotAPlatform, "branch does not end on the moving platform");
    out.push_back(std::move(verts));
  }
  return out;
}

inline Configuration rows_of(const Configuration& v, const std::vector<int>& verts) {
  Configuration c(static_cast<int>(verts.size()), v.dim());
  for (std::size_t i = 0; i < verts.size(); ++i) c.points.row(static_cast<Eigen::Index>(i)) = v.points.row(verts[i]);
  return c;
}

/// Type (a) is reported ahead of type (b) when both hold.
inline PlatformCondition platform_conditions(const Linkage& l, const Configuration& v, const PlatformTolerances& tol = {}) {
  check_matches(l, v);
  const auto branches = platform_branch_vertices(l);
  const double offset = tol.tol_offset.value_or(1e-8 * l.total_length());
  PlatformCondition out;
  std::vector<Line2> lines;
  for (const auto& br : branches) {
    const Configuration c = rows_of(v, br);
    const auto w = chains::is_aligned(c, tol.tol_align);
    out.aligned.push_back(w.has_value());
    lines.push_back({c.point(0), w ? Eigen::Vector2d(*w) : Eigen::Vector2d::Zero()});
  }
  for (int i = 0; i < 3; ++i)
    for (int k = i + 1; k < 3; ++k)
      if (out.aligned[static_cast<std::size_t>(i)] && out.aligned[static_cast<std::size_t>(k)] &&
          lines_coincide(lines[static_cast<std::size_t>(i)], lines[static_cast<std::size_t>(k)], tol.tol_angle, offset))
        out.coinciding_pairs.emplace_back(i, k);
  if (out.aligned[0] && out.aligned[1] && out.aligned[2] && lines_concurrent({lines[0], lines[1], lines[2]}, offset * 10)) {
    out.concurrent = true;
    for (int i = 0; i < 3 && !out.meeting_point; ++i)
      for (int k = i + 1; k < 3 && !out.meeting_point; ++k)
        out.meeting_point = intersect(lines[static_cast<std::size_t>(i)], lines[static_cast<std::size_t>(k)]);
  }
  if (!out.coinciding_pairs.empty()) out.kind = PlatformKind::TypeA;
  else if (out.concurrent) out.kind = PlatformKind::TypeB;
  return out;
}

struct PlatformVerification {
  ClassificationReport report;
  PlatformCondition condition;
  std::optional<double> gradient_norm;  // reduced work of the remainder, type (b)
  bool non_generic = false;
};

/// Classifies along the decomposition that removes one branch (type (b)), or
/// one of the two coinciding branches with the third branch re-attached last
/// (type (a)).
inline PlatformVerification verify_platform_singularity(const Linkage& l, const Configuration& v,
                                                        const ClassifyOptions& opt = {},
                                                        const PlatformTolerances& ptol = {}) {
  PlatformVerification out;
  out.condition = platform_conditions(l, v, ptol);
  auto& r = out.report;
  r.edge_count = l.edge_count();
  r.rank = numerical_rank(constraint_jacobian(l, v), opt.tol_rank);
  if (out.condition.kind == PlatformKind::None) {
    r = classify_configuration(l, v, opt);
    r.notes.push_back("neither platform condition holds");
    return out;
  }
  decomp::Tolerances tol = opt.tolerances();
  if (!tol.tol_grad) tol.tol_grad = decomp::default_tol_grad(l.total_length());
  const auto branches = platform_branch_vertices(l);
  const auto& tags = l.platform->branches;

  int removed = 2, later = -1;
  if (out.condition.kind == PlatformKind::TypeA) {
    const auto [i1, i2] = out.condition.coinciding_pairs.front();
    removed = i1;
    later = 3 - i1 - i2;
  }
  std::vector<int> gamma_m;
  for (int e = 0; e < l.edge_count(); ++e) {
    bool skip = false;
    for (int b : {removed, later})
      if (b >= 0) skip |= std::find(tags[static_cast<std::size_t>(b)].begin(), tags[static_cast<std::size_t>(b)].end(), e) != tags[static_cast<std::size_t>(b)].end();
    if (!skip) gamma_m.push_back(e);
  }

  auto stage_for = [&](int branch, const std::vector<int>& remainder_edges) {
    const auto& verts = branches[static_cast<std::size_t>(branch)];
    decomp::Stage s;
    s.remainder_edges = remainder_edges;
    s.chain_vertices = verts;
    s.chain_edges = tags[static_cast<std::size_t>(branch)];
    s.gamma_edges = remainder_edges;
    s.gamma_edges.insert(s.gamma_edges.end(), s.chain_edges.begin(), s.chain_edges.end());
    std::sort(s.gamma_edges.begin(), s.gamma_edges.end());
    const Configuration chain = rows_of(v, verts);
    s.chain_aligned = chains::is_aligned(chain, tol.tol_align).has_value();
    const SubLinkage rem = sub_linkage(l, remainder_edges, verts.front(), verts.back());
    s.verdict = decomp::stage_classify(rem.linkage, rem.restrict(v), chain, tol);
    return s;
  };

  decomp::Decomposition d;
  d.base_edges = gamma_m;
  d.stages.push_back(stage_for(removed, gamma_m));
  if (later >= 0) {
    std::vector<int> upper = d.stages.front().gamma_edges;
    d.stages.push_back(stage_for(later, upper));
  }
  const decomp::Stage& m = d.stages.front();
  out.gradient_norm = m.verdict.gradient_norm;

  if (out.condition.kind == PlatformKind::TypeB && out.condition.meeting_point) {
    const Eigen::Vector2d y = v.point(branches[static_cast<std::size_t>(removed)].back());
    if ((y - *out.condition.meeting_point).norm() <= 1e-6 * (1.0 + v.max_abs())) {
      out.non_generic = true;
      r.verdict = Verdict::Indeterminate;
      r.notes.push_back("coupler point sits at the instant center: the coupler curve is singular here (non-generic type (b))");
      return out;
    }
  }

  const bool base_smooth = decomp::detail::full_rank(l, v, gamma_m, tol.tol_rank);
  bool later_ok = true;
  for (std::size_t n = 1; n < d.stages.size(); ++n) later_ok &= !d.stages[n].chain_aligned;
  if (m.verdict.kind == decomp::StageKind::GenericallyNonTransverse && base_smooth && later_ok) {
    r.verdict = Verdict::GenericSingular;
    r.witness = detail::make_witness(d, l.dim);
    r.conjunction = detail::conjunction_text(m);
  } else {
    r.verdict = Verdict::Indeterminate;
    if (!base_smooth) r.notes.push_back("base sub-mechanism is not rank-certified smooth");
    if (!later_ok) r.notes.push_back("a later removed branch is aligned");
    for (const auto& why : m.verdict.reasons) r.notes.push_back(why);
    if (m.verdict.kind == decomp::StageKind::Transverse) r.notes.push_back("branch stage is transverse");
  }
  if (opt.branches) r.branch_report = local_branch_count(l, v, std::nullopt, opt.branch_samples, opt.seed);
  return out;
}

}  // namespace linkage
