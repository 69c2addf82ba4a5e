#pragma once

// Open-chain removals, stage transversality, and the decomposition searches
// for non-transversive witnesses and smoothness certificates.

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "linkage/chains.hpp"
#include "linkage/errors.hpp"
#include "linkage/linalg.hpp"
#include "linkage/model.hpp"
#include "linkage/numeric.hpp"

namespace linkage::decomp {

/// An open chain x_0..x_k whose interior vertices have degree 2. Indices refer
/// to the graph the removal was enumerated on. x_0 is the smaller endpoint.
struct ChainRemoval {
  std::vector<int> chain_edges;
  std::vector<int> chain_vertices;
  std::pair<int, int> endpoints{0, 0};
  std::vector<int> remainder_edges;
  std::vector<int> remainder_vertices;
  MechanismType remainder;

  int link_count() const { return static_cast<int>(chain_edges.size()); }
};

namespace detail {

inline std::optional<ChainRemoval> make_removal(const MechanismType& g, const std::vector<int>& path_vertices,
                                                const std::vector<int>& path_edges) {
  const int a = path_vertices.front(), b = path_vertices.back();
  if (a == b) return std::nullopt;
  ChainRemoval r;
  r.chain_vertices = path_vertices;
  r.chain_edges = path_edges;
  if (a > b) {
    std::reverse(r.chain_vertices.begin(), r.chain_vertices.end());
    std::reverse(r.chain_edges.begin(), r.chain_edges.end());
  }
  r.endpoints = {r.chain_vertices.front(), r.chain_vertices.back()};
  std::vector<bool> interior(static_cast<std::size_t>(g.vertex_count()), false);
  for (std::size_t i = 1; i + 1 < r.chain_vertices.size(); ++i)
    interior[static_cast<std::size_t>(r.chain_vertices[i])] = true;
  std::vector<bool> removed(static_cast<std::size_t>(g.edge_count()), false);
  for (int e : path_edges) removed[static_cast<std::size_t>(e)] = true;
  for (int e = 0; e < g.edge_count(); ++e)
    if (!removed[static_cast<std::size_t>(e)]) r.remainder_edges.push_back(e);
  if (r.remainder_edges.empty()) return std::nullopt;
  for (int x = 0; x < g.vertex_count(); ++x)
    if (!interior[static_cast<std::size_t>(x)]) r.remainder_vertices.push_back(x);
  std::vector<int> local(static_cast<std::size_t>(g.vertex_count()), -1);
  for (std::size_t i = 0; i < r.remainder_vertices.size(); ++i)
    local[static_cast<std::size_t>(r.remainder_vertices[i])] = static_cast<int>(i);
  std::vector<Edge> edges;
  for (int e : r.remainder_edges) edges.push_back({local[static_cast<std::size_t>(g.edge(e).u)], local[static_cast<std::size_t>(g.edge(e).v)]});
  r.remainder = MechanismType(static_cast<int>(r.remainder_vertices.size()), std::move(edges));
  if (!r.remainder.connected()) return std::nullopt;
  return r;
}

}  // namespace detail

/// Every removable open chain, ordered lexicographically by sorted edge indices.
inline std::vector<ChainRemoval> enumerate_chain_removals(const MechanismType& g) {
  std::map<std::vector<int>, ChainRemoval> found;
  for (int start = 0; start < g.vertex_count(); ++start) {
    for (int first : g.incident_edges(start)) {
      std::vector<int> verts{start};
      std::vector<int> edges;
      int cur = start, via = first;
      while (true) {
        const int next = g.edge(via).other(cur);
        if (std::find(verts.begin(), verts.end(), next) != verts.end()) break;
        verts.push_back(next);
        edges.push_back(via);
        std::vector<int> key = edges;
        std::sort(key.begin(), key.end());
        if (!found.count(key))
          if (auto r = detail::make_removal(g, verts, edges)) found.emplace(std::move(key), std::move(*r));
        if (g.degree(next) != 2) break;
        const auto inc = g.incident_edges(next);
        via = inc[0] == via ? inc[1] : inc[0];
        cur = next;
      }
    }
  }
  std::vector<ChainRemoval> out;
  for (auto& [k, r] : found) out.push_back(std::move(r));
  return out;
}

/// Whether two subspaces of R^d together span R^d.
inline bool transversality_check(const SubspaceBasis& a, const SubspaceBasis& b, int d,
                                 double tol_rank = kDefaultTolRank) {
  if (a.ambient_dim != d || b.ambient_dim != d || a.vectors.rows() != d || b.vectors.rows() != d)
    throw Error(Errc::DimensionMismatch, "subspace bases must live in R^" + std::to_string(d));
  Eigen::MatrixXd stacked(d, a.vectors.cols() + b.vectors.cols());
  stacked << a.vectors, b.vectors;
  return numerical_rank(stacked, tol_rank) == d;
}

struct Tolerances {
  double tol_rank = kDefaultTolRank;
  std::optional<double> tol_grad;  // default 1e-6 * (1 + total length)
  double tol_eig = 1e-6;
  double tol_align = chains::kDefaultTolAlign;
};

inline double default_tol_grad(double total_length) { return 1e-6 * (1.0 + total_length); }

/// Image of the effector velocity x_e - x_base over the pointed tangent space.
inline SubspaceBasis pointed_work_image(const Linkage& l, const Configuration& v, int effector,
                                        double tol_rank = kDefaultTolRank) {
  const TangentFrame f = tangent_frame(l, v, GaugeKind::Pointed, tol_rank);
  const int d = l.dim;
  Eigen::MatrixXd vel(d, f.dimension());
  for (int c = 0; c < f.dimension(); ++c)
    vel.col(c) = f.basis.col(c).segment(effector * d, d) - f.basis.col(c).segment(l.base_vertex * d, d);
  return {d, range_basis(vel, tol_rank)};
}

enum class StageKind { Transverse, GenericallyNonTransverse, DegenerateNonTransverse };

inline const char* to_string(StageKind k) {
  switch (k) {
    case StageKind::Transverse: return "Transverse";
    case StageKind::GenericallyNonTransverse: return "GenericallyNonTransverse";
    case StageKind::DegenerateNonTransverse: return "DegenerateNonTransverse";
  }
  return "Unknown";
}

struct Signature {
  int positive = 0;
  int negative = 0;
};

struct StageVerdict {
  StageKind kind = StageKind::Transverse;
  SubspaceBasis chain_image;
  SubspaceBasis remainder_image;
  std::optional<Eigen::VectorXd> aligned_direction;
  std::optional<double> gradient_norm;
  Eigen::VectorXd hessian_eigenvalues;
  Signature remainder_inertia;  // reduced work of the remainder
  Signature chain_inertia;      // reduced work of the removed chain
  std::vector<std::string> reasons;
};

/// `remainder` carries base x_0 and end effector x_k; `chain` holds x_0..x_k.
inline StageVerdict stage_classify(const Linkage& remainder, const Configuration& v_remainder,
                                   const Configuration& chain, const Tolerances& tol = {}) {
  check_matches(remainder, v_remainder);
  if (!remainder.end_effector) throw Error(Errc::InvalidSpec, "remainder needs an end effector");
  if (chain.size() < 2 || chain.dim() != remainder.dim)
    throw Error(Errc::DimensionMismatch, "chain configuration does not match the remainder");
  const int d = remainder.dim;
  const int eff = *remainder.end_effector;
  const Eigen::VectorXd psi = v_remainder.point(eff) - v_remainder.point(remainder.base_vertex);
  const Eigen::VectorXd phi = chains::chain_work_map(chain);
  const double scale = 1.0 + std::max(v_remainder.max_abs(), chain.max_abs());
  if ((psi - phi).norm() > 1e-8 * scale)
    throw Error(Errc::MismatchedEffector, "remainder and chain disagree on x_k - x_0");

  StageVerdict out;
  out.chain_image = chains::chain_work_image(chain, tol.tol_rank);
  out.remainder_image = pointed_work_image(remainder, v_remainder, eff, tol.tol_rank);
  if (transversality_check(out.chain_image, out.remainder_image, d, tol.tol_rank)) return out;

  std::vector<double> chain_lengths;
  for (const auto& lv : chains::link_vectors(chain)) chain_lengths.push_back(lv.norm());
  double total = remainder.total_length();
  for (double c : chain_lengths) total += c;
  const double tol_grad = tol.tol_grad.value_or(default_tol_grad(total));

  out.kind = StageKind::GenericallyNonTransverse;
  out.aligned_direction = chains::is_aligned(chain, tol.tol_align);
  if (!out.aligned_direction) out.reasons.push_back("removed chain is not aligned");
  if (psi.norm() <= 1e-9 * scale) {
    out.reasons.push_back("x_0 coincides with x_k");
  } else {
    const ReducedWorkData w = reduced_work_data(remainder, v_remainder, eff, tol.tol_rank);
    out.gradient_norm = w.gradient.norm();
    if (*out.gradient_norm >= tol_grad) out.reasons.push_back("reduced work gradient above tolerance");
    if (w.hessian.size()) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w.hessian);
      out.hessian_eigenvalues = es.eigenvalues();
      // Relative cut, floored so pure finite-difference noise counts as zero.
      const double thr = std::max(tol.tol_eig * out.hessian_eigenvalues.cwiseAbs().maxCoeff(), tol_grad);
      for (Eigen::Index i = 0; i < out.hessian_eigenvalues.size(); ++i) {
        const double ev = out.hessian_eigenvalues(i);
        if (ev > thr) ++out.remainder_inertia.positive;
        else if (ev < -thr) ++out.remainder_inertia.negative;
      }
      if (out.remainder_inertia.positive + out.remainder_inertia.negative != w.hessian.rows())
        out.reasons.push_back("reduced work Hessian is degenerate");
    }
    if (out.aligned_direction && chain.size() > 2) {
      const Linkage cl = chains::ChainSpec(chains::ChainKind::Open, chain_lengths, d).to_linkage();
      const ReducedWorkData cw = reduced_work_data(cl, chain, chain.size() - 1, tol.tol_rank);
      const auto in = cw.inertia(tol.tol_eig);
      out.chain_inertia = {in.positive, in.negative};
    }
  }
  if (!out.reasons.empty()) out.kind = StageKind::DegenerateNonTransverse;
  return out;
}

/// Stage n of a decomposition: the chain removed from Gamma_{n+1} to leave
/// Gamma_n. Edge and vertex indices are those of the full linkage.
struct Stage {
  std::vector<int> gamma_edges;  // Gamma_{n+1}
  std::vector<int> chain_edges;
  std::vector<int> chain_vertices;
  std::vector<int> remainder_edges;  // Gamma_n
  bool chain_aligned = false;
  StageVerdict verdict;
};

/// stages[0] is attached directly to `base_edges`; the last stage yields the
/// full linkage.
struct Decomposition {
  std::vector<int> base_edges;
  std::vector<Stage> stages;
};

inline constexpr int kDefaultDepth = 4;

namespace detail {

inline std::vector<int> all_edges(const Linkage& l) {
  std::vector<int> e(static_cast<std::size_t>(l.edge_count()));
  for (int i = 0; i < l.edge_count(); ++i) e[static_cast<std::size_t>(i)] = i;
  return e;
}

inline int min_vertex(const Linkage& l, const std::vector<int>& edges) {
  int m = l.vertex_count();
  for (int e : edges) m = std::min({m, l.graph.edge(e).u, l.graph.edge(e).v});
  return m;
}

/// A removal expressed in the full linkage's numbering, plus the data a stage
/// evaluation needs.
struct LiftedRemoval {
  Stage stage;
  SubLinkage remainder;
  Configuration v_remainder;
  Configuration chain;
};

inline std::vector<LiftedRemoval> lifted_removals(const Linkage& l, const Configuration& v,
                                                  const std::vector<int>& edges) {
  const SubLinkage sub = sub_linkage(l, edges, min_vertex(l, edges), std::nullopt);
  std::vector<LiftedRemoval> out;
  for (const ChainRemoval& r : enumerate_chain_removals(sub.linkage.graph)) {
    LiftedRemoval lr;
    lr.stage.gamma_edges = edges;
    for (int e : r.chain_edges) lr.stage.chain_edges.push_back(sub.edge_map[static_cast<std::size_t>(e)]);
    for (int x : r.chain_vertices) lr.stage.chain_vertices.push_back(sub.vertex_map[static_cast<std::size_t>(x)]);
    for (int e : r.remainder_edges) lr.stage.remainder_edges.push_back(sub.edge_map[static_cast<std::size_t>(e)]);
    std::sort(lr.stage.remainder_edges.begin(), lr.stage.remainder_edges.end());
    lr.remainder = sub_linkage(l, lr.stage.remainder_edges, lr.stage.chain_vertices.front(), lr.stage.chain_vertices.back());
    lr.v_remainder = lr.remainder.restrict(v);
    lr.chain = Configuration(static_cast<int>(lr.stage.chain_vertices.size()), l.dim);
    for (std::size_t i = 0; i < lr.stage.chain_vertices.size(); ++i)
      lr.chain.points.row(static_cast<Eigen::Index>(i)) = v.points.row(lr.stage.chain_vertices[i]);
    out.push_back(std::move(lr));
  }
  return out;
}

inline bool full_rank(const Linkage& l, const Configuration& v, const std::vector<int>& edges, double tol_rank) {
  const SubLinkage sub = sub_linkage(l, edges, min_vertex(l, edges), std::nullopt);
  return numerical_rank(constraint_jacobian(sub.linkage, sub.restrict(v)), tol_rank) == sub.linkage.edge_count();
}

class Searcher {
 public:
  Searcher(const Linkage& l, const Configuration& v, const Tolerances& tol) : l_(l), v_(v), tol_(tol) {
    if (!tol_.tol_grad) tol_.tol_grad = default_tol_grad(l.total_length());
  }

  std::optional<Decomposition> certificate(const std::vector<int>& edges, int depth) {
    const auto key = std::make_pair(edges, depth);
    if (auto it = cert_memo_.find(key); it != cert_memo_.end()) return it->second;
    std::optional<Decomposition> result;
    if (full_rank(l_, v_, edges, tol_.tol_rank)) {
      result = Decomposition{edges, {}};
    } else if (depth > 0) {
      for (LiftedRemoval& lr : lifted_removals(l_, v_, edges)) {
        const SubspaceBasis a = chains::chain_work_image(lr.chain, tol_.tol_rank);
        const SubspaceBasis b = pointed_work_image(lr.remainder.linkage, lr.v_remainder,
                                                   *lr.remainder.linkage.end_effector, tol_.tol_rank);
        if (!transversality_check(a, b, l_.dim, tol_.tol_rank)) continue;
        auto inner = certificate(lr.stage.remainder_edges, depth - 1);
        if (!inner) continue;
        lr.stage.chain_aligned = chains::is_aligned(lr.chain, tol_.tol_align).has_value();
        lr.stage.verdict.chain_image = a;
        lr.stage.verdict.remainder_image = b;
        inner->stages.push_back(std::move(lr.stage));
        result = std::move(inner);
        break;
      }
    }
    cert_memo_[key] = result;
    return result;
  }

  std::optional<Decomposition> witness(const std::vector<int>& edges, int depth) {
    if (depth <= 0) return std::nullopt;
    const auto key = std::make_pair(edges, depth);
    if (auto it = witness_memo_.find(key); it != witness_memo_.end()) return it->second;
    std::optional<Decomposition> result;
    for (LiftedRemoval& lr : lifted_removals(l_, v_, edges)) {
      lr.stage.chain_aligned = chains::is_aligned(lr.chain, tol_.tol_align).has_value();
      StageVerdict verdict = stage_classify(lr.remainder.linkage, lr.v_remainder, lr.chain, tol_);
      if (verdict.kind == StageKind::GenericallyNonTransverse &&
          certificate(lr.stage.remainder_edges, depth - 1)) {
        lr.stage.verdict = std::move(verdict);
        result = Decomposition{lr.stage.remainder_edges, {std::move(lr.stage)}};
        break;
      }
      if (lr.stage.chain_aligned) continue;
      auto inner = witness(lr.stage.remainder_edges, depth - 1);
      if (!inner) continue;
      lr.stage.verdict = std::move(verdict);
      inner->stages.push_back(std::move(lr.stage));
      result = std::move(inner);
      break;
    }
    witness_memo_[key] = result;
    return result;
  }

 private:
  const Linkage& l_;
  const Configuration& v_;
  Tolerances tol_;
  std::map<std::pair<std::vector<int>, int>, std::optional<Decomposition>> cert_memo_;
  std::map<std::pair<std::vector<int>, int>, std::optional<Decomposition>> witness_memo_;
};

}  // namespace detail

/// First decomposition (depth-first, lexicographic) whose innermost stage is
/// generically non-transverse over a certified-smooth remainder and whose
/// later removed chains are all non-aligned.
inline std::optional<Decomposition> find_nontransversive_witness(const Linkage& l, const Configuration& v,
                                                                  int depth_limit = kDefaultDepth,
                                                                  const Tolerances& tol = {}) {
  check_matches(l, v);
  require_on_constraint(l, v);
  detail::Searcher s(l, v, tol);
  return s.witness(detail::all_edges(l), depth_limit);
}

/// Decomposition with a full-rank base and transverse stages throughout.
inline std::optional<Decomposition> find_smoothness_certificate(const Linkage& l, const Configuration& v,
                                                                int depth_limit = kDefaultDepth,
                                                                const Tolerances& tol = {}) {
  check_matches(l, v);
  require_on_constraint(l, v);
  detail::Searcher s(l, v, tol);
  return s.certificate(detail::all_edges(l), depth_limit);
}

}  // namespace linkage::decomp
