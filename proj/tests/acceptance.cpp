// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is non-zero only when a criterion outside kKnownRed fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "linkage/chains.hpp"
#include "linkage/classify.hpp"
#include "linkage/demos.hpp"
#include "linkage/numeric.hpp"
#include "test_support.hpp"

using namespace linkage;
using namespace linkage::testing;

namespace {

constexpr double kJacobianRelTol = 1e-6;
constexpr double kAlignedBasisTol = 1e-8;
constexpr double kMorseEigTol = 1e-6;
constexpr double kNodeRadius = 1e-2;
constexpr double kPlatformGradTol = 1e-6;
constexpr double kReachSlack = 1e-2;
constexpr double kTraceResidualTol = 1e-9;
constexpr double kNodeStopDistance = 1e-3;

// The six-vertex demo is singular at V: see the README's "Known red criterion".
const std::set<int> kKnownRed{5};

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

Outcome jacobian_oracle() {
  std::mt19937_64 rng(101);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int d = 2 + static_cast<int>(rng() % 2);
    auto [l, v] = random_linkage(rng, n, d);
    const Eigen::MatrixXd j = constraint_jacobian(l, v);
    const double h = 1e-6 * (1.0 + v.max_abs());
    worst = std::max(worst, (j - fd_jacobian(l, v, h)).norm() / std::max(j.norm(), 1e-300));
  }
  return {worst < kJacobianRelTol, "200 pairs, worst relative error " + fmt("%.2e", worst)};
}

Outcome submersion_dichotomy() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> len(0.3, 2.0);
  int bad = 0, aligned_count = 0;
  for (int t = 0; t < 500; ++t) {
    const int k = 2 + static_cast<int>(rng() % 5);
    const int d = 2 + static_cast<int>(rng() % 2);
    const bool make_aligned = t % 2 == 0;
    const Eigen::VectorXd w = random_unit(rng, d);
    std::vector<double> ls;
    std::vector<Eigen::VectorXd> dirs;
    for (int i = 0; i < k; ++i) {
      ls.push_back(len(rng));
      dirs.push_back(make_aligned ? Eigen::VectorXd((rng() % 2 ? 1.0 : -1.0) * w) : random_unit(rng, d));
    }
    const Configuration v = chain_from_dirs(ls, dirs);
    const auto al = chains::is_aligned(v);
    const SubspaceBasis img = chains::chain_work_image(v);
    if (al) {
      ++aligned_count;
      bad += img.dimension() != d - 1 ||
             (img.vectors.transpose() * *al).lpNorm<Eigen::Infinity>() >= kAlignedBasisTol;
    } else {
      bad += img.dimension() != d;
    }
  }
  return {bad == 0, "500 chains (" + std::to_string(aligned_count) + " aligned), " + std::to_string(bad) + " mismatches"};
}

Outcome morse_index() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> len(0.5, 2.0);
  int checked = 0, agree = 0;
  while (checked < 100) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const int d = 2 + static_cast<int>(rng() % 2);
    std::vector<double> ls;
    std::vector<int> sg;
    double signed_sum = 0;
    for (int i = 0; i < n; ++i) {
      ls.push_back(len(rng));
      sg.push_back(rng() % 2 ? 1 : -1);
      signed_sum += sg.back() * ls.back();
    }
    if (std::abs(signed_sum) < 0.2) continue;
    if (signed_sum < 0)
      for (int& s : sg) s = -s;
    const Eigen::VectorXd u = random_unit(rng, d);
    std::vector<Eigen::VectorXd> dirs;
    for (int s : sg) dirs.push_back(s * u);
    const Configuration v = chain_from_dirs(ls, dirs);
    std::vector<double> closed = ls;
    closed.push_back(std::abs(signed_sum));
    const int index = chains::aligned_morse_index(chains::ChainSpec(chains::ChainKind::Closed, closed, d), v);
    const Linkage open = chains::ChainSpec(chains::ChainKind::Open, ls, d).to_linkage();
    const auto in = reduced_work_data(open, v, n).inertia(kMorseEigTol);
    agree += in.zero == 0 && in.negative == index;
    ++checked;
  }
  return {agree == checked, std::to_string(agree) + "/" + std::to_string(checked) + " agree"};
}

Outcome node_criterion() {
  const demos::Demo d = demos::four_bar_singular();
  const int rank = numerical_rank(constraint_jacobian(d.linkage, d.config));
  const ClassificationReport r = classify_configuration(d.linkage, d.config);
  const BranchReport b = local_branch_count(d.linkage, d.config, kNodeRadius, 120, 0);
  const bool sig = r.witness && r.witness->j == 1 && r.witness->q == 1;
  const bool pass = rank == 3 && r.verdict == Verdict::GenericSingular && sig && b.branch_count == 4 &&
                    b.half_radius_count == 4;
  return {pass, "rank " + std::to_string(rank) + "/4, " + to_string(r.verdict) + ", signature " +
                    (r.witness ? "(" + std::to_string(r.witness->j) + "," + std::to_string(r.witness->q) + ")" : "none") +
                    ", branches " + std::to_string(b.branch_count) + " at 1e-2 and " +
                    std::to_string(b.half_radius_count) + " at 5e-3"};
}

Outcome smoothing_example() {
  const demos::Demo d = demos::egsing();
  const int rank = numerical_rank(constraint_jacobian(d.linkage, d.config));
  const int k = d.linkage.edge_count();
  const ClassificationReport r = classify_configuration(d.linkage, d.config);
  const bool witness_absent = !decomp::find_nontransversive_witness(d.linkage, d.config).has_value();
  const bool smooth = r.verdict == Verdict::Smooth && r.certificate.has_value();
  return {rank < k && smooth && witness_absent,
          "rank " + std::to_string(rank) + "/" + std::to_string(k) + " [" + (rank < k ? "ok" : "bad") + "], verdict " +
              to_string(r.verdict) + (r.certificate ? " with" : " without") + " certificate [" +
              (smooth ? "ok" : "bad") + "], witness " + (witness_absent ? "absent [ok]" : "present [bad]") +
              "; V is not smooth (one removable chain is folded), see README"};
}

Outcome platform_conditions_check() {
  const demos::Demo a = demos::tri_platform_a(), b = demos::tri_platform_b();
  const Verdict va = classify_configuration(a.linkage, a.config).verdict;
  const Verdict vb = classify_configuration(b.linkage, b.config).verdict;
  const PlatformVerification pb = verify_platform_singularity(b.linkage, b.config);
  const PlatformKind ka = platform_conditions(a.linkage, a.config).kind;
  const double grad = pb.gradient_norm.value_or(1e300);
  std::mt19937_64 rng(606);
  int tried = 0, false_positive = 0;
  while (tried < 1000) {
    const demos::Demo p = demos::random_platform(rng);
    if (numerical_rank(constraint_jacobian(p.linkage, p.config)) < p.linkage.edge_count()) continue;
    false_positive += platform_conditions(p.linkage, p.config).kind != PlatformKind::None;
    ++tried;
  }
  const bool pass = va == Verdict::GenericSingular && vb == Verdict::GenericSingular && ka == PlatformKind::TypeA &&
                    pb.condition.kind == PlatformKind::TypeB && grad < kPlatformGradTol && false_positive == 0;
  return {pass, std::string("TypeA ") + to_string(va) + ", TypeB " + to_string(vb) + " with |grad| " +
                    fmt("%.2e", grad) + ", " + std::to_string(false_positive) + "/1000 false positives"};
}

Outcome reach_criterion() {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> len(0.2, 2.0);
  int bad = 0;
  for (int t = 0; t < 50; ++t) {
    const int k = 1 + static_cast<int>(rng() % 6);
    std::vector<double> ls;
    for (int i = 0; i < k; ++i) ls.push_back(len(rng));
    const auto iv = chains::workspace_interval(ls);
    const auto [lo, hi] = sampled_reach(ls, 20000, rng);
    bad += lo < iv.m - kReachSlack || hi > iv.M * (1 + 1e-12);
  }
  const auto a = chains::workspace_interval(std::vector<double>{2, 1});
  const auto b = chains::workspace_interval(std::vector<double>{1, 1, 1});
  const bool examples = a.m == 1 && a.M == 3 && b.m == 0 && b.M == 3;
  return {bad == 0 && examples, std::to_string(bad) + "/50 outside, (2,1) -> (" + fmt("%g", a.m) + "," +
                                    fmt("%g", a.M) + "), (1,1,1) -> (" + fmt("%g", b.m) + "," + fmt("%g", b.M) + ")"};
}

Outcome continuation() {
  const Linkage l = four_bar(2.0, 1.2, 1.7, 0.9);
  TraceOptions opt;
  opt.branch_points = BranchPointPolicy::Record;
  const TraceResult r = trace_curve(l, four_bar_config(2.0, 1.2, 1.7, 0.9, 1.3), 0.01, 5000, opt);
  double worst = 0;
  int reversals = 0;
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    worst = std::max(worst, constraint_residual(l, r.points[i]).lpNorm<Eigen::Infinity>());
    if (i && r.tangents[i].dot(r.tangents[i - 1]) <= 0) ++reversals;
  }

  const Linkage node_l = four_bar(3, 2.5, 1.5, 2);
  const Configuration node = testing::four_bar_node();
  const TangentFrame f = tangent_frame(node_l, node, GaugeKind::Reduced);
  ProjectOptions po;
  po.pinned = std::vector<int>{0, 1};
  const Configuration start =
      project_to_cspace(node_l, Configuration::from_flat(node.flat() + 0.05 * f.basis.col(0), 2), po);
  TraceOptions to;
  to.direction = node.flat() - start.flat();
  const TraceResult s = trace_curve(node_l, start, 0.01, 200, to);
  const double dist = (s.points.back().points - node.points).norm();
  const bool pass = r.closed_loop && worst < kTraceResidualTol && reversals == 0 && is_singular_stop(s.stop) &&
                    dist < kNodeStopDistance;
  return {pass, "loop " + std::string(r.closed_loop ? "closed" : "open") + " in " + std::to_string(r.points.size()) +
                    " points, max residual " + fmt("%.1e", worst) + ", " + std::to_string(reversals) +
                    " tangent reversals; node stop " + to_string(s.stop) + " at distance " + fmt("%.1e", dist)};
}

std::string run_capture(const std::string& cmd) {
  const std::filesystem::path out = std::filesystem::temp_directory_path() / "linkctl_acceptance_out.json";
  std::system((cmd + " > " + out.string() + " 2>/dev/null").c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "linkctl_acceptance";
  fs::create_directories(dir);
  const std::string bin = LINKCTL_PATH;
  std::system((bin + " demo four-bar-singular --dir " + dir.string() + " > /dev/null").c_str());
  const std::string docs = (dir / "linkage.json").string() + " " + (dir / "config.json").string();
  int same = 0;
  const std::vector<std::string> cmds{bin + " analyze " + docs, bin + " sample " + (dir / "linkage.json").string() + " -n 8 --seed 42",
                                      bin + " branches " + docs + " --seed 42"};
  for (const auto& c : cmds) {
    const std::string a = run_capture(c), b = run_capture(c);
    same += !a.empty() && a == b;
  }
  return {same == 3, std::to_string(same) + "/3 commands byte-identical"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"jacobian oracle", jacobian_oracle},
      {"chain submersion dichotomy", submersion_dichotomy},
      {"aligned Morse index", morse_index},
      {"four-bar node", node_criterion},
      {"six-vertex smoothing example", smoothing_example},
      {"platform conditions", platform_conditions_check},
      {"workspace interval", reach_criterion},
      {"continuation", continuation},
      {"determinism", determinism},
  };
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool known = kKnownRed.count(id) > 0;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << o.detail << " ("
              << fmt("%.1f", secs) << " s)" << (!o.pass && known ? " [known red]" : "") << "\n";
    unexpected += !o.pass && !known;
  }
  return unexpected == 0 ? 0 : 1;
}
