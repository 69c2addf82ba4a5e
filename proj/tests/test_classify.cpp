#include <gtest/gtest.h>

#include <random>

#include "linkage/classify.hpp"
#include "linkage/demos.hpp"
#include "test_support.hpp"

using namespace linkage;
using namespace linkage::testing;

namespace {

Configuration moved(const Configuration& v, const Eigen::MatrixXd& rot, const Eigen::VectorXd& shift) {
  Configuration out = v;
  out.points = (v.points * rot.transpose()).rowwise() + shift.transpose();
  return out;
}

int reduced_dim(const Linkage& l, const Configuration& v) {
  return tangent_frame(l, v, GaugeKind::Reduced).dimension();
}

}  // namespace

TEST(Classify, GenericFourBarIsSmoothByRank) {
  const auto r = classify_configuration(four_bar(3, 2.5, 1.5, 2), four_bar_config(3, 2.5, 1.5, 2, 1.0));
  EXPECT_EQ(r.verdict, Verdict::Smooth);
  EXPECT_EQ(r.rank, 4);
  EXPECT_TRUE(r.certificate);
}

TEST(Classify, NodeIsGenericSingular) {
  const Linkage l = four_bar(3, 2.5, 1.5, 2);
  ClassifyOptions opt;
  opt.branches = true;
  const auto r = classify_configuration(l, four_bar_node(), opt);
  EXPECT_EQ(r.verdict, Verdict::GenericSingular);
  EXPECT_EQ(r.rank, 3);
  ASSERT_TRUE(r.witness);
  EXPECT_EQ(r.witness->j, 1);
  EXPECT_EQ(r.witness->q, 1);
  EXPECT_EQ(r.witness->euclidean_factor, 0);
  EXPECT_EQ(r.witness->j + r.witness->q, reduced_dim(l, four_bar_node()));
  ASSERT_TRUE(r.conjunction);
  ASSERT_TRUE(r.branch_report);
  EXPECT_EQ(r.branch_report->branch_count, 4);
}

TEST(Classify, SixVertexMechanismIsNotCertified) {
  const auto d = demos::egsing();
  const auto r = classify_configuration(d.linkage, d.config);
  EXPECT_LT(r.rank, r.edge_count);
  EXPECT_FALSE(r.witness);
  EXPECT_FALSE(r.certificate);
  EXPECT_EQ(r.verdict, Verdict::Indeterminate);
}

TEST(Classify, OffConstraintIsRejected) {
  try {
    classify_configuration(four_bar(3, 2.5, 1.5, 2), make_config({{0, 0}, {3, 0}, {0.5, 0.1}, {2, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::OffConstraint);
  }
}

TEST(Classify, SignatureMatchesReducedDimension) {
  for (const char* name : {"four-bar-singular", "tri-platform-a", "tri-platform-b"}) {
    const auto d = demos::by_name(name);
    const auto r = classify_configuration(d.linkage, d.config);
    ASSERT_TRUE(r.witness) << name;
    EXPECT_EQ(r.witness->j + r.witness->q + r.witness->euclidean_factor, reduced_dim(d.linkage, d.config)) << name;
  }
}

TEST(Classify, VerdictMonotoneInRankTolerance) {
  for (const auto& name : demos::names()) {
    const auto d = demos::by_name(name);
    int prev_rank = -1;
    bool smooth_seen_loose = false;
    for (double tol : {1e-6, 1e-8, 1e-10}) {
      ClassifyOptions opt;
      opt.tol_rank = tol;
      const auto r = classify_configuration(d.linkage, d.config, opt);
      if (prev_rank >= 0) EXPECT_GE(r.rank, prev_rank) << name;
      if (smooth_seen_loose) EXPECT_EQ(r.verdict, Verdict::Smooth) << name;
      smooth_seen_loose |= r.verdict == Verdict::Smooth;
      prev_rank = r.rank;
    }
  }
}

TEST(Classify, RigidMotionInvariance) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (const auto& name : demos::names()) {
    const auto d = demos::by_name(name);
    const auto base = classify_configuration(d.linkage, d.config);
    for (int t = 0; t < 3; ++t) {
      const Eigen::Vector2d shift(nd(rng), nd(rng));
      const auto r = classify_configuration(d.linkage, moved(d.config, random_rotation(rng, 2), shift));
      EXPECT_EQ(r.verdict, base.verdict) << name;
      EXPECT_EQ(r.witness.has_value(), base.witness.has_value()) << name;
      if (r.witness && base.witness) {
        EXPECT_EQ(r.witness->j, base.witness->j) << name;
        EXPECT_EQ(r.witness->q, base.witness->q) << name;
      }
    }
  }
}

TEST(Classify, SpatialNodeHasTwoDimensionalQuadric) {
  // The same aligned four-bar in R^3: each removed direction picks up a
  // second transverse dimension.
  const Linkage l = make_linkage(3, 4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}, {3, 2.5, 1.5, 2}, 0, 0);
  const Configuration v = make_config({{0, 0, 0}, {3, 0, 0}, {0.5, 0, 0}, {2, 0, 0}});
  const auto r = classify_configuration(l, v);
  EXPECT_EQ(r.verdict, Verdict::GenericSingular);
  ASSERT_TRUE(r.witness);
  EXPECT_EQ(r.witness->j, 2);
  EXPECT_EQ(r.witness->q, 2);
  EXPECT_EQ(r.witness->j + r.witness->q, reduced_dim(l, v));
}

TEST(LinesConcurrent, Examples) {
  const Eigen::Vector2d o(0, 0);
  EXPECT_TRUE(lines_concurrent({Line2{o, {1, 0}}, Line2{o, {0, 1}}, Line2{o, {1, 1}}}, 1e-9));
  EXPECT_FALSE(lines_concurrent({Line2{o, {1, 0}}, Line2{{0, 1}, {1, 0}}, Line2{o, {0, 1}}}, 1e-9));
  EXPECT_FALSE(lines_concurrent({Line2{o, {1, 0}}, Line2{o, {0, 1}}, Line2{{0, 1}, {1, -1.5}}}, 1e-9));
  EXPECT_TRUE(lines_concurrent({Line2{o, {1, 0}}, Line2{{2, 0}, {-1, 0}}, Line2{{5, 0}, {1, 0}}}, 1e-9));
}

TEST(PlatformConditions, Demos) {
  const auto a = demos::tri_platform_a();
  const auto ca = platform_conditions(a.linkage, a.config);
  EXPECT_EQ(ca.kind, PlatformKind::TypeA);
  ASSERT_EQ(ca.coinciding_pairs.size(), 1u);
  EXPECT_EQ(ca.coinciding_pairs[0], std::make_pair(0, 1));

  const auto b = demos::tri_platform_b();
  const auto cb = platform_conditions(b.linkage, b.config);
  EXPECT_EQ(cb.kind, PlatformKind::TypeB);
  ASSERT_TRUE(cb.meeting_point);
  EXPECT_LT((*cb.meeting_point - Eigen::Vector2d(2, 3)).norm(), 1e-9);
}

TEST(PlatformConditions, GenericPoseIsNone) {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    const auto d = demos::random_platform(rng);
    if (numerical_rank(constraint_jacobian(d.linkage, d.config)) != d.linkage.edge_count()) continue;
    ++checked;
    EXPECT_EQ(platform_conditions(d.linkage, d.config).kind, PlatformKind::None);
  }
  EXPECT_GT(checked, 190);
}

TEST(PlatformConditions, NotAPlatform) {
  try {
    platform_conditions(four_bar(3, 2.5, 1.5, 2), four_bar_node());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotAPlatform);
  }
}

TEST(VerifyPlatform, TypeA) {
  const auto a = demos::tri_platform_a();
  const auto v = verify_platform_singularity(a.linkage, a.config);
  EXPECT_EQ(v.report.verdict, Verdict::GenericSingular);
  ASSERT_TRUE(v.report.witness);
  EXPECT_EQ(v.report.witness->decomposition.stages.size(), 2u);
}

TEST(VerifyPlatform, TypeBGradientVanishes) {
  const auto b = demos::tri_platform_b();
  const auto v = verify_platform_singularity(b.linkage, b.config);
  EXPECT_EQ(v.report.verdict, Verdict::GenericSingular);
  ASSERT_TRUE(v.gradient_norm);
  EXPECT_LT(*v.gradient_norm, 1e-6);
  EXPECT_FALSE(v.non_generic);
}

TEST(VerifyPlatform, CouplerAtInstantCenterIsNonGeneric) {
  const Configuration c = demos::tri_platform_b_pose(1.0);
  const Linkage l = demos::platform_through(c.points);
  const auto v = verify_platform_singularity(l, c);
  EXPECT_EQ(v.condition.kind, PlatformKind::TypeB);
  EXPECT_EQ(v.report.verdict, Verdict::Indeterminate);
  EXPECT_TRUE(v.non_generic);
}

TEST(PlatformConditions, RotatedBranchBreaksConcurrency) {
  // Branch 3 stays aligned but its line misses the meeting point.
  const Configuration c = demos::tri_platform_b_pose();
  const Eigen::Vector2d a3 = c.point(2), c3 = c.point(5), b3 = c.point(8);
  const double ang = 0.05;
  Eigen::Matrix2d rot;
  rot << std::cos(ang), -std::sin(ang), std::sin(ang), std::cos(ang);
  Eigen::MatrixXd p = c.points;
  p.row(5) = (a3 + rot * (c3 - a3)).transpose();
  p.row(8) = (a3 + rot * (b3 - a3)).transpose();
  const Linkage l2 = demos::platform_through(p);
  const auto cond = platform_conditions(l2, Configuration(p));
  EXPECT_EQ(cond.kind, PlatformKind::None);
  EXPECT_TRUE(cond.aligned[2]);
}
