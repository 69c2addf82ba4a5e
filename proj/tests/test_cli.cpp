#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "linkage/demos.hpp"
#include "linkage/io.hpp"
#include "linkage/svg.hpp"
#include "test_support.hpp"

using namespace linkage;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
};

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / ("linkctl_test_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

CliRun linkctl(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt";
  const std::string cmd = "cd " + scratch().string() + " && " + LINKCTL_PATH + " " + args + " > " + out.string() +
                          " 2> " + (scratch() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

std::string demo_dir(const std::string& name) {
  const fs::path d = scratch() / name;
  fs::create_directories(d);
  EXPECT_EQ(linkctl("demo " + name + " --dir " + d.string()).code, 0);
  return d.string();
}

void expect_same_linkage(const Linkage& a, const Linkage& b) {
  EXPECT_EQ(a.dim, b.dim);
  EXPECT_EQ(a.graph.edges(), b.graph.edges());
  EXPECT_EQ(a.lengths, b.lengths);
  EXPECT_EQ(a.base_vertex, b.base_vertex);
  EXPECT_EQ(a.base_link, b.base_link);
  EXPECT_EQ(a.end_effector, b.end_effector);
  EXPECT_EQ(a.prismatic.size(), b.prismatic.size());
  for (std::size_t i = 0; i < a.prismatic.size(); ++i) {
    ASSERT_EQ(a.prismatic[i].has_value(), b.prismatic[i].has_value());
    if (a.prismatic[i]) {
      EXPECT_EQ(a.prismatic[i]->min, b.prismatic[i]->min);
      EXPECT_EQ(a.prismatic[i]->max, b.prismatic[i]->max);
    }
  }
  ASSERT_EQ(a.platform.has_value(), b.platform.has_value());
  if (a.platform) {
    EXPECT_EQ(a.platform->branches, b.platform->branches);
    EXPECT_EQ(a.platform->fixed, b.platform->fixed);
    EXPECT_EQ(a.platform->moving, b.platform->moving);
  }
}

}  // namespace

TEST(Io, LinkageRoundTripThroughText) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto [l, c] = linkage::testing::random_linkage(rng, 3 + trial % 5, 2 + trial % 2);
    const std::string text = io::to_json(l).dump();
    expect_same_linkage(l, io::parse_linkage(io::json::parse(text)));
    const Configuration back = io::parse_configuration(io::json::parse(io::to_json(c).dump()));
    EXPECT_EQ(back.points, c.points);
  }
}

TEST(Io, DemoDocumentsRoundTrip) {
  for (const auto& name : demos::names()) {
    const demos::Demo d = demos::by_name(name);
    const io::json j = io::to_json(d.linkage);
    expect_same_linkage(d.linkage, io::parse_linkage(io::json::parse(j.dump(2))));
    EXPECT_EQ(io::to_json(io::parse_linkage(j)).dump(), j.dump());
  }
}

TEST(Io, PrismaticEdgeSurvives) {
  const io::json j = io::json::parse(R"({"dim":2,"vertices":3,"edges":[
    {"u":0,"v":1,"length":1.0},{"u":1,"v":2,"length":1.0},{"u":2,"v":0,"length":1.5,"prismatic":{"min":0.5,"max":2.0}}],
    "base":0})");
  const Linkage l = io::parse_linkage(j);
  ASSERT_TRUE(l.prismatic[2]);
  EXPECT_EQ(l.prismatic[2]->max, 2.0);
  EXPECT_EQ(io::to_json(l).dump(), io::to_json(io::parse_linkage(io::to_json(l))).dump());
}

TEST(Io, SchemaErrors) {
  EXPECT_THROW(io::parse_linkage(io::json::parse(R"({"dim":2})")), Error);
  EXPECT_THROW(io::parse_linkage(io::json::parse(R"({"dim":2,"vertices":2,"edges":[{"u":0,"v":1,"length":"x"}],"base":0})")),
               Error);
  EXPECT_THROW(io::parse_linkage(io::json::parse(R"({"dim":2,"vertices":2,"edges":[{"u":0,"v":5,"length":1}],"base":0})")),
               Error);
  EXPECT_THROW(io::parse_configuration(io::json::parse(R"({"points":[[0,0],[1]]})")), Error);
  EXPECT_THROW(io::parse_configuration(io::json::parse(R"({"points":[]})")), Error);
}

TEST(Svg, DeterministicAndWellFormed) {
  const demos::Demo d = demos::five_bar();
  svg::Canvas a, b;
  svg::add_linkage(a, d.linkage, d.config);
  svg::add_linkage(b, d.linkage, d.config);
  const std::string s = svg::render(a);
  EXPECT_EQ(s, svg::render(b));
  EXPECT_NE(s.find("<svg"), std::string::npos);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3 + d.linkage.edge_count() + d.linkage.vertex_count());
}

TEST(Cli, AnalyzeExitCodesFollowVerdict) {
  const std::string node = demo_dir("four-bar-singular");
  CliRun r = linkctl("analyze " + node + "/linkage.json " + node + "/config.json");
  EXPECT_EQ(r.code, 10);
  EXPECT_EQ(io::json::parse(r.out)["verdict"], "GenericSingular");
  EXPECT_EQ(io::json::parse(r.out)["rank"], io::json::parse("[3,4]"));

  const std::string reg = demo_dir("four-bar-regular");
  r = linkctl("analyze " + reg + "/linkage.json " + reg + "/config.json");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(io::json::parse(r.out)["verdict"], "Smooth");

  const std::string eg = demo_dir("egsing");
  r = linkctl("analyze " + eg + "/linkage.json " + eg + "/config.json");
  EXPECT_EQ(r.code, 20);
  EXPECT_EQ(io::json::parse(r.out)["verdict"], "Indeterminate");
}

TEST(Cli, PlatformSectionPresent) {
  const std::string p = demo_dir("tri-platform-b");
  const CliRun r = linkctl("analyze " + p + "/linkage.json " + p + "/config.json");
  EXPECT_EQ(r.code, 10);
  const io::json j = io::json::parse(r.out);
  EXPECT_EQ(j["platform"]["condition"], "TypeB");
  EXPECT_LT(j["platform"]["gradient_norm"].get<double>(), 1e-6);
}

TEST(Cli, Errors) {
  EXPECT_EQ(linkctl("demo unknown").code, 1);
  std::ofstream(scratch() / "bad.json") << "{not json";
  const std::string node = demo_dir("four-bar-singular");
  EXPECT_EQ(linkctl("analyze bad.json " + node + "/config.json").code, 1);
  EXPECT_EQ(linkctl("analyze missing.json missing.json").code, 1);
  EXPECT_EQ(linkctl("frobnicate").code, 1);
  std::ofstream(scratch() / "short.json") << R"({"points":[[0,0],[1,0]]})";
  EXPECT_EQ(linkctl("analyze " + node + "/linkage.json short.json").code, 1);
}

TEST(Cli, Workspace) {
  io::json j = io::json::parse(linkctl("workspace --lengths 2,1").out);
  EXPECT_EQ(j["m"], 1.0);
  EXPECT_EQ(j["M"], 3.0);
  j = io::json::parse(linkctl("workspace --lengths 1,1,1").out);
  EXPECT_EQ(j["m"], 0.0);
  EXPECT_EQ(j["M"], 3.0);

  const std::string five = demo_dir("five-bar");
  const CliRun r = linkctl("workspace " + five + "/linkage.json " + five + "/config.json");
  ASSERT_EQ(r.code, 0);
  j = io::json::parse(r.out);
  ASSERT_EQ(j["annuli"].size(), 2u);
  EXPECT_EQ(j["annuli"][0]["m"], 0.5);
  EXPECT_EQ(j["annuli"][0]["M"], 3.5);
  // Every boundary point is inside both annuli, and the effector's position is in the lens.
  ASSERT_GT(j["boundary"].size(), 10u);
  for (const auto& p : j["boundary"])
    for (const auto& a : j["annuli"]) {
      const double r2 = std::hypot(p[0].get<double>() - a["center"][0].get<double>(),
                                   p[1].get<double>() - a["center"][1].get<double>());
      EXPECT_GE(r2, a["m"].get<double>() - 1e-9);
      EXPECT_LE(r2, a["M"].get<double>() + 1e-9);
    }
}

TEST(Cli, BranchesAtNode) {
  const std::string node = demo_dir("four-bar-singular");
  const io::json j = io::json::parse(linkctl("branches " + node + "/linkage.json " + node + "/config.json").out);
  EXPECT_EQ(j["branch_count"], 4);
}

TEST(Cli, TraceClosesWithRecordedBranchPoints) {
  const std::string reg = demo_dir("four-bar-regular");
  const io::json j =
      io::json::parse(linkctl("trace " + reg + "/linkage.json " + reg + "/config.json --record-branch-points").out);
  EXPECT_TRUE(j["closed_loop"].get<bool>());
  EXPECT_GT(j["points"].size(), 100u);
}

TEST(Cli, DeterministicOutput) {
  const std::string node = demo_dir("four-bar-singular");
  const std::string args = node + "/linkage.json " + node + "/config.json";
  for (const std::string& cmd : {"analyze " + args + " --branches", "sample " + node + "/linkage.json -n 5 --seed 9",
                                 "branches " + args + " --seed 4"})
    EXPECT_EQ(linkctl(cmd).out, linkctl(cmd).out) << cmd;
  const std::string reg = demo_dir("four-bar-regular");
  const std::string trace = "trace " + reg + "/linkage.json " + reg + "/config.json --record-branch-points --svg ";
  EXPECT_EQ(linkctl(trace + "a.svg").code, 0);
  EXPECT_EQ(linkctl(trace + "b.svg").code, 0);
  std::ifstream a(scratch() / "a.svg"), b(scratch() / "b.svg");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_FALSE(sa.str().empty());
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Cli, SeedFlagOverridesEnvironment) {
  const std::string node = demo_dir("four-bar-singular");
  const std::string cmd = "sample " + node + "/linkage.json -n 3";
  const std::string by_flag = linkctl(cmd + " --seed 5").out;
  EXPECT_EQ(linkctl(cmd + " --seed 5").out, by_flag);
  ::setenv("LINKCTL_SEED", "5", 1);
  EXPECT_EQ(linkctl(cmd).out, by_flag);
  ::setenv("LINKCTL_SEED", "6", 1);
  EXPECT_EQ(linkctl(cmd + " --seed 5").out, by_flag);
  EXPECT_NE(linkctl(cmd).out, by_flag);
  ::unsetenv("LINKCTL_SEED");
}
