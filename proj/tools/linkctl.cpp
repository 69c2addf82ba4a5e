// linkctl: command-line front end to the linkage library.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>

#include "linkage/chains.hpp"
#include "linkage/classify.hpp"
#include "linkage/demos.hpp"
#include "linkage/io.hpp"
#include "linkage/numeric.hpp"
#include "linkage/svg.hpp"

using namespace linkage;
using io::json;

namespace {

struct Globals {
  double tol_rank = kDefaultTolRank;
  std::optional<double> tol_grad;
  double tol_align = chains::kDefaultTolAlign;
  std::uint64_t seed = 0;
  int depth = decomp::kDefaultDepth;
  std::string svg;
  std::optional<int> px;
  std::optional<int> py;
};

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Smooth: return 0;
    case Verdict::GenericSingular: return 10;
    case Verdict::Indeterminate:
    case Verdict::Conflict: return 20;
  }
  return 1;
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

void write_svg(const Globals& g, const svg::Canvas& c) {
  if (g.svg.empty()) return;
  std::ofstream out(g.svg);
  if (!out) throw Error(Errc::InvalidSpec, "cannot write " + g.svg);
  out << svg::render(c);
}

/// Defaults to the effector's first two coordinates.
Eigen::Vector2d project(const Linkage& l, const Configuration& c, const Globals& g) {
  const Eigen::VectorXd f = c.flat();
  const int e = l.end_effector.value_or(l.vertex_count() - 1);
  const int x = g.px.value_or(e * l.dim), y = g.py.value_or(e * l.dim + 1);
  if (x < 0 || y < 0 || x >= f.size() || y >= f.size())
    throw Error(Errc::OutOfRange, "--px/--py outside the flat coordinate range");
  return {f(x), f(y)};
}

ClassifyOptions classify_options(const Globals& g) {
  ClassifyOptions o;
  o.tol_rank = g.tol_rank;
  o.tol_grad = g.tol_grad;
  o.tol_align = g.tol_align;
  o.depth = g.depth;
  o.seed = g.seed;
  return o;
}

int cmd_analyze(const Globals& g, const std::string& lpath, const std::string& cpath, bool branches) {
  const Linkage l = io::parse_linkage(io::read_json_file(lpath));
  const Configuration v = io::parse_configuration(io::read_json_file(cpath));
  ClassifyOptions o = classify_options(g);
  o.branches = branches;
  const ClassificationReport r = classify_configuration(l, v, o);
  json j = io::to_json(r);
  if (l.platform) {
    const PlatformVerification pv = verify_platform_singularity(l, v, o);
    json p{{"condition", to_string(pv.condition.kind)}, {"verdict", to_string(pv.report.verdict)},
           {"non_generic", pv.non_generic}};
    if (pv.gradient_norm) p["gradient_norm"] = *pv.gradient_norm;
    if (pv.condition.meeting_point) p["meeting_point"] = {pv.condition.meeting_point->x(), pv.condition.meeting_point->y()};
    if (!pv.report.notes.empty()) p["notes"] = pv.report.notes;
    j["platform"] = p;
  }
  emit(j);
  if (l.dim == 2) {
    svg::Canvas c;
    svg::add_linkage(c, l, v);
    write_svg(g, c);
  }
  return exit_code(r.verdict);
}

int cmd_sample(const Globals& g, const std::string& lpath, int n) {
  const Linkage l = io::parse_linkage(io::read_json_file(lpath));
  const auto samples = sample_cspace(l, n, g.seed);
  json arr = json::array();
  for (const auto& s : samples) arr.push_back(io::to_json(s)["points"]);
  emit({{"seed", g.seed}, {"requested", n}, {"configurations", arr}});
  if (l.dim == 2) {
    svg::Canvas c;
    for (const auto& s : samples) svg::add_linkage(c, l, s, "gray");
    write_svg(g, c);
  }
  return 0;
}

int cmd_trace(const Globals& g, const std::string& lpath, const std::string& cpath, double step, int max_steps,
              bool record) {
  const Linkage l = io::parse_linkage(io::read_json_file(lpath));
  const Configuration v = io::parse_configuration(io::read_json_file(cpath));
  TraceOptions o;
  o.tol_rank = g.tol_rank;
  if (record) o.branch_points = BranchPointPolicy::Record;
  const TraceResult t = trace_curve(l, v, step, max_steps, o);
  emit(io::to_json(t));
  svg::Canvas c;
  svg::Polyline curve;
  for (const auto& p : t.points) curve.points.push_back(project(l, p, g));
  curve.stroke = "blue";
  curve.closed = t.closed_loop;
  c.lines.push_back(curve);
  for (const auto& b : t.branch_points) c.dots.push_back({project(l, b, g), "red"});
  write_svg(g, c);
  return 0;
}

/// Vertex sequence of a simple path or cycle through `from`, starting along `first`.
std::vector<int> walk(const Linkage& l, int from, int first, int stop) {
  std::vector<int> verts{from};
  int cur = from, via = first;
  while (true) {
    cur = l.graph.edge(via).other(cur);
    verts.push_back(cur);
    if (cur == stop || cur == from) break;
    const auto inc = l.graph.incident_edges(cur);
    if (inc.size() != 2) throw Error(Errc::InvalidSpec, "workspace needs an open or closed chain");
    via = inc[0] == via ? inc[1] : inc[0];
  }
  return verts;
}

std::vector<double> path_lengths(const Linkage& l, const std::vector<int>& verts) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < verts.size(); ++i)
    for (int e = 0; e < l.edge_count(); ++e) {
      const Edge& ed = l.graph.edge(e);
      if (ed.touches(verts[i]) && ed.touches(verts[i + 1])) out.push_back(l.lengths[static_cast<std::size_t>(e)]);
    }
  return out;
}

int cmd_workspace(const Globals& g, const std::string& lpath, const std::string& cpath, const std::vector<double>& lengths) {
  if (!lengths.empty()) {
    const auto iv = chains::workspace_interval(lengths);
    emit({{"m", iv.m}, {"M", iv.M}});
    return 0;
  }
  const Linkage l = io::parse_linkage(io::read_json_file(lpath));
  if (!l.end_effector) throw Error(Errc::InvalidSpec, "workspace needs an effector");
  const int b = l.base_vertex, e = *l.end_effector;
  const bool cycle = l.graph.edge_count() == l.vertex_count();
  if (!cycle) {
    const auto verts = walk(l, b, l.graph.incident_edges(b).front(), e);
    if (verts.back() != e) throw Error(Errc::InvalidSpec, "effector is not at the end of the chain");
    const auto iv = chains::workspace_interval(path_lengths(l, verts));
    emit({{"m", iv.m}, {"M", iv.M}});
    return 0;
  }
  if (cpath.empty()) throw Error(Errc::InvalidSpec, "a closed chain needs a configuration for the base link position");
  const Configuration v = io::parse_configuration(io::read_json_file(cpath));
  check_matches(l, v);
  if (l.dim != 2) throw Error(Errc::InvalidSpec, "closed-chain workspace is planar only");
  const int bl = *l.effective_base_link();
  const int c = l.graph.edge(bl).other(b);
  int other = -1;
  for (int ed : l.graph.incident_edges(b))
    if (ed != bl) other = ed;
  const auto side1 = walk(l, b, other, e);
  const auto side2 = walk(l, c, l.graph.incident_edges(c)[0] == bl ? l.graph.incident_edges(c)[1] : l.graph.incident_edges(c)[0], e);
  struct Annulus {
    Eigen::Vector2d center;
    chains::Interval iv;
  };
  const Annulus ann[2] = {{v.point(b).head<2>(), chains::workspace_interval(path_lengths(l, side1))},
                          {v.point(c).head<2>(), chains::workspace_interval(path_lengths(l, side2))}};
  json annuli = json::array();
  for (const auto& a : ann) annuli.push_back({{"center", {a.center.x(), a.center.y()}}, {"m", a.iv.m}, {"M", a.iv.M}});
  auto inside = [&](const Annulus& a, const Eigen::Vector2d& p) {
    const double r = (p - a.center).norm();
    return r >= a.iv.m - 1e-12 && r <= a.iv.M + 1e-12;
  };
  const int n = 360;
  std::vector<Eigen::Vector2d> boundary;
  for (int k = 0; k < 2; ++k)
    for (double rad : {ann[k].iv.m, ann[k].iv.M}) {
      if (rad <= 0) continue;
      for (int i = 0; i < n; ++i) {
        const double t = 2 * M_PI * i / n;
        const Eigen::Vector2d p = ann[k].center + rad * Eigen::Vector2d(std::cos(t), std::sin(t));
        if (inside(ann[1 - k], p)) boundary.push_back(p);
      }
    }
  Eigen::Vector2d mid = Eigen::Vector2d::Zero();
  for (const auto& p : boundary) mid += p;
  if (!boundary.empty()) mid /= static_cast<double>(boundary.size());
  std::stable_sort(boundary.begin(), boundary.end(), [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b2) {
    return std::atan2(a.y() - mid.y(), a.x() - mid.x()) < std::atan2(b2.y() - mid.y(), b2.x() - mid.x());
  });
  json pts = json::array();
  for (const auto& p : boundary) pts.push_back({p.x(), p.y()});
  emit({{"annuli", annuli}, {"boundary", pts}});
  svg::Canvas cv;
  svg::Polyline lens;
  lens.points = boundary;
  lens.closed = true;
  lens.stroke = "blue";
  cv.lines.push_back(lens);
  svg::add_linkage(cv, l, v);
  write_svg(g, cv);
  return 0;
}

int cmd_branches(const Globals& g, const std::string& lpath, const std::string& cpath, std::optional<double> radius,
                 int samples) {
  const Linkage l = io::parse_linkage(io::read_json_file(lpath));
  const Configuration v = io::parse_configuration(io::read_json_file(cpath));
  BranchOptions o;
  o.tol_rank = g.tol_rank;
  emit(io::to_json(local_branch_count(l, v, radius, samples, g.seed, o)));
  return 0;
}

int cmd_demo(const Globals& g, const std::string& name, const std::string& dir) {
  const demos::Demo d = demos::by_name(name);
  const std::string prefix = dir.empty() ? "" : dir + "/";
  io::write_json_file(prefix + "linkage.json", io::to_json(d.linkage));
  io::write_json_file(prefix + "config.json", io::to_json(d.config));
  emit({{"demo", d.name}, {"linkage", prefix + "linkage.json"}, {"config", prefix + "config.json"}});
  svg::Canvas c;
  svg::add_linkage(c, d.linkage, d.config);
  write_svg(g, c);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Configuration-space analysis of mechanical linkages"};
  app.require_subcommand(1);
  Globals g;
  if (const char* env = std::getenv("LINKCTL_SEED")) {
    try {
      g.seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "error: LINKCTL_SEED is not an unsigned integer\n";
      return 1;
    }
  }
  app.option_defaults()->always_capture_default();
  app.add_option("--tol-rank", g.tol_rank, "Relative singular-value cut for numerical rank");
  app.add_option("--tol-grad", g.tol_grad, "Critical-point gradient tolerance (default 1e-6 (1 + total length))");
  app.add_option("--tol-align", g.tol_align, "Alignment angle tolerance (radians)");
  app.add_option("--seed", g.seed, "Random seed (overrides LINKCTL_SEED)");
  app.add_option("--depth", g.depth, "Decomposition search depth");
  app.add_option("--svg", g.svg, "Write an SVG drawing to this path");
  app.add_option("--px", g.px, "Flat coordinate plotted horizontally (default: effector x)");
  app.add_option("--py", g.py, "Flat coordinate plotted vertically (default: effector y)");

  std::string lpath, cpath, name, dir;
  bool branches = false, record = false;
  int n = 10, max_steps = 2000, samples = 120;
  double step = 0.02;
  std::optional<double> radius;
  std::vector<double> lengths;

  auto* analyze = app.add_subcommand("analyze", "Classify a configuration");
  analyze->add_option("linkage", lpath, "Linkage document")->required();
  analyze->add_option("config", cpath, "Configuration document")->required();
  analyze->add_flag("--branches", branches, "Also count local branches");

  auto* sample = app.add_subcommand("sample", "Sample configurations");
  sample->add_option("linkage", lpath, "Linkage document")->required();
  sample->add_option("-n,--count", n, "Number of samples");

  auto* trace = app.add_subcommand("trace", "Trace a one-dimensional configuration curve");
  trace->add_option("linkage", lpath, "Linkage document")->required();
  trace->add_option("config", cpath, "Start configuration")->required();
  trace->add_option("--step", step, "Arclength step");
  trace->add_option("--max-steps", max_steps, "Step limit");
  trace->add_flag("--record-branch-points", record, "Pass through branch points instead of stopping");

  auto* workspace = app.add_subcommand("workspace", "Work space of a chain");
  workspace->add_option("linkage", lpath, "Linkage document (open or closed chain)");
  workspace->add_option("config", cpath, "Configuration (closed chains)");
  workspace->add_option("--lengths", lengths, "Open chain lengths instead of a document")->delimiter(',');

  auto* br = app.add_subcommand("branches", "Count local branches at a configuration");
  br->add_option("linkage", lpath, "Linkage document")->required();
  br->add_option("config", cpath, "Configuration document")->required();
  br->add_option("--radius", radius, "Sphere radius (default 1e-2 times the shortest link)");
  br->add_option("--samples", samples, "Sphere samples");

  auto* demo = app.add_subcommand("demo", "Write a demo's linkage.json and config.json");
  demo->add_option("name", name, "Demo name")->required();
  demo->add_option("--dir", dir, "Output directory (default: current directory)");

  for (auto* sub : {analyze, sample, trace, workspace, br, demo}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*analyze) return cmd_analyze(g, lpath, cpath, branches);
    if (*sample) return cmd_sample(g, lpath, n);
    if (*trace) return cmd_trace(g, lpath, cpath, step, max_steps, record);
    if (*workspace) {
      if (lpath.empty() && lengths.empty()) throw Error(Errc::InvalidSpec, "workspace needs a linkage or --lengths");
      return cmd_workspace(g, lpath, cpath, lengths);
    }
    if (*br) return cmd_branches(g, lpath, cpath, radius, samples);
    if (*demo) return cmd_demo(g, name, dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
