#pragma once

// JSON documents for linkages, configurations and analysis results.

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "linkage/classify.hpp"
#include "linkage/errors.hpp"
#include "linkage/model.hpp"
#include "linkage/numeric.hpp"

namespace linkage::io {

using json = nlohmann::ordered_json;

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidSpec, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidSpec, path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::InvalidSpec, "cannot write " + path);
  out << j.dump(2) << "\n";
}

namespace detail {

template <class T>
T get(const json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw Error(Errc::InvalidSpec, std::string(what) + " is missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::InvalidSpec, std::string(what) + ": \"" + key + "\" has the wrong type");
  }
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key, const char* what) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get<T>(j, key, what);
}

}  // namespace detail

inline LinkageSpec parse_linkage_spec(const json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidSpec, "linkage document must be an object");
  LinkageSpec s;
  s.dim = detail::get<int>(j, "dim", "linkage");
  s.vertices = detail::get<int>(j, "vertices", "linkage");
  if (!j.contains("edges") || !j.at("edges").is_array()) throw Error(Errc::InvalidSpec, "linkage needs an edges array");
  for (const auto& e : j.at("edges")) {
    if (!e.is_object()) throw Error(Errc::InvalidSpec, "edge must be an object");
    s.edges.push_back({detail::get<int>(e, "u", "edge"), detail::get<int>(e, "v", "edge")});
    s.lengths.push_back(detail::get<double>(e, "length", "edge"));
    std::optional<LengthRange> range;
    if (e.contains("prismatic") && !e.at("prismatic").is_null())
      range = LengthRange{detail::get<double>(e.at("prismatic"), "min", "prismatic"),
                          detail::get<double>(e.at("prismatic"), "max", "prismatic")};
    s.prismatic.push_back(range);
  }
  s.base = detail::get<int>(j, "base", "linkage");
  s.base_link = detail::get_opt<int>(j, "base_link", "linkage");
  s.effector = detail::get_opt<int>(j, "effector", "linkage");
  if (j.contains("platform") && !j.at("platform").is_null()) {
    const json& p = j.at("platform");
    s.platform = PlatformSpec{detail::get<std::vector<std::vector<int>>>(p, "branches", "platform"),
                              detail::get<std::vector<int>>(p, "fixed", "platform"),
                              detail::get<std::vector<int>>(p, "moving", "platform")};
  }
  return s;
}

inline Linkage parse_linkage(const json& j) { return build_linkage(parse_linkage_spec(j)); }

inline json to_json(const Linkage& l) {
  json j;
  j["dim"] = l.dim;
  j["vertices"] = l.vertex_count();
  json edges = json::array();
  for (int i = 0; i < l.edge_count(); ++i) {
    json e;
    e["u"] = l.graph.edge(i).u;
    e["v"] = l.graph.edge(i).v;
    e["length"] = l.lengths[static_cast<std::size_t>(i)];
    if (const auto& r = l.prismatic[static_cast<std::size_t>(i)]) e["prismatic"] = {{"min", r->min}, {"max", r->max}};
    edges.push_back(e);
  }
  j["edges"] = edges;
  j["base"] = l.base_vertex;
  if (l.base_link) j["base_link"] = *l.base_link;
  if (l.end_effector) j["effector"] = *l.end_effector;
  if (l.platform) j["platform"] = {{"branches", l.platform->branches}, {"fixed", l.platform->fixed}, {"moving", l.platform->moving}};
  return j;
}

inline Configuration parse_configuration(const json& j) {
  if (!j.is_object() || !j.contains("points") || !j.at("points").is_array())
    throw Error(Errc::InvalidSpec, "configuration needs a points array");
  const json& pts = j.at("points");
  if (pts.empty()) throw Error(Errc::InvalidSpec, "configuration has no points");
  const std::size_t d = pts.at(0).size();
  Configuration c(static_cast<int>(pts.size()), static_cast<int>(d));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!pts[i].is_array() || pts[i].size() != d) throw Error(Errc::InvalidSpec, "points must all have the same dimension");
    for (std::size_t k = 0; k < d; ++k) {
      if (!pts[i][k].is_number()) throw Error(Errc::InvalidSpec, "point coordinates must be numbers");
      c.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = pts[i][k].get<double>();
    }
  }
  return c;
}

inline json to_json(const Configuration& c) {
  json pts = json::array();
  for (int i = 0; i < c.size(); ++i) {
    json row = json::array();
    for (int k = 0; k < c.dim(); ++k) row.push_back(c.points(i, k));
    pts.push_back(row);
  }
  return {{"points", pts}};
}

inline json to_json(const decomp::Decomposition& d) {
  json stages = json::array();
  for (const auto& s : d.stages) {
    json js{{"gamma_edges", s.gamma_edges},         {"chain_edges", s.chain_edges},
            {"chain_vertices", s.chain_vertices},   {"remainder_edges", s.remainder_edges},
            {"chain_aligned", s.chain_aligned},     {"kind", decomp::to_string(s.verdict.kind)}};
    if (s.verdict.gradient_norm) js["gradient_norm"] = *s.verdict.gradient_norm;
    if (!s.verdict.reasons.empty()) js["reasons"] = s.verdict.reasons;
    stages.push_back(js);
  }
  return {{"base_edges", d.base_edges}, {"stages", stages}};
}

inline json to_json(const BranchReport& b) {
  return {{"radius", b.radius},
          {"sample_count", b.sample_count},
          {"retained", b.retained},
          {"branch_count", b.branch_count},
          {"cluster_sizes", b.cluster_sizes},
          {"half_radius_count", b.half_radius_count},
          {"stable", b.stable}};
}

inline json to_json(const ClassificationReport& r) {
  json j;
  j["verdict"] = to_string(r.verdict);
  j["rank"] = {r.rank, r.edge_count};
  if (r.witness) {
    j["witness"] = {{"stage", r.witness->stage},
                    {"signature", {r.witness->j, r.witness->q}},
                    {"euclidean_factor", r.witness->euclidean_factor},
                    {"decomposition", to_json(r.witness->decomposition)}};
  } else {
    j["witness"] = nullptr;
  }
  j["certificate"] = r.certificate ? to_json(*r.certificate) : json(nullptr);
  j["conjunction"] = r.conjunction ? json(*r.conjunction) : json(nullptr);
  if (r.branch_report) j["branch_report"] = to_json(*r.branch_report);
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

inline json to_json(const TraceResult& t) {
  json pts = json::array();
  for (const auto& c : t.points) pts.push_back(to_json(c)["points"]);
  json bps = json::array();
  for (const auto& c : t.branch_points) bps.push_back(to_json(c)["points"]);
  return {{"stop", to_string(t.stop)}, {"closed_loop", t.closed_loop}, {"steps", t.points.size()},
          {"points", pts},             {"branch_points", bps}};
}

}  // namespace linkage::io
