#pragma once

// JSON shapes:
//   school state  {"k": int, "x": [[x,y,z], ...], "V": [[x,y,z], ...]}
//   graph         {"n": N, "edges": [[i,j], ...]}
//   diagnostics   one object per audited state (see diagnostics_to_json)

#include "json.hpp"  // nlohmann/json, vendored

#include "fishmpc/network.hpp"
#include "fishmpc/reduction.hpp"
#include "fishmpc/school.hpp"
#include "fishmpc/vec3.hpp"

namespace fishmpc {

using json = nlohmann::json;

inline json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidArgument("expected [x, y, z]");
  Vec3 v{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  if (!v.is_finite()) throw InvalidArgument("non-finite vector component");
  return v;
}

inline json state_to_json(const SchoolState& s) {
  json xs = json::array(), vs = json::array();
  for (const auto& p : s.x) xs.push_back(vec_to_json(p));
  for (const auto& d : s.V) vs.push_back(vec_to_json(d.vec()));
  return {{"k", s.k}, {"x", std::move(xs)}, {"V", std::move(vs)}};
}

/// Directions are renormalized on load.
inline SchoolState state_from_json(const json& j) {
  SchoolState s;
  s.k = j.at("k").get<long>();
  for (const auto& p : j.at("x")) s.x.push_back(vec_from_json(p));
  for (const auto& d : j.at("V")) s.V.push_back(normalize(vec_from_json(d)));
  if (s.x.size() != s.V.size()) throw DimensionMismatch(s.x.size(), s.V.size());
  return s;
}

inline json graph_to_json(const OrientationGraph& g) {
  json edges = json::array();
  for (const auto& [i, j] : g.edges()) edges.push_back({i, j});
  return {{"n", g.size()}, {"edges", std::move(edges)}};
}

inline OrientationGraph graph_from_json(const json& j) {
  const auto n = j.at("n").get<std::size_t>();
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& e : j.at("edges")) {
    const auto from = e.at(0).get<std::size_t>();
    if (from >= n) throw InvalidArgument("edge source out of range");
    out[from].push_back(e.at(1).get<std::size_t>());
  }
  return OrientationGraph(std::move(out));
}

inline json diagnostics_to_json(const DiagnosticReport& r) {
  json fish = json::array();
  for (const auto& f : r.fish) {
    fish.push_back({{"n", f.degree},
                    {"pi", f.polarization},
                    {"pi_tilde", f.misalignment},
                    {"rho", f.dominance},
                    {"Q", f.quadratic},
                    {"w", vec_to_json(f.drive)}});
  }
  return {{"fish", std::move(fish)},
          {"pi_tilde_alpha", r.school_misalignment},
          {"A", vec_to_json(r.aggregate_attraction)},
          {"u", vec_to_json(r.aggregate_stimulus)},
          {"epsilon_alpha", vec_to_json(r.residual)},
          {"epsilon_norm", norm(r.residual)},
          {"theorem1_bound", r.theorem1_bound},
          {"theorem2_bound", r.theorem2_bound}};
}

}  // namespace fishmpc
