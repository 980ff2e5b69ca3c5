#pragma once

// JSON and CSV artifacts exchanged between pipeline stages. Every JSON
// document carries "schema_version" and "kind"; readers check both.

#include "gridshell/acvt.hpp"
#include "gridshell/frame_eval.hpp"
#include "gridshell/regularizer.hpp"
#include "gridshell/shell_fem.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gridshell::io {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline json header(const char* kind) { return json{{"schema_version", kSchemaVersion}, {"kind", kind}}; }

inline void check_header(const json& j, const char* kind) {
  if (!j.is_object() || !j.contains("schema_version") || !j.contains("kind"))
    fail("artifact is missing schema_version/kind");
  if (j["kind"] != kind) fail("expected a '", kind, "' artifact, got '", j["kind"].get<std::string>(), "'");
  if (j["schema_version"].get<int>() != kSchemaVersion)
    fail("unsupported schema_version ", j["schema_version"].get<int>(), " for '", kind, "'");
}

inline json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 to_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) fail("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Fixed-format number for CSV cells; "inf" for infinities.
inline std::string num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write '", path, "'");
  out << text;
  if (!out) fail("I/O failure writing '", path, "'");
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read '", path, "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail("'", path, "' is not valid JSON: ", e.what());
  }
}

// --- stress field -----------------------------------------------------------

inline json to_json(const StressTensorField& s) {
  json j = header("stress_field");
  json tris = json::array();
  for (std::size_t t = 0; t < s.size(); ++t) {
    const Mat2& m = s.tensor[t];
    tris.push_back({{"tensor", {m(0, 0), m(0, 1), m(1, 1)}}, {"e1", vec(s.e1[t])}, {"e2", vec(s.e2[t])}});
  }
  j["triangles"] = std::move(tris);
  return j;
}

inline StressTensorField stress_from_json(const json& j, const TriMesh& mesh) {
  check_header(j, "stress_field");
  const auto& tris = j.at("triangles");
  if (tris.size() != mesh.num_triangles())
    fail("stress field has ", tris.size(), " triangles, mesh has ", mesh.num_triangles());
  StressTensorField s;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& e = tris[t];
    const auto& c = e.at("tensor");
    Mat2 m;
    m << c.at(0).get<double>(), c.at(1).get<double>(), c.at(1).get<double>(), c.at(2).get<double>();
    const Vec3 e1 = to_vec3(e.at("e1")), e2 = to_vec3(e.at("e2"));
    const Vec3 n = mesh.triangle_normal(static_cast<int>(t));
    if (std::abs(e1.norm() - 1) > 1e-6 || std::abs(e2.norm() - 1) > 1e-6 || std::abs(e1.dot(e2)) > 1e-6 ||
        std::abs(e1.dot(n)) > 1e-6 || std::abs(e2.dot(n)) > 1e-6)
      fail("stress field basis of triangle ", t, " is not an orthonormal tangent basis");
    s.tensor.push_back(m);
    s.e1.push_back(e1);
    s.e2.push_back(e2);
  }
  return s;
}

// --- Psi field ----------------------------------------------------------------

inline json to_json(const PsiField& f) {
  json j = header("psi_field");
  json tris = json::array();
  for (std::size_t t = 0; t < f.size(); ++t)
    tris.push_back({{"u_n", vec(f.direction[t])}, {"d", f.density[t]}, {"a", f.anisotropy[t]},
                    {"isotropic", f.isotropic[t] != 0}});
  j["triangles"] = std::move(tris);
  return j;
}

inline PsiField psi_from_json(const json& j, const TriMesh& mesh) {
  check_header(j, "psi_field");
  const auto& tris = j.at("triangles");
  if (tris.size() != mesh.num_triangles())
    fail("field has ", tris.size(), " triangles, mesh has ", mesh.num_triangles());
  PsiField f;
  f.resize(tris.size());
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& e = tris[t];
    f.direction[t] = to_vec3(e.at("u_n"));
    f.density[t] = e.at("d").get<double>();
    f.anisotropy[t] = e.at("a").get<double>();
    f.isotropic[t] = e.value("isotropic", false) ? 1 : 0;
    if (!(f.anisotropy[t] >= 1.0)) fail("field triangle ", t, ": anisotropy below 1");
    if (!(f.density[t] >= 0.0)) fail("field triangle ", t, ": negative density");
  }
  return f;
}

// --- remeshing debug artifacts -------------------------------------------------

inline json genealogy_json(const DeformedDomain& d) {
  json j = header("genealogy");
  j["q"] = d.q;
  j["refinement_rounds"] = d.refinement_rounds;
  j["deform_iterations"] = d.last_deform.iterations;
  json splits = json::array();
  for (const auto& s : d.genealogy) splits.push_back({s.vertex, s.parent0, s.parent1});
  j["split_vertices"] = std::move(splits);  // [vertex, parent0, parent1]
  j["triangle_parent"] = d.triangle_parent;
  return j;
}

inline std::string labels_csv(const VoronoiState& vd) {
  std::ostringstream os;
  os << "vertex,label,distance\n";
  for (std::size_t v = 0; v < vd.label.size(); ++v) os << v << ',' << vd.label[v] << ',' << num(vd.distance[v]) << '\n';
  return os.str();
}

inline std::string metrics_csv(const PolyMesh& m) {
  std::ostringstream os;
  os << "face,arity,planarity,regularity\n";
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    os << f << ',' << m.faces[f].size() << ',';
    os << (f < m.planarity.size() ? num(m.planarity[f]) : "") << ',';
    os << (f < m.regularity.size() && !std::isnan(m.regularity[f]) ? num(m.regularity[f]) : "") << '\n';
  }
  return os.str();
}

// --- frame evaluation ------------------------------------------------------------

inline std::string forces_csv(const FrameModel& m, const EvalReport& r) {
  std::ostringstream os;
  os << "beam,joint_a,joint_b,length,axial_force\n";
  for (std::size_t e = 0; e < m.beams.size(); ++e)
    os << e << ',' << m.beams[e].a << ',' << m.beams[e].b << ',' << num(m.beam_length(e)) << ','
       << num(r.axial_force[e]) << '\n';
  return os.str();
}

inline json to_json(const EvalReport& r, const FrameModel& m) {
  json j = header("frame_evaluation");
  j["delta_max"] = r.delta_max;
  // JSON has no infinity: null plus an explicit flag
  j["lambda_lin"] = std::isfinite(r.lambda_lin) ? json(r.lambda_lin) : json(nullptr);
  j["lambda_lin_infinite"] = std::isinf(r.lambda_lin);
  j["lambda_kind"] = "linearized";
  j["total_length"] = r.total_length;
  j["total_mass"] = r.total_mass;
  j["joints"] = m.joints.size();
  j["beams"] = m.beams.size();
  j["supports"] = std::count_if(m.restraint.begin(), m.restraint.end(), [](std::uint8_t x) { return x != 0; });
  j["diameter"] = m.diameter;
  j["load_total"] = vec(r.load_sum);
  j["reaction_total"] = vec(r.reaction_sum);
  json disp = json::array();
  for (const auto& d : r.displacement) disp.push_back(vec(d));
  j["displacement"] = std::move(disp);
  return j;
}

}  // namespace gridshell::io
