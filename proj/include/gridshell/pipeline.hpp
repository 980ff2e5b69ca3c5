#pragma once

// End-to-end orchestration: analyze -> field -> remesh -> regularize/weld ->
// evaluate, driven by one JSON config. Stage errors are re-thrown tagged with
// the stage name.

#include "gridshell/io.hpp"
#include "gridshell/stress_field.hpp"

#include <filesystem>
#include <optional>

namespace gridshell {

struct FieldConfig {
  double smoothness_weight = 1.0;
  double lipschitz = 0.0;           // 0: range / R for each scalar
  double symmetry_tolerance = 0.0;  // 0: 1e-3 of the bounding-box diagonal
};

struct RemeshConfig {
  int lloyd_iterations = 100;
  double lloyd_tolerance = 1e-9;  // meters on M'
  int max_refine_rounds = 20;
  // per deformation solve; unevenly split meshes from the refinement loop
  // routinely need more than the standalone default of 200
  int deform_max_iterations = 1000;
  double weld_tolerance = 0.0;    // 0: 1e-3 R
};

struct EvalConfig {
  double diameter = 0.037;
  Material material;
  double load_density = 1000.0;  // N/m^2
  std::string supports = "boundary";  // or "corners"
};

struct PipelineConfig {
  std::string input;
  double D = 1.0;
  double A = 1.0;
  double R = 1.0;
  std::uint64_t rng_seed = 1;
  std::vector<SymmetryPlane> symmetry_planes;
  double corner_threshold_deg = 30.0;
  ShellAnalysisConfig shell;
  FieldConfig field;
  RemeshConfig remesh;
  RegularizerConfig regularizer;
  EvalConfig eval;
  double target_total_length = 0.0;  // > 0: calibrate R to this length within 5%
  std::string output_dir;

  void validate() const {
    if (!(D >= 1.0) || !(A >= 1.0)) fail("config: D and A must be >= 1 (got D=", D, ", A=", A, ")");
    if (!(R > 0.0)) fail("config: R must be positive");
    if (!(corner_threshold_deg > 0.0 && corner_threshold_deg < 180.0)) fail("config: corner threshold must lie in (0, 180) degrees");
    if (eval.supports != "boundary" && eval.supports != "corners") fail("config: supports must be 'boundary' or 'corners'");
    if (remesh.deform_max_iterations < 1 || remesh.max_refine_rounds < 1 || remesh.lloyd_iterations < 1)
      fail("config: iteration caps must be positive");
    if (!(eval.diameter > 0.0)) fail("config: bar diameter must be positive");
    if (target_total_length < 0.0) fail("config: target total length must be non-negative");
    shell.validate();
  }
};

// --- config (de)serialization ------------------------------------------------

namespace detail {

inline void reject_unknown(const io::json& j, std::initializer_list<const char*> keys, const char* where) {
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) fail("config: unknown key '", k, "' in ", where);
  }
}

template <typename T>
void read(const io::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const io::json::exception& e) {
    fail("config: bad value for '", key, "': ", e.what());
  }
}

}  // namespace detail

inline PipelineConfig config_from_json(const io::json& j) {
  using detail::read;
  PipelineConfig c;
  if (!j.is_object()) fail("config: expected a JSON object");
  detail::reject_unknown(j, {"schema_version", "kind", "input", "D", "A", "R", "rng_seed", "symmetry_planes",
                             "corner_threshold_deg", "shell", "field", "remesh", "regularizer", "eval",
                             "target_total_length", "output_dir"}, "config");
  if (j.contains("kind")) io::check_header(j, "pipeline_config");
  read(j, "input", c.input);
  read(j, "D", c.D);
  read(j, "A", c.A);
  read(j, "R", c.R);
  read(j, "rng_seed", c.rng_seed);
  read(j, "corner_threshold_deg", c.corner_threshold_deg);
  read(j, "target_total_length", c.target_total_length);
  read(j, "output_dir", c.output_dir);
  if (j.contains("symmetry_planes"))
    for (const auto& p : j["symmetry_planes"]) {
      detail::reject_unknown(p, {"point", "normal"}, "symmetry_planes");
      c.symmetry_planes.emplace_back(io::to_vec3(p.at("point")), io::to_vec3(p.at("normal")));
    }
  if (j.contains("shell")) {
    const auto& s = j["shell"];
    detail::reject_unknown(s, {"youngs_modulus", "poisson_ratio", "thickness", "load_density", "normal_spring_ratio"}, "shell");
    read(s, "youngs_modulus", c.shell.youngs_modulus);
    read(s, "poisson_ratio", c.shell.poisson_ratio);
    read(s, "thickness", c.shell.thickness);
    read(s, "load_density", c.shell.load_density);
    read(s, "normal_spring_ratio", c.shell.normal_spring_ratio);
  }
  if (j.contains("field")) {
    const auto& s = j["field"];
    detail::reject_unknown(s, {"smoothness_weight", "lipschitz", "symmetry_tolerance"}, "field");
    read(s, "smoothness_weight", c.field.smoothness_weight);
    read(s, "lipschitz", c.field.lipschitz);
    read(s, "symmetry_tolerance", c.field.symmetry_tolerance);
  }
  if (j.contains("remesh")) {
    const auto& s = j["remesh"];
    detail::reject_unknown(s, {"lloyd_iterations", "lloyd_tolerance", "max_refine_rounds", "deform_max_iterations", "weld_tolerance"}, "remesh");
    read(s, "lloyd_iterations", c.remesh.lloyd_iterations);
    read(s, "lloyd_tolerance", c.remesh.lloyd_tolerance);
    read(s, "max_refine_rounds", c.remesh.max_refine_rounds);
    read(s, "deform_max_iterations", c.remesh.deform_max_iterations);
    read(s, "weld_tolerance", c.remesh.weld_tolerance);
  }
  if (j.contains("regularizer")) {
    const auto& s = j["regularizer"];
    detail::reject_unknown(s, {"damping", "max_iterations", "tolerance", "fix_boundary"}, "regularizer");
    read(s, "damping", c.regularizer.damping);
    read(s, "max_iterations", c.regularizer.max_iterations);
    read(s, "tolerance", c.regularizer.tolerance);
    read(s, "fix_boundary", c.regularizer.fix_boundary);
  }
  if (j.contains("eval")) {
    const auto& s = j["eval"];
    detail::reject_unknown(s, {"diameter", "youngs_modulus", "poisson_ratio", "density", "load_density", "supports"}, "eval");
    read(s, "diameter", c.eval.diameter);
    read(s, "youngs_modulus", c.eval.material.E);
    read(s, "poisson_ratio", c.eval.material.poisson);
    read(s, "density", c.eval.material.density);
    read(s, "load_density", c.eval.load_density);
    read(s, "supports", c.eval.supports);
  }
  return c;
}

inline io::json to_json(const PipelineConfig& c) {
  io::json j = io::header("pipeline_config");
  j["input"] = c.input;
  j["D"] = c.D;
  j["A"] = c.A;
  j["R"] = c.R;
  j["rng_seed"] = c.rng_seed;
  io::json planes = io::json::array();
  for (const auto& p : c.symmetry_planes) planes.push_back({{"point", io::vec(p.point)}, {"normal", io::vec(p.normal)}});
  j["symmetry_planes"] = std::move(planes);
  j["corner_threshold_deg"] = c.corner_threshold_deg;
  j["shell"] = {{"youngs_modulus", c.shell.youngs_modulus}, {"poisson_ratio", c.shell.poisson_ratio},
                {"thickness", c.shell.thickness}, {"load_density", c.shell.load_density},
                {"normal_spring_ratio", c.shell.normal_spring_ratio}};
  j["field"] = {{"smoothness_weight", c.field.smoothness_weight}, {"lipschitz", c.field.lipschitz},
                {"symmetry_tolerance", c.field.symmetry_tolerance}};
  j["remesh"] = {{"lloyd_iterations", c.remesh.lloyd_iterations}, {"lloyd_tolerance", c.remesh.lloyd_tolerance},
                 {"max_refine_rounds", c.remesh.max_refine_rounds},
                 {"deform_max_iterations", c.remesh.deform_max_iterations}, {"weld_tolerance", c.remesh.weld_tolerance}};
  j["regularizer"] = {{"damping", c.regularizer.damping}, {"max_iterations", c.regularizer.max_iterations},
                      {"tolerance", c.regularizer.tolerance}, {"fix_boundary", c.regularizer.fix_boundary}};
  j["eval"] = {{"diameter", c.eval.diameter}, {"youngs_modulus", c.eval.material.E},
               {"poisson_ratio", c.eval.material.poisson}, {"density", c.eval.material.density},
               {"load_density", c.eval.load_density}, {"supports", c.eval.supports}};
  j["target_total_length"] = c.target_total_length;
  j["output_dir"] = c.output_dir;
  return j;
}

// --- stages -----------------------------------------------------------------

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw Error(name, e.what());
  } catch (const std::exception& e) {
    throw Error(name, e.what());
  }
}

inline TriMesh load_input(const PipelineConfig& cfg) {
  return stage("load", [&] {
    if (cfg.input.empty()) fail("no input mesh given");
    return classify_boundary(load_obj(cfg.input), cfg.corner_threshold_deg * kPi / 180.0);
  });
}

inline double bbox_diagonal(const TriMesh& mesh) {
  Vec3 lo = Vec3::Constant(kInfinity), hi = Vec3::Constant(-kInfinity);
  for (const auto& v : mesh.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

inline StressTensorField analyze(const TriMesh& mesh, const PipelineConfig& cfg) {
  return stage("analyze", [&] { return assemble_and_solve(mesh, cfg.shell); });
}

// Smooth -> saturate (d and a) -> symmetrize; rescaling to [1, D] x [1, A] is
// separate so sweeps can share this part.
inline PsiField prepare_field(const TriMesh& mesh, const StressTensorField& stress, const PipelineConfig& cfg) {
  return stage("field", [&] {
    PsiField psi = principal_decompose(stress);
    psi = smooth_line_field(psi, mesh, cfg.field.smoothness_weight);
    auto saturate = [&](std::vector<double>& x) {
      const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
      const double range = *hi - *lo;
      const double L = cfg.field.lipschitz > 0.0 ? cfg.field.lipschitz : range / cfg.R;
      if (L > 0.0) x = lipschitz_saturate(x, mesh, L);
    };
    saturate(psi.density);
    saturate(psi.anisotropy);
    if (!cfg.symmetry_planes.empty()) {
      const double tol = cfg.field.symmetry_tolerance > 0.0 ? cfg.field.symmetry_tolerance : 1e-3 * bbox_diagonal(mesh);
      psi = symmetrize(psi, mesh, cfg.symmetry_planes, tol);
    }
    return psi;
  });
}

inline PsiField make_field(const TriMesh& mesh, const StressTensorField& stress, const PipelineConfig& cfg) {
  const PsiField base = prepare_field(mesh, stress, cfg);
  return stage("field", [&] { return rescale(base, cfg.D, cfg.A); });
}

// Triangles on the non-negative side of every plane. Every new boundary
// vertex must lie on a plane (within tol): the mesh has to be cut along the
// planes for the sector tessellation to weld back together.
inline std::pair<TriMesh, PsiField> sector(const TriMesh& mesh, const PsiField& psi, std::span<const SymmetryPlane> planes,
                                           double tol, double corner_threshold) {
  std::vector<int> keep;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3 c = mesh.barycenter(static_cast<int>(t));
    bool inside = true;
    for (const auto& pl : planes) inside = inside && pl.signed_distance(c) >= 0.0;
    if (inside) keep.push_back(static_cast<int>(t));
  }
  if (keep.empty()) fail("symmetry sector is empty");
  std::vector<int> remap(mesh.num_vertices(), -1);
  std::vector<Vec3> verts;
  std::vector<Tri> tris;
  PsiField sub;
  sub.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    Tri tri = mesh.triangle(keep[i]);
    for (auto& v : tri) {
      auto& r = remap[static_cast<std::size_t>(v)];
      if (r < 0) {
        r = static_cast<int>(verts.size());
        verts.push_back(mesh.vertex(v));
      }
      v = r;
    }
    tris.push_back(tri);
    const auto t = static_cast<std::size_t>(keep[i]);
    sub.direction[i] = psi.direction[t];
    sub.density[i] = psi.density[t];
    sub.anisotropy[i] = psi.anisotropy[t];
    sub.isotropic[i] = psi.isotropic[t];
  }
  TriMesh cut = classify_boundary(TriMesh::build(std::move(verts), std::move(tris)), corner_threshold);
  if (!cut.is_connected()) fail("symmetry sector is not connected");
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const int r = remap[v];
    if (r < 0 || !cut.is_boundary(r) || mesh.is_boundary(static_cast<int>(v))) continue;
    bool on_plane = false;
    for (const auto& pl : planes) on_plane = on_plane || std::abs(pl.signed_distance(mesh.vertex(static_cast<int>(v)))) <= tol;
    if (!on_plane)
      fail("mesh is not cut along the symmetry planes: vertex ", v, " at (", mesh.vertex(static_cast<int>(v)).transpose(),
           ") ends up on the sector boundary");
  }
  return {std::move(cut), std::move(sub)};
}

struct RemeshResult {
  TriMesh domain_mesh;  // input mesh, or its symmetry sector
  DeformedDomain domain;
  SeedSet initial_seeds;
  LloydResult lloyd;
  ExtractResult extract;  // tessellation of domain_mesh, before regularization
  std::vector<std::string> warnings;
};

inline RemeshResult remesh(const TriMesh& mesh, const PsiField& psi, const PipelineConfig& cfg) {
  return stage("remesh", [&] {
    RemeshResult r;
    PsiField field = psi;
    r.domain_mesh = mesh;
    if (!cfg.symmetry_planes.empty()) {
      const double tol = cfg.field.symmetry_tolerance > 0.0 ? cfg.field.symmetry_tolerance : 1e-3 * bbox_diagonal(mesh);
      std::tie(r.domain_mesh, field) =
          sector(mesh, psi, cfg.symmetry_planes, tol, cfg.corner_threshold_deg * kPi / 180.0);
    }
    RefineConfig rc;
    rc.max_rounds = cfg.remesh.max_refine_rounds;
    rc.deform.max_iterations = cfg.remesh.deform_max_iterations;
    r.domain = refine_until_fit(r.domain_mesh, field, cfg.R / 5.0, rc);
    r.initial_seeds = poisson_sample(r.domain, cfg.R, cfg.rng_seed);
    r.lloyd = lloyd_relax(r.domain, r.initial_seeds, cfg.remesh.lloyd_iterations, cfg.remesh.lloyd_tolerance);
    r.extract = extract_cvt(r.domain, r.lloyd.seeds, r.lloyd.voronoi);
    r.warnings = r.lloyd.warnings;
    r.warnings.insert(r.warnings.end(), r.extract.warnings.begin(), r.extract.warnings.end());
    return r;
  });
}

struct FinishResult {
  PolyMesh gridshell;
  RegularizeReport regularize;
};

// Regularize (boundary fixed) then weld the mirrored sectors.
inline FinishResult finish(const PolyMesh& tessellation, const PipelineConfig& cfg) {
  FinishResult f;
  f.gridshell = stage("regularize", [&] { return regularize(tessellation, cfg.regularizer, &f.regularize); });
  if (!cfg.symmetry_planes.empty()) {
    f.gridshell = stage("weld", [&] {
      const double tol = cfg.remesh.weld_tolerance > 0.0 ? cfg.remesh.weld_tolerance : 1e-3 * cfg.R;
      PolyMesh welded = symmetrize_tessellation(f.gridshell, cfg.symmetry_planes, tol);
      fill_face_metrics(welded);
      return welded;
    });
  }
  return f;
}

inline FrameModel make_frame(const PolyMesh& gridshell, const PipelineConfig& cfg) {
  return stage("evaluate", [&] {
    FrameModel m = build_frame(gridshell, cfg.eval.diameter, cfg.eval.material, cfg.eval.load_density);
    if (cfg.eval.supports == "corners") {
      // keep only boundary joints where the polygon outline turns sharply
      const double threshold = cfg.corner_threshold_deg * kPi / 180.0;
      std::set<std::pair<int, int>> half;
      for (const auto& f : gridshell.faces)
        for (std::size_t i = 0; i < f.size(); ++i) half.insert({f[i], f[(i + 1) % f.size()]});
      std::map<int, int> next;  // boundary half-edges, tail -> head
      for (const auto& [a, b] : half)
        if (!half.contains({b, a})) next[a] = b;
      std::vector<std::uint8_t> restraint(m.joints.size(), 0);
      for (const auto& [a, b] : next) {
        const auto it = next.find(b);
        if (it == next.end()) continue;
        const Vec3 din = m.joints[static_cast<std::size_t>(b)] - m.joints[static_cast<std::size_t>(a)];
        const Vec3 dout = m.joints[static_cast<std::size_t>(it->second)] - m.joints[static_cast<std::size_t>(b)];
        const double turn = std::acos(std::clamp(din.dot(dout) / (din.norm() * dout.norm()), -1.0, 1.0));
        if (turn > threshold) restraint[static_cast<std::size_t>(b)] = kPinned;
      }
      if (std::count(restraint.begin(), restraint.end(), kPinned) < 3)
        fail("fewer than 3 corner supports found; use supports = boundary");
      m.restraint = std::move(restraint);
    }
    return m;
  });
}

inline EvalReport evaluate(const FrameModel& frame) {
  return stage("evaluate", [&] { return evaluate_frame(frame); });
}

inline double total_edge_length(const PolyMesh& m) {
  double s = 0.0;
  for (const auto& e : poly_edges(m)) s += (m.vertices[static_cast<std::size_t>(e.v1)] - m.vertices[static_cast<std::size_t>(e.v0)]).norm();
  return s;
}

// --- R calibration ------------------------------------------------------------

struct Calibration {
  double R = 0.0;
  double total_length = 0.0;
  int evaluations = 0;
  bool within_tolerance = false;
};

// Total edge length falls roughly like 1/R. Bracket the target by geometric
// steps, then bisect in log R until within kEquivalenceTolerance.
template <typename LengthAt>
Calibration calibrate_r(double R0, double target, LengthAt&& length_at, int max_evaluations = 16) {
  if (!(target > 0.0)) fail("calibrate_r: target length must be positive");
  Calibration best;
  double best_err = kInfinity;
  auto probe = [&](double R) {
    const double L = length_at(R);
    ++best.evaluations;
    const double err = std::abs(L - target) / target;
    if (err < best_err) {
      best_err = err;
      best.R = R;
      best.total_length = L;
    }
    return L;
  };
  double lo = R0, hi = R0;
  double L = probe(R0);
  if (std::abs(L - target) <= kEquivalenceTolerance * target) {
    best.within_tolerance = true;
    return best;
  }
  // lo gives too much length (small R), hi too little
  if (L > target) {
    while (best.evaluations < max_evaluations) {
      hi *= 1.5;
      const double Lh = probe(hi);
      if (std::abs(Lh - target) <= kEquivalenceTolerance * target) return best.within_tolerance = true, best;
      if (Lh < target) break;
      lo = hi;
    }
  } else {
    while (best.evaluations < max_evaluations) {
      lo /= 1.5;
      const double Ll = probe(lo);
      if (std::abs(Ll - target) <= kEquivalenceTolerance * target) return best.within_tolerance = true, best;
      if (Ll > target) break;
      hi = lo;
    }
  }
  while (best.evaluations < max_evaluations) {
    const double mid = std::sqrt(lo * hi);
    const double Lm = probe(mid);
    if (std::abs(Lm - target) <= kEquivalenceTolerance * target) return best.within_tolerance = true, best;
    (Lm > target ? lo : hi) = mid;
  }
  return best;
}

// --- full run -----------------------------------------------------------------

struct PipelineResult {
  PipelineConfig config;  // with the calibrated R
  TriMesh mesh;
  StressTensorField stress;
  PsiField field;
  RemeshResult remesh;
  FinishResult finish;
  FrameModel frame;
  EvalReport eval;
  std::optional<Calibration> calibration;
  io::json report;
};

inline int count_hexagons(const PolyMesh& m) {
  return static_cast<int>(std::count_if(m.faces.begin(), m.faces.end(), [](const auto& f) { return f.size() == 6; }));
}

inline io::json make_report(const PipelineResult& r) {
  io::json j = io::header("pipeline_report");
  j["config"] = to_json(r.config);
  j["config"].erase("output_dir");  // bundles must not depend on where they are written
  j["input"] = {{"vertices", r.mesh.num_vertices()}, {"triangles", r.mesh.num_triangles()}};
  const auto& d = r.remesh.domain;
  j["remesh"] = {{"q", d.q},
                 {"refinement_rounds", d.refinement_rounds},
                 {"refined_triangles", d.deformed.num_triangles()},
                 {"deform_iterations", d.last_deform.iterations},
                 {"seeds", r.remesh.lloyd.seeds.size()},
                 {"lloyd_iterations", r.remesh.lloyd.iterations},
                 {"lloyd_converged", r.remesh.lloyd.converged},
                 {"lloyd_energy", r.remesh.lloyd.energy},
                 {"foldovers", count_foldovers(d)}};
  const auto& g = r.finish.gridshell;
  double mean_planarity = 0.0, mean_regularity = 0.0;
  int counted = 0;
  for (std::size_t f = 0; f < g.faces.size(); ++f) {
    mean_planarity += g.planarity[f];
    if (!std::isnan(g.regularity[f])) mean_regularity += g.regularity[f], ++counted;
  }
  j["gridshell"] = {{"vertices", g.vertices.size()},
                    {"faces", g.faces.size()},
                    {"hexagons", count_hexagons(g)},
                    {"total_edge_length", total_edge_length(g)},
                    {"mean_planarity", g.faces.empty() ? 0.0 : mean_planarity / static_cast<double>(g.faces.size())},
                    {"mean_regularity", counted ? mean_regularity / counted : 0.0},
                    {"regularizer_iterations", r.finish.regularize.iterations}};
  if (r.calibration)
    j["calibration"] = {{"R", r.calibration->R}, {"total_length", r.calibration->total_length},
                        {"evaluations", r.calibration->evaluations}, {"within_tolerance", r.calibration->within_tolerance}};
  j["evaluation"] = io::to_json(r.eval, r.frame);
  j["evaluation"].erase("displacement");
  io::json warnings = r.remesh.warnings;
  for (const auto& w : r.finish.regularize.warnings) warnings.push_back(w);
  j["warnings"] = std::move(warnings);
  return j;
}

// Runs everything from an already-analyzed field; `base_field` is the field
// before rescaling (shared across sweep rows).
inline PipelineResult run_from_field(const TriMesh& mesh, const StressTensorField& stress, const PsiField& base_field,
                                     PipelineConfig cfg) {
  cfg.validate();
  PipelineResult r;
  r.mesh = mesh;
  r.stress = stress;
  r.field = stage("field", [&] { return rescale(base_field, cfg.D, cfg.A); });
  if (cfg.target_total_length > 0.0) {
    // keep the probe calibrate_r will pick (same strict-improvement rule)
    double best_err = kInfinity;
    auto length_at = [&](double R) {
      PipelineConfig c = cfg;
      c.R = R;
      RemeshResult rm = remesh(mesh, r.field, c);
      FinishResult fin = finish(rm.extract.mesh, c);
      const double L = total_edge_length(fin.gridshell);
      const double err = std::abs(L - cfg.target_total_length) / cfg.target_total_length;
      if (err < best_err) {
        best_err = err;
        r.remesh = std::move(rm);
        r.finish = std::move(fin);
      }
      return L;
    };
    r.calibration = stage("calibrate", [&] { return calibrate_r(cfg.R, cfg.target_total_length, length_at); });
    cfg.R = r.calibration->R;
  } else {
    r.remesh = remesh(mesh, r.field, cfg);
    r.finish = finish(r.remesh.extract.mesh, cfg);
  }
  r.config = cfg;
  r.frame = make_frame(r.finish.gridshell, cfg);
  r.eval = evaluate(r.frame);
  r.report = make_report(r);
  return r;
}

inline void write_bundle(const PipelineResult& r, const std::string& dir) {
  stage("write", [&] {
    std::filesystem::create_directories(dir);
    const std::filesystem::path p(dir);
    save_obj(r.finish.gridshell, (p / "gridshell.obj").string());
    io::write_json((p / "field.json").string(), io::to_json(r.field));
    save_obj(r.remesh.domain.deformed, (p / "deformed.obj").string());
    io::write_text((p / "metrics.csv").string(), io::metrics_csv(r.finish.gridshell));
    io::write_text((p / "forces.csv").string(), io::forces_csv(r.frame, r.eval));
    io::write_json((p / "report.json").string(), r.report);
  });
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const TriMesh mesh = load_input(cfg);
  const auto stress = analyze(mesh, cfg);
  const auto base = prepare_field(mesh, stress, cfg);
  PipelineResult r = run_from_field(mesh, stress, base, cfg);
  if (!cfg.output_dir.empty()) write_bundle(r, cfg.output_dir);
  return r;
}

// --- sweep ----------------------------------------------------------------------

struct SweepRow {
  double D = 1, A = 1;
  int rep = 0;
  std::uint64_t rng_seed = 0;
  bool ok = false;
  std::string error;
  double R = 0;
  int faces = 0;
  double total_length = 0, delta_max = 0, lambda_lin = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string csv;
};

// splitmix64 step: distinct, reproducible seeds per (D, A, rep).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t i) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (i + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// `run_row` defaults to the full pipeline; tests may substitute it.
inline SweepResult sweep(const PipelineConfig& base_cfg, std::span<const double> Ds, std::span<const double> As, int reps,
                         const std::function<SweepRow(const PipelineConfig&)>& run_row = {}) {
  if (Ds.empty() || As.empty()) fail("sweep: D and A lists must be nonempty");
  if (reps < 1) fail("sweep: repetitions must be at least 1");
  for (double d : Ds) if (!(d >= 1.0)) fail("sweep: D values must be >= 1");
  for (double a : As) if (!(a >= 1.0)) fail("sweep: A values must be >= 1");

  std::optional<TriMesh> mesh;
  std::optional<StressTensorField> stress;
  std::optional<PsiField> base;
  auto full_row = [&](const PipelineConfig& c) {
    if (!mesh) {
      mesh = load_input(c);
      stress = analyze(*mesh, c);
      base = prepare_field(*mesh, *stress, c);
    }
    const auto r = run_from_field(*mesh, *stress, *base, c);
    SweepRow row;
    row.ok = true;
    row.R = r.config.R;
    row.faces = static_cast<int>(r.finish.gridshell.faces.size());
    row.total_length = r.eval.total_length;
    row.delta_max = r.eval.delta_max;
    row.lambda_lin = r.eval.lambda_lin;
    return row;
  };

  SweepResult out;
  std::ostringstream os;
  os << "D,A,rep,rng_seed,status,R,faces,total_length,delta_max,lambda_lin\n";
  std::uint64_t index = 0;
  for (double D : Ds)
    for (double A : As) {
      std::vector<SweepRow> group;
      for (int rep = 0; rep < reps; ++rep) {
        PipelineConfig c = base_cfg;
        c.D = D;
        c.A = A;
        c.rng_seed = derive_seed(base_cfg.rng_seed, index++);
        SweepRow row;
        try {
          row = run_row ? run_row(c) : full_row(c);
          row.ok = true;
        } catch (const std::exception& e) {
          row = SweepRow{};
          row.error = e.what();
        }
        row.D = D;
        row.A = A;
        row.rep = rep;
        row.rng_seed = c.rng_seed;
        os << io::num(D) << ',' << io::num(A) << ',' << rep << ',' << row.rng_seed << ',';
        if (row.ok)
          os << "ok," << io::num(row.R) << ',' << row.faces << ',' << io::num(row.total_length) << ','
             << io::num(row.delta_max) << ',' << io::num(row.lambda_lin) << '\n';
        else {
          std::string msg = row.error;
          std::replace(msg.begin(), msg.end(), '"', '\'');
          os << "\"error: " << msg << "\",,,,,\n";
        }
        group.push_back(row);
        out.rows.push_back(row);
      }
      SweepRow mean;
      int n = 0;
      for (const auto& r : group)
        if (r.ok) {
          ++n;
          mean.R += r.R;
          mean.faces += r.faces;
          mean.total_length += r.total_length;
          mean.delta_max += r.delta_max;
          mean.lambda_lin += r.lambda_lin;
        }
      os << io::num(D) << ',' << io::num(A) << ",mean,," << (n ? "ok" : "no successful runs") << ',';
      if (n)
        os << io::num(mean.R / n) << ',' << io::num(static_cast<double>(mean.faces) / n) << ','
           << io::num(mean.total_length / n) << ',' << io::num(mean.delta_max / n) << ','
           << io::num(mean.lambda_lin / n) << '\n';
      else
        os << ",,,,\n";
    }
  out.csv = os.str();
  return out;
}

}  // namespace gridshell
