// Command-line front end: one subcommand per pipeline stage plus the full
// pipeline and the (D, A) sweep. Every path is explicit.

#include "gridshell/fixtures.hpp"
#include "gridshell/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace gridshell;

namespace {

// Flag overrides, applied on top of the JSON config. Unset flags leave the
// config untouched.
struct Overrides {
  std::string config_path;
  std::optional<std::string> input, supports, output_dir;
  std::optional<double> D, A, R, corner_threshold_deg, smoothness_weight, lipschitz, symmetry_tolerance,
      lloyd_tolerance, weld_tolerance, damping, regularizer_tolerance, diameter, load_density, youngs_modulus,
      target_total_length;
  std::optional<std::uint64_t> rng_seed;
  std::optional<int> lloyd_iterations, max_refine_rounds, deform_max_iterations, regularizer_max_iterations;
  std::vector<std::string> symmetry_planes;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--input", input, "input triangle mesh (OBJ)");
    app->add_option("--d", D, "density range D >= 1");
    app->add_option("--a", A, "anisotropy range A >= 1");
    app->add_option("--r", R, "Poisson radius R in meters");
    app->add_option("--rng-seed", rng_seed);
    app->add_option("--corner-threshold-deg", corner_threshold_deg);
    app->add_option("--symmetry-plane", symmetry_planes, "px,py,pz,nx,ny,nz (repeatable; replaces the config list)");
    app->add_option("--smoothness-weight", smoothness_weight);
    app->add_option("--lipschitz", lipschitz, "0 = range / R");
    app->add_option("--symmetry-tolerance", symmetry_tolerance);
    app->add_option("--lloyd-iterations", lloyd_iterations);
    app->add_option("--lloyd-tolerance", lloyd_tolerance);
    app->add_option("--max-refine-rounds", max_refine_rounds);
    app->add_option("--deform-max-iterations", deform_max_iterations);
    app->add_option("--weld-tolerance", weld_tolerance);
    app->add_option("--damping", damping);
    app->add_option("--regularizer-max-iterations", regularizer_max_iterations);
    app->add_option("--regularizer-tolerance", regularizer_tolerance);
    app->add_option("--diameter", diameter, "bar diameter in meters");
    app->add_option("--youngs-modulus", youngs_modulus, "bar Young's modulus in Pa");
    app->add_option("--load-density", load_density, "N/m^2 on the gridshell");
    app->add_option("--supports", supports)->check(CLI::IsMember({"boundary", "corners"}));
    app->add_option("--target-total-length", target_total_length, "calibrate R to this total edge length");
  }

  PipelineConfig resolve() const { return stage("config", [&] { return merged(); }); }

  PipelineConfig merged() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : config_from_json(io::read_json(config_path));
    auto set = [](auto& field, const auto& opt) {
      if (opt) field = *opt;
    };
    set(c.input, input);
    set(c.D, D);
    set(c.A, A);
    set(c.R, R);
    set(c.rng_seed, rng_seed);
    set(c.corner_threshold_deg, corner_threshold_deg);
    set(c.field.smoothness_weight, smoothness_weight);
    set(c.field.lipschitz, lipschitz);
    set(c.field.symmetry_tolerance, symmetry_tolerance);
    set(c.remesh.lloyd_iterations, lloyd_iterations);
    set(c.remesh.lloyd_tolerance, lloyd_tolerance);
    set(c.remesh.max_refine_rounds, max_refine_rounds);
    set(c.remesh.deform_max_iterations, deform_max_iterations);
    set(c.remesh.weld_tolerance, weld_tolerance);
    set(c.regularizer.damping, damping);
    set(c.regularizer.max_iterations, regularizer_max_iterations);
    set(c.regularizer.tolerance, regularizer_tolerance);
    set(c.eval.diameter, diameter);
    set(c.eval.material.E, youngs_modulus);
    set(c.eval.load_density, load_density);
    set(c.eval.supports, supports);
    set(c.target_total_length, target_total_length);
    set(c.output_dir, output_dir);
    if (!symmetry_planes.empty()) {
      c.symmetry_planes.clear();
      for (const auto& s : symmetry_planes) {
        std::vector<double> v;
        std::stringstream in(s);
        for (std::string tok; std::getline(in, tok, ',');) v.push_back(std::stod(tok));
        if (v.size() != 6) fail("--symmetry-plane expects six comma-separated numbers, got '", s, "'");
        c.symmetry_planes.emplace_back(Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]));
      }
    }
    c.validate();
    return c;
  }
};

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      fail(what, ": '", tok, "' is not a number");
    }
  }
  return out;
}

void summary(const char* what, const std::string& path) { std::printf("wrote %s: %s\n", what, path.c_str()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stress-aligned hex-dominant gridshell design"};
  app.require_subcommand(1);

  Overrides ov;
  std::string out, stress_path, field_path, tess_path, deformed_path, labels_path, genealogy_path, metrics_path,
      forces_path, d_values = "1,2,3,4", a_values = "1,2,3,4", fixture_name;
  int reps = 3;

  // analyze: mesh -> stress field
  auto* analyze_cmd = app.add_subcommand("analyze", "membrane analysis of the input surface");
  ov.add_to(analyze_cmd);
  analyze_cmd->add_option("-o,--out", out, "stress field JSON")->required();
  analyze_cmd->callback([&] {
    const auto cfg = ov.resolve();
    const auto mesh = load_input(cfg);
    io::write_json(out, io::to_json(analyze(mesh, cfg)));
    summary("stress field", out);
  });

  // field: stress -> smoothed, saturated, symmetrized, rescaled field
  auto* field_cmd = app.add_subcommand("field", "design field from a stress field");
  ov.add_to(field_cmd);
  field_cmd->add_option("--stress", stress_path, "stress field JSON from `analyze`")->required()->check(CLI::ExistingFile);
  field_cmd->add_option("-o,--out", out, "field JSON")->required();
  field_cmd->callback([&] {
    const auto cfg = ov.resolve();
    const auto mesh = load_input(cfg);
    const auto stress = stage("field", [&] { return io::stress_from_json(io::read_json(stress_path), mesh); });
    io::write_json(out, io::to_json(make_field(mesh, stress, cfg)));
    summary("field", out);
  });

  // remesh: field -> tessellation (sector only when symmetry planes are set)
  auto* remesh_cmd = app.add_subcommand("remesh", "anisotropic CVT tessellation of the design field");
  ov.add_to(remesh_cmd);
  remesh_cmd->add_option("--field", field_path, "field JSON from `field`")->required()->check(CLI::ExistingFile);
  remesh_cmd->add_option("-o,--out", out, "tessellation OBJ")->required();
  remesh_cmd->add_option("--deformed", deformed_path, "also write the deformed surface (OBJ)");
  remesh_cmd->add_option("--labels", labels_path, "also write Voronoi labels (CSV)");
  remesh_cmd->add_option("--genealogy", genealogy_path, "also write refinement genealogy (JSON)");
  remesh_cmd->callback([&] {
    const auto cfg = ov.resolve();
    const auto mesh = load_input(cfg);
    const auto psi = stage("remesh", [&] { return io::psi_from_json(io::read_json(field_path), mesh); });
    const auto r = remesh(mesh, psi, cfg);
    save_obj(r.extract.mesh, out);
    summary("tessellation", out);
    if (!deformed_path.empty()) save_obj(r.domain.deformed, deformed_path), summary("deformed surface", deformed_path);
    if (!labels_path.empty()) io::write_text(labels_path, io::labels_csv(r.lloyd.voronoi)), summary("labels", labels_path);
    if (!genealogy_path.empty())
      io::write_json(genealogy_path, io::genealogy_json(r.domain)), summary("genealogy", genealogy_path);
    std::printf("%zu seeds, %zu faces, %d Lloyd iterations\n", r.lloyd.seeds.size(), r.extract.mesh.faces.size(),
                r.lloyd.iterations);
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  });

  // regularize: tessellation -> regularized (and welded) gridshell
  auto* reg_cmd = app.add_subcommand("regularize", "regularize polygons and weld symmetric sectors");
  ov.add_to(reg_cmd);
  reg_cmd->add_option("--tessellation", tess_path, "tessellation OBJ from `remesh`")->required()->check(CLI::ExistingFile);
  reg_cmd->add_option("-o,--out", out, "gridshell OBJ")->required();
  reg_cmd->add_option("--metrics", metrics_path, "also write per-face planarity/regularity (CSV)");
  reg_cmd->callback([&] {
    const auto cfg = ov.resolve();
    const auto tess = stage("regularize", [&] { return load_poly_obj(tess_path); });
    const auto f = finish(tess, cfg);
    save_obj(f.gridshell, out);
    summary("gridshell", out);
    if (!metrics_path.empty()) io::write_text(metrics_path, io::metrics_csv(f.gridshell)), summary("metrics", metrics_path);
    std::printf("%d iterations, converged: %s\n", f.regularize.iterations, f.regularize.converged ? "yes" : "no");
    for (const auto& w : f.regularize.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  });

  // evaluate: gridshell -> frame report
  auto* eval_cmd = app.add_subcommand("evaluate", "linear static and linearized buckling analysis of the bar frame");
  ov.add_to(eval_cmd);
  eval_cmd->add_option("--gridshell", tess_path, "gridshell OBJ")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("-o,--out", out, "evaluation JSON")->required();
  eval_cmd->add_option("--forces", forces_path, "also write axial bar forces (CSV)");
  eval_cmd->callback([&] {
    PipelineConfig cfg = ov.resolve();
    const auto g = stage("evaluate", [&] { return load_poly_obj(tess_path); });
    const auto frame = make_frame(g, cfg);
    const auto r = evaluate(frame);
    io::write_json(out, io::to_json(r, frame));
    summary("evaluation", out);
    if (!forces_path.empty()) io::write_text(forces_path, io::forces_csv(frame, r)), summary("forces", forces_path);
    std::printf("delta_max %s m, lambda_lin %s, total length %s m\n", io::num(r.delta_max).c_str(),
                io::num(r.lambda_lin).c_str(), io::num(r.total_length).c_str());
  });

  // pipeline: everything, artifact bundle into --output-dir
  auto* pipe_cmd = app.add_subcommand("pipeline", "run every stage and write the artifact bundle");
  ov.add_to(pipe_cmd);
  pipe_cmd->add_option("--output-dir", ov.output_dir, "bundle directory (required here or in the config)");
  pipe_cmd->callback([&] {
    const auto cfg = ov.resolve();
    if (cfg.output_dir.empty()) fail("pipeline needs an output directory (--output-dir or config output_dir)");
    const auto r = run_pipeline(cfg);
    std::printf("wrote bundle: %s\n", cfg.output_dir.c_str());
    std::printf("R %s, %zu faces, delta_max %s m, lambda_lin %s, total length %s m\n", io::num(r.config.R).c_str(),
                r.finish.gridshell.faces.size(), io::num(r.eval.delta_max).c_str(), io::num(r.eval.lambda_lin).c_str(),
                io::num(r.eval.total_length).c_str());
    for (const auto& w : r.report["warnings"]) std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
  });

  // sweep: (D, A, rep) grid -> CSV
  auto* sweep_cmd = app.add_subcommand("sweep", "pipeline over a grid of (D, A) with repetitions");
  ov.add_to(sweep_cmd);
  sweep_cmd->add_option("--d-values", d_values, "comma-separated D values")->capture_default_str();
  sweep_cmd->add_option("--a-values", a_values, "comma-separated A values")->capture_default_str();
  sweep_cmd->add_option("--reps", reps, "repetitions per (D, A)")->capture_default_str();
  sweep_cmd->add_option("-o,--out", out, "sweep CSV")->required();
  sweep_cmd->callback([&] {
    const auto cfg = ov.resolve();
    const auto Ds = parse_list(d_values, "--d-values"), As = parse_list(a_values, "--a-values");
    const auto s = stage("sweep", [&] { return sweep(cfg, Ds, As, reps); });
    io::write_text(out, s.csv);
    const auto failed = std::count_if(s.rows.begin(), s.rows.end(), [](const SweepRow& r) { return !r.ok; });
    std::printf("wrote sweep: %s (%zu rows, %td failed)\n", out.c_str(), s.rows.size(), failed);
  });

  // config: print or store the effective config
  auto* cfg_cmd = app.add_subcommand("config", "write the effective config (defaults plus overrides)");
  ov.add_to(cfg_cmd);
  cfg_cmd->add_option("--output-dir", ov.output_dir);
  cfg_cmd->add_option("-o,--out", out, "config JSON (stdout if omitted)");
  cfg_cmd->callback([&] {
    const auto text = to_json(ov.resolve()).dump(2) + "\n";
    if (out.empty())
      std::fputs(text.c_str(), stdout);
    else
      io::write_text(out, text), summary("config", out);
  });

  // fixture: procedural test surfaces as OBJ
  auto* fix_cmd = app.add_subcommand("fixture", "write a procedural test surface");
  fix_cmd->add_option("name", fixture_name, "paraboloid | flat-square | flat-strip | disk")
      ->required()
      ->check(CLI::IsMember({"paraboloid", "flat-square", "flat-strip", "disk"}));
  fix_cmd->add_option("-o,--out", out, "OBJ path")->required();
  fix_cmd->callback([&] {
    TriMesh m;
    if (fixture_name == "paraboloid") m = fixtures::paraboloid(20, 10.0, 2.0);
    else if (fixture_name == "flat-square") m = fixtures::grid(16, 16, 10.0, 10.0);
    else if (fixture_name == "flat-strip") m = fixtures::grid(40, 4, 20.0, 2.0);
    else m = fixtures::disk(10, 48, 5.0);
    save_obj(m, out);
    summary("fixture", out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
