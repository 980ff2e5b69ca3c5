#include "gridshell/fixtures.hpp"
#include "gridshell/pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace gridshell;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
  const fs::path p = fs::path(GRIDSHELL_TEST_TMP) / ("pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string flat_square() {
  static const std::string path = [] {
    const auto p = tmp("inputs") / "flat_square.obj";
    save_obj(fixtures::grid(16, 16, 10.0, 10.0), p.string());
    return p.string();
  }();
  return path;
}

std::string flat_strip() {
  static const std::string path = [] {
    const auto p = tmp("inputs_strip") / "flat_strip.obj";
    save_obj(fixtures::grid(40, 4, 20.0, 2.0), p.string());
    return p.string();
  }();
  return path;
}

PipelineConfig square_config() {
  PipelineConfig c;
  c.input = flat_square();
  c.R = 1.5;
  c.rng_seed = 7;
  return c;
}

}  // namespace

TEST(Pipeline, FlatSquareWritesBundle) {
  auto c = square_config();
  c.output_dir = tmp("bundle").string();
  const auto r = run_pipeline(c);
  for (const char* f : {"gridshell.obj", "field.json", "deformed.obj", "metrics.csv", "forces.csv", "report.json"})
    EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / f)) << f;

  const auto report = io::read_json((fs::path(c.output_dir) / "report.json").string());
  io::check_header(report, "pipeline_report");
  EXPECT_EQ(report["gridshell"]["faces"].get<std::size_t>(), r.finish.gridshell.faces.size());
  EXPECT_EQ(report["remesh"]["foldovers"].get<int>(), 0);

  std::map<std::size_t, int> arity;
  for (const auto& f : r.finish.gridshell.faces) ++arity[f.size()];
  for (const auto& [n, count] : arity)
    if (n != 6) EXPECT_GT(arity[6], count) << n << "-gons";

  // field.json reads back onto the input mesh
  const TriMesh mesh = load_obj(c.input);
  const auto psi = io::psi_from_json(io::read_json((fs::path(c.output_dir) / "field.json").string()), mesh);
  EXPECT_EQ(psi.size(), mesh.num_triangles());
}

TEST(Pipeline, SameSeedIsByteIdentical) {
  auto a = square_config(), b = square_config();
  a.output_dir = tmp("det_a").string();
  b.output_dir = tmp("det_b").string();
  run_pipeline(a);
  run_pipeline(b);
  for (const char* f : {"gridshell.obj", "field.json", "deformed.obj", "metrics.csv", "forces.csv", "report.json"})
    EXPECT_EQ(slurp(fs::path(a.output_dir) / f), slurp(fs::path(b.output_dir) / f)) << f;
}

TEST(Pipeline, HigherDensityGivesMoreFaces) {
  auto c = square_config();
  const auto base = run_pipeline(c);
  c.D = 4;
  const auto dense = run_pipeline(c);
  EXPECT_GT(dense.finish.gridshell.faces.size(), base.finish.gridshell.faces.size());
}

TEST(Pipeline, DoublingDensityNeverLosesSeeds) {
  PipelineConfig c;
  c.input = flat_strip();
  c.R = 1.0;
  c.rng_seed = 3;
  std::size_t prev = 0;
  for (double D : {1.0, 2.0, 4.0}) {
    c.D = D;
    const auto r = run_pipeline(c);
    EXPECT_GE(r.remesh.lloyd.seeds.size(), prev) << "D=" << D;
    prev = r.remesh.lloyd.seeds.size();
  }
}

TEST(Pipeline, MirrorPlaneGivesSymmetricGridshell) {
  auto c = square_config();
  c.symmetry_planes = {SymmetryPlane{Vec3(5, 0, 0), Vec3(1, 0, 0)}};
  const auto r = run_pipeline(c);
  const auto& g = r.finish.gridshell;
  ASSERT_FALSE(g.faces.empty());
  for (const auto& v : g.vertices) {
    const Vec3 m(10.0 - v.x(), v.y(), v.z());
    double best = kInfinity;
    for (const auto& w : g.vertices) best = std::min(best, (w - m).norm());
    EXPECT_LT(best, 1e-6) << v.transpose();
  }
  // welding leaves a single connected manifold: every edge has one or two faces
  std::map<std::pair<int, int>, int> uses;
  for (const auto& f : g.faces)
    for (std::size_t i = 0; i < f.size(); ++i) {
      const int a = f[i], b = f[(i + 1) % f.size()];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  for (const auto& [e, n] : uses) EXPECT_LE(n, 2);
}

TEST(Pipeline, SectorRejectsUncutMesh) {
  // plane x = 5.3 falls between grid lines of the 16-cell square
  const TriMesh mesh = load_obj(flat_square());
  PsiField psi;
  psi.resize(mesh.num_triangles());
  for (std::size_t t = 0; t < psi.size(); ++t) psi.direction[t] = Vec3::UnitX();
  const std::vector<SymmetryPlane> planes{{Vec3(5.3, 0, 0), Vec3(1, 0, 0)}};
  EXPECT_THROW(sector(mesh, psi, planes, 1e-6, kPi / 6), Error);
}

TEST(Pipeline, ErrorsCarryStageName) {
  PipelineConfig c;
  c.input = (tmp("missing") / "nope.obj").string();
  try {
    run_pipeline(c);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "load");
    EXPECT_NE(std::string(e.what()).find("[load]"), std::string::npos);
  }
}

TEST(Pipeline, CornerSupportsOnSquare) {
  auto c = square_config();
  c.eval.supports = "corners";
  const auto r = run_pipeline(c);
  const auto n = std::count(r.frame.restraint.begin(), r.frame.restraint.end(), kPinned);
  EXPECT_GE(n, 4);
  EXPECT_LT(n, 12);
}

// --- config ---------------------------------------------------------------------

TEST(Config, RoundTrip) {
  PipelineConfig c = square_config();
  c.D = 3;
  c.A = 2;
  c.symmetry_planes = {SymmetryPlane{Vec3(5, 0, 0), Vec3(1, 0, 0)}};
  c.eval.supports = "corners";
  c.remesh.deform_max_iterations = 321;
  c.regularizer.damping = 0.25;
  const auto j = to_json(c);
  const auto back = config_from_json(j);
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto j = to_json(square_config());
  j["remesh"]["lloyd_iterationz"] = 3;
  EXPECT_THROW(config_from_json(j), Error);

  j = to_json(square_config());
  j["colour"] = "red";
  EXPECT_THROW(config_from_json(j), Error);

  j = to_json(square_config());
  j["D"] = 0.5;
  EXPECT_THROW(config_from_json(j).validate(), Error);

  j = to_json(square_config());
  j["R"] = 0.0;
  EXPECT_THROW(config_from_json(j).validate(), Error);
}

// --- calibration ------------------------------------------------------------------

TEST(Calibration, FindsRForInverseLengthLaw) {
  // piecewise constant in R, like the real length(R)
  auto length_at = [](double R) { return std::floor(400.0 / R) + 0.5; };
  const auto c = calibrate_r(1.0, 90.0, length_at);
  EXPECT_TRUE(c.within_tolerance);
  EXPECT_NEAR(c.total_length, 90.0, 0.05 * 90.0);
  EXPECT_NEAR(length_at(c.R), c.total_length, 1e-12);
  EXPECT_LE(c.evaluations, 16);

  const auto up = calibrate_r(20.0, 90.0, length_at);
  EXPECT_TRUE(up.within_tolerance);
}

TEST(Calibration, PipelineMatchesDirectRunAtChosenR) {
  auto c = square_config();
  const double target = run_pipeline(c).eval.total_length;
  c.D = 2;
  c.target_total_length = target;
  const auto cal = run_pipeline(c);
  ASSERT_TRUE(cal.calibration.has_value());
  EXPECT_GT(cal.calibration->evaluations, 1);
  EXPECT_EQ(cal.config.R, cal.calibration->R);
  EXPECT_EQ(cal.eval.total_length, cal.calibration->total_length);
  EXPECT_TRUE(cal.report.contains("calibration"));

  auto direct = c;
  direct.target_total_length = 0;
  direct.R = cal.calibration->R;
  const auto d = run_pipeline(direct);
  EXPECT_EQ(d.finish.gridshell.vertices, cal.finish.gridshell.vertices);
  EXPECT_EQ(d.finish.gridshell.faces, cal.finish.gridshell.faces);
}

TEST(Calibration, ReportsFailureWhenUnreachable) {
  auto length_at = [](double R) { return R < 2.0 ? 100.0 : 50.0; };
  const auto c = calibrate_r(1.0, 75.0, length_at, 10);
  EXPECT_FALSE(c.within_tolerance);
  EXPECT_EQ(c.evaluations, 10);
  EXPECT_THROW(calibrate_r(1.0, 0.0, length_at), Error);
}

// --- sweep ------------------------------------------------------------------------

namespace {

SweepRow stub_row(const PipelineConfig& c) {
  SweepRow r;
  r.R = c.R;
  r.faces = static_cast<int>(10 * c.D);
  r.total_length = 100;
  r.delta_max = 0.01 * c.A;
  r.lambda_lin = 2;
  return r;
}

// fields in a CSV line, honouring double quotes
int fields(const std::string& line) {
  int n = 1;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    if (ch == ',' && !quoted) ++n;
  }
  return n;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Sweep, OneByOneByThree) {
  const std::vector<double> Ds{1}, As{1};
  const auto s = sweep(square_config(), Ds, As, 3, stub_row);
  EXPECT_EQ(s.rows.size(), 3u);
  const auto l = lines(s.csv);
  ASSERT_EQ(l.size(), 1u + 3u + 1u);
  EXPECT_EQ(l[0], "D,A,rep,rng_seed,status,R,faces,total_length,delta_max,lambda_lin");
  EXPECT_EQ(l[4].rfind("1,1,mean,,ok,", 0), 0u) << l[4];
  std::set<std::uint64_t> seeds;
  for (const auto& r : s.rows) seeds.insert(r.rng_seed);
  EXPECT_EQ(seeds.size(), 3u);
}

TEST(Sweep, FourByFourByThreeGives48Rows) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto s = sweep(square_config(), v, v, 3, stub_row);
  EXPECT_EQ(s.rows.size(), 48u);
  const auto l = lines(s.csv);
  EXPECT_EQ(l.size(), 1u + 48u + 16u);
  std::set<std::uint64_t> seeds;
  for (const auto& r : s.rows) seeds.insert(r.rng_seed);
  EXPECT_EQ(seeds.size(), 48u);
  for (const auto& line : l) EXPECT_EQ(fields(line), 10) << line;
}

TEST(Sweep, EmptyListsAreErrors) {
  const std::vector<double> v{1}, none;
  EXPECT_THROW(sweep(square_config(), v, none, 3, stub_row), Error);
  EXPECT_THROW(sweep(square_config(), none, v, 3, stub_row), Error);
  EXPECT_THROW(sweep(square_config(), v, v, 0, stub_row), Error);
}

TEST(Sweep, FailedRowIsRecordedAndSweepContinues) {
  const std::vector<double> Ds{1, 2}, As{1};
  auto flaky = [](const PipelineConfig& c) {
    if (c.D == 2) fail("boom, \"quoted\"");
    return stub_row(c);
  };
  const auto s = sweep(square_config(), Ds, As, 2, flaky);
  ASSERT_EQ(s.rows.size(), 4u);
  EXPECT_TRUE(s.rows[0].ok);
  EXPECT_FALSE(s.rows[2].ok);
  EXPECT_NE(s.rows[2].error.find("boom"), std::string::npos);
  const auto l = lines(s.csv);
  EXPECT_NE(l.back().find("no successful runs"), std::string::npos);
  for (const auto& line : l) EXPECT_EQ(fields(line), 10) << line;
}

TEST(Sweep, RealRowsOnSmallFixture) {
  auto c = square_config();
  c.R = 2.5;
  const std::vector<double> Ds{1, 2}, As{1};
  const auto s = sweep(c, Ds, As, 1);
  ASSERT_EQ(s.rows.size(), 2u);
  for (const auto& r : s.rows) {
    EXPECT_TRUE(r.ok) << r.error;
    EXPECT_GT(r.faces, 0);
    EXPECT_GT(r.total_length, 0.0);
  }
}

// --- artifacts ----------------------------------------------------------------------

TEST(Artifacts, StressAndFieldRoundTrip) {
  const TriMesh mesh = fixtures::paraboloid(6, 10.0, 2.0);
  PipelineConfig c;
  c.R = 2.0;
  const auto stress = analyze(mesh, c);
  const auto s2 = io::stress_from_json(io::json::parse(io::to_json(stress).dump()), mesh);
  ASSERT_EQ(s2.size(), stress.size());
  for (std::size_t t = 0; t < stress.size(); ++t) {
    EXPECT_EQ(s2.tensor[t], stress.tensor[t]);
    EXPECT_EQ(s2.e1[t], stress.e1[t]);
  }
  const auto psi = make_field(mesh, stress, c);
  const auto p2 = io::psi_from_json(io::json::parse(io::to_json(psi).dump()), mesh);
  EXPECT_EQ(p2.density, psi.density);
  EXPECT_EQ(p2.anisotropy, psi.anisotropy);
  EXPECT_EQ(p2.isotropic, psi.isotropic);
}

TEST(Artifacts, HeaderChecks) {
  const TriMesh mesh = fixtures::grid(2, 2, 1, 1);
  auto j = io::to_json(PsiField{});
  EXPECT_THROW(io::stress_from_json(j, mesh), Error);  // wrong kind
  j["schema_version"] = 99;
  EXPECT_THROW(io::psi_from_json(j, mesh), Error);
  EXPECT_THROW(io::psi_from_json(io::json::object(), mesh), Error);
  EXPECT_THROW(io::psi_from_json(io::to_json(PsiField{}), mesh), Error);  // size mismatch
}

TEST(Artifacts, InfiniteLambdaIsNullWithFlag) {
  FrameModel m;
  EvalReport r;
  r.lambda_lin = kInfinity;
  const auto j = io::to_json(r, m);
  EXPECT_TRUE(j["lambda_lin"].is_null());
  EXPECT_TRUE(j["lambda_lin_infinite"].get<bool>());
  EXPECT_EQ(io::num(kInfinity), "inf");
}
