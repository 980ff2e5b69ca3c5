#include "gridshell/frame_eval.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace gridshell;

namespace {

constexpr double kD = 0.037;

double inertia() { return oracle::circle_inertia(kD); }

FrameModel line_model(int elements, const Vec3& from, const Vec3& to) { return oracle::line_model(elements, from, to, kD); }

FrameModel euler_column(int elements, double L) { return oracle::euler_column(elements, L, kD); }

// Quad grid over a shallow paraboloid, boundary pinned by build_frame.
PolyMesh quad_dome(int n, double size, double rise) {
  PolyMesh m;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      const double x = size * (double(i) / n - 0.5), y = size * (double(j) / n - 0.5);
      m.vertices.emplace_back(x, y, rise * (1 - 4 * (x * x + y * y) / (size * size)));
    }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int a = j * (n + 1) + i;
      m.faces.push_back({a, a + 1, a + n + 2, a + n + 1});
    }
  return m;
}

}  // namespace

TEST(BuildFrame, SquareFaceSplitsLoadEqually) {
  PolyMesh sq{{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{0, 1, 2, 3}}, {}, {}};
  const auto m = build_frame(sq, kD, {}, 1000.0);
  ASSERT_EQ(m.loads.size(), 4u);
  for (const auto& f : m.loads) EXPECT_NEAR(f.z(), -250.0, 1e-9);
  EXPECT_EQ(m.beams.size(), 4u);
  for (auto r : m.restraint) EXPECT_EQ(r, kPinned);
}

TEST(BuildFrame, LoadIsConservedAndBeamsMatchEdges) {
  const auto mesh = quad_dome(6, 10.0, 2.0);
  const auto m = build_frame(mesh, kD, {}, 1000.0);
  double area = 0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) area += polygon_area(face_points(mesh, f));
  Vec3 total = Vec3::Zero();
  for (const auto& f : m.loads) total += f;
  EXPECT_NEAR(-total.z() / (1000.0 * area), 1.0, 1e-9);
  EXPECT_EQ(m.beams.size(), poly_edges(mesh).size());
}

TEST(BuildFrame, ClosedMeshHasNoSupports) {
  PolyMesh cube{{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}},
                {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}}, {}, {}};
  EXPECT_THROW(build_frame(cube, kD, {}, 1000.0), Error);
}

TEST(Static, CantileverTipDeflection) {
  auto m = line_model(1, Vec3::Zero(), Vec3(1, 0, 0));
  m.restraint[0] = kClamped;
  m.loads[1] = Vec3(0, 0, -1000.0);
  const auto r = solve_linear_static(m);
  const double expected = 1000.0 / (3 * 210e9 * inertia());
  EXPECT_NEAR(r.displacement[1].z() / -expected, 1.0, 1e-6);
  EXPECT_NEAR(r.delta_max / expected, 1.0, 1e-6);
}

TEST(Static, SimplySupportedMidspan) {
  auto m = line_model(2, Vec3::Zero(), Vec3(2, 0, 0));
  m.restraint[0] = kPinned | 0b001000;  // twist restrained once
  m.restraint[2] = kPinned;
  m.loads[1] = Vec3(0, 0, -1000.0);
  const auto r = solve_linear_static(m);
  const double expected = 1000.0 * 8.0 / (48 * 210e9 * inertia());
  EXPECT_NEAR(r.displacement[1].z() / -expected, 1.0, 1e-6);
  EXPECT_NEAR((r.reaction_sum + r.load_sum).norm(), 0.0, 1e-8 * 1000.0);
}

TEST(Static, ZeroLoadZeroDisplacement) {
  auto m = build_frame(quad_dome(4, 8.0, 1.0), kD, {}, 0.0);
  const auto r = solve_linear_static(m);
  EXPECT_EQ(r.delta_max, 0.0);
}

TEST(Static, EquilibriumAndRotationInvariance) {
  const auto m = build_frame(quad_dome(6, 10.0, 2.0), kD, {}, 1000.0);
  const auto r = solve_linear_static(m);
  EXPECT_GT(r.delta_max, 0.0);
  EXPECT_LE((r.reaction_sum + r.load_sum).norm(), 1e-8 * r.load_sum.norm());

  const Mat3 R = (Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized())).toRotationMatrix();
  auto rot = m;
  for (auto& p : rot.joints) p = R * p + Vec3(5, -3, 2);
  for (auto& f : rot.loads) f = R * f;
  const auto rr = solve_linear_static(rot);
  for (std::size_t j = 0; j < m.joints.size(); ++j)
    EXPECT_NEAR(rr.displacement[j].norm(), r.displacement[j].norm(), 1e-8 * r.delta_max);
}

TEST(Static, StiffnessIsPositiveDefiniteAfterSupports) {
  const auto m = build_frame(quad_dome(3, 6.0, 1.0), kD, {}, 1000.0);
  const auto fd = detail::free_dofs(m);
  const auto K = detail::restrict_to(
      detail::assemble(m, [&](std::size_t, double L) { return detail::local_stiffness(m, L); }), fd);
  const Eigen::MatrixXd Kd(K);
  EXPECT_LT((Kd - Kd.transpose()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Kd).eigenvalues().minCoeff(), 0.0);
}

TEST(Static, MechanismIsReported) {
  auto m = line_model(1, Vec3::Zero(), Vec3(1, 0, 0));
  m.restraint[0] = m.restraint[1] = kPinned;  // free spin about the axis
  try {
    solve_linear_static(m);
    FAIL() << "expected a mechanism error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("mechanism"), std::string::npos) << e.what();
  }
}

TEST(Static, RejectsBadModels) {
  auto m = line_model(1, Vec3::Zero(), Vec3(1, 0, 0));
  EXPECT_THROW(solve_linear_static(m), Error);  // no supports
  m.restraint[0] = kClamped;
  m.beams.push_back({1, 0});
  EXPECT_THROW(solve_linear_static(m), Error);  // duplicate
}

TEST(Buckling, EulerColumnConverges) {
  const double L = 3.0, Pcr = kPi * kPi * 210e9 * inertia() / (L * L);
  double last = kInfinity;
  for (int n : {2, 4, 8}) {
    const auto m = euler_column(n, L);
    const double err = std::abs(evaluate_frame(m).lambda_lin / Pcr - 1.0);
    if (n >= 4) EXPECT_LT(err, 0.02) << n;
    EXPECT_LT(err, last) << n;
    last = err;
  }
}

TEST(Buckling, ScalesInverselyWithLoad) {
  auto m = euler_column(4, 3.0);
  const double l1 = evaluate_frame(m).lambda_lin;
  m.loads.back() *= 2.0;
  EXPECT_NEAR(evaluate_frame(m).lambda_lin / l1, 0.5, 1e-9);
}

TEST(Buckling, NoAxialForceMeansInfinity) {
  auto m = line_model(2, Vec3::Zero(), Vec3(1, 0, 0));
  m.restraint[0] = kClamped;
  m.loads[2] = Vec3(0, 0, -10.0);
  const auto r = evaluate_frame(m);
  EXPECT_TRUE(std::isinf(r.lambda_lin));
  EXPECT_TRUE(r.lambda_is_linearized);
}

TEST(Buckling, LanczosMatchesDense) {
  const auto m = build_frame(quad_dome(5, 10.0, 2.0), kD, {}, 1000.0);
  const auto st = solve_linear_static(m);
  const double dense = estimate_linear_buckling(m, st);
  const double lanczos = estimate_linear_buckling(m, st, 0);
  ASSERT_TRUE(std::isfinite(dense));
  EXPECT_GT(dense, 0.0);
  EXPECT_NEAR(lanczos / dense, 1.0, 1e-6);
}

TEST(Equivalence, Examples) {
  EXPECT_TRUE(check_equivalence(1000, 1, 1000, 1).pass);
  EXPECT_EQ(check_equivalence(1000, 1, 1000, 1).length_difference, 0.0);
  const auto a = check_equivalence(1000, 1, 1049, 1);
  EXPECT_NEAR(a.length_difference, 0.049, 1e-12);
  EXPECT_TRUE(a.pass);
  EXPECT_FALSE(check_equivalence(1000, 1, 1051, 1).pass);
  EXPECT_FALSE(check_equivalence(1000, 1, 1000, 1.06).pass);

  const auto m = build_frame(quad_dome(3, 6.0, 1.0), kD, {}, 1000.0);
  const auto same = check_equivalence(m, m);
  EXPECT_TRUE(same.pass);
  EXPECT_NEAR(m.total_mass(), 7850.0 * kPi * kD * kD / 4 * m.total_length(), 1e-9);
}
