#include "gridshell/fixtures.hpp"
#include "gridshell/stress_field.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gridshell;
using oracle::barycenter_all_pairs;

namespace {

double line_angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

PsiField uniform_field(const TriMesh& m, const Vec3& dir, double a = 1.0) {
  PsiField f;
  f.resize(m.num_triangles());
  for (std::size_t t = 0; t < f.size(); ++t) {
    const Vec3 n = m.triangle_normal(static_cast<int>(t));
    f.direction[t] = (dir - dir.dot(n) * n).normalized();
    f.density[t] = 1.0;
    f.anisotropy[t] = a;
  }
  return f;
}

PsiField random_field(const TriMesh& m, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PsiField f;
  f.resize(m.num_triangles());
  for (std::size_t t = 0; t < f.size(); ++t) {
    const auto [e1, e2] = m.tangent_basis(static_cast<int>(t));
    const double th = 2.0 * kPi * u(rng);
    f.direction[t] = std::cos(th) * e1 + std::sin(th) * e2;
    f.density[t] = 1.0 + 10.0 * u(rng);
    f.anisotropy[t] = 1.0 + 3.0 * u(rng);
  }
  return f;
}

TriMesh strip3() {
  return TriMesh::build({{0, 0, 0}, {1.2, 0, 0}, {2.4, 0, 0}, {0.6, 2.4, 0}, {1.8, 2.4, 0}},
                        {{0, 1, 3}, {1, 4, 3}, {1, 2, 4}});
}

// Mirror-symmetric about x = 1 (even cell count with criss-cross diagonals).
TriMesh symmetric_grid() { return fixtures::grid(8, 4, 2.0, 1.0, [](double x, double y) { return 0.2 * std::sin(y) + 0.1 * (x - 1) * (x - 1); }); }

int mirror_triangle(const TriMesh& m, int t, const SymmetryPlane& pl) {
  const Vec3 b = pl.reflect_point(m.barycenter(t));
  for (std::size_t s = 0; s < m.num_triangles(); ++s)
    if ((m.barycenter(static_cast<int>(s)) - b).norm() < 1e-9) return static_cast<int>(s);
  return -1;
}

}  // namespace

TEST(SmoothLineField, UniformFieldIsFixedPoint) {
  const auto m = fixtures::grid(5, 5, 1.0, 1.0);
  const auto f = uniform_field(m, Vec3(1, 2, 0), 2.0);
  const auto s = smooth_line_field(f, m, 1.0);
  for (std::size_t t = 0; t < f.size(); ++t) EXPECT_LT(line_angle_between(s.direction[t], f.direction[t]), 1e-9);
}

TEST(SmoothLineField, OutlierWithoutFidelityAligns) {
  const auto m = fixtures::grid(5, 5, 1.0, 1.0);
  auto f = uniform_field(m, Vec3::UnitX(), 1.0);
  const std::size_t outlier = 24;
  f.direction[outlier] = Vec3::UnitY();
  SmoothingReport rep;
  const auto s = smooth_line_field(f, m, 1.0, &rep);
  // with zero fidelity the minimizer of the outlier's one-unknown energy is
  // the neighbors' common direction
  EXPECT_LT(line_angle_between(s.direction[outlier], Vec3::UnitX()), 1e-6);
  for (std::size_t t = 0; t < f.size(); ++t) EXPECT_LT(line_angle_between(s.direction[t], Vec3::UnitX()), 1e-6);
  EXPECT_LT(rep.final_energy, 1e-12);
}

TEST(SmoothLineField, AnisotropicOutlierIsRetained) {
  const auto m = fixtures::grid(5, 5, 1.0, 1.0);
  auto f = uniform_field(m, Vec3::UnitX(), 1.0);
  const std::size_t outlier = 24;
  f.direction[outlier] = Vec3::UnitY();
  f.anisotropy[outlier] = 10.0;
  const auto s = smooth_line_field(f, m, 0.1);
  EXPECT_LT(line_angle_between(s.direction[outlier], Vec3::UnitY()), 5.0 * kPi / 180.0);
}

TEST(SmoothLineField, EnergyDecreasesAndSignInvariant) {
  const auto m = fixtures::paraboloid(6, 4.0, 1.0);
  const auto f = random_field(m, 3);
  SmoothingReport rep;
  const auto s = smooth_line_field(f, m, 0.5, &rep);
  EXPECT_LE(rep.final_energy, rep.initial_energy);
  EXPECT_NEAR(line_field_energy(s, f, m, 0.5), rep.final_energy, 1e-9 * rep.initial_energy);
  auto g = f;
  for (std::size_t t = 0; t < g.size(); t += 3) g.direction[t] = -g.direction[t];
  const auto sg = smooth_line_field(g, m, 0.5);
  for (std::size_t t = 0; t < f.size(); ++t) {
    EXPECT_LT(line_angle_between(s.direction[t], sg.direction[t]), 1e-9);
    EXPECT_NEAR(s.direction[t].norm(), 1.0, 1e-12);
    EXPECT_NEAR(s.direction[t].dot(m.triangle_normal(static_cast<int>(t))), 0.0, 1e-9);
  }
  EXPECT_EQ(s.density, f.density);
  EXPECT_EQ(s.anisotropy, f.anisotropy);
}

TEST(LipschitzSaturate, StripExample) {
  const auto m = strip3();
  const auto g = barycenter_graph(m);
  ASSERT_EQ(g[1].size(), 2u);
  EXPECT_NEAR(g[1][0].second, 1.0, 1e-12);
  const std::vector<double> v{0.0, 10.0, 0.0};
  const auto r = lipschitz_saturate(v, m, 2.0);
  EXPECT_NEAR(r[0], 8.0, 1e-12);
  EXPECT_EQ(r[1], 10.0);
  EXPECT_NEAR(r[2], 8.0, 1e-12);
}

TEST(LipschitzSaturate, ConstantAndVacuous) {
  const auto m = fixtures::grid(4, 4, 1.0, 1.0);
  const std::vector<double> c(m.num_triangles(), 3.5);
  EXPECT_EQ(lipschitz_saturate(c, m, 0.1), c);
  std::vector<double> v(m.num_triangles());
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = static_cast<double>((t * 7) % 5);
  EXPECT_EQ(lipschitz_saturate(v, m, 1e12), v);
  EXPECT_THROW(lipschitz_saturate(v, m, 0.0), Error);
}

TEST(LipschitzSaturate, MatchesBruteForceOracle) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  const auto m = fixtures::grid(6, 5, 3.0, 2.0, [](double x, double y) { return 0.3 * x * y; });
  const auto d = barycenter_all_pairs(m);
  std::vector<double> v(m.num_triangles());
  for (auto& x : v) x = u(rng);
  const double L = 1.5;
  const auto r = lipschitz_saturate(v, m, L);
  for (std::size_t p = 0; p < v.size(); ++p) {
    double best = -kInfinity;
    for (std::size_t q = 0; q < v.size(); ++q) best = std::max(best, v[q] - L * d[p][q]);
    EXPECT_NEAR(r[p], best, 1e-12);
  }
}

TEST(Rescale, Examples) {
  PsiField f;
  f.resize(2);
  f.density = {2.0, 6.0};
  f.anisotropy = {1.5, 7.0};
  auto r = rescale(f, 3.0, 1.0);
  EXPECT_DOUBLE_EQ(r.density[0], 1.0);
  EXPECT_DOUBLE_EQ(r.density[1], 3.0);
  EXPECT_EQ(r.anisotropy, (std::vector<double>{1.0, 1.0}));
  f.density = {5.0, 5.0};
  r = rescale(f, 4.0, 2.0);
  EXPECT_EQ(r.density, (std::vector<double>{2.5, 2.5}));
  EXPECT_DOUBLE_EQ(r.anisotropy[1], 2.0);
  EXPECT_THROW(rescale(f, 0.5, 1.0), Error);
  EXPECT_THROW(rescale(f, 1.0, 0.99), Error);
}

TEST(Rescale, Monotone) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  PsiField f;
  f.resize(50);
  for (auto& d : f.density) d = u(rng);
  const auto r = rescale(f, 4.0, 2.0);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 50; ++j)
      if (f.density[i] <= f.density[j]) EXPECT_LE(r.density[i], r.density[j]);
}

TEST(Symmetrize, ProducesMirrorSymmetricField) {
  const auto m = symmetric_grid();
  const SymmetryPlane pl(Vec3(1, 0, 0), Vec3(1, 0, 0));
  const std::vector<SymmetryPlane> planes{pl};
  const auto f = random_field(m, 9);
  SymmetrizeReport rep;
  const auto s = symmetrize(f, m, planes, 1e-6, &rep);
  EXPECT_EQ(rep.matched_fraction, 1.0);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const int mt = mirror_triangle(m, static_cast<int>(t), pl);
    ASSERT_GE(mt, 0);
    const auto ms = static_cast<std::size_t>(mt);
    EXPECT_NEAR(s.density[t], s.density[ms], 1e-12);
    EXPECT_NEAR(s.density[t], 0.5 * (f.density[t] + f.density[ms]), 1e-12);
    EXPECT_NEAR(s.anisotropy[t], s.anisotropy[ms], 1e-12);
    EXPECT_LT(line_angle_between(pl.reflect_vector(s.direction[t]), s.direction[ms]), 1e-9);
  }
  const auto s2 = symmetrize(s, m, planes, 1e-6);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    EXPECT_NEAR(s2.density[t], s.density[t], 1e-9);
    EXPECT_NEAR(s2.anisotropy[t], s.anisotropy[t], 1e-9);
    EXPECT_LT(line_angle_between(s2.direction[t], s.direction[t]), 1e-9);
  }
}

TEST(Symmetrize, MatesAveraged) {
  const auto m = fixtures::grid(2, 1, 2.0, 1.0);
  const SymmetryPlane pl(Vec3(1, 0, 0), Vec3(1, 0, 0));
  auto f = uniform_field(m, Vec3::UnitY());
  const int mate = mirror_triangle(m, 0, pl);
  ASSERT_GE(mate, 0);
  f.density.assign(f.size(), 1.0);
  f.density[static_cast<std::size_t>(mate)] = 3.0;
  f.density[0] = 1.0;
  // both mates carry the same global direction, 20 degrees off the plane
  // trace (the y axis); mirrored into a common frame they sit at +-20 deg
  const double a = 20.0 * kPi / 180.0;
  const Vec3 dir(std::sin(a), std::cos(a), 0.0);
  f.direction[0] = dir;
  f.direction[static_cast<std::size_t>(mate)] = dir;
  const std::vector<SymmetryPlane> planes{pl};
  const auto s = symmetrize(f, m, planes, 1e-6);
  EXPECT_NEAR(s.density[0], 2.0, 1e-12);
  EXPECT_NEAR(s.density[static_cast<std::size_t>(mate)], 2.0, 1e-12);
  EXPECT_LT(line_angle_between(s.direction[0], Vec3::UnitY()), 1e-9);
  EXPECT_LT(line_angle_between(s.direction[static_cast<std::size_t>(mate)], Vec3::UnitY()), 1e-9);
}

TEST(Symmetrize, TwoPlanesAndAsymmetricError) {
  const auto m = fixtures::grid(8, 8, 2.0, 2.0);
  const std::vector<SymmetryPlane> planes{SymmetryPlane(Vec3(1, 0, 0), Vec3(1, 0, 0)),
                                          SymmetryPlane(Vec3(0, 1, 0), Vec3(0, 1, 0))};
  const auto s = symmetrize(random_field(m, 4), m, planes, 1e-6);
  const SymmetryPlane px = planes[0], py = planes[1];
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const int a = mirror_triangle(m, static_cast<int>(t), px);
    const int b = mirror_triangle(m, static_cast<int>(t), py);
    EXPECT_NEAR(s.density[t], s.density[static_cast<std::size_t>(a)], 1e-12);
    EXPECT_NEAR(s.density[t], s.density[static_cast<std::size_t>(b)], 1e-12);
  }
  const std::vector<SymmetryPlane> off{SymmetryPlane(Vec3(0.3, 0, 0), Vec3(1, 0, 0))};
  try {
    symmetrize(random_field(m, 4), m, off, 1e-3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("worst triangle"), std::string::npos);
  }
}
