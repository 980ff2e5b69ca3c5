#include "gridshell/fixtures.hpp"
#include "gridshell/mesh.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace gridshell;

namespace {

std::string tmp_path(const std::string& name) { return std::string(GRIDSHELL_TEST_TMP) + "/" + name; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TriMesh single_triangle() {
  return TriMesh::build({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
}

// Three collinear vertices 0-1-2 spaced 1 m along x, with two tall apexes so
// that detours through them are longer than the straight path.
TriMesh collinear_path() {
  return TriMesh::build({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0.5, 5, 0}, {1.5, 5, 0}},
                        {{0, 1, 3}, {1, 4, 3}, {1, 2, 4}});
}

// Floyd-Warshall over the edge graph.
std::vector<std::vector<double>> all_pairs(const TriMesh& m) {
  const std::size_t n = m.num_vertices();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, kInfinity));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
  for (const auto& e : m.edges()) {
    const double l = (m.vertex(e.v0) - m.vertex(e.v1)).norm();
    d[static_cast<std::size_t>(e.v0)][static_cast<std::size_t>(e.v1)] = l;
    d[static_cast<std::size_t>(e.v1)][static_cast<std::size_t>(e.v0)] = l;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

TriMesh jittered_grid(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  auto base = fixtures::grid(n, n, 1.0, 1.0);
  std::vector<Vec3> p = base.vertices();
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (!base.is_boundary(static_cast<int>(v))) p[v] += Vec3(u(rng), u(rng), 3.0 * u(rng)) / n;
  }
  return TriMesh::build(p, base.triangles());
}

}  // namespace

TEST(LoadObj, SingleTriangleAllBoundary) {
  write_text(tmp_path("tri.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  const auto m = load_obj(tmp_path("tri.obj"));
  EXPECT_EQ(m.num_triangles(), 1u);
  EXPECT_EQ(m.num_vertices(), 3u);
  for (int v = 0; v < 3; ++v) EXPECT_TRUE(m.is_boundary(v));
}

TEST(LoadObj, RejectsQuad) {
  write_text(tmp_path("quad.obj"), "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  try {
    load_obj(tmp_path("quad.obj"));
    FAIL() << "expected error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("non-triangular face"), std::string::npos);
  }
}

TEST(LoadObj, IcosahedronCounts) {
  save_obj(fixtures::icosahedron(), tmp_path("ico.obj"));
  const auto m = load_obj(tmp_path("ico.obj"));
  EXPECT_EQ(m.num_vertices(), 12u);
  EXPECT_EQ(m.num_triangles(), 20u);
  EXPECT_EQ(m.num_edges(), 30u);  // V - E + F = 2
  EXPECT_EQ(std::count(m.boundary_flags().begin(), m.boundary_flags().end(), 1), 0);
}

TEST(LoadObj, ErrorsNameTheElement) {
  write_text(tmp_path("nm.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nf 1 2 3\nf 2 1 4\nf 1 2 5\n");
  EXPECT_THROW(load_obj(tmp_path("nm.obj")), Error);
  write_text(tmp_path("deg.obj"), "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n");
  try {
    load_obj(tmp_path("deg.obj"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate triangle 0"), std::string::npos);
  }
  write_text(tmp_path("bad.obj"), "v 0 0 0\nv 1 zero 0\n");
  EXPECT_THROW(load_obj(tmp_path("bad.obj")), Error);
  EXPECT_THROW(load_obj(tmp_path("missing-file.obj")), Error);
}

TEST(SaveObj, RoundTripSingleTriangle) {
  const auto m = single_triangle();
  save_obj(m, tmp_path("rt.obj"));
  const auto r = load_obj(tmp_path("rt.obj"));
  EXPECT_EQ(r.triangles(), m.triangles());
  for (int v = 0; v < 3; ++v) EXPECT_LT((r.vertex(v) - m.vertex(v)).norm(), 1e-9);
}

TEST(SaveObj, PolygonAndEmpty) {
  PolyMesh hex;
  for (int i = 0; i < 6; ++i) hex.vertices.emplace_back(std::cos(i * kPi / 3), std::sin(i * kPi / 3), 0.0);
  hex.faces = {{0, 1, 2, 3, 4, 5}};
  save_obj(hex, tmp_path("hex.obj"));
  EXPECT_NE(read_text(tmp_path("hex.obj")).find("f 1 2 3 4 5 6\n"), std::string::npos);
  EXPECT_EQ(load_poly_obj(tmp_path("hex.obj")).faces[0].size(), 6u);

  PolyMesh empty;
  empty.vertices = {{1, 2, 3}};
  save_obj(empty, tmp_path("empty.obj"));
  EXPECT_EQ(read_text(tmp_path("empty.obj")), "v 1 2 3\n");
}

TEST(SaveObj, SecondRoundTripIsByteIdentical) {
  const auto m = jittered_grid(6, 3);
  save_obj(m, tmp_path("a.obj"));
  save_obj(load_obj(tmp_path("a.obj")), tmp_path("b.obj"));
  save_obj(load_obj(tmp_path("b.obj")), tmp_path("c.obj"));
  EXPECT_EQ(read_text(tmp_path("b.obj")), read_text(tmp_path("c.obj")));
}

TEST(ClassifyBoundary, SquareHasFourCorners) {
  const auto m = classify_boundary(fixtures::grid(1, 1, 1.0, 1.0), 30.0 * kPi / 180.0);
  EXPECT_EQ(std::count(m.corner_flags().begin(), m.corner_flags().end(), 1), 4);
}

TEST(ClassifyBoundary, RegularPolygonDiskHasNoCorners) {
  const auto m = classify_boundary(fixtures::disk(3, 64, 1.0), 30.0 * kPi / 180.0);
  EXPECT_EQ(std::count(m.boundary_flags().begin(), m.boundary_flags().end(), 1), 64);
  EXPECT_EQ(std::count(m.corner_flags().begin(), m.corner_flags().end(), 1), 0);
  // turning angle 2*pi/64 = 5.625 deg: a 5 deg threshold flags all of them
  const auto all = classify_boundary(fixtures::disk(3, 64, 1.0), 5.0 * kPi / 180.0);
  EXPECT_EQ(std::count(all.corner_flags().begin(), all.corner_flags().end(), 1), 64);
}

TEST(ClassifyBoundary, ClosedMesh) {
  const auto m = classify_boundary(fixtures::icosahedron());
  EXPECT_FALSE(m.has_boundary());
  EXPECT_EQ(std::count(m.corner_flags().begin(), m.corner_flags().end(), 1), 0);
}

TEST(ClassifyBoundary, BoundaryLoopKeepsSurfaceOnTheLeft) {
  const auto m = fixtures::grid(2, 2, 1.0, 1.0);
  ASSERT_EQ(m.boundary_loops().size(), 1u);
  const auto& loop = m.boundary_loops()[0];
  EXPECT_EQ(loop.size(), 8u);
  double signed_area = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const Vec3& a = m.vertex(loop[i]);
    const Vec3& b = m.vertex(loop[(i + 1) % loop.size()]);
    signed_area += a.x() * b.y() - b.x() * a.y();
  }
  EXPECT_GT(signed_area, 0.0);  // counter-clockwise seen from +z
}

TEST(Geodesic, CollinearPath) {
  const auto m = collinear_path();
  const std::vector<int> src{0};
  const auto g = geodesic_distances(m, src);
  EXPECT_DOUBLE_EQ(g.distance[0], 0.0);
  EXPECT_DOUBLE_EQ(g.distance[1], 1.0);
  EXPECT_DOUBLE_EQ(g.distance[2], 2.0);
}

TEST(Geodesic, TieBreakTowardsLowerSource) {
  const auto m = collinear_path();
  const std::vector<int> src{0, 2};
  const auto g = geodesic_distances(m, src);
  EXPECT_EQ(g.nearest_vertex(0), 0);
  EXPECT_EQ(g.nearest_vertex(1), 0);
  EXPECT_EQ(g.nearest_vertex(2), 2);
  EXPECT_DOUBLE_EQ(g.distance[1], 1.0);
  EXPECT_DOUBLE_EQ(g.distance[2], 0.0);
  // ordering of the source list decides ties
  const std::vector<int> rev{2, 0};
  const auto h = geodesic_distances(m, rev);
  EXPECT_EQ(h.nearest_vertex(1), 2);
}

TEST(Geodesic, SquareDiagonal) {
  const auto m = TriMesh::build({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{0, 1, 2}, {0, 2, 3}});
  const std::vector<int> src{0};
  EXPECT_DOUBLE_EQ(geodesic_distances(m, src).distance[2], std::sqrt(2.0));
}

TEST(Geodesic, UnreachableComponentIsInfinite) {
  const auto m = TriMesh::build({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 0, 0}, {6, 0, 0}, {5, 1, 0}},
                                {{0, 1, 2}, {3, 4, 5}});
  const std::vector<int> src{0};
  const auto g = geodesic_distances(m, src);
  EXPECT_FALSE(g.all_reached());
  EXPECT_EQ(g.distance[4], kInfinity);
  EXPECT_EQ(g.nearest[4], -1);
  EXPECT_THROW(geodesic_distances(m, std::vector<int>{}), Error);
}

TEST(Geodesic, MatchesFloydWarshallAndEdgeLipschitz) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const auto m = jittered_grid(7, seed);
    const auto oracle = all_pairs(m);
    const std::vector<int> src{static_cast<int>(seed), 30, 50};
    const auto g = geodesic_distances(m, src);
    for (std::size_t v = 0; v < m.num_vertices(); ++v) {
      double best = kInfinity;
      for (int s : src) best = std::min(best, oracle[static_cast<std::size_t>(s)][v]);
      EXPECT_NEAR(g.distance[v], best, 1e-12);
      EXPECT_NEAR(oracle[static_cast<std::size_t>(g.nearest_vertex(static_cast<int>(v)))][v], best, 1e-12);
    }
    for (const auto& e : m.edges()) {
      const double l = (m.vertex(e.v0) - m.vertex(e.v1)).norm();
      EXPECT_LE(std::abs(g.distance[static_cast<std::size_t>(e.v0)] - g.distance[static_cast<std::size_t>(e.v1)]),
                l + 1e-12);
    }
    const auto again = geodesic_distances(m, src);
    EXPECT_EQ(again.nearest, g.nearest);
  }
}

TEST(SplitEdges, OneEdge) {
  const auto m = single_triangle();
  const std::vector<std::pair<int, int>> e{{0, 1}};
  const auto r = split_long_edges(m, e);
  EXPECT_EQ(r.mesh.num_triangles(), 2u);
  EXPECT_EQ(r.mesh.num_vertices(), 4u);
  ASSERT_EQ(r.new_vertices.size(), 1u);
  EXPECT_EQ(r.new_vertices[0].parent0, 0);
  EXPECT_EQ(r.new_vertices[0].parent1, 1);
  EXPECT_EQ(r.new_vertices[0].parameter, 0.5);
  EXPECT_TRUE(r.mesh.vertex(3).isApprox(Vec3(0.5, 0, 0)));
  EXPECT_TRUE(r.mesh.is_boundary(3));
}

TEST(SplitEdges, AllThreeEdgesSequentially) {
  const auto m = single_triangle();
  const std::vector<std::pair<int, int>> e{{0, 1}, {1, 2}, {2, 0}};
  const auto r = split_long_edges(m, e);
  EXPECT_EQ(r.mesh.num_triangles(), 4u);
  EXPECT_EQ(r.mesh.num_vertices(), 6u);
  EXPECT_NEAR(r.mesh.total_area(), m.total_area(), 1e-15);
}

TEST(SplitEdges, NoMarkedEdgesIsIdentity) {
  const auto m = fixtures::grid(3, 3, 1.0, 1.0);
  const auto r = split_long_edges(m, std::span<const std::pair<int, int>>{});
  EXPECT_EQ(r.mesh.vertices(), m.vertices());
  EXPECT_EQ(r.mesh.triangles(), m.triangles());
  EXPECT_TRUE(r.new_vertices.empty());
  EXPECT_THROW(split_long_edges(m, std::vector<std::pair<int, int>>{{0, 15}}), Error);
}

TEST(SplitEdges, AreaConservedUnderRandomSplitSequences) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    TriMesh m = jittered_grid(4, static_cast<unsigned>(trial + 10));
    const double area0 = m.total_area();
    std::vector<int> parent_of(m.num_triangles());
    for (int round = 0; round < 3; ++round) {
      std::vector<std::pair<int, int>> marked;
      for (const auto& e : m.edges())
        if (rng() % 3 == 0) marked.emplace_back(e.v0, e.v1);
      const auto r = split_long_edges(m, marked);
      EXPECT_EQ(r.mesh.num_vertices(), m.num_vertices() + marked.size());
      // children cover their parent's area
      std::vector<double> child_area(m.num_triangles(), 0.0);
      for (std::size_t t = 0; t < r.mesh.num_triangles(); ++t)
        child_area[static_cast<std::size_t>(r.triangle_parent[t])] += r.mesh.triangle_area(static_cast<int>(t));
      for (std::size_t t = 0; t < m.num_triangles(); ++t)
        EXPECT_NEAR(child_area[t], m.triangle_area(static_cast<int>(t)), 1e-12);
      m = r.mesh;
    }
    EXPECT_NEAR(m.total_area(), area0, 1e-9 * area0);
  }
}

TEST(SaveObj, CoordinatesRoundTripExactly) {
  const auto m = jittered_grid(6, 3);
  save_obj(m, tmp_path("exact.obj"));
  const auto r = load_obj(tmp_path("exact.obj"));
  ASSERT_EQ(r.num_vertices(), m.num_vertices());
  for (std::size_t v = 0; v < m.num_vertices(); ++v) EXPECT_EQ(r.vertex(static_cast<int>(v)), m.vertex(static_cast<int>(v)));
  EXPECT_EQ(read_text(tmp_path("exact.obj")), [&] {
    save_obj(r, tmp_path("exact2.obj"));
    return read_text(tmp_path("exact2.obj"));
  }());
}
