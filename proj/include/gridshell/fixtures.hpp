#pragma once

// Procedural meshes used by the tests, the acceptance suite and the
// `fixture` CLI subcommand.

#include "gridshell/mesh.hpp"

#include <functional>

namespace gridshell::fixtures {

using HeightFn = std::function<double(double, double)>;

// Rectangular grid over [0, sx] x [0, sy] with nx x ny cells. Diagonals
// alternate per cell (criss-cross pattern) unless `uniform_diagonals`.
inline TriMesh grid(int nx, int ny, double sx, double sy, const HeightFn& height = {},
                    bool uniform_diagonals = false) {
  std::vector<Vec3> verts;
  std::vector<Tri> tris;
  auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const double x = sx * i / nx, y = sy * j / ny;
      verts.emplace_back(x, y, height ? height(x, y) : 0.0);
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if (uniform_diagonals || (i + j) % 2 == 0) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
  }
  return TriMesh::build(std::move(verts), std::move(tris));
}

// Disk of radius r: a center vertex plus `rings` concentric rings of
// `segments` vertices each; the boundary is a regular `segments`-gon.
inline TriMesh disk(int rings, int segments, double radius, const HeightFn& height = {}) {
  std::vector<Vec3> verts;
  std::vector<Tri> tris;
  verts.emplace_back(0.0, 0.0, height ? height(0.0, 0.0) : 0.0);
  for (int r = 1; r <= rings; ++r) {
    const double rho = radius * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * kPi * s / segments;
      const double x = rho * std::cos(phi), y = rho * std::sin(phi);
      verts.emplace_back(x, y, height ? height(x, y) : 0.0);
    }
  }
  auto id = [&](int r, int s) { return r == 0 ? 0 : 1 + (r - 1) * segments + ((s % segments) + segments) % segments; };
  for (int s = 0; s < segments; ++s) tris.push_back({0, id(1, s), id(1, s + 1)});
  for (int r = 1; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      tris.push_back({id(r, s), id(r + 1, s), id(r + 1, s + 1)});
      tris.push_back({id(r, s), id(r + 1, s + 1), id(r, s + 1)});
    }
  }
  return TriMesh::build(std::move(verts), std::move(tris));
}

inline TriMesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Tri> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                        {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return TriMesh::build(std::move(v), std::move(f));
}

// Square plan [0, size]^2 lifted to a paraboloid dome of the given rise.
inline TriMesh paraboloid(int n, double size, double rise) {
  const double h = size / 2.0;
  return grid(n, n, size, size, [=](double x, double y) {
    const double u = (x - h) / h, w = (y - h) / h;
    return rise * (1.0 - 0.5 * (u * u + w * w));
  });
}

}  // namespace gridshell::fixtures
