#pragma once

#include "gridshell/mesh.hpp"

#include <cmath>

namespace gridshell {

// Closest point to p on triangle (a, b, c), returned with its barycentric
// coordinates (Ericson, Real-Time Collision Detection, 5.1.5).
struct TrianglePoint {
  Vec3 point;
  Vec3 bary;
};

inline TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return {a, Vec3(1, 0, 0)};
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return {b, Vec3(0, 1, 0)};
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return {a + v * ab, Vec3(1 - v, v, 0)};
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return {c, Vec3(0, 0, 1)};
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return {a + w * ac, Vec3(1 - w, 0, w)};
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + w * (c - b), Vec3(0, 1 - w, w)};
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return {a + ab * v + ac * w, Vec3(1 - v - w, v, w)};
}

// Uniform-grid bucketing of triangle bounding boxes for closest-point
// queries.
class TriangleLocator {
 public:
  struct Hit {
    int triangle = -1;
    double distance = kInfinity;
    Vec3 point = Vec3::Zero();
    Vec3 bary = Vec3::Zero();
  };

  explicit TriangleLocator(const TriMesh& mesh) : mesh_(&mesh) {
    lo_ = Vec3::Constant(kInfinity);
    hi_ = Vec3::Constant(-kInfinity);
    for (const auto& p : mesh.vertices()) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    const std::size_t nt = std::max<std::size_t>(1, mesh.num_triangles());
    const Vec3 ext = (hi_ - lo_).cwiseMax(1e-12);
    const double cell = std::cbrt(ext.prod() / static_cast<double>(nt)) * 2.0;
    const double c = std::max({cell, ext.maxCoeff() / 64.0, 1e-12});
    cell_ = c;
    for (int i = 0; i < 3; ++i) dims_[static_cast<std::size_t>(i)] = std::max(1, static_cast<int>(std::ceil(ext[i] / c)));
    buckets_.resize(static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(dims_[2]));
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const auto& f = mesh.triangle(static_cast<int>(t));
      Vec3 a = mesh.vertex(f[0]).cwiseMin(mesh.vertex(f[1])).cwiseMin(mesh.vertex(f[2]));
      Vec3 b = mesh.vertex(f[0]).cwiseMax(mesh.vertex(f[1])).cwiseMax(mesh.vertex(f[2]));
      const auto ia = cell_of(a), ib = cell_of(b);
      for (int x = ia[0]; x <= ib[0]; ++x)
        for (int y = ia[1]; y <= ib[1]; ++y)
          for (int z = ia[2]; z <= ib[2]; ++z) buckets_[index(x, y, z)].push_back(static_cast<int>(t));
    }
  }

  // Closest triangle to p; triangles farther than `radius` may be missed
  // when a closer candidate exists. Ties go to the lower triangle index.
  Hit closest(const Vec3& p, double radius) const {
    Hit best;
    const auto ia = cell_of(p - Vec3::Constant(radius));
    const auto ib = cell_of(p + Vec3::Constant(radius));
    for (int x = ia[0]; x <= ib[0]; ++x)
      for (int y = ia[1]; y <= ib[1]; ++y)
        for (int z = ia[2]; z <= ib[2]; ++z)
          for (int t : buckets_[index(x, y, z)]) consider(p, t, best);
    if (best.triangle < 0 || best.distance > radius) {
      for (std::size_t t = 0; t < mesh_->num_triangles(); ++t) consider(p, static_cast<int>(t), best);
    }
    return best;
  }

 private:
  void consider(const Vec3& p, int t, Hit& best) const {
    const auto& f = mesh_->triangle(t);
    const auto cp = closest_point_on_triangle(p, mesh_->vertex(f[0]), mesh_->vertex(f[1]), mesh_->vertex(f[2]));
    const double d = (cp.point - p).norm();
    if (d < best.distance || (d == best.distance && t < best.triangle)) best = {t, d, cp.point, cp.bary};
  }

  std::array<int, 3> cell_of(const Vec3& p) const {
    std::array<int, 3> c{};
    for (int i = 0; i < 3; ++i) {
      const int k = static_cast<int>(std::floor((p[i] - lo_[i]) / cell_));
      c[static_cast<std::size_t>(i)] = std::clamp(k, 0, dims_[static_cast<std::size_t>(i)] - 1);
    }
    return c;
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(dims_[1]) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(dims_[0]) +
           static_cast<std::size_t>(x);
  }

  const TriMesh* mesh_;
  Vec3 lo_, hi_;
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::vector<int>> buckets_;
};

}  // namespace gridshell
