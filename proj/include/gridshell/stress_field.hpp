#pragma once

// Conditioning of the decomposed stress field: line-field smoothing,
// Lipschitz saturation of the scalar signals, rescaling to user intervals and
// mirror symmetrization.

#include "gridshell/psi_field.hpp"
#include "gridshell/spatial.hpp"

#include <complex>
#include <queue>

namespace gridshell {

namespace detail {

// Angle of a tangent vector in the triangle's storage basis.
inline double tangent_angle(const TriMesh& mesh, int t, const Vec3& v) {
  const auto [e1, e2] = mesh.tangent_basis(t);
  return std::atan2(v.dot(e2), v.dot(e1));
}

inline Vec3 from_angle(const TriMesh& mesh, int t, double theta) {
  const auto [e1, e2] = mesh.tangent_basis(t);
  return std::cos(theta) * e1 + std::sin(theta) * e2;
}

inline void check_field(const PsiField& field, const TriMesh& mesh) {
  if (field.size() != mesh.num_triangles() || field.direction.size() != field.size() ||
      field.anisotropy.size() != field.size())
    fail("stress field has ", field.size(), " samples for ", mesh.num_triangles(), " triangles");
}

}  // namespace detail

struct SmoothingReport {
  int sweeps = 0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
};

// Energy minimized by smooth_line_field:
//   sum_edges w (1 - cos 2(dtheta)) + sum_tris (a_t - 1)(1 - cos 2(theta_t - theta0_t))
// where dtheta compares neighboring angles measured against their shared edge.
inline double line_field_energy(const PsiField& field, const PsiField& reference, const TriMesh& mesh,
                                double smoothness_weight) {
  double e = 0.0;
  for (std::size_t ei = 0; ei < mesh.num_edges(); ++ei) {
    const auto& edge = mesh.edge(static_cast<int>(ei));
    if (edge.is_boundary()) continue;
    const Vec3 dir = mesh.vertex(edge.v1) - mesh.vertex(edge.v0);
    const int t = edge.tris[0], s = edge.tris[1];
    const double rt = detail::tangent_angle(mesh, t, field.direction[static_cast<std::size_t>(t)]) -
                      detail::tangent_angle(mesh, t, dir);
    const double rs = detail::tangent_angle(mesh, s, field.direction[static_cast<std::size_t>(s)]) -
                      detail::tangent_angle(mesh, s, dir);
    e += smoothness_weight * (1.0 - std::cos(2.0 * (rt - rs)));
  }
  for (std::size_t t = 0; t < field.size(); ++t) {
    const double th = detail::tangent_angle(mesh, static_cast<int>(t), field.direction[t]);
    const double th0 = detail::tangent_angle(mesh, static_cast<int>(t), reference.direction[t]);
    e += (reference.anisotropy[t] - 1.0) * (1.0 - std::cos(2.0 * (th - th0)));
  }
  return e;
}

// Trades smoothness of the direction field against fidelity to the input,
// fidelity weighted by (a - 1). Exact per-triangle minimization (Gauss-Seidel
// in index order) until the relative energy change drops below 1e-8.
inline PsiField smooth_line_field(const PsiField& field, const TriMesh& mesh, double smoothness_weight,
                                  SmoothingReport* report = nullptr, int max_sweeps = 20000) {
  detail::check_field(field, mesh);
  if (smoothness_weight < 0.0) fail("smoothness weight must be non-negative");
  const std::size_t nt = field.size();
  std::vector<double> theta(nt), theta0(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const int ti = static_cast<int>(t);
    theta0[t] = detail::tangent_angle(mesh, ti, field.direction[t]);
    theta[t] = theta0[t];
  }
  // per triangle: (neighbor, offset) with neighbor angle + offset expressed in this frame
  std::vector<std::vector<std::pair<int, double>>> links(nt);
  for (std::size_t ei = 0; ei < mesh.num_edges(); ++ei) {
    const auto& edge = mesh.edge(static_cast<int>(ei));
    if (edge.is_boundary()) continue;
    const Vec3 dir = mesh.vertex(edge.v1) - mesh.vertex(edge.v0);
    const int t = edge.tris[0], s = edge.tris[1];
    const double at = detail::tangent_angle(mesh, t, dir), as = detail::tangent_angle(mesh, s, dir);
    links[static_cast<std::size_t>(t)].emplace_back(s, at - as);
    links[static_cast<std::size_t>(s)].emplace_back(t, as - at);
  }
  auto energy = [&] {
    double e = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
      for (const auto& [s, off] : links[t])
        if (static_cast<std::size_t>(s) > t)
          e += smoothness_weight * (1.0 - std::cos(2.0 * (theta[t] - theta[static_cast<std::size_t>(s)] - off)));
      e += (field.anisotropy[t] - 1.0) * (1.0 - std::cos(2.0 * (theta[t] - theta0[t])));
    }
    return e;
  };

  double e_prev = energy();
  SmoothingReport rep;
  rep.initial_energy = e_prev;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (std::size_t t = 0; t < nt; ++t) {
      // maximize sum c_i cos(2 theta - psi_i): 2 theta = arg(sum c_i e^{i psi_i})
      std::complex<double> acc(0.0, 0.0);
      for (const auto& [s, off] : links[t]) acc += smoothness_weight * std::polar(1.0, 2.0 * (theta[static_cast<std::size_t>(s)] + off));
      acc += (field.anisotropy[t] - 1.0) * std::polar(1.0, 2.0 * theta0[t]);
      if (std::abs(acc) > 1e-300) theta[t] = 0.5 * std::arg(acc);
    }
    const double e = energy();
    rep.sweeps = sweep + 1;
    const bool done = std::abs(e_prev - e) <= 1e-8 * std::max(e_prev, 1e-300) || e <= 1e-300;
    e_prev = e;
    if (done) break;
  }
  rep.final_energy = e_prev;
  if (report) *report = rep;

  PsiField out = field;
  for (std::size_t t = 0; t < nt; ++t) out.direction[t] = detail::from_angle(mesh, static_cast<int>(t), theta[t]);
  return out;
}

// Triangle adjacency graph weighted by barycenter distance.
inline std::vector<std::vector<std::pair<int, double>>> barycenter_graph(const TriMesh& mesh) {
  std::vector<std::vector<std::pair<int, double>>> g(mesh.num_triangles());
  for (const auto& e : mesh.edges()) {
    if (e.is_boundary()) continue;
    const double w = (mesh.barycenter(e.tris[0]) - mesh.barycenter(e.tris[1])).norm();
    g[static_cast<std::size_t>(e.tris[0])].emplace_back(e.tris[1], w);
    g[static_cast<std::size_t>(e.tris[1])].emplace_back(e.tris[0], w);
  }
  return g;
}

// Upper saturation: result(p) = max_q (values(q) - L dist(p, q)) over the
// barycenter graph. Computed as a multi-source Dijkstra on -values.
inline std::vector<double> lipschitz_saturate(std::span<const double> values, const TriMesh& mesh, double L) {
  if (values.size() != mesh.num_triangles()) fail("lipschitz_saturate: size mismatch");
  if (!(L > 0.0)) fail("lipschitz_saturate: L must be positive");
  const auto graph = barycenter_graph(mesh);
  std::vector<double> key(values.size());
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (!std::isfinite(values[t])) fail("lipschitz_saturate: non-finite value at triangle ", t);
    key[t] = -values[t];
    heap.emplace(key[t], static_cast<int>(t));
  }
  while (!heap.empty()) {
    const auto [k, t] = heap.top();
    heap.pop();
    if (k != key[static_cast<std::size_t>(t)]) continue;
    for (const auto& [s, w] : graph[static_cast<std::size_t>(t)]) {
      const double nk = k + L * w;
      if (nk < key[static_cast<std::size_t>(s)]) {
        key[static_cast<std::size_t>(s)] = nk;
        heap.emplace(nk, s);
      }
    }
  }
  std::vector<double> out(values.size());
  for (std::size_t t = 0; t < values.size(); ++t) out[t] = -key[t];
  return out;
}

// Affine map of density to [1, D] and anisotropy to [1, A]; a constant
// signal maps to the middle of its interval.
inline PsiField rescale(const PsiField& field, double D, double A) {
  if (!(D >= 1.0) || !(A >= 1.0)) fail("rescale: D and A must be >= 1 (got D=", D, ", A=", A, ")");
  PsiField out = field;
  auto remap = [](std::vector<double>& x, double top) {
    if (x.empty()) return;
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const double a = *lo, b = *hi;
    for (auto& v : x) v = (b > a) ? 1.0 + (top - 1.0) * (v - a) / (b - a) : 0.5 * (1.0 + top);
  };
  remap(out.density, D);
  remap(out.anisotropy, A);
  return out;
}

// ---------------------------------------------------------------------------
// Mirror symmetrization

struct SymmetrizeReport {
  double matched_fraction = 1.0;  // share of triangles whose mirror images all hit the surface
  int worst_triangle = -1;
  double worst_distance = 0.0;
};

// Averages (direction as a doubled angle, density, anisotropy) over the orbit
// of each triangle barycenter under the plane reflections. Throws if fewer
// than 95% of the barycenters have all their mirror images within
// `tolerance` of the surface.
inline PsiField symmetrize(const PsiField& field, const TriMesh& mesh, std::span<const SymmetryPlane> planes,
                           double tolerance, SymmetrizeReport* report = nullptr) {
  detail::check_field(field, mesh);
  if (planes.empty()) return field;
  const TriangleLocator locator(mesh);

  SymmetrizeReport rep;
  std::size_t matched = 0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3 b = mesh.barycenter(static_cast<int>(t));
    double worst = 0.0;
    for (const auto& pl : planes) worst = std::max(worst, locator.closest(pl.reflect_point(b), tolerance).distance);
    if (worst <= tolerance) ++matched;
    if (worst > rep.worst_distance) {
      rep.worst_distance = worst;
      rep.worst_triangle = static_cast<int>(t);
    }
  }
  rep.matched_fraction = mesh.num_triangles() ? static_cast<double>(matched) / static_cast<double>(mesh.num_triangles()) : 1.0;
  if (report) *report = rep;
  if (rep.matched_fraction < 0.95)
    fail("symmetrize: mesh is not mirror-symmetric within ", tolerance, " m (", 100.0 * rep.matched_fraction,
         "% matched; worst triangle ", rep.worst_triangle, " at ", rep.worst_distance, " m)");

  const auto group = detail::reflection_group(planes, tolerance);
  PsiField out = field;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const int ti = static_cast<int>(t);
    const Vec3 b = mesh.barycenter(ti);
    const auto [e1, e2] = mesh.tangent_basis(ti);
    std::complex<double> dir(0.0, 0.0);
    double d = 0.0, a = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < group.size(); ++k) {
      const auto& g = group[k];
      int s = ti;
      if (k > 0) {  // group[0] is the identity
        const auto hit = locator.closest(g.apply(b), tolerance);
        if (hit.distance > tolerance) continue;
        s = hit.triangle;
      }
      const auto si = static_cast<std::size_t>(s);
      // field at the image point, carried back to t
      const Vec3 u = g.linear.transpose() * field.direction[si];
      const double th = std::atan2(u.dot(e2), u.dot(e1));
      dir += std::polar(1.0, 2.0 * th);
      d += field.density[si];
      a += field.anisotropy[si];
      ++count;
    }
    out.density[t] = d / count;
    out.anisotropy[t] = a / count;
    if (std::abs(dir) > 1e-12 * count) {
      const double th = 0.5 * std::arg(dir);
      out.direction[t] = std::cos(th) * e1 + std::sin(th) * e2;
    }
  }
  return out;
}

}  // namespace gridshell
