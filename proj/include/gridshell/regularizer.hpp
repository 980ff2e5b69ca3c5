#pragma once

// Polygon regularization toward stretched regular polygons, face quality
// metrics, and mirror welding of a tessellation computed on one sector.

#include "gridshell/mesh.hpp"

#include <complex>
#include <map>
#include <optional>
#include <string>

namespace gridshell {

struct RegularizerConfig {
  double damping = 0.5;       // lambda_d in (0, 1]
  int max_iterations = 100;
  double tolerance = 1e-6;    // max vertex move, meters
  bool fix_boundary = true;
};

struct RegularizeReport {
  int iterations = 0;
  double max_move = 0.0;
  bool converged = false;
  std::vector<double> mean_regularity;  // before each step, plus the final state
  std::vector<double> target_distance;  // sum of squared vertex-target distances, same sampling
  std::vector<std::string> warnings;
};

namespace detail {

// Best-fit plane of a point set: centroid, in-plane axes (major first) and
// normal. Axes are oriented so the polygon runs counter-clockwise about the
// normal.
struct PolygonFrame {
  Vec3 center = Vec3::Zero();
  Vec3 u1, u2, normal;
  double var1 = 0.0, var2 = 0.0;  // in-plane variances along u1, u2
};

inline Vec3 vector_area(std::span<const Vec3> pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Vec3 a = Vec3::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) a += (pts[i] - c).cross(pts[(i + 1) % pts.size()] - c);
  return 0.5 * a;
}

inline double perimeter(std::span<const Vec3> pts) {
  double p = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) p += (pts[(i + 1) % pts.size()] - pts[i]).norm();
  return p;
}

inline PolygonFrame polygon_frame(std::span<const Vec3> pts) {
  PolygonFrame fr;
  for (const auto& p : pts) fr.center += p;
  fr.center /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - fr.center) * (p - fr.center).transpose();
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);  // ascending
  fr.normal = eig.eigenvectors().col(0);
  fr.u1 = eig.eigenvectors().col(2);
  fr.var1 = eig.eigenvalues()(2);
  fr.var2 = eig.eigenvalues()(1);
  if (fr.normal.dot(vector_area(pts)) < 0.0) fr.normal = -fr.normal;
  fr.u2 = fr.normal.cross(fr.u1);
  return fr;
}

}  // namespace detail

// Target positions of a face: PCA plane, un-stretch to isotropic variance,
// regular n-gon of equal perimeter aligned by the best cyclic shift +
// rotation, then stretched back and lifted. nullopt for degenerate faces.
inline std::optional<std::vector<Vec3>> per_polygon_targets(std::span<const Vec3> face) {
  const std::size_t n = face.size();
  if (n < 3) fail("per_polygon_targets: face needs at least 3 vertices (got ", n, ")");
  const double per = detail::perimeter(face);
  if (!(per > 0.0) || detail::vector_area(face).norm() <= 1e-12 * per * per) return std::nullopt;
  const auto fr = detail::polygon_frame(face);
  if (!(fr.var2 > 1e-12 * fr.var1)) return std::nullopt;

  // Scale factors keep the area; the absolute scale is irrelevant anyway.
  const double s1 = std::sqrt(std::sqrt(fr.var2 / fr.var1)), s2 = 1.0 / s1;
  using C = std::complex<double>;
  std::vector<C> y(n);
  C ymean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = face[i] - fr.center;
    y[i] = C(s1 * d.dot(fr.u1), s2 * d.dot(fr.u2));
    ymean += y[i];
  }
  ymean /= static_cast<double>(n);
  double flat_per = 0.0;
  for (std::size_t i = 0; i < n; ++i) flat_per += std::abs(y[(i + 1) % n] - y[i]);

  const double radius = flat_per / static_cast<double>(n) / (2.0 * std::sin(kPi / static_cast<double>(n)));
  std::vector<C> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = std::polar(radius, 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n));

  // Procrustes for each cyclic correspondence i <-> z[(i + shift) % n].
  double ysq = 0.0;
  for (const auto& v : y) ysq += std::norm(v - ymean);
  const double zsq = static_cast<double>(n) * radius * radius;
  double best_err = kInfinity;
  std::size_t best_shift = 0;
  C best_rot = 1.0;
  for (std::size_t shift = 0; shift < n; ++shift) {
    C cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) cross += (y[i] - ymean) * std::conj(z[(i + shift) % n]);
    const double err = ysq + zsq - 2.0 * std::abs(cross);
    if (err < best_err - 1e-12 * (ysq + zsq)) {
      best_err = err;
      best_shift = shift;
      best_rot = std::abs(cross) > 0.0 ? cross / std::abs(cross) : C(1.0);
    }
  }

  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const C t = best_rot * z[(i + best_shift) % n] + ymean;
    out[i] = fr.center + (t.real() / s1) * fr.u1 + (t.imag() / s2) * fr.u2;
  }
  return out;
}

// Mean distance to the best-fit plane over half the perimeter.
inline double planarity(std::span<const Vec3> face) {
  if (face.size() < 3) fail("planarity: face needs at least 3 vertices");
  const double per = detail::perimeter(face);
  if (!(per > 0.0)) fail("planarity: zero perimeter");
  const auto fr = detail::polygon_frame(face);
  double sum = 0.0;
  for (const auto& p : face) sum += std::abs(fr.normal.dot(p - fr.center));
  return sum / static_cast<double>(face.size()) / (0.5 * per);
}

// Squared distance to the targets over the current face area.
inline double regularity(std::span<const Vec3> face) {
  const auto targets = per_polygon_targets(face);
  if (!targets) fail("regularity: degenerate face");
  double sum = 0.0;
  for (std::size_t i = 0; i < face.size(); ++i) sum += ((*targets)[i] - face[i]).squaredNorm();
  return sum / detail::vector_area(face).norm();
}

inline void fill_face_metrics(PolyMesh& mesh) {
  mesh.planarity.assign(mesh.faces.size(), 0.0);
  mesh.regularity.assign(mesh.faces.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto pts = face_points(mesh, f);
    mesh.planarity[f] = planarity(pts);
    if (per_polygon_targets(pts)) mesh.regularity[f] = regularity(pts);
  }
}

// Alternates per-face target fitting and per-vertex averaging (the
// least-squares position for the incident targets), damped by lambda_d.
inline PolyMesh regularize(const PolyMesh& input, const RegularizerConfig& cfg = {}, RegularizeReport* report = nullptr) {
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) fail("regularize: damping must lie in (0, 1]");
  if (cfg.max_iterations < 0) fail("regularize: negative iteration cap");
  poly_edges(input);  // validates
  PolyMesh mesh = input;
  RegularizeReport rep;
  const std::size_t nv = mesh.vertices.size();
  std::vector<char> fixed(nv, 0);
  if (cfg.fix_boundary) fixed = poly_boundary_vertices(mesh);

  std::vector<char> warned(mesh.faces.size(), 0);
  std::vector<Vec3> sum(nv);
  std::vector<int> count(nv);
  auto gather = [&](bool record) {
    std::fill(sum.begin(), sum.end(), Vec3::Zero());
    std::fill(count.begin(), count.end(), 0);
    double dist = 0.0, reg = 0.0;
    int counted = 0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      const auto pts = face_points(mesh, f);
      const auto targets = per_polygon_targets(pts);
      if (!targets) {
        if (!warned[f]) rep.warnings.push_back(detail::concat("face ", f, " is degenerate; skipped"));
        warned[f] = 1;
        continue;
      }
      double d = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto v = static_cast<std::size_t>(mesh.faces[f][i]);
        sum[v] += (*targets)[i];
        ++count[v];
        d += ((*targets)[i] - pts[i]).squaredNorm();
      }
      dist += d;
      reg += d / detail::vector_area(pts).norm();
      ++counted;
    }
    if (record) {
      rep.target_distance.push_back(dist);
      rep.mean_regularity.push_back(counted ? reg / counted : 0.0);
    }
  };

  for (int it = 0; it < cfg.max_iterations; ++it) {
    gather(true);
    double max_move = 0.0;
    for (std::size_t v = 0; v < nv; ++v) {
      if (fixed[v] || count[v] == 0) continue;
      const Vec3 step = cfg.damping * (sum[v] / count[v] - mesh.vertices[v]);
      mesh.vertices[v] += step;
      max_move = std::max(max_move, step.norm());
    }
    rep.iterations = it + 1;
    rep.max_move = max_move;
    if (max_move < cfg.tolerance) {
      rep.converged = true;
      break;
    }
  }
  gather(true);
  fill_face_metrics(mesh);
  if (report) *report = std::move(rep);
  return mesh;
}

// ---------------------------------------------------------------------------
// Mirror welding

namespace detail {

// Merges points closer than `tol` (hash grid with cell size `tol`).
class PointWelder {
 public:
  explicit PointWelder(double tol) : tol_(tol) {}

  int insert(const Vec3& p) {
    const auto key = cell(p);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = grid_.find({key[0] + dx, key[1] + dy, key[2] + dz});
          if (it == grid_.end()) continue;
          for (int id : it->second)
            if ((points_[static_cast<std::size_t>(id)] - p).norm() <= tol_) return id;
        }
    const int id = static_cast<int>(points_.size());
    points_.push_back(p);
    grid_[key].push_back(id);
    return id;
  }

  std::vector<Vec3>& points() { return points_; }

 private:
  std::array<long long, 3> cell(const Vec3& p) const {
    return {static_cast<long long>(std::floor(p.x() / tol_)), static_cast<long long>(std::floor(p.y() / tol_)),
            static_cast<long long>(std::floor(p.z() / tol_))};
  }

  double tol_;
  std::vector<Vec3> points_;
  std::map<std::array<long long, 3>, std::vector<int>> grid_;
};

}  // namespace detail

// Reflects a sector tessellation across the planes (full reflection group),
// snapping vertices within weld_tol onto the planes, merging mirrored
// vertices, and fusing each face cut by a plane with its mirror image.
inline PolyMesh symmetrize_tessellation(const PolyMesh& half, std::span<const SymmetryPlane> planes, double weld_tol) {
  if (!(weld_tol >= 0.0)) fail("symmetrize_tessellation: weld_tol must be non-negative");
  if (planes.empty()) return half;
  poly_edges(half);

  double extent = 0.0;
  for (const auto& p : half.vertices) extent = std::max(extent, p.cwiseAbs().maxCoeff());
  const double merge_tol = 1e-9 * (1.0 + extent);
  auto on_plane = [&](const Vec3& x) {
    for (const auto& pl : planes)
      if (std::abs(pl.signed_distance(x)) <= merge_tol) return true;
    return false;
  };

  std::vector<Vec3> snapped = half.vertices;
  for (auto& x : snapped)
    for (const auto& pl : planes)
      if (std::abs(pl.signed_distance(x)) <= weld_tol) x = pl.project(x);

  const auto group = detail::reflection_group(planes, merge_tol);
  detail::PointWelder welder(merge_tol);
  std::vector<std::vector<int>> faces;
  std::vector<int> copy_of;
  for (std::size_t g = 0; g < group.size(); ++g) {
    std::vector<int> id(snapped.size());
    for (std::size_t v = 0; v < snapped.size(); ++v) id[v] = welder.insert(group[g].apply(snapped[v]));
    const bool flip = group[g].linear.determinant() < 0.0;
    for (const auto& f : half.faces) {
      std::vector<int> face;
      for (int v : f) face.push_back(id[static_cast<std::size_t>(v)]);
      if (flip) std::reverse(face.begin(), face.end());
      faces.push_back(std::move(face));
      copy_of.push_back(static_cast<int>(g));
    }
  }
  auto& verts = welder.points();

  // Edge -> incident faces; report anything non-manifold with coordinates.
  std::map<std::uint64_t, std::vector<int>> edge_faces;
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (std::size_t i = 0; i < faces[f].size(); ++i)
      edge_faces[edge_key(faces[f][i], faces[f][(i + 1) % faces[f].size()])].push_back(static_cast<int>(f));
  for (const auto& [key, fs] : edge_faces) {
    if (fs.size() <= 2) continue;
    const auto a = static_cast<std::size_t>(key >> 32), b = static_cast<std::size_t>(key & 0xffffffffu);
    fail("symmetrize_tessellation: weld leaves a non-manifold edge between (", verts[a].transpose(), ") and (",
         verts[b].transpose(), ")");
  }

  // Union faces from different copies that share an edge lying on a plane.
  std::vector<int> parent(faces.size());
  for (std::size_t f = 0; f < parent.size(); ++f) parent[f] = static_cast<int>(f);
  std::function<int(int)> find = [&](int f) {
    return parent[static_cast<std::size_t>(f)] == f ? f : parent[static_cast<std::size_t>(f)] = find(parent[static_cast<std::size_t>(f)]);
  };
  for (const auto& [key, fs] : edge_faces) {
    if (fs.size() != 2 || copy_of[static_cast<std::size_t>(fs[0])] == copy_of[static_cast<std::size_t>(fs[1])]) continue;
    const auto a = static_cast<std::size_t>(key >> 32), b = static_cast<std::size_t>(key & 0xffffffffu);
    if (on_plane(verts[a]) && on_plane(verts[b])) parent[static_cast<std::size_t>(find(fs[0]))] = find(fs[1]);
  }

  std::map<int, std::vector<int>> groups;
  for (std::size_t f = 0; f < faces.size(); ++f) groups[find(static_cast<int>(f))].push_back(static_cast<int>(f));
  PolyMesh out;
  std::vector<int> remap(verts.size(), -1);
  auto use = [&](int v) {
    auto& r = remap[static_cast<std::size_t>(v)];
    if (r < 0) {
      r = static_cast<int>(out.vertices.size());
      out.vertices.push_back(verts[static_cast<std::size_t>(v)]);
    }
    return r;
  };
  for (const auto& [root, members] : groups) {
    std::vector<int> face;
    if (members.size() == 1) {
      face = faces[static_cast<std::size_t>(members[0])];
    } else {
      // Outline of the union: directed edges whose reverse is not present.
      std::map<std::pair<int, int>, int> count;
      for (int f : members) {
        const auto& fv = faces[static_cast<std::size_t>(f)];
        for (std::size_t i = 0; i < fv.size(); ++i) ++count[{fv[i], fv[(i + 1) % fv.size()]}];
      }
      std::map<int, int> next;
      for (const auto& [e, c] : count)
        if (!count.contains({e.second, e.first})) {
          if (next.contains(e.first)) fail("symmetrize_tessellation: fused face around (", verts[static_cast<std::size_t>(e.first)].transpose(), ") is not a disk");
          next[e.first] = e.second;
        }
      if (next.empty()) fail("symmetrize_tessellation: fused faces close up on themselves");
      int v = next.begin()->first;
      do {
        face.push_back(v);
        v = next.at(v);
      } while (v != face.front() && face.size() <= next.size());
      if (face.size() != next.size())
        fail("symmetrize_tessellation: fused face around (", verts[static_cast<std::size_t>(face.front())].transpose(),
             ") has a hole");
    }
    for (auto& v : face) v = use(v);
    out.faces.push_back(std::move(face));
  }
  poly_edges(out);
  return out;
}

}  // namespace gridshell
