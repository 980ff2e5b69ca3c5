#pragma once

// Turns the anisotropic metric induced by the stress field into a Euclidean
// one: every triangle is pushed towards its rest shape transformed by its
// target frame W = R diag(d, d/a) R^T, and the mesh is refined wherever the
// deformed edges grow longer than q.

#include "gridshell/psi_field.hpp"
#include "gridshell/mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SVD>

namespace gridshell {

// W for one triangle, expressed in its storage basis (e1, e2).
inline Mat2 target_frame(const Vec3& direction, double density, double anisotropy, const Vec3& e1, const Vec3& e2) {
  if (!(density > 0.0) || !(anisotropy >= 1.0))
    fail("target frame needs d > 0 and a >= 1 (got d=", density, ", a=", anisotropy, ")");
  Vec2 u(direction.dot(e1), direction.dot(e2));
  const double len = u.norm();
  u = len > 0.0 ? Vec2(u / len) : Vec2(Vec2::UnitX());
  Mat2 rot;
  rot << u.x(), -u.y(), u.y(), u.x();
  return rot * Eigen::Vector2d(density, density / anisotropy).asDiagonal() * rot.transpose();
}

inline std::vector<Mat2> target_frames(const TriMesh& mesh, const PsiField& psi) {
  if (psi.size() != mesh.num_triangles()) fail("target_frames: field/mesh size mismatch");
  std::vector<Mat2> w(psi.size());
  for (std::size_t t = 0; t < psi.size(); ++t) {
    const auto [e1, e2] = mesh.tangent_basis(static_cast<int>(t));
    w[t] = target_frame(psi.direction[t], psi.density[t], psi.anisotropy[t], e1, e2);
  }
  return w;
}

struct DeformConfig {
  int max_iterations = 200;
  double tolerance = 1e-8;  // relative energy change
};

struct DeformReport {
  int iterations = 0;
  double energy = 0.0;
  double relative_change = 0.0;
};

namespace detail {

// Rest-shape gradient operator of a triangle: J = [q1-q0, q2-q0] * G.
inline Mat2 rest_inverse(const TriMesh& mesh, int t) {
  const auto& f = mesh.triangle(t);
  const auto [e1, e2] = mesh.tangent_basis(t);
  const Vec3 a = mesh.vertex(f[1]) - mesh.vertex(f[0]);
  const Vec3 b = mesh.vertex(f[2]) - mesh.vertex(f[0]);
  Mat2 X;
  X << a.dot(e1), b.dot(e1), a.dot(e2), b.dot(e2);
  return X.inverse();
}

}  // namespace detail

// Minimizes sum_t sum_{v in t} area_t/3 ||J_t - R_v W_t||_F^2 over vertex
// positions and proper rotations R_v (W_t lifted onto the rest tangent
// plane). The area-weighted centroid of the rest mesh is kept in place.
inline TriMesh deform(const TriMesh& mesh, std::span<const Mat2> frames, const DeformConfig& cfg = {},
                      DeformReport* report = nullptr, const std::vector<Vec3>* initial = nullptr) {
  const std::size_t nv = mesh.num_vertices(), nt = mesh.num_triangles();
  if (frames.size() != nt) fail("deform: ", frames.size(), " frames for ", nt, " triangles");
  if (nt == 0) return mesh;
  if (!mesh.is_connected()) fail("deform: mesh must be connected");

  std::vector<double> area(nt);
  std::vector<std::array<Vec2, 3>> grad(nt);  // per-corner rows of B_t
  for (std::size_t t = 0; t < nt; ++t) {
    area[t] = mesh.triangle_area(static_cast<int>(t));
    const Mat2 G = detail::rest_inverse(mesh, static_cast<int>(t));
    grad[t][1] = G.row(0).transpose();
    grad[t][2] = G.row(1).transpose();
    grad[t][0] = -grad[t][1] - grad[t][2];
  }

  // gauge: the lowest referenced vertex is eliminated, the solution is then
  // translated so the area-weighted centroid matches the rest mesh
  std::vector<double> vweight(nv, 0.0);
  for (std::size_t t = 0; t < nt; ++t)
    for (int v : mesh.triangle(static_cast<int>(t))) vweight[static_cast<std::size_t>(v)] += area[t] / 3.0;
  int pinned = 0;
  while (vweight[static_cast<std::size_t>(pinned)] == 0.0) ++pinned;
  std::vector<int> index(nv, -1);
  int nfree = 0;
  for (std::size_t v = 0; v < nv; ++v)
    if (static_cast<int>(v) != pinned && vweight[v] > 0.0) index[v] = nfree++;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(nt * 9);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& f = mesh.triangle(static_cast<int>(t));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const int r = index[static_cast<std::size_t>(f[static_cast<std::size_t>(i)])];
        const int c = index[static_cast<std::size_t>(f[static_cast<std::size_t>(j)])];
        if (r >= 0 && c >= 0)
          trips.emplace_back(r, c, area[t] * grad[t][static_cast<std::size_t>(i)].dot(grad[t][static_cast<std::size_t>(j)]));
      }
  }
  Eigen::SparseMatrix<double> L(nfree, nfree);
  L.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
  if (solver.info() != Eigen::Success) fail("deform: global system factorization failed");

  std::vector<Vec3> pos = initial ? *initial : mesh.vertices();
  if (pos.size() != nv) fail("deform: initial positions size mismatch");
  const Vec3 anchor = pos[static_cast<std::size_t>(pinned)];

  std::vector<Eigen::Matrix<double, 3, 2>> target(nt);
  auto jacobian = [&](std::size_t t) {
    const auto& f = mesh.triangle(static_cast<int>(t));
    Eigen::Matrix<double, 3, 2> J = Eigen::Matrix<double, 3, 2>::Zero();
    for (std::size_t i = 0; i < 3; ++i) J += pos[static_cast<std::size_t>(f[i])] * grad[t][i].transpose();
    return J;
  };
  // rest tangent frame times W: the target gradient up to rotation
  std::vector<Eigen::Matrix<double, 3, 2>> shape(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto [e1, e2] = mesh.tangent_basis(static_cast<int>(t));
    Eigen::Matrix<double, 3, 2> E;
    E << e1, e2;
    shape[t] = E * frames[t];
  }
  // Best-fit proper rotations, one per vertex over its triangle fan; each
  // triangle aims at the mean of its corners' rotated targets. Returns the
  // energy at the current positions.
  std::vector<Mat3> rot(nv, Mat3::Identity());
  std::vector<Eigen::Matrix<double, 3, 2>> jac(nt);
  auto local_step = [&] {
    std::vector<Mat3> cov(nv, Mat3::Zero());
    for (std::size_t t = 0; t < nt; ++t) {
      jac[t] = jacobian(t);
      const Mat3 c = area[t] * jac[t] * shape[t].transpose();
      for (int v : mesh.triangle(static_cast<int>(t))) cov[static_cast<std::size_t>(v)] += c;
    }
    for (std::size_t v = 0; v < nv; ++v) {
      if (vweight[v] == 0.0) continue;
      Eigen::JacobiSVD<Mat3> svd(cov[v], Eigen::ComputeFullU | Eigen::ComputeFullV);
      Mat3 fix = Mat3::Identity();
      fix(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
      rot[v] = svd.matrixU() * fix * svd.matrixV().transpose();
    }
    double e = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& f = mesh.triangle(static_cast<int>(t));
      target[t].setZero();
      for (int v : f) {
        const Eigen::Matrix<double, 3, 2> r = rot[static_cast<std::size_t>(v)] * shape[t];
        target[t] += r / 3.0;
        e += area[t] / 3.0 * (jac[t] - r).squaredNorm();
      }
    }
    return e;
  };
  // right-hand side of the global step for the current rotations
  Eigen::MatrixXd rhs(nfree, 3);
  auto assemble_rhs = [&] {
    rhs.setZero();
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& f = mesh.triangle(static_cast<int>(t));
      for (std::size_t i = 0; i < 3; ++i) {
        const int r = index[static_cast<std::size_t>(f[i])];
        if (r < 0) continue;
        rhs.row(r) += (area[t] * target[t] * grad[t][i]).transpose();
        for (std::size_t j = 0; j < 3; ++j)  // the pinned vertex's column
          if (f[j] == pinned) rhs.row(r) -= area[t] * grad[t][i].dot(grad[t][j]) * anchor.transpose();
      }
    }
  };
  Eigen::MatrixXd x(nfree, 3);
  for (std::size_t v = 0; v < nv; ++v)
    if (index[v] >= 0) x.row(index[v]) = pos[v].transpose();
  auto set = [&](const Eigen::MatrixXd& y) {
    for (std::size_t v = 0; v < nv; ++v)
      if (index[v] >= 0) pos[v] = y.row(index[v]).transpose();
  };
  // energy and gradient 2 (L x - b(R(x))); R is optimal so it drops out
  auto evaluate = [&](const Eigen::MatrixXd& y, Eigen::MatrixXd& g) {
    set(y);
    const double e = local_step();
    assemble_rhs();
    g = 2.0 * (L * y - rhs);
    return e;
  };
  auto dot = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a.array() * b.array()).sum(); };
  double scale = 0.0;
  for (std::size_t t = 0; t < nt; ++t) scale += area[t] * frames[t].squaredNorm();

  // The plain local/global iteration is gradient descent preconditioned by
  // L with unit step and slows down on soft bending modes. L-BFGS with the same
  // preconditioner keeps its first step and converges far faster.
  constexpr std::size_t kHistory = 8;
  std::vector<Eigen::MatrixXd> hs, hy;
  std::vector<double> hrho;
  Eigen::MatrixXd g, g_new;
  double e = evaluate(x, g);
  DeformReport rep;
  rep.energy = e;
  bool converged = e <= 1e-24 * scale;
  for (int it = 0; it < cfg.max_iterations && !converged; ++it) {
    Eigen::MatrixXd d = g;
    std::vector<double> alpha(hs.size());
    for (std::size_t k = hs.size(); k-- > 0;) {
      alpha[k] = hrho[k] * dot(hs[k], d);
      d -= alpha[k] * hy[k];
    }
    d = 0.5 * solver.solve(d);
    for (std::size_t k = 0; k < hs.size(); ++k) d += hs[k] * (alpha[k] - hrho[k] * dot(hy[k], d));
    d = -d;
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      hs.clear(), hy.clear(), hrho.clear();
      d = -0.5 * solver.solve(g);
      slope = dot(g, d);
    }
    double step = 1.0, e_new = e;
    Eigen::MatrixXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
      x_new = x + step * d;
      e_new = evaluate(x_new, g_new);
      if (e_new <= e + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    rep.iterations = it + 1;
    if (!accepted) {  // no decrease possible at machine precision
      set(x);
      local_step();
      rep.relative_change = 0.0;
      converged = true;
      break;
    }
    const Eigen::MatrixXd s_k = x_new - x, y_k = g_new - g;
    const double sy = dot(s_k, y_k);
    if (sy > 1e-300) {
      hs.push_back(s_k), hy.push_back(y_k), hrho.push_back(1.0 / sy);
      if (hs.size() > kHistory) {
        hs.erase(hs.begin()), hy.erase(hy.begin()), hrho.erase(hrho.begin());
      }
    }
    rep.relative_change = std::abs(e - e_new) / std::max(e, 1e-300);
    rep.energy = e_new;
    x = x_new;
    g = g_new;
    e = e_new;
    if (e <= 1e-24 * scale || rep.relative_change < cfg.tolerance) converged = true;
  }
  set(x);
  pos[static_cast<std::size_t>(pinned)] = anchor;
  if (report) *report = rep;
  if (!converged)
    fail("deform: no convergence after ", cfg.max_iterations, " iterations (energy ", rep.energy,
         ", relative change ", rep.relative_change, ")");

  Vec3 c_rest = Vec3::Zero(), c_new = Vec3::Zero();
  double wsum = 0.0;
  for (std::size_t v = 0; v < nv; ++v) {
    c_rest += vweight[v] * mesh.vertex(static_cast<int>(v));
    c_new += vweight[v] * pos[v];
    wsum += vweight[v];
  }
  const Vec3 shift = (c_rest - c_new) / wsum;
  for (std::size_t v = 0; v < nv; ++v)
    if (vweight[v] > 0.0) pos[v] += shift;
  return mesh.with_positions(std::move(pos));
}

// ---------------------------------------------------------------------------

struct DeformedDomain {
  TriMesh original;                  // refined input mesh M
  TriMesh deformed;                  // M', same connectivity
  PsiField psi;                      // per refined triangle
  std::vector<Mat2> frames;          // per refined triangle, storage basis of M
  std::vector<int> triangle_parent;  // refined triangle -> input triangle
  std::vector<SplitVertex> genealogy;
  double q = 0.0;
  int refinement_rounds = 0;
  DeformReport last_deform;
};

struct RefineConfig {
  int max_rounds = 20;
  DeformConfig deform;
};

// Alternates deformation and midpoint refinement of M until every edge of M'
// is at most q long. Split children inherit their parent's field sample.
inline DeformedDomain refine_until_fit(const TriMesh& mesh, const PsiField& psi, double q,
                                       const RefineConfig& cfg = {}) {
  if (!(q > 0.0)) fail("refine_until_fit: q must be positive");
  if (psi.size() != mesh.num_triangles()) fail("refine_until_fit: field/mesh size mismatch");
  DeformedDomain dom;
  dom.q = q;
  dom.original = mesh;
  dom.psi = psi;
  dom.triangle_parent.resize(mesh.num_triangles());
  for (std::size_t t = 0; t < dom.triangle_parent.size(); ++t) dom.triangle_parent[t] = static_cast<int>(t);
  std::vector<Vec3> warm = mesh.vertices();

  for (int round = 0;; ++round) {
    dom.frames = target_frames(dom.original, dom.psi);
    dom.deformed = deform(dom.original, dom.frames, cfg.deform, &dom.last_deform, &warm);
    std::vector<std::pair<int, int>> marked;
    for (std::size_t e = 0; e < dom.deformed.num_edges(); ++e) {
      if (dom.deformed.edge_length(static_cast<int>(e)) > q) {
        const auto& ed = dom.deformed.edge(static_cast<int>(e));
        marked.emplace_back(ed.v0, ed.v1);
      }
    }
    if (marked.empty()) {
      dom.refinement_rounds = round;
      return dom;
    }
    if (round >= cfg.max_rounds)
      fail("refinement did not fit q = ", q, " within ", cfg.max_rounds, " rounds (", marked.size(),
           " edges still too long; q too small)");

    auto split = split_long_edges(dom.original, marked);
    PsiField child;
    child.resize(split.mesh.num_triangles());
    std::vector<int> parent(split.mesh.num_triangles());
    for (std::size_t t = 0; t < split.mesh.num_triangles(); ++t) {
      const auto p = static_cast<std::size_t>(split.triangle_parent[t]);
      const Vec3 n = split.mesh.triangle_normal(static_cast<int>(t));
      Vec3 u = dom.psi.direction[p] - dom.psi.direction[p].dot(n) * n;
      child.direction[t] = u.norm() > 0.0 ? Vec3(u.normalized()) : split.mesh.tangent_basis(static_cast<int>(t)).first;
      child.density[t] = dom.psi.density[p];
      child.anisotropy[t] = dom.psi.anisotropy[p];
      child.isotropic[t] = dom.psi.isotropic[p];
      parent[t] = dom.triangle_parent[p];
    }
    warm = dom.deformed.vertices();
    for (const auto& sv : split.new_vertices)
      warm.push_back(0.5 * (warm[static_cast<std::size_t>(sv.parent0)] + warm[static_cast<std::size_t>(sv.parent1)]));
    dom.genealogy.insert(dom.genealogy.end(), split.new_vertices.begin(), split.new_vertices.end());
    dom.original = std::move(split.mesh);
    dom.psi = std::move(child);
    dom.triangle_parent = std::move(parent);
  }
}

// A point given by barycentric coordinates on a triangle.
struct SurfacePoint {
  int triangle = -1;
  Vec3 bary = Vec3(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
};

inline Vec3 evaluate(const TriMesh& mesh, const SurfacePoint& p) {
  if (p.triangle < 0 || p.triangle >= static_cast<int>(mesh.num_triangles()))
    fail("invalid triangle index ", p.triangle);
  const auto& f = mesh.triangle(p.triangle);
  return p.bary[0] * mesh.vertex(f[0]) + p.bary[1] * mesh.vertex(f[1]) + p.bary[2] * mesh.vertex(f[2]);
}

// Points on M' back onto M: same barycentric coordinates, same triangle.
inline std::vector<Vec3> map_back(const DeformedDomain& domain, std::span<const SurfacePoint> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (p.bary.minCoeff() < -1e-9 || std::abs(p.bary.sum() - 1.0) > 1e-9)
      fail("map_back: invalid barycentric coordinates on triangle ", p.triangle);
    out.push_back(evaluate(domain.original, p));
  }
  return out;
}

// Orientation of each deformed triangle relative to its neighborhood:
// (deformed area vector . neighbor normal) / rest area. Negative values are
// fold-overs.
inline std::vector<double> orientation_determinants(const TriMesh& rest, const TriMesh& deformed) {
  const std::size_t nt = deformed.num_triangles();
  std::vector<Vec3> vsum(deformed.num_vertices(), Vec3::Zero());
  std::vector<Vec3> avec(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    avec[t] = deformed.area_vector(static_cast<int>(t));
    for (int v : deformed.triangle(static_cast<int>(t))) vsum[static_cast<std::size_t>(v)] += avec[t];
  }
  std::vector<double> det(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    Vec3 around = Vec3::Zero();
    for (int v : deformed.triangle(static_cast<int>(t))) around += vsum[static_cast<std::size_t>(v)] - avec[t];
    const double rest_area = rest.triangle_area(static_cast<int>(t));
    det[t] = around.norm() > 0.0 ? avec[t].dot(around.normalized()) / rest_area : avec[t].norm() / rest_area;
  }
  return det;
}

inline int count_foldovers(const DeformedDomain& domain) {
  int n = 0;
  for (double d : orientation_determinants(domain.original, domain.deformed)) n += d <= 0.0 ? 1 : 0;
  return n;
}

}  // namespace gridshell
