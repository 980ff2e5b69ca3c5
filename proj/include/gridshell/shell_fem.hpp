#pragma once

// Linear membrane analysis of a triangulated shell with constant-strain
// triangles, and principal decomposition of the resulting stress tensors.

#include "gridshell/mesh.hpp"
#include "gridshell/psi_field.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace gridshell {

struct ShellAnalysisConfig {
  double youngs_modulus = 210e9;  // Pa
  double poisson_ratio = 0.3;
  double thickness = 0.01;        // m
  double load_density = 1000.0;   // N/m^2 of plan area, along -Z
  // Grounded springs along vertex normals, as a fraction of the mean
  // stiffness diagonal. Keeps the out-of-plane DOFs of flat regions (which a
  // membrane cannot carry) from making the system singular.
  double normal_spring_ratio = 1e-10;

  void validate() const {
    if (!(youngs_modulus > 0.0)) fail("Young's modulus must be positive");
    if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) fail("Poisson ratio must lie in [0, 0.5)");
    if (!(thickness > 0.0)) fail("shell thickness must be positive");
    if (!(load_density >= 0.0)) fail("load density must be non-negative");
    if (!(normal_spring_ratio >= 0.0)) fail("normal spring ratio must be non-negative");
  }
};

// Per-triangle symmetric 2x2 stress tensor in the basis (e1, e2).
struct StressTensorField {
  std::vector<Mat2> tensor;
  std::vector<Vec3> e1;
  std::vector<Vec3> e2;

  std::size_t size() const { return tensor.size(); }
};

struct ShellSolution {
  StressTensorField stress;
  std::vector<Vec3> displacement;
  std::vector<Vec3> reaction;  // nonzero only at constrained vertices
  Vec3 applied_total = Vec3::Zero();
  Vec3 spring_total = Vec3::Zero();
  double relative_residual = 0.0;
};

namespace detail {

struct MembraneProblem {
  std::vector<double> force;  // 3 per vertex
  std::vector<char> fixed;    // 3 per vertex
  bool springs = true;
};

inline Eigen::Matrix3d plane_stress_matrix(double E, double nu) {
  Eigen::Matrix3d D;
  D << 1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, 0.5 * (1.0 - nu);
  return D * (E / (1.0 - nu * nu));
}

// Strain-displacement matrix of a CST in its tangent plane, mapping the nine
// global displacement components of the triangle to (exx, eyy, gxy).
inline Eigen::Matrix<double, 3, 9> cst_strain_matrix(const TriMesh& mesh, int t, double& area) {
  const auto& f = mesh.triangle(t);
  const auto [e1, e2] = mesh.tangent_basis(t);
  std::array<double, 3> x{}, y{};
  for (int i = 0; i < 3; ++i) {
    const Vec3 d = mesh.vertex(f[static_cast<std::size_t>(i)]) - mesh.vertex(f[0]);
    x[static_cast<std::size_t>(i)] = d.dot(e1);
    y[static_cast<std::size_t>(i)] = d.dot(e2);
  }
  const double two_a = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
  area = 0.5 * two_a;
  Eigen::Matrix<double, 3, 6> B = Eigen::Matrix<double, 3, 6>::Zero();
  for (int i = 0; i < 3; ++i) {
    const auto j = static_cast<std::size_t>((i + 1) % 3), k = static_cast<std::size_t>((i + 2) % 3);
    const double b = y[j] - y[k];
    const double c = x[k] - x[j];
    B(0, 2 * i) = b;
    B(1, 2 * i + 1) = c;
    B(2, 2 * i) = c;
    B(2, 2 * i + 1) = b;
  }
  B /= two_a;
  Eigen::Matrix<double, 6, 9> T = Eigen::Matrix<double, 6, 9>::Zero();
  for (int i = 0; i < 3; ++i) {
    T.block<1, 3>(2 * i, 3 * i) = e1.transpose();
    T.block<1, 3>(2 * i + 1, 3 * i) = e2.transpose();
  }
  return B * T;
}

inline std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
  std::vector<Vec3> n(mesh.num_vertices(), Vec3::Zero());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3 a = mesh.area_vector(static_cast<int>(t));
    for (int v : mesh.triangle(static_cast<int>(t))) n[static_cast<std::size_t>(v)] += a;
  }
  for (auto& x : n) {
    const double len = x.norm();
    if (len > 0.0) x /= len;
  }
  return n;
}

inline ShellSolution solve_membrane(const TriMesh& mesh, const ShellAnalysisConfig& cfg,
                                    const MembraneProblem& problem) {
  cfg.validate();
  const std::size_t nv = mesh.num_vertices();
  const std::size_t ndof = 3 * nv;
  const Eigen::Matrix3d D = plane_stress_matrix(cfg.youngs_modulus, cfg.poisson_ratio);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.num_triangles() * 81 + nv * 9);
  std::vector<Eigen::Matrix<double, 3, 9>> strain(mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    double area = 0.0;
    strain[t] = cst_strain_matrix(mesh, static_cast<int>(t), area);
    const Eigen::Matrix<double, 9, 9> ke = cfg.thickness * area * strain[t].transpose() * D * strain[t];
    const auto& f = mesh.triangle(static_cast<int>(t));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            trips.emplace_back(3 * f[static_cast<std::size_t>(a)] + i, 3 * f[static_cast<std::size_t>(b)] + j,
                               ke(3 * a + i, 3 * b + j));
  }
  Eigen::SparseMatrix<double> K(static_cast<Eigen::Index>(ndof), static_cast<Eigen::Index>(ndof));
  K.setFromTriplets(trips.begin(), trips.end());

  if (problem.springs && cfg.normal_spring_ratio > 0.0) {
    double diag = 0.0;
    for (Eigen::Index i = 0; i < K.rows(); ++i) diag += K.coeff(i, i);
    const double ks = cfg.normal_spring_ratio * diag / static_cast<double>(ndof);
    const auto normals = vertex_normals(mesh);
    trips.clear();
    for (std::size_t v = 0; v < nv; ++v) {
      const Eigen::Matrix3d kv = ks * normals[v] * normals[v].transpose();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          trips.emplace_back(static_cast<int>(3 * v) + i, static_cast<int>(3 * v) + j, kv(i, j));
    }
    Eigen::SparseMatrix<double> S(K.rows(), K.cols());
    S.setFromTriplets(trips.begin(), trips.end());
    K += S;
  }

  std::vector<int> free_index(ndof, -1);
  int nfree = 0;
  for (std::size_t i = 0; i < ndof; ++i)
    if (!problem.fixed[i]) free_index[i] = nfree++;
  if (nfree == static_cast<int>(ndof)) fail("shell analysis: no supports (singular system)");

  Eigen::VectorXd f_full = Eigen::Map<const Eigen::VectorXd>(problem.force.data(), static_cast<Eigen::Index>(ndof));
  Eigen::VectorXd u_full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ndof));
  double residual = 0.0;
  if (nfree > 0) {
    trips.clear();
    for (int k = 0; k < K.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it) {
        const int r = free_index[static_cast<std::size_t>(it.row())], c = free_index[static_cast<std::size_t>(it.col())];
        if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
      }
    Eigen::SparseMatrix<double> Kff(nfree, nfree);
    Kff.setFromTriplets(trips.begin(), trips.end());
    Eigen::VectorXd ff(nfree);
    for (std::size_t i = 0; i < ndof; ++i)
      if (free_index[i] >= 0) ff[free_index[i]] = f_full[static_cast<Eigen::Index>(i)];
    if (ff.norm() > 0.0) {
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Kff);
      if (ldlt.info() != Eigen::Success) fail("shell analysis: stiffness factorization failed (singular system)");
      const Eigen::VectorXd piv = ldlt.vectorD();
      if (!(piv.minCoeff() > 1e-14 * piv.cwiseAbs().maxCoeff()))
        fail("shell analysis: singular stiffness (unsupported mechanism)");
      const Eigen::VectorXd uf = ldlt.solve(ff);
      residual = (Kff * uf - ff).norm() / ff.norm();
      if (!(residual <= 1e-10)) fail("shell analysis: solve residual ", residual, " exceeds 1e-10");
      for (std::size_t i = 0; i < ndof; ++i)
        if (free_index[i] >= 0) u_full[static_cast<Eigen::Index>(i)] = uf[free_index[i]];
    }
  }

  ShellSolution sol;
  sol.relative_residual = residual;
  const Eigen::VectorXd ku = K * u_full;
  sol.displacement.resize(nv);
  sol.reaction.assign(nv, Vec3::Zero());
  for (std::size_t v = 0; v < nv; ++v) {
    sol.displacement[v] = u_full.segment<3>(static_cast<Eigen::Index>(3 * v));
    sol.applied_total += f_full.segment<3>(static_cast<Eigen::Index>(3 * v));
    for (int i = 0; i < 3; ++i) {
      const auto dof = 3 * v + static_cast<std::size_t>(i);
      if (problem.fixed[dof]) sol.reaction[v][i] = ku[static_cast<Eigen::Index>(dof)] - f_full[static_cast<Eigen::Index>(dof)];
    }
  }
  // whatever the supports and loads do not balance is carried by the springs
  sol.spring_total = Vec3::Zero();
  for (std::size_t v = 0; v < nv; ++v) sol.spring_total -= sol.reaction[v];
  sol.spring_total -= sol.applied_total;

  sol.stress.tensor.resize(mesh.num_triangles());
  sol.stress.e1.resize(mesh.num_triangles());
  sol.stress.e2.resize(mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& f = mesh.triangle(static_cast<int>(t));
    Eigen::Matrix<double, 9, 1> ue;
    for (int a = 0; a < 3; ++a) ue.segment<3>(3 * a) = sol.displacement[static_cast<std::size_t>(f[static_cast<std::size_t>(a)])];
    const Eigen::Vector3d s = D * (strain[t] * ue);
    sol.stress.tensor[t] << s[0], s[2], s[2], s[1];
    std::tie(sol.stress.e1[t], sol.stress.e2[t]) = mesh.tangent_basis(static_cast<int>(t));
  }
  return sol;
}

}  // namespace detail

// Uniform projected load along -Z, all boundary vertices pinned.
inline ShellSolution analyze_shell(const TriMesh& mesh, const ShellAnalysisConfig& cfg) {
  cfg.validate();
  if (!mesh.has_boundary()) fail("shell analysis needs a boundary to pin (closed mesh)");
  if (!mesh.is_connected()) fail("shell analysis needs a connected mesh");
  detail::MembraneProblem p;
  p.force.assign(3 * mesh.num_vertices(), 0.0);
  p.fixed.assign(3 * mesh.num_vertices(), 0);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double plan_area = std::abs(mesh.area_vector(static_cast<int>(t)).z());
    for (int v : mesh.triangle(static_cast<int>(t))) p.force[3 * static_cast<std::size_t>(v) + 2] -= cfg.load_density * plan_area / 3.0;
  }
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.is_boundary(static_cast<int>(v))) p.fixed[3 * v] = p.fixed[3 * v + 1] = p.fixed[3 * v + 2] = 1;
  return detail::solve_membrane(mesh, cfg, p);
}

inline StressTensorField assemble_and_solve(const TriMesh& mesh, const ShellAnalysisConfig& cfg) {
  return analyze_shell(mesh, cfg).stress;
}

// Test hook: a flat plate in the XY plane under a uniform edge traction
// (N/m) along +X on its max-X boundary edges. Rollers on the min-X edge
// (u_x = 0), one vertex held in Y, all out-of-plane DOFs held.
inline ShellSolution analyze_uniaxial_patch(const TriMesh& mesh, const ShellAnalysisConfig& cfg,
                                            double traction) {
  double xmin = kInfinity, xmax = -kInfinity;
  for (const auto& p : mesh.vertices()) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
  }
  const double tol = 1e-9 * std::max(1.0, xmax - xmin);
  detail::MembraneProblem p;
  p.springs = false;
  p.force.assign(3 * mesh.num_vertices(), 0.0);
  p.fixed.assign(3 * mesh.num_vertices(), 0);
  int anchor = -1;
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    p.fixed[3 * v + 2] = 1;
    const Vec3& x = mesh.vertices()[v];
    if (std::abs(x.x() - xmin) <= tol) {
      p.fixed[3 * v] = 1;
      if (anchor < 0 || x.y() < mesh.vertex(anchor).y()) anchor = static_cast<int>(v);
    }
  }
  if (anchor < 0) fail("uniaxial patch: no vertices on the supported edge");
  p.fixed[3 * static_cast<std::size_t>(anchor) + 1] = 1;
  for (const auto& e : mesh.edges()) {
    if (!e.is_boundary()) continue;
    if (std::abs(mesh.vertex(e.v0).x() - xmax) > tol || std::abs(mesh.vertex(e.v1).x() - xmax) > tol) continue;
    const double half = 0.5 * traction * (mesh.vertex(e.v1) - mesh.vertex(e.v0)).norm();
    p.force[3 * static_cast<std::size_t>(e.v0)] += half;
    p.force[3 * static_cast<std::size_t>(e.v1)] += half;
  }
  return detail::solve_membrane(mesh, cfg, p);
}

// ---------------------------------------------------------------------------

struct Principal2 {
  double major;  // larger-magnitude eigenvalue
  double minor;
  Vec2 major_direction;  // in the tensor's basis
};

inline Principal2 principal_axes(const Mat2& s) {
  const double a = s(0, 0), c = s(1, 1), b = 0.5 * (s(0, 1) + s(1, 0));
  const double mean = 0.5 * (a + c);
  const double radius = std::hypot(0.5 * (a - c), b);
  const double hi = mean + radius, lo = mean - radius;
  const double phi = 0.5 * std::atan2(2.0 * b, a - c);  // direction of `hi`
  const Vec2 dir_hi(std::cos(phi), std::sin(phi));
  if (std::abs(hi) >= std::abs(lo)) return {hi, lo, dir_hi};
  return {lo, hi, Vec2(-dir_hi.y(), dir_hi.x())};
}

// Maps each tensor to (direction, density, anisotropy). Anisotropy is capped
// at `max_anisotropy` where the minor stress vanishes.
inline PsiField principal_decompose(const StressTensorField& field, double max_anisotropy = 100.0) {
  PsiField psi;
  psi.resize(field.size());
  for (std::size_t t = 0; t < field.size(); ++t) {
    const auto pa = principal_axes(field.tensor[t]);
    const double big = std::abs(pa.major), small = std::abs(pa.minor);
    psi.density[t] = big;
    if (big == 0.0 || big - small <= 1e-12 * big) {
      psi.anisotropy[t] = 1.0;
      psi.direction[t] = field.e1[t];
      psi.isotropic[t] = 1;
      continue;
    }
    psi.anisotropy[t] = small > big / max_anisotropy ? big / small : max_anisotropy;
    psi.direction[t] = (pa.major_direction.x() * field.e1[t] + pa.major_direction.y() * field.e2[t]).normalized();
  }
  return psi;
}

}  // namespace gridshell
