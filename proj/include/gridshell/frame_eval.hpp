#pragma once

// Rigid-jointed 3D frame model of a grid-shell: linear statics and a
// linearized buckling multiplier. Units are SI throughout.

#include "gridshell/mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <map>
#include <set>

namespace gridshell {

struct Material {
  double E = 210e9;        // Pa
  double poisson = 0.3;
  double density = 7850.0;  // kg/m^3
  double shear_modulus() const { return E / (2.0 * (1.0 + poisson)); }
};

// Restraint bits per joint: translations x, y, z then rotations x, y, z.
inline constexpr std::uint8_t kPinned = 0b000111;
inline constexpr std::uint8_t kClamped = 0b111111;

struct Beam {
  int a, b;
};

struct FrameModel {
  std::vector<Vec3> joints;
  std::vector<Beam> beams;
  double diameter = 0.037;  // solid circular bars
  Material material;
  std::vector<std::uint8_t> restraint;  // per joint
  std::vector<Vec3> loads;              // per joint, N

  double area() const { return kPi * diameter * diameter / 4.0; }
  double inertia() const { return kPi * std::pow(diameter, 4) / 64.0; }
  double polar_inertia() const { return 2.0 * inertia(); }
  double beam_length(std::size_t e) const {
    return (joints[static_cast<std::size_t>(beams[e].b)] - joints[static_cast<std::size_t>(beams[e].a)]).norm();
  }
  double total_length() const {
    double s = 0.0;
    for (std::size_t e = 0; e < beams.size(); ++e) s += beam_length(e);
    return s;
  }
  double total_mass() const { return material.density * area() * total_length(); }
};

struct EvalReport {
  double delta_max = 0.0;  // m
  double lambda_lin = kInfinity;  // linearized buckling multiplier
  bool lambda_is_linearized = true;
  double total_length = 0.0;
  double total_mass = 0.0;
  std::vector<Vec3> displacement;  // per joint translation
  std::vector<Vec3> rotation;      // per joint
  std::vector<double> axial_force; // per beam, tension positive
  Vec3 reaction_sum = Vec3::Zero();
  Vec3 load_sum = Vec3::Zero();
};

inline void validate(const FrameModel& m) {
  const auto nj = m.joints.size();
  if (m.restraint.size() != nj || m.loads.size() != nj) fail("frame: restraint/load arrays must match the joint count");
  if (!(m.diameter > 0.0) || !(m.material.E > 0.0)) fail("frame: diameter and E must be positive");
  std::set<std::uint64_t> seen;
  for (std::size_t e = 0; e < m.beams.size(); ++e) {
    const auto [a, b] = m.beams[e];
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= nj || static_cast<std::size_t>(b) >= nj)
      fail("frame: beam ", e, " references a missing joint");
    if (!(m.beam_length(e) > 0.0)) fail("frame: beam ", e, " has zero length");
    if (!seen.insert(edge_key(a, b)).second) fail("frame: duplicate beam ", e, " (", a, ", ", b, ")");
  }
  if (std::none_of(m.restraint.begin(), m.restraint.end(), [](std::uint8_t r) { return r != 0; }))
    fail("frame: no supports");
}

// One joint per vertex, one beam per edge, boundary pinned; each face's
// load (fan area from its centroid) is split equally among its vertices.
inline FrameModel build_frame(const PolyMesh& mesh, double diameter, const Material& material, double load_density) {
  const auto edges = poly_edges(mesh);
  FrameModel m;
  m.joints = mesh.vertices;
  m.diameter = diameter;
  m.material = material;
  for (const auto& e : edges) m.beams.push_back({e.v0, e.v1});
  const auto boundary = poly_boundary_vertices(mesh);
  if (std::none_of(boundary.begin(), boundary.end(), [](char b) { return b != 0; }))
    fail("build_frame: mesh has no boundary, so no supports can be derived");
  m.restraint.assign(mesh.vertices.size(), 0);
  for (std::size_t v = 0; v < boundary.size(); ++v)
    if (boundary[v]) m.restraint[v] = kPinned;
  m.loads.assign(mesh.vertices.size(), Vec3::Zero());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto pts = face_points(mesh, f);
    const double share = load_density * polygon_area(pts) / static_cast<double>(pts.size());
    for (int v : mesh.faces[f]) m.loads[static_cast<std::size_t>(v)].z() -= share;
  }
  return m;
}

namespace detail {

using Mat12 = Eigen::Matrix<double, 12, 12>;

// Local axes: x along the beam, y/z any orthonormal completion (the section
// is circular).
inline Mat3 beam_axes(const Vec3& a, const Vec3& b) {
  const Vec3 x = (b - a).normalized();
  const Vec3 ref = std::abs(x.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitY();
  const Vec3 y = ref.cross(x).normalized();
  Mat3 r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = x.cross(y);
  return r;
}

inline Mat12 transform(const Mat3& r) {
  Mat12 t = Mat12::Zero();
  for (int k = 0; k < 4; ++k) t.block<3, 3>(3 * k, 3 * k) = r;
  return t;
}

// Bending block in the order (transverse 1, rotation 1, transverse 2,
// rotation 2); `s` flips the coupling sign for the x-z plane.
inline void add_bending(Mat12& k, int t1, int r1, int t2, int r2, double c, double L, double s) {
  const int idx[4] = {t1, r1, t2, r2};
  const double m[4][4] = {{12, s * 6 * L, -12, s * 6 * L},
                          {s * 6 * L, 4 * L * L, -s * 6 * L, 2 * L * L},
                          {-12, -s * 6 * L, 12, -s * 6 * L},
                          {s * 6 * L, 2 * L * L, -s * 6 * L, 4 * L * L}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) k(idx[i], idx[j]) += c * m[i][j];
}

inline void add_geometric(Mat12& k, int t1, int r1, int t2, int r2, double c, double L, double s) {
  const int idx[4] = {t1, r1, t2, r2};
  const double m[4][4] = {{6.0 / 5, s * L / 10, -6.0 / 5, s * L / 10},
                          {s * L / 10, 2 * L * L / 15, -s * L / 10, -L * L / 30},
                          {-6.0 / 5, -s * L / 10, 6.0 / 5, -s * L / 10},
                          {s * L / 10, -L * L / 30, -s * L / 10, 2 * L * L / 15}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) k(idx[i], idx[j]) += c * m[i][j];
}

inline Mat12 local_stiffness(const FrameModel& m, double L) {
  const double E = m.material.E, G = m.material.shear_modulus();
  const double A = m.area(), I = m.inertia(), J = m.polar_inertia();
  Mat12 k = Mat12::Zero();
  const double ea = E * A / L, gj = G * J / L;
  k(0, 0) = k(6, 6) = ea;
  k(0, 6) = k(6, 0) = -ea;
  k(3, 3) = k(9, 9) = gj;
  k(3, 9) = k(9, 3) = -gj;
  add_bending(k, 1, 5, 7, 11, E * I / (L * L * L), L, 1.0);
  add_bending(k, 2, 4, 8, 10, E * I / (L * L * L), L, -1.0);
  return k;
}

inline Mat12 local_geometric(double N, double L) {
  Mat12 k = Mat12::Zero();
  add_geometric(k, 1, 5, 7, 11, N / L, L, 1.0);
  add_geometric(k, 2, 4, 8, 10, N / L, L, -1.0);
  return k;
}

inline std::array<int, 12> beam_dofs(const Beam& b) {
  std::array<int, 12> d{};
  for (int i = 0; i < 6; ++i) {
    d[static_cast<std::size_t>(i)] = 6 * b.a + i;
    d[static_cast<std::size_t>(6 + i)] = 6 * b.b + i;
  }
  return d;
}

using SpMat = Eigen::SparseMatrix<double>;

// Assembles sum_e T^T k_e T over all beams (full 6n system).
template <typename LocalFn>
SpMat assemble(const FrameModel& m, LocalFn&& local) {
  const int n = static_cast<int>(6 * m.joints.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(m.beams.size() * 144);
  for (std::size_t e = 0; e < m.beams.size(); ++e) {
    const auto& b = m.beams[e];
    const Vec3& pa = m.joints[static_cast<std::size_t>(b.a)];
    const Vec3& pb = m.joints[static_cast<std::size_t>(b.b)];
    const Mat12 t = transform(beam_axes(pa, pb));
    const Mat12 kg = t.transpose() * local(e, (pb - pa).norm()) * t;
    const auto d = beam_dofs(b);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        if (kg(i, j) != 0.0) trip.emplace_back(d[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(j)], kg(i, j));
  }
  SpMat k(n, n);
  k.setFromTriplets(trip.begin(), trip.end());
  return k;
}

struct FreeDofs {
  std::vector<int> index;  // full dof -> free index or -1
  std::vector<int> full;   // free index -> full dof
};

inline FreeDofs free_dofs(const FrameModel& m) {
  FreeDofs f;
  f.index.assign(6 * m.joints.size(), -1);
  for (std::size_t j = 0; j < m.joints.size(); ++j)
    for (int i = 0; i < 6; ++i)
      if (!(m.restraint[j] & (1u << i))) {
        f.index[6 * j + static_cast<std::size_t>(i)] = static_cast<int>(f.full.size());
        f.full.push_back(static_cast<int>(6 * j) + i);
      }
  return f;
}

inline SpMat restrict_to(const SpMat& k, const FreeDofs& f) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < k.outerSize(); ++c)
    for (SpMat::InnerIterator it(k, c); it; ++it) {
      const int r = f.index[static_cast<std::size_t>(it.row())], cc = f.index[static_cast<std::size_t>(it.col())];
      if (r >= 0 && cc >= 0) trip.emplace_back(r, cc, it.value());
    }
  SpMat out(static_cast<int>(f.full.size()), static_cast<int>(f.full.size()));
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

inline const char* dof_name(int i) {
  static const char* names[6] = {"x translation", "y translation", "z translation",
                                 "rotation about x", "rotation about y", "rotation about z"};
  return names[i];
}

// Jacobi-scaled LDLT of the free stiffness; a vanishing pivot means a
// zero-energy mode, reported at the joint/dof where it shows up.
struct ScaledSolver {
  Eigen::VectorXd scale;
  Eigen::SimplicialLDLT<SpMat> ldlt;

  void factor(const SpMat& k, const FreeDofs& f) {
    const auto n = k.rows();
    scale.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = k.coeff(i, i);
      if (!(d > 0.0)) {
        const int dof = f.full[static_cast<std::size_t>(i)];
        fail("frame: mechanism, joint ", dof / 6, " has no stiffness in ", dof_name(dof % 6));
      }
      scale(i) = 1.0 / std::sqrt(d);
    }
    const SpMat ks = scale.asDiagonal() * k * scale.asDiagonal();
    ldlt.compute(ks);
    const auto& D = ldlt.vectorD();
    Eigen::Index worst = 0;
    const double smallest = D.minCoeff(&worst);
    if (ldlt.info() != Eigen::Success || !(smallest > 1e-11)) {
      const int permuted = ldlt.permutationPinv().indices()(worst);
      const int dof = f.full[static_cast<std::size_t>(permuted)];
      fail("frame: mechanism (singular stiffness), zero-energy mode involves joint ", dof / 6, " ",
           dof_name(dof % 6));
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    return scale.asDiagonal() * ldlt.solve((scale.asDiagonal() * b).eval());
  }
};

}  // namespace detail

inline EvalReport solve_linear_static(const FrameModel& m) {
  validate(m);
  const auto fd = detail::free_dofs(m);
  const auto K = detail::assemble(m, [&](std::size_t, double L) { return detail::local_stiffness(m, L); });
  const auto Kf = detail::restrict_to(K, fd);
  const auto nfull = 6 * m.joints.size();
  Eigen::VectorXd F = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nfull));
  for (std::size_t j = 0; j < m.joints.size(); ++j) F.segment<3>(static_cast<Eigen::Index>(6 * j)) = m.loads[j];
  Eigen::VectorXd Ff(static_cast<Eigen::Index>(fd.full.size()));
  for (std::size_t i = 0; i < fd.full.size(); ++i) Ff(static_cast<Eigen::Index>(i)) = F(fd.full[i]);

  Eigen::VectorXd U = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nfull));
  if (!fd.full.empty()) {
    detail::ScaledSolver solver;
    solver.factor(Kf, fd);
    const Eigen::VectorXd uf = solver.solve(Ff);
    for (std::size_t i = 0; i < fd.full.size(); ++i) U(fd.full[i]) = uf(static_cast<Eigen::Index>(i));
  }

  EvalReport r;
  r.total_length = m.total_length();
  r.total_mass = m.total_mass();
  r.displacement.resize(m.joints.size());
  r.rotation.resize(m.joints.size());
  for (std::size_t j = 0; j < m.joints.size(); ++j) {
    r.displacement[j] = U.segment<3>(static_cast<Eigen::Index>(6 * j));
    r.rotation[j] = U.segment<3>(static_cast<Eigen::Index>(6 * j + 3));
    r.delta_max = std::max(r.delta_max, r.displacement[j].norm());
    r.load_sum += m.loads[j];
  }
  const Eigen::VectorXd reaction = K * U - F;
  for (std::size_t j = 0; j < m.joints.size(); ++j)
    for (int i = 0; i < 3; ++i)
      if (m.restraint[j] & (1u << i)) r.reaction_sum(i) += reaction(static_cast<Eigen::Index>(6 * j) + i);
  const double ea = m.material.E * m.area();
  for (std::size_t e = 0; e < m.beams.size(); ++e) {
    const auto [a, b] = m.beams[e];
    const Vec3 axis = (m.joints[static_cast<std::size_t>(b)] - m.joints[static_cast<std::size_t>(a)]).normalized();
    const Vec3 du = r.displacement[static_cast<std::size_t>(b)] - r.displacement[static_cast<std::size_t>(a)];
    r.axial_force.push_back(ea / m.beam_length(e) * axis.dot(du));
  }
  return r;
}

namespace detail {

// Largest eigenvalue mu of A x = mu K x by Lanczos in the K inner product
// (full reorthogonalization), with K^-1 applied through the factorization.
inline double largest_generalized_eigenvalue(const SpMat& A, const SpMat& K, const ScaledSolver& solver) {
  const Eigen::Index n = K.rows();
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
  for (Eigen::Index i = 0; i < n; ++i) v(i) += 0.5 * std::sin(1.7 * static_cast<double>(i));
  v /= std::sqrt(v.dot(K * v));
  std::vector<Eigen::VectorXd> basis{v};
  std::vector<double> alpha, beta;
  double previous = kInfinity;
  const int cap = static_cast<int>(std::min<Eigen::Index>(n, 400));
  for (int k = 0; k < cap; ++k) {
    Eigen::VectorXd w = solver.solve(A * basis.back());
    alpha.push_back(basis.back().dot(K * w));
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) w -= q.dot(K * w) * q;
    const double b = std::sqrt(std::max(0.0, w.dot(K * w)));
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (int i = 0; i <= k; ++i) {
      T(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i < k) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    if (b < 1e-14 * std::abs(top) || (k >= 10 && std::abs(top - previous) <= 1e-12 * std::abs(top))) return top;
    previous = top;
    beta.push_back(b);
    basis.push_back(w / b);
  }
  return previous;
}

}  // namespace detail

// Smallest positive lambda with (K + lambda K_g) phi = 0, K_g built from the
// static axial forces. +infinity when no compression can buckle the frame.
inline double estimate_linear_buckling(const FrameModel& m, const EvalReport& stat, int dense_limit = 1200) {
  validate(m);
  if (stat.axial_force.size() != m.beams.size()) fail("estimate_linear_buckling: static solution does not match the model");
  const auto fd = detail::free_dofs(m);
  if (fd.full.empty()) return kInfinity;
  const auto K = detail::restrict_to(
      detail::assemble(m, [&](std::size_t, double L) { return detail::local_stiffness(m, L); }), fd);
  const auto Kg = detail::restrict_to(
      detail::assemble(m, [&](std::size_t e, double L) { return detail::local_geometric(stat.axial_force[e], L); }), fd);
  double kg_max = 0.0;
  for (int c = 0; c < Kg.outerSize(); ++c)
    for (detail::SpMat::InnerIterator it(Kg, c); it; ++it) kg_max = std::max(kg_max, std::abs(it.value()));
  if (kg_max == 0.0) return kInfinity;
  const detail::SpMat A = -Kg;

  double mu = 0.0;
  if (static_cast<int>(fd.full.size()) <= dense_limit) {
    const Eigen::MatrixXd Ad(A), Kd(K);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Ad, Kd, Eigen::EigenvaluesOnly);
    if (ges.info() != Eigen::Success) fail("estimate_linear_buckling: stiffness is not positive definite");
    const auto& ev = ges.eigenvalues();
    mu = ev.maxCoeff();
    if (!(mu > 1e-10 * ev.cwiseAbs().maxCoeff())) return kInfinity;
  } else {
    detail::ScaledSolver solver;
    solver.factor(K, fd);
    mu = detail::largest_generalized_eigenvalue(A, K, solver);
    if (!(mu > 0.0)) return kInfinity;
  }
  return 1.0 / mu;
}

inline EvalReport evaluate_frame(const FrameModel& m) {
  EvalReport r = solve_linear_static(m);
  r.lambda_lin = estimate_linear_buckling(m, r);
  return r;
}

struct EquivalenceReport {
  double length_difference = 0.0;  // relative to the first model
  double mass_difference = 0.0;
  bool pass = true;
};

inline constexpr double kEquivalenceTolerance = 0.05;

inline EquivalenceReport check_equivalence(double length_a, double mass_a, double length_b, double mass_b) {
  EquivalenceReport r;
  r.length_difference = length_a > 0.0 ? std::abs(length_b - length_a) / length_a : kInfinity;
  r.mass_difference = mass_a > 0.0 ? std::abs(mass_b - mass_a) / mass_a : kInfinity;
  r.pass = r.length_difference <= kEquivalenceTolerance && r.mass_difference <= kEquivalenceTolerance;
  return r;
}

inline EquivalenceReport check_equivalence(const FrameModel& a, const FrameModel& b) {
  return check_equivalence(a.total_length(), a.total_mass(), b.total_length(), b.total_mass());
}

}  // namespace gridshell
