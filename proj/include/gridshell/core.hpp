#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gridshell {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

// All recoverable failures in the library are reported with this type.
// `stage` is filled in by the pipeline when an error crosses a stage boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  Error(std::string stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  return os.str();
}

}  // namespace detail

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
  throw Error(detail::concat(std::forward<Args>(args)...));
}

// Undirected edge key, smaller index first.
inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

// Reflection of a point/vector through a plane.
struct SymmetryPlane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();

  SymmetryPlane() = default;
  SymmetryPlane(const Vec3& p, const Vec3& n) : point(p), normal(n) {
    const double len = n.norm();
    if (!(len > 0.0)) fail("symmetry plane normal must be nonzero");
    normal /= len;
  }

  double signed_distance(const Vec3& x) const { return normal.dot(x - point); }
  Vec3 reflect_point(const Vec3& x) const { return x - 2.0 * signed_distance(x) * normal; }
  Vec3 reflect_vector(const Vec3& v) const { return v - 2.0 * normal.dot(v) * normal; }
  Vec3 project(const Vec3& x) const { return x - signed_distance(x) * normal; }
};

namespace detail {

struct Isometry {
  Mat3 linear = Mat3::Identity();
  Vec3 offset = Vec3::Zero();
  Vec3 apply(const Vec3& p) const { return linear * p + offset; }
  bool approx(const Isometry& o, double tol) const {
    return (linear - o.linear).cwiseAbs().maxCoeff() < 1e-9 && (offset - o.offset).norm() < tol;
  }
};

inline Isometry reflection(const SymmetryPlane& pl) {
  Isometry r;
  r.linear = Mat3::Identity() - 2.0 * pl.normal * pl.normal.transpose();
  r.offset = 2.0 * pl.normal.dot(pl.point) * pl.normal;
  return r;
}

// Closure of the group generated by the plane reflections (capped).
inline std::vector<Isometry> reflection_group(std::span<const SymmetryPlane> planes, double tol) {
  std::vector<Isometry> group{Isometry{}};
  for (std::size_t i = 0; i < group.size() && group.size() < 64; ++i) {
    for (const auto& pl : planes) {
      const Isometry r = reflection(pl);
      Isometry g{r.linear * group[i].linear, r.linear * group[i].offset + r.offset};
      bool known = false;
      for (const auto& h : group) known = known || h.approx(g, tol);
      if (!known) group.push_back(g);
    }
  }
  return group;
}

}  // namespace detail

}  // namespace gridshell
