#pragma once

#include "gridshell/core.hpp"

#include <vector>

namespace gridshell {

// Decomposed stress field, one sample per triangle.
//   direction  - unit tangent vector of the dominant principal direction;
//                a line, so `direction` and `-direction` are the same value
//   density    - dominant principal stress magnitude (Pa); dimensionless
//                once rescaled
//   anisotropy - ratio of principal stress magnitudes, >= 1
struct PsiField {
  std::vector<Vec3> direction;
  std::vector<double> density;
  std::vector<double> anisotropy;
  std::vector<char> isotropic;

  std::size_t size() const { return density.size(); }

  void resize(std::size_t n) {
    direction.assign(n, Vec3::UnitX());
    density.assign(n, 0.0);
    anisotropy.assign(n, 1.0);
    isotropic.assign(n, 0);
  }
};

}  // namespace gridshell
