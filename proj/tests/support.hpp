#pragma once

#include "nhgm/catalog.hpp"
#include "nhgm/core.hpp"

#include <initializer_list>

namespace nhgm::test {

inline constexpr double kPi = 3.14159265358979323846;

inline Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

inline double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// |cos| of the angle between two vectors.
inline double direction_cosine(const Vec& a, const Vec& b) { return std::abs(a.dot(b)) / (a.norm() * b.norm()); }

inline CatalogEntry system(const std::string& name) {
  if (name == "multidim_particle") return make_system(name, {{"preset", "constant"}});
  return make_system(name);
}

}  // namespace nhgm::test
