#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "deeppet/geometry.hpp"
#include "deeppet/random.hpp"

namespace testing {

inline deeppet::Image random_image(int rows, int cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  deeppet::Rng rng(seed);
  deeppet::Image img(rows, cols);
  for (auto& v : img.values()) v = rng.uniform(lo, hi);
  return img;
}

inline deeppet::Sinogram random_sinogram(int rows, int cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  deeppet::Rng rng(seed);
  deeppet::Sinogram s(rows, cols);
  for (auto& v : s.values()) v = rng.uniform(lo, hi);
  return s;
}

template <class A, class B>
double max_abs_diff(const A& a, const B& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("deeppet_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Small geometry whose cropped radial extent matches the image width.
inline deeppet::GeometryPreset small_preset(int n, int n_angles, int kept, int crop) {
  deeppet::GeometryPreset p;
  p.name = "small";
  p.grid = {n, 10.0 * n};
  p.sino = {n_angles, kept + 2 * crop, 10.0 * n / kept, crop};
  return p;
}

}  // namespace testing
