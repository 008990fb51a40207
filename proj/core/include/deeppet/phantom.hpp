#pragma once

#include <cstdint>

#include "deeppet/geometry.hpp"

namespace deeppet {

/// Linear attenuation coefficients (1/mm) at 511 keV.
constexpr double kMuWater = 0.0096;
constexpr double kMuLung = 0.003;

/// Ground-truth activity (kBq/cc) and matching attenuation map (1/mm).
struct Phantom {
  int id = 0;
  Image activity;
  Image mu;
};

struct Ellipse {
  double cx_mm = 0.0;
  double cy_mm = 0.0;
  double a_mm = 1.0;  ///< semi-axis along the rotated x axis
  double b_mm = 1.0;
  double angle_rad = 0.0;

  bool contains(double x, double y) const;
};

/// Adds `value` times the fractional coverage of each pixel by the ellipse
/// (4x4 supersampling).
void paint_ellipse(Image& img, const ImageGrid& grid, const Ellipse& e, double value);

/// Replaces covered pixels by `value` (weighted by coverage).
void fill_ellipse(Image& img, const ImageGrid& grid, const Ellipse& e, double value);

/// Uniform centred disc, anti-aliased, clipped to the support.
Image uniform_disc(const ImageGrid& grid, double radius_mm, double value = 1.0);

/// Procedural torso-like slice: an elliptical warm body of water, an optional
/// cold lung-like insert and 3-10 hot or cold elliptical features. The same
/// (grid, id, seed) always produces the same phantom.
Phantom generate_phantom(const ImageGrid& grid, int id, std::uint64_t seed);

}  // namespace deeppet
