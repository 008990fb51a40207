#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "deeppet/raster.hpp"

namespace deeppet {

/// Square image raster covering a field of view of fov_mm on each side.
struct ImageGrid {
  int n = 0;
  double fov_mm = 0.0;

  double pixel_mm() const { return fov_mm / n; }
  /// Pixel-centre x coordinate (mm) of column c; origin at the grid centre.
  double x_of_col(int c) const { return (c - 0.5 * (n - 1)) * pixel_mm(); }
  /// Pixel-centre y coordinate (mm) of row r; y grows upwards.
  double y_of_row(int r) const { return (0.5 * (n - 1) - r) * pixel_mm(); }
  /// Radius (in pixels, measured to pixel centres) of the reconstruction support.
  double support_radius_px() const;
  bool in_support(int r, int c) const;

  void validate() const;
  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

/// Parallel-beam sinogram sampling: angles uniform on [0, pi), radial bins
/// centred on the scanner axis.
struct SinogramGeometry {
  int n_angles = 0;
  int n_radial = 0;
  double radial_spacing_mm = 0.0;
  int crop = 0;

  int kept_radial() const { return n_radial - 2 * crop; }
  double angle(int a) const;
  double offset_mm(int r) const { return (r - 0.5 * (n_radial - 1)) * radial_spacing_mm; }
  bool is_kept(int r) const { return r >= crop && r < n_radial - crop; }

  void validate() const;
  friend bool operator==(const SinogramGeometry&, const SinogramGeometry&) = default;
};

/// One line of response: the set of points p with p . (cos t, sin t) = offset.
struct Lor {
  int angle_index = 0;
  int radial_index = 0;
  double theta = 0.0;
  double offset_mm = 0.0;
  double nx = 1.0;  ///< unit normal
  double ny = 0.0;
  /// Unit direction along the line (normal rotated by +90 degrees).
  double dx() const { return -ny; }
  double dy() const { return nx; }
};

Lor lor_of(const SinogramGeometry& geom, int angle_index, int radial_index);

/// Named image + sinogram pairing.
struct GeometryPreset {
  std::string name;
  ImageGrid grid;
  SinogramGeometry sino;
};

/// "paper": 128 px / 700 mm, 288 x 381 bins, crop 56.
GeometryPreset paper_preset();
/// "toy": 64 px / 350 mm, 96 x 127 bins, crop 16.
GeometryPreset toy_preset();
GeometryPreset preset_by_name(std::string_view name);

Image blank_image(const ImageGrid& grid, double fill = 0.0);
Sinogram blank_sinogram(const SinogramGeometry& geom, double fill = 0.0);
/// Cropped-shape raster (n_angles x kept_radial).
Sinogram blank_cropped(const SinogramGeometry& geom, double fill = 0.0);

/// Indicator of the circular reconstruction support.
Image support_mask(const ImageGrid& grid);
/// Zero every pixel outside the support.
void clip_to_support(Image& img, const ImageGrid& grid);

Sinogram crop_sinogram(const Sinogram& full, const SinogramGeometry& geom);
Sinogram uncrop_sinogram(const Sinogram& cropped, const SinogramGeometry& geom);

struct Augmentation {
  double dx_px = 0.0;
  double dy_px = 0.0;
  double rot_deg = 0.0;
  bool flip = false;

  bool is_identity() const { return dx_px == 0.0 && dy_px == 0.0 && rot_deg == 0.0 && !flip; }
  friend bool operator==(const Augmentation&, const Augmentation&) = default;
};

/// Largest translation magnitude (pixels) allowed for a grid: 25 px at n = 128.
double max_translation_px(const ImageGrid& grid);
constexpr double kMaxRotationDeg = 10.0;

/// Translate (dx right, dy down, in pixels), rotate counter-clockwise about the
/// grid centre, then optionally mirror left-right. Bilinear resampling with a
/// zero boundary; the result is clamped at zero and clipped to the support.
Image augment(const Image& img, const ImageGrid& grid, const Augmentation& aug);

/// Draw a random augmentation inside the sanctioned ranges.
Augmentation random_augmentation(const ImageGrid& grid, bool flip, std::uint64_t seed);

}  // namespace deeppet
