#include "deeppet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "deeppet/random.hpp"

namespace deeppet {

namespace {
// Pixel centres closer than this to the inscribed circle are excluded so that
// the interpolating projector's one-pixel footprint never reaches the cropped
// radial bins.
constexpr double kSupportMarginPx = 0.75;
}  // namespace

double ImageGrid::support_radius_px() const { return 0.5 * n - kSupportMarginPx; }

bool ImageGrid::in_support(int r, int c) const {
  const double half = 0.5 * (n - 1);
  const double dr = r - half;
  const double dc = c - half;
  const double rad = support_radius_px();
  return dr * dr + dc * dc <= rad * rad;
}

void ImageGrid::validate() const {
  if (n < 2) throw DomainError("image grid needs n >= 2");
  if (!(fov_mm > 0.0)) throw DomainError("image grid needs fov_mm > 0");
}

double SinogramGeometry::angle(int a) const { return std::numbers::pi * a / n_angles; }

void SinogramGeometry::validate() const {
  if (n_angles < 1 || n_radial < 1) throw DomainError("sinogram geometry needs positive bin counts");
  if (!(radial_spacing_mm > 0.0)) throw DomainError("sinogram geometry needs radial_spacing_mm > 0");
  if (crop < 0 || kept_radial() <= 0) throw DomainError("crop leaves no radial bins");
}

Lor lor_of(const SinogramGeometry& geom, int angle_index, int radial_index) {
  if (angle_index < 0 || angle_index >= geom.n_angles || radial_index < 0 || radial_index >= geom.n_radial) {
    throw DomainError("LOR index out of range");
  }
  Lor lor;
  lor.angle_index = angle_index;
  lor.radial_index = radial_index;
  lor.theta = geom.angle(angle_index);
  lor.offset_mm = geom.offset_mm(radial_index);
  lor.nx = std::cos(lor.theta);
  lor.ny = std::sin(lor.theta);
  return lor;
}

GeometryPreset paper_preset() {
  GeometryPreset p;
  p.name = "paper";
  p.grid = {128, 700.0};
  p.sino = {288, 381, 700.0 / 269.0, 56};
  return p;
}

GeometryPreset toy_preset() {
  GeometryPreset p;
  p.name = "toy";
  p.grid = {64, 350.0};
  p.sino = {96, 127, 350.0 / 95.0, 16};
  return p;
}

GeometryPreset preset_by_name(std::string_view name) {
  if (name == "paper") return paper_preset();
  if (name == "toy") return toy_preset();
  throw DomainError("unknown geometry preset '" + std::string(name) + "'");
}

Image blank_image(const ImageGrid& grid, double fill) { return Image(grid.n, grid.n, fill); }
Sinogram blank_sinogram(const SinogramGeometry& geom, double fill) { return Sinogram(geom.n_angles, geom.n_radial, fill); }
Sinogram blank_cropped(const SinogramGeometry& geom, double fill) { return Sinogram(geom.n_angles, geom.kept_radial(), fill); }

Image support_mask(const ImageGrid& grid) {
  Image m = blank_image(grid);
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c) m(r, c) = grid.in_support(r, c) ? 1.0 : 0.0;
  return m;
}

void clip_to_support(Image& img, const ImageGrid& grid) {
  if (img.rows() != grid.n || img.cols() != grid.n) throw DomainError("image does not match grid");
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c)
      if (!grid.in_support(r, c)) img(r, c) = 0.0;
}

Sinogram crop_sinogram(const Sinogram& full, const SinogramGeometry& geom) {
  if (full.rows() != geom.n_angles || full.cols() != geom.n_radial) {
    throw DomainError("crop_sinogram: raster does not match geometry");
  }
  Sinogram out = blank_cropped(geom);
  for (int a = 0; a < geom.n_angles; ++a) {
    auto src = full.row(a).subspan(static_cast<std::size_t>(geom.crop), static_cast<std::size_t>(geom.kept_radial()));
    std::copy(src.begin(), src.end(), out.row(a).begin());
  }
  return out;
}

Sinogram uncrop_sinogram(const Sinogram& cropped, const SinogramGeometry& geom) {
  if (cropped.rows() != geom.n_angles || cropped.cols() != geom.kept_radial()) {
    throw DomainError("uncrop_sinogram: raster does not match cropped geometry");
  }
  Sinogram out = blank_sinogram(geom);
  for (int a = 0; a < geom.n_angles; ++a) {
    auto src = cropped.row(a);
    std::copy(src.begin(), src.end(), out.row(a).begin() + geom.crop);
  }
  return out;
}

double max_translation_px(const ImageGrid& grid) { return 25.0 * grid.n / 128.0; }

namespace {

double bilinear(const Image& img, double row, double col) {
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0;
  const double fc = col - c0;
  auto px = [&](int r, int c) {
    return (r < 0 || c < 0 || r >= img.rows() || c >= img.cols()) ? 0.0 : img(r, c);
  };
  return (1.0 - fr) * ((1.0 - fc) * px(r0, c0) + fc * px(r0, c0 + 1)) +
         fr * ((1.0 - fc) * px(r0 + 1, c0) + fc * px(r0 + 1, c0 + 1));
}

}  // namespace

Image augment(const Image& img, const ImageGrid& grid, const Augmentation& aug) {
  grid.validate();
  if (img.rows() != grid.n || img.cols() != grid.n) throw DomainError("augment: image does not match grid");
  const double tmax = max_translation_px(grid);
  if (std::abs(aug.dx_px) > tmax || std::abs(aug.dy_px) > tmax) throw DomainError("augment: translation out of range");
  if (std::abs(aug.rot_deg) > kMaxRotationDeg) throw DomainError("augment: rotation out of range");
  if (aug.is_identity()) return img;

  const int n = grid.n;
  const double centre = 0.5 * (n - 1);
  const double theta = aug.rot_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);

  Image moved = blank_image(grid);
  const bool resample = aug.dx_px != 0.0 || aug.dy_px != 0.0 || aug.rot_deg != 0.0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (!resample) {
        moved(r, c) = img(r, c);
        continue;
      }
      // Output position relative to centre, in (x right, y up) pixel units,
      // undo the translation then the counter-clockwise rotation.
      const double x = (c - centre) - aug.dx_px;
      const double y = (centre - r) + aug.dy_px;
      const double xs = cs * x + sn * y;
      const double ys = -sn * x + cs * y;
      moved(r, c) = bilinear(img, centre - ys, centre + xs);
    }
  }
  Image out = blank_image(grid);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) out(r, c) = std::max(0.0, moved(r, aug.flip ? n - 1 - c : c));
  clip_to_support(out, grid);
  return out;
}

Augmentation random_augmentation(const ImageGrid& grid, bool flip, std::uint64_t seed) {
  Rng rng(seed);
  const double tmax = max_translation_px(grid);
  Augmentation aug;
  aug.dx_px = std::round(rng.uniform(-tmax, tmax));
  aug.dy_px = std::round(rng.uniform(-tmax, tmax));
  aug.dx_px = std::clamp(aug.dx_px, -std::floor(tmax), std::floor(tmax));
  aug.dy_px = std::clamp(aug.dy_px, -std::floor(tmax), std::floor(tmax));
  aug.rot_deg = rng.uniform(-kMaxRotationDeg, kMaxRotationDeg);
  aug.flip = flip;
  return aug;
}

}  // namespace deeppet
